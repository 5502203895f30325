"""The optimization loop: design, fit surrogate, anneal, repair, evaluate.

Each iteration retrains the factorization machine from scratch on all
accumulated data, converts it to a QUBO with a freshly sized one-hot
penalty, anneals for a candidate, repairs and deduplicates it, and spends
one evaluation on it — until the budget is exhausted.  Every evaluation
(including the initial design and penalized failures) counts.

Candidate deduplication walks randomly: while the index vector has already
been evaluated, every component is perturbed by a uniform step from
{-1, 0, +1} and clipped to the grid, re-perturbing the most recent vector.
All evaluated points — initial design included — pass through this walk, so
a run's dataset never contains duplicate inputs.

Seeding is hierarchical: the trial seed and an iteration index derive
independent streams for training, annealing and repair, so any iteration's
surrogate fit can be reproduced in isolation (see :func:`derive_seed`).
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from .annealer import AnnealConfig, sample
from .blackbox import BlackBoxProblem, EvalLedger, evaluate
from .encoding import DiscretizationGrid, encode, repair_decode
from .initdesign import DesignSpec, generate_design
from .qubo import add_one_hot_penalty, from_fm_params, one_hot_penalty_weight
from .surrogate import Dataset, TrainConfig, train

__all__ = [
    "LoopConfig",
    "RunRecord",
    "AggregateSummary",
    "derive_seed",
    "dedupe_perturb",
    "run",
    "random_search",
    "aggregate",
]

# stream tags for derive_seed
_STREAM_DESIGN_DEDUPE = 0
_STREAM_TRAIN = 1
_STREAM_ANNEAL = 2
_STREAM_REPAIR = 3


def derive_seed(base_seed: int, *path: int) -> int:
    """Deterministic child seed for a (base seed, path...) combination.

    The loop uses ``derive_seed(seed, 1, n)`` for the iteration-``n``
    surrogate fit, ``(seed, 2, n)`` for annealing and ``(seed, 3, n)`` for
    repair/dedupe randomness, which makes any phase reproducible in
    isolation.  The path length is mixed into the entropy because
    ``SeedSequence`` treats trailing zero words as absent, which would
    otherwise alias e.g. ``(7,)`` and ``(7, 0)``.
    """
    return int(np.random.SeedSequence((base_seed, len(path), *path)).generate_state(1)[0])


@dataclass(frozen=True)
class LoopConfig:
    """Everything the loop needs besides the problem and the grid."""

    budget: int
    design: DesignSpec
    train: TrainConfig = field(default_factory=TrainConfig)
    anneal: AnnealConfig = field(default_factory=AnnealConfig)
    factor_rank: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.factor_rank < 1:
            raise ValueError("factor_rank must be >= 1")
        if self.budget <= self.design.n_samples:
            raise ValueError(
                f"budget ({self.budget}) must exceed the initial design size "
                f"({self.design.n_samples})"
            )


@dataclass
class RunRecord:
    """Everything observable about one optimization run.

    Values in ``raw_values`` / ``best_trajectory`` are in the problem's own
    direction; ``targets_internal`` holds the minimization-sign targets the
    surrogate was trained on.  ``snapshots`` are ``(eval_index, counts)``
    pairs of per-level activation counts (every evaluation up to 2048 bits,
    every 5th beyond, final always included).
    """

    problem_name: str
    method_label: str
    direction: str
    n_init: int
    budget: int
    seed: int
    config_hash: str
    raw_values: list[float]
    best_trajectory: list[float]
    failed: list[bool]
    eval_indices: list[list[int]]
    targets_internal: list[float]
    snapshots: list[tuple[int, list[list[int]]]]
    timings: dict[str, float]
    params_snapshot: dict[str, Any] | None = None

    @property
    def final_best(self) -> float:
        return self.best_trajectory[-1]

    def to_dict(self) -> dict:
        return asdict(self)

    def save_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load_json(cls, path: str) -> "RunRecord":
        with open(path) as fh:
            raw = json.load(fh)
        raw["snapshots"] = [(int(k), counts) for k, counts in raw["snapshots"]]
        return cls(**raw)

    def save_trajectory_csv(self, path: str) -> None:
        """One row per evaluation: index, raw value, best-so-far."""
        lines = [f"# n_init {self.n_init}", "eval_index,raw_value,best_so_far"]
        for k, (raw, best) in enumerate(zip(self.raw_values, self.best_trajectory), start=1):
            lines.append(f"{k},{raw!r},{best!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def dedupe_perturb(
    indices: np.ndarray,
    evaluated: set[tuple[int, ...]],
    grid: DiscretizationGrid,
    rng: np.random.Generator,
) -> np.ndarray:
    """Return an index vector not yet in ``evaluated``.

    A fresh vector is returned unchanged.  A duplicate starts a random walk:
    add a uniform {-1, 0, +1} step to every component of the most recent
    vector, clip to the grid, repeat until unevaluated.

    Raises:
        RuntimeError: if every grid point has been evaluated already.
    """
    current = np.asarray(indices, dtype=np.int64).copy()
    key = tuple(int(v) for v in current)
    if key not in evaluated:
        return current
    if len(evaluated) >= grid.levels**grid.n_vars:
        raise RuntimeError("every grid point has been evaluated; cannot deduplicate")
    while key in evaluated:
        current = np.clip(
            current + rng.integers(-1, 2, size=grid.n_vars), 0, grid.levels - 1
        )
        key = tuple(int(v) for v in current)
    return current


def _config_digest(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()
    ).hexdigest()[:16]


def _grid_payload(grid: DiscretizationGrid) -> dict:
    return {"bounds": [list(b) for b in grid.bounds], "levels": grid.levels}


class _Recorder:
    """Shared evaluation bookkeeping for the loop and the baseline."""

    def __init__(self, problem: BlackBoxProblem, grid: DiscretizationGrid, budget: int):
        self.problem = problem
        self.grid = grid
        self.budget = budget
        self.ledger = EvalLedger()
        self.data = Dataset(grid.n_bits)
        self.evaluated: set[tuple[int, ...]] = set()
        self.counts = np.zeros((grid.n_vars, grid.levels), dtype=np.int64)
        self.raw_values: list[float] = []
        self.best_trajectory: list[float] = []
        self.eval_indices: list[list[int]] = []
        self.snapshots: list[tuple[int, list[list[int]]]] = []
        self.snap_every = 1 if grid.n_bits <= 2048 else 5
        self.better = max if problem.direction == "maximize" else min

    def spend(self, indices: np.ndarray) -> None:
        x = encode(indices, self.grid)
        z = self.grid.values_at(indices)
        internal = evaluate(self.problem, z, self.ledger)
        self.data.append(x, internal)
        self.evaluated.add(tuple(int(v) for v in indices))
        self.counts[np.arange(self.grid.n_vars), indices] += 1
        raw = self.ledger.raw_values[-1]
        self.raw_values.append(raw)
        prev = self.best_trajectory[-1] if self.best_trajectory else raw
        self.best_trajectory.append(self.better(prev, raw))
        self.eval_indices.append([int(v) for v in indices])
        k = len(self.raw_values)
        if k % self.snap_every == 0 or k == self.budget:
            self.snapshots.append((k, self.counts.tolist()))

    @property
    def spent(self) -> int:
        return len(self.raw_values)


def run(
    problem: BlackBoxProblem,
    grid: DiscretizationGrid,
    config: LoopConfig,
    method_label: str | None = None,
    record_params: bool = False,
) -> RunRecord:
    """Run the full surrogate-annealing loop to its evaluation budget.

    Args:
        problem: objective to optimize.
        grid: discretization; must match the problem's dimension and stay
            within its bounds.
        config: budgets, design, training and annealing settings.
        method_label: report label (defaults to the design method name).
        record_params: attach the final iteration's trained surrogate
            parameters to the record.

    Returns:
        A :class:`RunRecord` with exactly ``config.budget`` evaluations and
        pairwise-distinct inputs.
    """
    if problem.n_vars != grid.n_vars:
        raise ValueError(
            f"problem has {problem.n_vars} variables but grid has {grid.n_vars}"
        )
    for j, ((glo, ghi), (plo, phi)) in enumerate(zip(grid.bounds, problem.bounds)):
        if glo < plo or ghi > phi:
            raise ValueError(f"grid bounds for variable {j} exceed the problem box")
    if config.budget > grid.levels**grid.n_vars:
        raise ValueError(
            f"budget {config.budget} exceeds the {grid.levels**grid.n_vars} "
            "distinct grid points"
        )

    label = method_label or config.design.method
    digest = _config_digest(
        {
            "problem": problem.name,
            "direction": problem.direction,
            "grid": _grid_payload(grid),
            "config": asdict(config),
            "label": label,
        }
    )
    timings = {"design": 0.0, "evaluate": 0.0, "train": 0.0, "anneal": 0.0, "repair": 0.0}
    rec = _Recorder(problem, grid, config.budget)

    t0 = time.perf_counter()
    design = generate_design(config.design, grid)
    timings["design"] += time.perf_counter() - t0

    dedupe_rng = np.random.default_rng(derive_seed(config.seed, _STREAM_DESIGN_DEDUPE))
    for row in design:
        indices = dedupe_perturb(row, rec.evaluated, grid, dedupe_rng)
        t0 = time.perf_counter()
        rec.spend(indices)
        timings["evaluate"] += time.perf_counter() - t0

    params_snapshot = None
    iteration = 0
    while rec.spent < config.budget:
        t0 = time.perf_counter()
        rng_train = np.random.default_rng(derive_seed(config.seed, _STREAM_TRAIN, iteration))
        params = train(rec.data, config.train, config.factor_rank, rng_train)
        timings["train"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        weight = one_hot_penalty_weight(float(np.max(np.abs(rec.data.targets))))
        penalized = add_one_hot_penalty(from_fm_params(params), grid, weight)
        anneal_cfg = replace(
            config.anneal, seed=derive_seed(config.seed, _STREAM_ANNEAL, iteration)
        )
        result = sample(penalized, anneal_cfg)
        timings["anneal"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        rng_repair = np.random.default_rng(derive_seed(config.seed, _STREAM_REPAIR, iteration))
        indices = repair_decode(result.best_bits, grid, rng_repair)
        indices = dedupe_perturb(indices, rec.evaluated, grid, rng_repair)
        timings["repair"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        rec.spend(indices)
        timings["evaluate"] += time.perf_counter() - t0

        if record_params:
            params_snapshot = {
                "iteration": iteration,
                "bias": params.bias,
                "linear": params.linear.tolist(),
                "factors": params.factors.tolist(),
            }
        iteration += 1

    return RunRecord(
        problem_name=problem.name,
        method_label=label,
        direction=problem.direction,
        n_init=config.design.n_samples,
        budget=config.budget,
        seed=config.seed,
        config_hash=digest,
        raw_values=rec.raw_values,
        best_trajectory=rec.best_trajectory,
        failed=list(rec.ledger.failed),
        eval_indices=rec.eval_indices,
        targets_internal=[float(t) for t in rec.data.targets],
        snapshots=rec.snapshots,
        timings=timings,
        params_snapshot=params_snapshot,
    )


def random_search(
    problem: BlackBoxProblem,
    grid: DiscretizationGrid,
    budget: int,
    seed: int,
    n_init: int = 0,
    method_label: str = "random_search",
) -> RunRecord:
    """Baseline: i.i.d. uniform grid points, same accounting as :func:`run`.

    ``n_init`` only labels where reports draw the initial-phase boundary;
    sampling is identical before and after it.  Duplicates are possible by
    design (i.i.d. sampling).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if problem.n_vars != grid.n_vars:
        raise ValueError(
            f"problem has {problem.n_vars} variables but grid has {grid.n_vars}"
        )
    digest = _config_digest(
        {
            "problem": problem.name,
            "direction": problem.direction,
            "grid": _grid_payload(grid),
            "budget": budget,
            "seed": seed,
            "label": method_label,
        }
    )
    rec = _Recorder(problem, grid, budget)
    rng = np.random.default_rng(seed)
    timings = {"design": 0.0, "evaluate": 0.0, "train": 0.0, "anneal": 0.0, "repair": 0.0}
    for _ in range(budget):
        indices = rng.integers(0, grid.levels, size=grid.n_vars)
        t0 = time.perf_counter()
        rec.spend(indices)
        timings["evaluate"] += time.perf_counter() - t0
    return RunRecord(
        problem_name=problem.name,
        method_label=method_label,
        direction=problem.direction,
        n_init=n_init,
        budget=budget,
        seed=seed,
        config_hash=digest,
        raw_values=rec.raw_values,
        best_trajectory=rec.best_trajectory,
        failed=list(rec.ledger.failed),
        eval_indices=rec.eval_indices,
        targets_internal=[float(t) for t in rec.data.targets],
        snapshots=rec.snapshots,
        timings=timings,
    )


@dataclass(frozen=True)
class AggregateSummary:
    """Across-trial statistics for one method (population std, ddof=0)."""

    method_label: str
    n_records: int
    budget: int
    n_init: int
    mean_trajectory: np.ndarray
    std_trajectory: np.ndarray
    initial_mean: float
    initial_std: float
    final_mean: float
    final_std: float
    gain: float  # final_mean - initial_mean, in the problem's own direction


def aggregate(records: list[RunRecord]) -> AggregateSummary:
    """Combine same-shaped run records into per-evaluation mean/std curves.

    "Initial best" is the best-so-far value right after the initial design
    (at evaluation ``n_init``, or the first evaluation when ``n_init`` is 0).
    """
    if not records:
        raise ValueError("aggregate needs at least one record")
    budget = records[0].budget
    n_init = records[0].n_init
    label = records[0].method_label
    for r in records:
        if r.budget != budget or r.n_init != n_init or r.method_label != label:
            raise ValueError("records must share budget, n_init and method label")
    curves = np.array([r.best_trajectory for r in records])
    mean = curves.mean(axis=0)
    std = curves.std(axis=0)
    anchor = max(n_init, 1) - 1
    return AggregateSummary(
        method_label=label,
        n_records=len(records),
        budget=budget,
        n_init=n_init,
        mean_trajectory=mean,
        std_trajectory=std,
        initial_mean=float(mean[anchor]),
        initial_std=float(std[anchor]),
        final_mean=float(mean[-1]),
        final_std=float(std[-1]),
        gain=float(mean[-1] - mean[anchor]),
    )
