"""Black-box objectives, evaluation accounting, and the subprocess adapter.

The optimizer always minimizes internally; a problem declaring
``direction="maximize"`` has its raw values negated on the way in and the
sign restored in reports.  Every evaluator call — success or failure — is
appended to an :class:`EvalLedger` and counts against the budget.

Evaluators signal failure by raising :class:`EvaluationError` or returning a
non-finite value; a failed evaluation is recorded with the worst internal
value seen so far plus one spread unit (max minus min of the ledger, or 1.0
while the ledger has fewer than two entries).

The synthetic problems are normalized to order-unit objective ranges so the
magnitude-driven one-hot penalty rule and the default annealing schedule
work without per-problem tuning.
"""

from __future__ import annotations

import math
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "EvaluationError",
    "BlackBoxProblem",
    "EvalLedger",
    "evaluate",
    "make_problem",
    "synthetic_suite",
    "exhaustive_grid_minimum",
    "external_adapter",
    "SUITE_DIMENSIONS",
]

SUITE_DIMENSIONS = (5, 17, 32)


class EvaluationError(RuntimeError):
    """Raised by an evaluator to signal a failed (penalizable) evaluation."""


@dataclass(frozen=True)
class BlackBoxProblem:
    """A box-constrained objective.

    Attributes:
        name: identifier used in reports.
        n_vars: dimension of the design space.
        bounds: ``(lower, upper)`` per variable.
        direction: ``"minimize"`` or ``"maximize"``.
        evaluator: maps a design point (1-D float array) to a real value.
    """

    name: str
    n_vars: int
    bounds: tuple[tuple[float, float], ...]
    direction: str
    evaluator: Callable[[np.ndarray], float]

    def __post_init__(self) -> None:
        if self.direction not in ("minimize", "maximize"):
            raise ValueError(f"direction must be minimize or maximize, got {self.direction!r}")
        if len(self.bounds) != self.n_vars:
            raise ValueError(
                f"{self.n_vars} variables but {len(self.bounds)} bounds"
            )
        object.__setattr__(
            self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        )


class EvalLedger:
    """Append-only record of every evaluator call, in order."""

    def __init__(self) -> None:
        self.points: list[np.ndarray] = []
        self.raw_values: list[float] = []
        self.internal_values: list[float] = []
        self.failed: list[bool] = []

    def __len__(self) -> int:
        return len(self.raw_values)

    def append(self, point: np.ndarray, raw: float, internal: float, failed: bool) -> None:
        self.points.append(np.array(point, dtype=np.float64))
        self.raw_values.append(float(raw))
        self.internal_values.append(float(internal))
        self.failed.append(bool(failed))


def _failure_value(ledger: EvalLedger) -> float:
    values = ledger.internal_values
    worst = max(values) if values else 0.0
    spread = (max(values) - min(values)) if len(values) >= 2 else 1.0
    return worst + spread


def evaluate(problem: BlackBoxProblem, z: np.ndarray, ledger: EvalLedger) -> float:
    """Evaluate ``problem`` at ``z``, record the call, return the internal value.

    The internal value is the raw one for minimization problems and its
    negation for maximization, so downstream code can always minimize.

    Raises:
        ValueError: if ``z`` has the wrong shape or leaves the bounds.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (problem.n_vars,):
        raise ValueError(f"expected {problem.n_vars} coordinates, got shape {z.shape}")
    for j, (lo, hi) in enumerate(problem.bounds):
        if not (lo <= z[j] <= hi):
            raise ValueError(f"coordinate {j} = {z[j]} outside bounds ({lo}, {hi})")

    sign = 1.0 if problem.direction == "minimize" else -1.0
    try:
        raw = float(problem.evaluator(z))
        if not math.isfinite(raw):
            raise EvaluationError(f"evaluator returned non-finite value {raw}")
        internal = sign * raw
        failed = False
    except EvaluationError:
        internal = _failure_value(ledger)
        raw = sign * internal  # report in the problem's own direction
        failed = True
    ledger.append(z, raw, internal, failed)
    return internal


# --- synthetic suite -------------------------------------------------------
#
# All four are minimization problems scaled so values stay within a few
# units over their boxes.  Grid optima: sphere/ellipsoid sit at the grid
# points nearest the origin (closed form per coordinate for the sphere);
# the trap's global optimum is the all-lower-bound corner (value 0) hiding
# behind a broad basin that slopes toward the opposite corner (value 0.2).


def _sphere(z: np.ndarray) -> float:
    z = np.asarray(z)
    return float(np.sum(z**2) / (5.0 * z.size))


def _ellipsoid(z: np.ndarray) -> float:
    z = np.asarray(z)
    n = z.size
    c = np.cumsum(z)
    peak = 25.0 * n * (n + 1) * (2 * n + 1) / 6.0
    return float(5.0 * np.sum(c**2) / peak)


def _rastrigin(z: np.ndarray) -> float:
    z = np.asarray(z)
    return float(np.sum(z**2 - 10.0 * np.cos(2.0 * np.pi * z) + 10.0) / (6.0 * z.size))


def _trap(z: np.ndarray) -> float:
    z = np.asarray(z)
    per = np.where(z <= 0.2, 5.0 * z, 1.2 - z)
    return float(np.mean(per))


_SYNTHETIC = {
    "sphere": (_sphere, (-5.0, 5.0)),
    "ellipsoid": (_ellipsoid, (-5.0, 5.0)),
    "rastrigin": (_rastrigin, (-5.12, 5.12)),
    "trap": (_trap, (0.0, 1.0)),
}


def make_problem(name: str, n_vars: int) -> BlackBoxProblem:
    """One of the built-in synthetic minimization problems.

    ``sphere`` (separable, unimodal), ``ellipsoid`` (rotated, ill
    conditioned), ``rastrigin`` (multimodal), ``trap`` (deceptive: the
    gradient basin points away from the global optimum at the lower corner).
    """
    if name not in _SYNTHETIC:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(_SYNTHETIC)}")
    if n_vars < 1:
        raise ValueError("n_vars must be positive")
    fn, box = _SYNTHETIC[name]
    return BlackBoxProblem(
        name=name,
        n_vars=n_vars,
        bounds=tuple(box for _ in range(n_vars)),
        direction="minimize",
        evaluator=fn,
    )


def synthetic_suite() -> tuple[BlackBoxProblem, ...]:
    """All built-in problems at dimensions 5, 17 and 32."""
    return tuple(
        make_problem(name, n) for name in sorted(_SYNTHETIC) for n in SUITE_DIMENSIONS
    )


def exhaustive_grid_minimum(problem: BlackBoxProblem, grid) -> tuple[np.ndarray, float]:
    """Grid optimum by full enumeration (small grids only).

    Returns ``(indices, raw_value)`` where the optimum is taken in the
    problem's own direction.  Capped at 200k grid points.
    """
    total = grid.levels**grid.n_vars
    if total > 200_000:
        raise ValueError(f"grid has {total} points; exhaustive search capped at 200000")
    best_idx = None
    best_val = None
    better = (lambda a, b: a < b) if problem.direction == "minimize" else (lambda a, b: a > b)
    for flat in range(total):
        indices = np.array(
            [(flat // grid.levels**j) % grid.levels for j in range(grid.n_vars)],
            dtype=np.int64,
        )
        val = float(problem.evaluator(grid.values_at(indices)))
        if best_val is None or better(val, best_val):
            best_idx, best_val = indices, val
    return best_idx, best_val


# --- subprocess adapter ----------------------------------------------------


class _SubprocessEvaluator:
    """Runs a command on a temp file holding one coordinate per line.

    The command template may contain ``{input}`` for the file path; without
    it the path is appended as the final argument.  The first line of stdout
    must parse as a real number.  Nonzero exit, timeout, or unparseable
    output raise :class:`EvaluationError`.
    """

    def __init__(self, command: str, timeout_ms: float):
        self.command = command
        self.timeout_ms = float(timeout_ms)

    def __call__(self, z: np.ndarray) -> float:
        fd, path = tempfile.mkstemp(suffix=".txt", text=True)
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write("\n".join(repr(float(v)) for v in z) + "\n")
            if "{input}" in self.command:
                argv = shlex.split(self.command.format(input=path))
            else:
                argv = shlex.split(self.command) + [path]
            try:
                proc = subprocess.run(
                    argv,
                    capture_output=True,
                    text=True,
                    timeout=self.timeout_ms / 1000.0,
                )
            except subprocess.TimeoutExpired:
                raise EvaluationError(
                    f"command timed out after {self.timeout_ms} ms: {self.command}"
                ) from None
            except OSError as exc:
                raise EvaluationError(f"could not run {argv[0]!r}: {exc}") from None
            if proc.returncode != 0:
                raise EvaluationError(
                    f"command exited {proc.returncode}: {proc.stderr.strip()[:200]}"
                )
            first = proc.stdout.strip().splitlines()
            try:
                return float(first[0])
            except (IndexError, ValueError):
                raise EvaluationError(
                    f"command produced no parseable value: {proc.stdout[:200]!r}"
                ) from None
        finally:
            if os.path.exists(path):
                os.unlink(path)


def external_adapter(
    command: str,
    n_vars: int,
    bounds: tuple[tuple[float, float], ...],
    direction: str = "minimize",
    timeout_ms: float = 10_000.0,
    name: str | None = None,
) -> BlackBoxProblem:
    """Wrap an external command as a :class:`BlackBoxProblem`.

    Protocol: the design point is written one real per line (variable order)
    to a temp file passed to the command; the command prints a single real
    on the first line of stdout.  Failures are penalized through the usual
    ledger rule rather than aborting the run.
    """
    if timeout_ms <= 0:
        raise ValueError("timeout_ms must be positive")
    return BlackBoxProblem(
        name=name or shlex.split(command)[0],
        n_vars=n_vars,
        bounds=bounds,
        direction=direction,
        evaluator=_SubprocessEvaluator(command, timeout_ms),
    )
