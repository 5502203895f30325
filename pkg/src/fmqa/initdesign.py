"""Initial designs on the discretization grid and activation coverage.

Three generators produce index matrices of shape ``(n_samples, n_vars)``:

* ``uniform``: i.i.d. uniform grid indices — no coverage guarantee.
* ``lhs``: Latin hypercube; per variable a random permutation plus jitter,
  mapped to indices by ``q = min(floor(levels * s), levels - 1)``.  With
  ``n_samples == levels`` every level of every variable appears exactly once.
* ``sobol``: scrambled Sobol' points through the same index map.  With
  ``n_samples == levels`` a power of two, the base-2 net property again
  guarantees exactly-once coverage per variable.

Coverage of a dataset is summarized by per-level activation counts: a level
never activated leaves the surrogate untrained along that bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .encoding import DiscretizationGrid

__all__ = [
    "DesignSpec",
    "CoverageReport",
    "uniform_design",
    "lhs_design",
    "sobol_design",
    "generate_design",
    "coverage_counts",
    "expected_uncovered",
    "activation_buckets",
    "BUCKET_LABELS",
    "BUCKET_COLORS",
]

_METHODS = ("uniform", "lhs", "sobol")

# Activation-count buckets used by coverage reports, with their plot colors.
BUCKET_LABELS = ("0", "1", "2-9", "10+")
BUCKET_COLORS = ("red", "green", "blue", "black")


@dataclass(frozen=True)
class DesignSpec:
    """Which design to generate: method, sample count, seed."""

    method: str
    n_samples: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


@dataclass(frozen=True)
class CoverageReport:
    """Per-level activation statistics for a collection of one-hot inputs."""

    counts: np.ndarray  # (n_vars, levels) activation counts
    never_active: tuple[tuple[int, int], ...]  # (variable, level) pairs
    fraction_never_active: float
    pair_capacity: int  # cross-block pair count C(n_vars, 2) * levels^2
    pairs_covered: int  # distinct cross-block pairs active together somewhere

    def to_dict(self) -> dict:
        return {
            "counts": self.counts.tolist(),
            "never_active": [list(p) for p in self.never_active],
            "fraction_never_active": self.fraction_never_active,
            "pair_capacity": self.pair_capacity,
            "pairs_covered": self.pairs_covered,
        }


def uniform_design(spec: DesignSpec, grid: DiscretizationGrid) -> np.ndarray:
    """I.i.d. uniform grid indices, shape ``(n_samples, n_vars)``."""
    rng = np.random.default_rng(spec.seed)
    return rng.integers(0, grid.levels, size=(spec.n_samples, grid.n_vars))


def lhs_design(spec: DesignSpec, grid: DiscretizationGrid) -> np.ndarray:
    """Latin hypercube design mapped to grid indices.

    Sample t of variable j gets the continuous coordinate
    ``(perm_j(t) + u) / n_samples`` with ``u`` uniform on [0, 1), then the
    shared index map.  When ``n_samples == levels`` this reduces to
    ``perm_j(t)`` itself: exactly-once coverage of every level.
    """
    if spec.n_samples < grid.levels:
        warnings.warn(
            f"LHS with n_samples={spec.n_samples} < levels={grid.levels}: "
            "complete level coverage is unattainable",
            stacklevel=2,
        )
    rng = np.random.default_rng(spec.seed)
    perms = np.empty((spec.n_samples, grid.n_vars), dtype=np.int64)
    for j in range(grid.n_vars):
        perms[:, j] = rng.permutation(spec.n_samples)
    u = rng.random((spec.n_samples, grid.n_vars))
    s = (perms + u) / spec.n_samples
    return _index_map(s, grid.levels)


def sobol_design(
    spec: DesignSpec, grid: DiscretizationGrid, scramble: bool = True
) -> np.ndarray:
    """Scrambled Sobol' design mapped to grid indices.

    The exactly-once coverage guarantee needs ``levels`` a power of two and
    ``n_samples == levels``; any other shape gets a warning, not an error.
    Scrambling is seeded from ``spec.seed``; ``scramble=False`` exposes the
    raw sequence (useful for fixtures, first 1-D points 0, 1/2, 3/4, 1/4).
    """
    pow2 = grid.levels & (grid.levels - 1) == 0
    if not (pow2 and spec.n_samples == grid.levels):
        warnings.warn(
            f"Sobol coverage guarantee needs n_samples == levels a power of two; "
            f"got n_samples={spec.n_samples}, levels={grid.levels}",
            stacklevel=2,
        )
    engine = qmc.Sobol(d=grid.n_vars, scramble=scramble, seed=spec.seed)
    with warnings.catch_warnings():
        # scipy repeats the power-of-two advice; ours above is the contract.
        warnings.simplefilter("ignore", UserWarning)
        points = engine.random(spec.n_samples)
    return _index_map(points, grid.levels)


def _index_map(points: np.ndarray, levels: int) -> np.ndarray:
    return np.minimum((levels * points).astype(np.int64), levels - 1)


def generate_design(spec: DesignSpec, grid: DiscretizationGrid) -> np.ndarray:
    """Dispatch to the generator named by ``spec.method``."""
    fn = {"uniform": uniform_design, "lhs": lhs_design, "sobol": sobol_design}[spec.method]
    return fn(spec, grid)


def coverage_counts(inputs: np.ndarray, grid: DiscretizationGrid) -> CoverageReport:
    """Activation statistics of one-hot input rows.

    Args:
        inputs: ``(n_points, n_bits)`` array (or sequence of vectors), every
            row a valid one-hot encoding for ``grid``.

    Raises:
        ValueError: on shape mismatch or a row violating one-hot validity.
    """
    X = np.asarray(inputs, dtype=np.float64)
    if X.size == 0:
        X = X.reshape(0, grid.n_bits)
    if X.ndim != 2 or X.shape[1] != grid.n_bits:
        raise ValueError(f"expected shape (n_points, {grid.n_bits}), got {X.shape}")
    blocks = X.reshape(X.shape[0], grid.n_vars, grid.levels)
    if np.any((X != 0) & (X != 1)) or np.any(blocks.sum(axis=2) != 1):
        raise ValueError("every input row must be a valid one-hot vector")

    counts = blocks.sum(axis=0).astype(np.int64)
    never = tuple(
        (int(j), int(m)) for j, m in np.argwhere(counts == 0)
    )
    gram = (X.T @ X) > 0
    block_id = np.repeat(np.arange(grid.n_vars), grid.levels)
    cross = block_id[:, None] != block_id[None, :]
    pairs_covered = int(np.count_nonzero(np.triu(gram & cross, 1)))
    n_cells = grid.n_vars * grid.levels
    return CoverageReport(
        counts=counts,
        never_active=never,
        fraction_never_active=len(never) / n_cells,
        pair_capacity=grid.n_vars * (grid.n_vars - 1) // 2 * grid.levels**2,
        pairs_covered=pairs_covered,
    )


def expected_uncovered(levels: int, n_samples: int, n_vars: int) -> tuple[float, float]:
    """Uniform-design never-active expectations.

    Returns ``(p, n_vars * levels * p)`` where ``p = (1 - 1/levels) ** n_samples``
    is the probability that a given level of a given variable is never
    activated by ``n_samples`` i.i.d. uniform draws.
    """
    if levels < 2 or n_samples < 1 or n_vars < 1:
        raise ValueError("levels >= 2, n_samples >= 1, n_vars >= 1 required")
    p = (1.0 - 1.0 / levels) ** n_samples
    return p, n_vars * levels * p


def activation_buckets(counts: np.ndarray, edges: tuple[int, ...] = (1, 2, 10)) -> np.ndarray:
    """Histogram of activation counts into bands ``[0,1), [1,2), [2,10), [10,inf)``.

    The default edges reproduce the report buckets {0, 1, 2-9, >=10}.
    Returns one integer per bucket, summing to ``counts.size``.
    """
    counts = np.asarray(counts)
    bounds = (0,) + tuple(edges) + (np.inf,)
    return np.array(
        [
            int(np.count_nonzero((counts >= lo) & (counts < hi)))
            for lo, hi in zip(bounds[:-1], bounds[1:])
        ]
    )
