"""One-hot encoding of box-constrained continuous variables on a uniform grid.

Each of ``n_vars`` continuous variables is discretized to ``levels`` evenly
spaced values inside its bounds and represented by a contiguous block of
``levels`` bits, exactly one of which is active.  Bit ``j * levels + m``
encodes "variable j takes its m-th grid value".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DiscretizationGrid",
    "encode",
    "decode",
    "repair_decode",
    "validate_onehot",
]


@dataclass(frozen=True)
class DiscretizationGrid:
    """Uniform discretization of a box domain.

    Args:
        bounds: ``(lower, upper)`` pair per variable, lower < upper.
        levels: number of grid values per variable (>= 2; a single level
            would make the encoding degenerate and is rejected).
    """

    bounds: tuple[tuple[float, float], ...]
    levels: int

    def __post_init__(self) -> None:
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if len(bounds) < 1:
            raise ValueError("grid needs at least one variable")
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        for j, (lo, hi) in enumerate(bounds):
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError(f"bounds for variable {j} must be finite")
            if not lo < hi:
                raise ValueError(
                    f"bounds for variable {j} must satisfy lower < upper, got ({lo}, {hi})"
                )

    @property
    def n_vars(self) -> int:
        return len(self.bounds)

    @property
    def n_bits(self) -> int:
        return self.n_vars * self.levels

    def block(self, j: int) -> slice:
        """Bit-index slice owned by variable ``j``."""
        return slice(j * self.levels, (j + 1) * self.levels)

    def grid_values(self, j: int) -> np.ndarray:
        """All ``levels`` grid values of variable ``j``, endpoints exact."""
        t = np.arange(self.levels) / (self.levels - 1)
        lo, hi = self.bounds[j]
        return (1.0 - t) * lo + t * hi

    def values_at(self, indices: np.ndarray) -> np.ndarray:
        """Continuous design point for a vector of grid indices."""
        indices = _check_indices(indices, self)
        t = indices / (self.levels - 1)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return (1.0 - t) * lo + t * hi


def _check_indices(indices: np.ndarray, grid: DiscretizationGrid) -> np.ndarray:
    indices = np.asarray(indices)
    if indices.shape != (grid.n_vars,):
        raise ValueError(
            f"expected {grid.n_vars} indices, got shape {indices.shape}"
        )
    if not np.issubdtype(indices.dtype, np.integer):
        raise ValueError("grid indices must be integers")
    if np.any(indices < 0) or np.any(indices >= grid.levels):
        raise ValueError(
            f"grid indices must lie in [0, {grid.levels - 1}], got {indices.tolist()}"
        )
    return indices


def encode(indices: np.ndarray, grid: DiscretizationGrid) -> np.ndarray:
    """Encode a vector of grid indices as a one-hot bit vector.

    Args:
        indices: shape ``(n_vars,)`` integer array, entries in ``[0, levels)``.
        grid: the discretization.

    Returns:
        ``(n_bits,)`` int8 array with exactly one active bit per block.
    """
    indices = _check_indices(indices, grid)
    x = np.zeros(grid.n_bits, dtype=np.int8)
    x[np.arange(grid.n_vars) * grid.levels + indices] = 1
    return x


def validate_onehot(x: np.ndarray, grid: DiscretizationGrid) -> bool:
    """True iff every block of ``x`` has exactly one active bit."""
    x = np.asarray(x)
    if x.shape != (grid.n_bits,):
        raise ValueError(f"expected {grid.n_bits} bits, got shape {x.shape}")
    if np.any((x != 0) & (x != 1)):
        return False
    return bool(np.all(x.reshape(grid.n_vars, grid.levels).sum(axis=1) == 1))


def decode(x: np.ndarray, grid: DiscretizationGrid) -> np.ndarray:
    """Map a valid one-hot vector back to its continuous design point.

    The active index ``m`` of variable ``j`` maps to
    ``lower + (m / (levels - 1)) * (upper - lower)``; index 0 gives the lower
    bound exactly and index ``levels - 1`` the upper bound exactly.

    Raises:
        ValueError: if ``x`` violates the one-hot invariant.
    """
    if not validate_onehot(x, grid):
        raise ValueError("input is not a valid one-hot vector for this grid")
    indices = np.asarray(x).reshape(grid.n_vars, grid.levels).argmax(axis=1)
    return grid.values_at(indices)


def repair_decode(
    bits: np.ndarray, grid: DiscretizationGrid, rng: np.random.Generator
) -> np.ndarray:
    """Repair an arbitrary bit vector into a vector of grid indices.

    Per block: exactly one active bit selects its index; several active bits
    select the lowest active index; an empty block selects an index uniformly
    at random from ``rng``.

    Args:
        bits: shape ``(n_bits,)`` 0/1 array (any integer dtype).
        grid: the discretization.
        rng: source of randomness for empty blocks; consumed only when an
            empty block occurs, one draw per empty block in variable order.

    Returns:
        ``(n_vars,)`` integer index vector.
    """
    bits = np.asarray(bits)
    if bits.shape != (grid.n_bits,):
        raise ValueError(f"expected {grid.n_bits} bits, got shape {bits.shape}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("repair input must be a 0/1 vector")
    blocks = bits.reshape(grid.n_vars, grid.levels)
    indices = np.empty(grid.n_vars, dtype=np.int64)
    for j in range(grid.n_vars):
        active = np.flatnonzero(blocks[j])
        if active.size == 0:
            indices[j] = rng.integers(0, grid.levels)
        else:
            indices[j] = active[0]
    return indices
