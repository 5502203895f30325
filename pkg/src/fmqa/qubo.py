"""Quadratic unconstrained binary objectives built from a trained surrogate.

A :class:`QuboMatrix` stores an upper-triangular matrix ``Q`` plus a constant
``offset``; the objective value of a bit vector ``x`` is

    energy(Q, x) = sum_{i <= j} Q[i, j] * x[i] * x[j]

(the offset is bookkeeping only and never enters the energy).  Diagonal
entries come from the surrogate's linear weights and off-diagonals from the
factor inner products, so surrogate prediction minus bias equals energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .encoding import DiscretizationGrid
from .surrogate import FmParams

__all__ = [
    "QuboMatrix",
    "from_fm_params",
    "energy",
    "energy_batch",
    "one_hot_penalty_weight",
    "add_one_hot_penalty",
    "save_coord",
    "load_coord",
]


@dataclass(frozen=True)
class QuboMatrix:
    """Upper-triangular QUBO in canonical form.

    Attributes:
        matrix: ``(n, n)`` float array; strictly lower triangle must be zero.
        offset: constant added to the objective by callers that track it.
        block_size: when set, the bits form contiguous one-hot blocks of this
            length (attached by :func:`add_one_hot_penalty`); samplers use it
            to report feasibility.  ``None`` means unconstrained.
    """

    matrix: np.ndarray
    offset: float = 0.0
    block_size: int | None = None

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got shape {m.shape}")
        if m.shape[0] < 1:
            raise ValueError("matrix must have at least one variable")
        if not np.all(np.isfinite(m)) or not np.isfinite(self.offset):
            raise ValueError("matrix and offset must be finite")
        if np.any(np.tril(m, -1) != 0.0):
            raise ValueError("matrix must be upper triangular (canonical form)")
        if self.block_size is not None:
            if self.block_size < 1 or m.shape[0] % self.block_size != 0:
                raise ValueError(
                    f"block_size {self.block_size} does not divide {m.shape[0]} bits"
                )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n_bits(self) -> int:
        return self.matrix.shape[0]


def from_fm_params(params: FmParams) -> QuboMatrix:
    """Convert surrogate parameters to a QUBO.

    Diagonal entries are the linear weights, entry (i, j) for i < j is the
    inner product of factor rows i and j, and the surrogate bias becomes the
    offset.  For any bit vector x, ``predict(params, x) - params.bias``
    equals ``energy(from_fm_params(params), x)``.
    """
    coup = params.factors @ params.factors.T
    q = np.triu(coup, 1)
    np.fill_diagonal(q, params.linear)
    return QuboMatrix(matrix=q, offset=params.bias)


def _check_bits(q: QuboMatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (q.n_bits,):
        raise ValueError(f"expected {q.n_bits} bits, got shape {x.shape}")
    return x


def energy(q: QuboMatrix, x: np.ndarray) -> float:
    """Objective value ``sum_{i<=j} Q[i,j] x[i] x[j]`` (offset excluded)."""
    x = _check_bits(q, x)
    return float(x @ (q.matrix @ x))


def energy_batch(q: QuboMatrix, X: np.ndarray) -> np.ndarray:
    """Energies of a ``(batch, n_bits)`` matrix of bit vectors."""
    X = np.asarray(X, dtype=np.float64)
    return np.einsum("bi,bi->b", X @ q.matrix, X)


def one_hot_penalty_weight(history_max_abs: float) -> float:
    """Penalty weight from the largest absolute objective value seen so far.

    Returns ``8 * max(1, floor(history_max_abs + 0.5))``, i.e. eight times
    the magnitude rounded to the nearest integer and clamped below at one.
    Recomputed every iteration as the evaluation history grows.
    """
    history_max_abs = float(history_max_abs)
    if not (history_max_abs >= 0.0 and math.isfinite(history_max_abs)):
        raise ValueError("history_max_abs must be finite and nonnegative")
    return 8.0 * max(1.0, math.floor(history_max_abs + 0.5))


def add_one_hot_penalty(
    q: QuboMatrix, grid: DiscretizationGrid, weight: float
) -> QuboMatrix:
    """Add the quadratic one-hot constraint penalty for every variable block.

    The penalty ``weight * (sum_block x - 1)^2`` expands, per block, to
    ``-weight`` on each diagonal entry, ``+2 * weight`` on each intra-block
    off-diagonal, and ``+weight`` on the offset — so the offset grows by
    ``n_vars * weight`` and energies of one-hot-valid states are preserved
    up to that offset shift.
    """
    if q.n_bits != grid.n_bits:
        raise ValueError(
            f"matrix has {q.n_bits} bits but grid encodes {grid.n_bits}"
        )
    weight = float(weight)
    if not (weight >= 0.0 and math.isfinite(weight)):
        raise ValueError("penalty weight must be finite and nonnegative")
    m = q.matrix.copy()
    m[np.diag_indices_from(m)] -= weight
    intra = 2.0 * weight * np.triu(np.ones((grid.levels, grid.levels)), 1)
    for j in range(grid.n_vars):
        b = grid.block(j)
        m[b, b] += intra
    return QuboMatrix(
        matrix=m,
        offset=q.offset + grid.n_vars * weight,
        block_size=grid.levels,
    )


def save_coord(q: QuboMatrix, path: str) -> None:
    """Write the QUBO in coordinate text form.

    Header comments carry the size, offset and (if present) block size;
    every other line is ``i j value`` with 0-based ``i <= j``, nonzero
    entries only, row-major order.
    """
    lines = [
        "# qubo coordinate format",
        f"# size {q.n_bits}",
        f"# offset {q.offset!r}",
    ]
    if q.block_size is not None:
        lines.append(f"# blocks {q.block_size}")
    ii, jj = np.nonzero(q.matrix)
    for i, j in zip(ii.tolist(), jj.tolist()):
        lines.append(f"{i} {j} {float(q.matrix[i, j])!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_coord(path: str) -> QuboMatrix:
    """Parse a coordinate text file written by :func:`save_coord`.

    Raises:
        ValueError: on malformed lines (message includes the line number),
            indices out of range, or entries below the diagonal.
    """
    size: int | None = None
    offset = 0.0
    block_size: int | None = None
    entries: list[tuple[int, int, float]] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = line[1:].split()
                if len(fields) == 2 and fields[0] == "size":
                    size = int(fields[1])
                elif len(fields) == 2 and fields[0] == "offset":
                    offset = float(fields[1])
                elif len(fields) == 2 and fields[0] == "blocks":
                    block_size = int(fields[1])
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'i j value', got {line!r}")
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if i > j:
                raise ValueError(f"{path}:{lineno}: entry below the diagonal ({i} > {j})")
            if i < 0:
                raise ValueError(f"{path}:{lineno}: negative index")
            entries.append((i, j, v))
    if size is None:
        size = 1 + max((j for _, j, _ in entries), default=-1)
        if size < 1:
            raise ValueError(f"{path}: no size header and no entries")
    m = np.zeros((size, size))
    for i, j, v in entries:
        if j >= size:
            raise ValueError(f"{path}: index {j} out of range for size {size}")
        m[i, j] = v
    return QuboMatrix(matrix=m, offset=offset, block_size=block_size)
