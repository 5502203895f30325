"""Single-flip Metropolis simulated annealing for QUBO minimization.

CPU stand-in for an external annealing service: restart chains of
single-bit-flip Metropolis moves under a geometric inverse-temperature
schedule, merged deterministically (minimum energy, ties to the lowest chain
index).  Each chain's randomness is seeded from ``(seed, chain_index)``, so
results are reproducible for a fixed config whenever no wall-clock budget is
set; a time budget is a soft cap checked between sweeps and makes the
stopping point hardware-dependent.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numba as nb
import numpy as np

from .qubo import QuboMatrix, energy

__all__ = [
    "AnnealConfig",
    "SampleResult",
    "sample",
    "single_flip_delta",
    "brute_force_min",
]

_BRUTE_FORCE_MAX_BITS = 24
_DEFAULT_SCHEDULE_SWEEPS = 1000  # horizon used when num_sweeps is None


@dataclass(frozen=True)
class AnnealConfig:
    """Sampler settings.

    ``num_sweeps=None`` is allowed only together with ``time_budget_ms`` and
    means "run the default 1000-sweep schedule per chain under the budget".
    """

    num_sweeps: int | None = 2000
    num_restarts: int = 64
    beta_initial: float = 0.01
    beta_final: float = 10.0
    time_budget_ms: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_sweeps is None and self.time_budget_ms is None:
            raise ValueError("set num_sweeps, time_budget_ms, or both")
        if self.num_sweeps is not None and self.num_sweeps < 1:
            raise ValueError("num_sweeps must be >= 1")
        if self.num_restarts < 1:
            raise ValueError("num_restarts must be >= 1")
        if not (0.0 < self.beta_initial < self.beta_final < np.inf):
            raise ValueError(
                "need 0 < beta_initial < beta_final < inf, got "
                f"({self.beta_initial}, {self.beta_final})"
            )
        if self.time_budget_ms is not None and self.time_budget_ms <= 0:
            raise ValueError("time_budget_ms must be positive")


@dataclass(frozen=True)
class SampleResult:
    """Best state found by :func:`sample`.

    ``best_energy`` is recomputed exactly from ``best_bits`` on emit.
    ``feasible`` reports one-hot validity against the matrix's block
    structure and is vacuously True for unconstrained matrices.
    ``restarts_run`` counts chains that completed their full schedule.
    """

    best_bits: np.ndarray
    best_energy: float
    feasible: bool
    restarts_run: int


@nb.njit(cache=True)
def _seed_rng(seed):
    np.random.seed(seed)


@nb.njit(cache=True)
def _random_bits(n):
    x = np.empty(n, np.int8)
    for i in range(n):
        x[i] = np.int8(1) if np.random.random() < 0.5 else np.int8(0)
    return x


@nb.njit(cache=True)
def _sweeps(diag, coup, betas, x, field, best_x, cur, best):
    # One Metropolis pass per beta; field[j] tracks sum_i coup[j,i]*x[i].
    n = x.shape[0]
    for s in range(betas.shape[0]):
        beta = betas[s]
        for i in range(n):
            delta = (1.0 - 2.0 * x[i]) * (diag[i] + field[i])
            if delta < 0.0 or np.random.random() < np.exp(-beta * delta):
                sgn = 1.0 - 2.0 * x[i]
                x[i] = np.int8(1) - x[i]
                cur += delta
                for j in range(n):
                    field[j] += sgn * coup[j, i]
                if cur < best:
                    best = cur
                    for j in range(n):
                        best_x[j] = x[j]
    return cur, best


@nb.njit(cache=True)
def _brute_force(diag, coup):
    # Gray-code walk over all 2^n states with O(n) incremental updates.
    # Ties in energy resolve to the lowest bit-string value read as a
    # big-endian integer (bit 0 most significant).
    n = diag.shape[0]
    x = np.zeros(n, np.int8)
    field = np.zeros(n)
    cur = 0.0
    cur_val = np.uint64(0)
    best = 0.0
    best_val = np.uint64(0)
    best_x = x.copy()
    total = np.uint64(1) << np.uint64(n)
    k = np.uint64(1)
    while k < total:
        low = k & (~k + np.uint64(1))  # lowest set bit of k
        i = 0
        while (low >> np.uint64(i + 1)) != np.uint64(0):
            i += 1
        delta = (1.0 - 2.0 * x[i]) * (diag[i] + field[i])
        sgn = 1.0 - 2.0 * x[i]
        x[i] = np.int8(1) - x[i]
        cur += delta
        cur_val ^= np.uint64(1) << np.uint64(n - 1 - i)
        for j in range(n):
            field[j] += sgn * coup[j, i]
        if cur < best or (cur == best and cur_val < best_val):
            best = cur
            best_val = cur_val
            best_x = x.copy()
        k += np.uint64(1)
    return best_x, best


def _split_matrix(q: QuboMatrix) -> tuple[np.ndarray, np.ndarray]:
    diag = np.ascontiguousarray(np.diag(q.matrix))
    upper = np.triu(q.matrix, 1)
    coup = np.ascontiguousarray(upper + upper.T)
    return diag, coup


def _chain_seed(seed: int, chain: int) -> int:
    return int(np.random.SeedSequence((seed, chain)).generate_state(1)[0])


def _is_feasible(q: QuboMatrix, bits: np.ndarray) -> bool:
    if q.block_size is None:
        return True
    blocks = bits.reshape(-1, q.block_size)
    return bool(np.all(blocks.sum(axis=1) == 1))


def single_flip_delta(q: QuboMatrix, x: np.ndarray, i: int) -> float:
    """Energy change from flipping bit ``i`` of ``x``, computed in O(n)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (q.n_bits,):
        raise ValueError(f"expected {q.n_bits} bits, got shape {x.shape}")
    if not 0 <= i < q.n_bits:
        raise ValueError(f"bit index {i} out of range")
    row = q.matrix[i, :].copy()
    row[: i + 1] = 0.0
    col = q.matrix[: i + 1, i].copy()
    diag = col[i]
    col[i] = 0.0
    cross = row @ x + col @ x[: i + 1]
    return float((1.0 - 2.0 * x[i]) * (diag + cross))


def sample(q: QuboMatrix, config: AnnealConfig) -> SampleResult:
    """Minimize ``q`` with restarted single-flip simulated annealing.

    Deterministic for a fixed ``(q, config)`` when ``time_budget_ms`` is
    None.  With a budget set, the deadline is checked between sweeps; a
    budget that expires before the first sweep finishes returns the best
    random initial state with ``restarts_run == 0``.
    """
    diag, coup = _split_matrix(q)
    n = q.n_bits
    n_sweeps = (
        config.num_sweeps if config.num_sweeps is not None else _DEFAULT_SCHEDULE_SWEEPS
    )
    if n_sweeps > 1:
        betas = np.geomspace(config.beta_initial, config.beta_final, n_sweeps)
    else:
        betas = np.array([config.beta_final])
    deadline = (
        None
        if config.time_budget_ms is None
        else time.perf_counter() + config.time_budget_ms / 1000.0
    )

    best_bits: np.ndarray | None = None
    best_e = np.inf
    restarts_run = 0
    for chain in range(config.num_restarts):
        _seed_rng(_chain_seed(config.seed, chain))
        x = _random_bits(n)
        xf = x.astype(np.float64)
        field = coup @ xf
        cur = float(diag @ xf + 0.5 * xf @ field)
        chain_best_x = x.copy()
        chain_best = cur
        completed = True
        if deadline is None:
            cur, chain_best = _sweeps(diag, coup, betas, x, field, chain_best_x, cur, chain_best)
        else:
            for s in range(n_sweeps):
                if time.perf_counter() >= deadline:
                    completed = False
                    break
                cur, chain_best = _sweeps(
                    diag, coup, betas[s : s + 1], x, field, chain_best_x, cur, chain_best
                )
        exact = energy(q, chain_best_x)
        if best_bits is None or exact < best_e:
            best_bits = chain_best_x.copy()
            best_e = exact
        if completed:
            restarts_run += 1
        else:
            break
        if deadline is not None and time.perf_counter() >= deadline:
            break

    assert best_bits is not None
    return SampleResult(
        best_bits=best_bits,
        best_energy=best_e,
        feasible=_is_feasible(q, best_bits),
        restarts_run=restarts_run,
    )


def brute_force_min(q: QuboMatrix) -> tuple[np.ndarray, float]:
    """Exact minimizer by exhaustive enumeration (only for small problems).

    Raises:
        ValueError: if the matrix has more than 24 bits.

    Returns:
        ``(bits, energy)``; energy ties resolve to the bit string with the
        lowest value read as a big-endian integer.
    """
    if q.n_bits > _BRUTE_FORCE_MAX_BITS:
        raise ValueError(
            f"brute force capped at {_BRUTE_FORCE_MAX_BITS} bits, got {q.n_bits}"
        )
    diag, coup = _split_matrix(q)
    bits, _ = _brute_force(diag, coup)
    return bits, energy(q, bits)
