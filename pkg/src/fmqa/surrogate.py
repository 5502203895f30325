"""Second-order factorization machine surrogate trained with AdamW.

The model on a bit vector ``x`` is

    f(x) = bias + sum_i linear[i] * x[i]
                + sum_{i<j} <factors[i], factors[j]> * x[i] * x[j]

evaluated through the O(rank * n_bits) identity

    sum_{i<j} <f_i, f_j> x_i x_j
        = 1/2 * sum_k [ (sum_i f_ik x_i)^2 - sum_i f_ik^2 x_i^2 ].

Every surrogate fit retrains from scratch on the full accumulated dataset;
targets are used raw (no normalization), which the downstream penalty-weight
rule assumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FmParams",
    "FmGradient",
    "Dataset",
    "TrainConfig",
    "init_params",
    "predict",
    "predict_batch",
    "gradient",
    "loss",
    "loss_gradient",
    "train",
]


@dataclass(frozen=True)
class FmParams:
    """Factorization-machine parameters.

    Attributes:
        bias: global offset.
        linear: shape ``(n_bits,)`` per-bit weights.
        factors: shape ``(n_bits, rank)`` latent factor rows; the coupling of
            bits i and j is the inner product of rows i and j.
    """

    bias: float
    linear: np.ndarray
    factors: np.ndarray

    def __post_init__(self) -> None:
        linear = np.asarray(self.linear, dtype=np.float64)
        factors = np.asarray(self.factors, dtype=np.float64)
        if linear.ndim != 1:
            raise ValueError("linear weights must be a one-dimensional array")
        if factors.ndim != 2 or factors.shape[0] != linear.shape[0]:
            raise ValueError(
                f"factors must have shape (n_bits, rank) with n_bits={linear.shape[0]}, "
                f"got {factors.shape}"
            )
        if not (np.isfinite(self.bias) and np.all(np.isfinite(linear)) and np.all(np.isfinite(factors))):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "factors", factors)

    @property
    def n_bits(self) -> int:
        return self.linear.shape[0]

    @property
    def rank(self) -> int:
        return self.factors.shape[1]


@dataclass(frozen=True)
class FmGradient:
    """Parameter-shaped gradient (same layout as :class:`FmParams`)."""

    bias: float
    linear: np.ndarray
    factors: np.ndarray


class Dataset:
    """Accumulated pairs of bit-vector inputs and real-valued targets."""

    def __init__(self, n_bits: int):
        if n_bits < 1:
            raise ValueError("n_bits must be positive")
        self.n_bits = int(n_bits)
        self._rows: list[np.ndarray] = []
        self._targets: list[float] = []

    def __len__(self) -> int:
        return len(self._rows)

    def append(self, x: np.ndarray, target: float) -> None:
        x = np.asarray(x)
        if x.shape != (self.n_bits,):
            raise ValueError(f"expected {self.n_bits} bits, got shape {x.shape}")
        if np.any((x != 0) & (x != 1)):
            raise ValueError("inputs must be 0/1 vectors")
        target = float(target)
        if not np.isfinite(target):
            raise ValueError("targets must be finite")
        self._rows.append(x.astype(np.int8))
        self._targets.append(target)

    @property
    def inputs(self) -> np.ndarray:
        """All inputs as a ``(len, n_bits)`` float matrix."""
        if not self._rows:
            return np.zeros((0, self.n_bits))
        return np.array(self._rows, dtype=np.float64)

    @property
    def targets(self) -> np.ndarray:
        return np.array(self._targets, dtype=np.float64)


@dataclass(frozen=True)
class TrainConfig:
    """AdamW training hyperparameters (defaults follow the reference setup)."""

    learning_rate: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.01
    batch_size: int = 8
    epochs: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1/beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be at least 1")


def init_params(n_bits: int, factor_rank: int, rng: np.random.Generator) -> FmParams:
    """Fresh parameters: standard-normal factors, Xavier-uniform linear, zero bias.

    The Xavier half-width is ``sqrt(6 / (n_bits + 1))`` (fan-in ``n_bits``,
    fan-out 1).  Draw order is fixed (factors first, then linear) so a given
    generator state always produces the same parameters.
    """
    if n_bits < 1 or factor_rank < 1:
        raise ValueError("n_bits and factor_rank must be positive")
    factors = rng.standard_normal((n_bits, factor_rank))
    bound = np.sqrt(6.0 / (n_bits + 1))
    linear = rng.uniform(-bound, bound, size=n_bits)
    return FmParams(bias=0.0, linear=linear, factors=factors)


def _check_input(params: FmParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.n_bits,):
        raise ValueError(f"expected {params.n_bits} bits, got shape {x.shape}")
    return x


def predict_batch(params: FmParams, X: np.ndarray) -> np.ndarray:
    """Model values for a ``(batch, n_bits)`` matrix of inputs."""
    X = np.asarray(X, dtype=np.float64)
    S = X @ params.factors
    sq = (X**2) @ (params.factors**2)
    pair = 0.5 * (S**2 - sq).sum(axis=1)
    return params.bias + X @ params.linear + pair


def predict(params: FmParams, x: np.ndarray) -> float:
    """Model value at a single bit vector."""
    x = _check_input(params, x)
    return float(predict_batch(params, x[None, :])[0])


def gradient(params: FmParams, x: np.ndarray, residual_weight: float = 1.0) -> FmGradient:
    """Parameter gradient of the model at ``x``, scaled by ``residual_weight``.

    With weight 1 this is the gradient of the model output itself:
    d/d bias = 1, d/d linear[i] = x[i], and
    d/d factors[i, k] = x[i] * sum_j factors[j, k] * x[j] - factors[i, k] * x[i]**2.
    A squared-error loss contribution is obtained by passing
    ``residual_weight = 2/D * (prediction - target)``.
    """
    x = _check_input(params, x)
    w = float(residual_weight)
    s = x @ params.factors
    gf = np.outer(x, s) - params.factors * (x**2)[:, None]
    return FmGradient(bias=w, linear=w * x, factors=w * gf)


def loss(params: FmParams, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared residual of the model over ``(inputs, targets)``."""
    X, y = _check_batch(inputs, targets)
    r = predict_batch(params, X) - y
    return float(np.mean(r**2))


def loss_gradient(params: FmParams, inputs: np.ndarray, targets: np.ndarray) -> FmGradient:
    """Gradient of :func:`loss` over the whole batch (vectorized)."""
    X, y = _check_batch(inputs, targets)
    return _batch_gradient(params, X, y)


def _check_batch(inputs: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("inputs must be a non-empty 2-d array")
    if y.shape != (X.shape[0],):
        raise ValueError(f"targets must have shape ({X.shape[0]},), got {y.shape}")
    return X, y


def _batch_gradient(params: FmParams, X: np.ndarray, y: np.ndarray) -> FmGradient:
    # r carries the 2/B residual factor; B is the actual batch length, so a
    # short final batch is normalized by its own size.
    S = X @ params.factors
    pred = params.bias + X @ params.linear + 0.5 * (S**2 - (X**2) @ (params.factors**2)).sum(axis=1)
    r = (2.0 / X.shape[0]) * (pred - y)
    gb = float(r.sum())
    gl = X.T @ r
    gf = X.T @ (r[:, None] * S) - params.factors * ((X**2).T @ r)[:, None]
    return FmGradient(bias=gb, linear=gl, factors=gf)


def train(
    data: Dataset,
    config: TrainConfig,
    factor_rank: int,
    rng: np.random.Generator | None = None,
) -> FmParams:
    """Fit a factorization machine from scratch on ``data`` with AdamW.

    Runs ``config.epochs`` passes over shuffled mini-batches.  Moment
    estimates use bias correction with the global step count; decoupled
    weight decay applies to the linear and factor weights but not the bias.
    Deterministic: the same data, config and generator state give
    bit-identical parameters.

    Args:
        data: training set (non-empty).
        config: optimizer hyperparameters.
        factor_rank: number of latent factor columns.
        rng: random source for init and shuffling; defaults to a fresh
            generator seeded with ``config.seed``.

    Returns:
        The trained parameters.
    """
    if len(data) == 0:
        raise ValueError("train needs a non-empty dataset")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    params = init_params(data.n_bits, factor_rank, rng)

    bias = params.bias
    linear = params.linear.copy()
    factors = params.factors.copy()
    X, y = data.inputs, data.targets
    D = X.shape[0]

    lr, wd = config.learning_rate, config.weight_decay
    b1, b2, eps = config.beta1, config.beta2, config.epsilon
    m_b = v_b = 0.0
    m_l = np.zeros_like(linear)
    v_l = np.zeros_like(linear)
    m_f = np.zeros_like(factors)
    v_f = np.zeros_like(factors)
    step = 0

    for _ in range(config.epochs):
        order = rng.permutation(D)
        for start in range(0, D, config.batch_size):
            idx = order[start : start + config.batch_size]
            cur = FmParams(bias=bias, linear=linear, factors=factors)
            g = _batch_gradient(cur, X[idx], y[idx])
            step += 1
            c1 = 1.0 - b1**step
            c2 = 1.0 - b2**step

            m_b = b1 * m_b + (1 - b1) * g.bias
            v_b = b2 * v_b + (1 - b2) * g.bias**2
            bias = bias - lr * (m_b / c1) / (np.sqrt(v_b / c2) + eps)

            m_l = b1 * m_l + (1 - b1) * g.linear
            v_l = b2 * v_l + (1 - b2) * g.linear**2
            linear = linear - lr * (m_l / c1) / (np.sqrt(v_l / c2) + eps) - lr * wd * linear

            m_f = b1 * m_f + (1 - b1) * g.factors
            v_f = b2 * v_f + (1 - b2) * g.factors**2
            factors = factors - lr * (m_f / c1) / (np.sqrt(v_f / c2) + eps) - lr * wd * factors

    return FmParams(bias=bias, linear=linear, factors=factors)
