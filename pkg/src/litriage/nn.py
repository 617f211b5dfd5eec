"""Small float64 neural-network core with explicit backward passes.

Every layer caches what its backward pass needs during ``forward`` and
accumulates parameter gradients into ``grads`` (same keys and shapes as
``params``). Inputs may carry any number of leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, ShapeError, StateError, ValidationError

__all__ = [
    "Layer",
    "Conv1D",
    "Dense",
    "ReLU",
    "Tanh",
    "MaxPoolOverTime",
    "Dropout",
    "SoftmaxCrossEntropy",
    "conv1d_forward",
    "maxpool_over_time",
    "dropout",
    "softmax",
    "glorot_uniform",
    "AdamState",
    "adam_step",
    "sgd_step",
    "grad_check",
    "relative_error",
    "tensor_relative_error",
]


def _check_finite(x: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"non-finite values entering {where}")


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    params: dict[str, np.ndarray]
    grads: dict[str, np.ndarray]

    def __init__(self):
        self.params = {}
        self.grads = {}
        self._cache = None

    def zero_grad(self) -> None:
        for k, p in self.params.items():
            self.grads[k] = np.zeros_like(p)

    def _cached(self):
        if self._cache is None:
            raise StateError(f"{type(self).__name__}.backward called before forward")
        return self._cache

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


# -- convolution -------------------------------------------------------------


def conv1d_forward(x: np.ndarray, filters: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid 1-D convolution along the sequence axis.

    x: (..., n, k); filters: (M, h, k); bias: (M,) -> (..., n - h + 1, M)
    """
    n, k = x.shape[-2:]
    m, h, fk = filters.shape
    if fk != k:
        raise ShapeError(f"filter width {fk} does not match input columns {k}")
    if h > n:
        raise ShapeError(f"filter height {h} exceeds sequence length {n}")
    L = n - h + 1
    out = x[..., 0:L, :] @ filters[:, 0, :].T
    for j in range(1, h):
        out += x[..., j : j + L, :] @ filters[:, j, :].T
    return out + bias


class Conv1D(Layer):
    def __init__(self, in_dim: int, height: int, num_filters: int, rng: np.random.Generator | None = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in, fan_out = height * in_dim, height * num_filters
        self.params = {
            "W": glorot_uniform(rng, (num_filters, height, in_dim), fan_in, fan_out),
            "b": np.zeros(num_filters),
        }
        self.zero_grad()

    @property
    def height(self) -> int:
        return self.params["W"].shape[1]

    def forward(self, x, train=False):
        _check_finite(x, "Conv1D")
        self._cache = x
        return conv1d_forward(x, self.params["W"], self.params["b"])

    def backward(self, dy):
        x = self._cached()
        W = self.params["W"]
        h, k = W.shape[1], W.shape[2]
        L = dy.shape[-2]
        dy2 = dy.reshape(-1, dy.shape[-1])
        self.grads["b"] += dy2.sum(axis=0)
        dx = np.zeros_like(x)
        for j in range(h):
            self.grads["W"][:, j, :] += dy2.T @ x[..., j : j + L, :].reshape(-1, k)
            dx[..., j : j + L, :] += dy @ W[:, j, :]
        return dx


# -- dense -------------------------------------------------------------------


class Dense(Layer):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = {
            "W": glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim),
            "b": np.zeros(out_dim),
        }
        self.zero_grad()

    def forward(self, x, train=False):
        _check_finite(x, "Dense")
        self._cache = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dy):
        x = self._cached()
        in_dim = x.shape[-1]
        self.grads["W"] += x.reshape(-1, in_dim).T @ dy.reshape(-1, dy.shape[-1])
        self.grads["b"] += dy.reshape(-1, dy.shape[-1]).sum(axis=0)
        return dy @ self.params["W"].T


class ReLU(Layer):
    def forward(self, x, train=False):
        self._cache = x > 0
        return np.where(self._cache, x, 0.0)

    def backward(self, dy):
        return np.where(self._cached(), dy, 0.0)


class Tanh(Layer):
    def forward(self, x, train=False):
        self._cache = np.tanh(x)
        return self._cache

    def backward(self, dy):
        y = self._cached()
        return dy * (1.0 - y * y)


# -- pooling -----------------------------------------------------------------


def maxpool_over_time(x: np.ndarray) -> np.ndarray:
    """Column maxima over the sequence axis: (..., L, M) -> (..., M)."""
    if x.shape[-2] == 0:
        raise ShapeError("cannot max-pool an empty sequence")
    return x.max(axis=-2)


class MaxPoolOverTime(Layer):
    """Max over the sequence axis; gradient goes to the first maximal row."""

    def forward(self, x, train=False):
        if x.shape[-2] == 0:
            raise ShapeError("cannot max-pool an empty sequence")
        idx = np.argmax(x, axis=-2)
        self._cache = (x.shape, idx)
        return np.take_along_axis(x, idx[..., None, :], axis=-2)[..., 0, :]

    def backward(self, dy):
        shape, idx = self._cached()
        dx = np.zeros(shape)
        np.put_along_axis(dx, idx[..., None, :], dy[..., None, :], axis=-2)
        return dx


# -- dropout -----------------------------------------------------------------


def dropout(x: np.ndarray, rate: float, mode: str = "train", rng: np.random.Generator | None = None) -> np.ndarray:
    """Inverted dropout; identity in eval mode."""
    return Dropout(rate).forward(x, train=(mode == "train"), rng=rng)


class Dropout(Layer):
    def __init__(self, rate: float):
        super().__init__()
        if not 0 <= rate < 1:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, train=False, rng: np.random.Generator | None = None):
        if not train or self.rate == 0:
            self._cache = 1.0
            return x
        if rng is None:
            raise ConfigError("train-mode dropout needs a random generator")
        keep = rng.random(x.shape) >= self.rate
        self._cache = keep / (1.0 - self.rate)
        return x * self._cache

    def backward(self, dy):
        return dy * self._cached()


# -- output ------------------------------------------------------------------


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class SoftmaxCrossEntropy(Layer):
    """Mean cross-entropy of softmax(logits) against integer labels."""

    def forward(self, logits, labels):
        _check_finite(logits, "SoftmaxCrossEntropy")
        labels = np.asarray(labels, dtype=np.int64)
        logits2 = logits.reshape(-1, logits.shape[-1])
        shift = logits2 - logits2.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shift).sum(axis=1))
        logp = shift - logz[:, None]
        probs = np.exp(logp)
        self._cache = (probs, labels.reshape(-1), logits.shape)
        return float(-logp[np.arange(len(logp)), labels.reshape(-1)].mean())

    def backward(self, dy: float = 1.0):
        probs, labels, shape = self._cached()
        g = probs.copy()
        g[np.arange(len(g)), labels] -= 1.0
        return (g * (dy / len(g))).reshape(shape)


# -- optimisers --------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-5,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """In-place bias-corrected Adam update over matching parameter dicts."""
    if params.keys() != grads.keys():
        raise ShapeError("parameter and gradient keys differ")
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for k in sorted(params):
        p, g = params[k], grads[k]
        if p.shape != g.shape:
            raise ShapeError(f"gradient for {k} has shape {g.shape}, parameter {p.shape}")
        m = state.m.setdefault(k, np.zeros_like(p))
        v = state.v.setdefault(k, np.zeros_like(p))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


def sgd_step(params, grads, lr: float) -> None:
    if params.keys() != grads.keys():
        raise ShapeError("parameter and gradient keys differ")
    for k in sorted(params):
        params[k] -= lr * grads[k]


# -- gradient checking -------------------------------------------------------


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-7) -> np.ndarray:
    """|a - n| / max(|a|, |n|), falling back to |a - n| when both are below ``floor``."""
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return np.where(scale > floor, diff / np.where(scale > floor, scale, 1.0), diff)


def tensor_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-7) -> float:
    """max|a - n| / max(max|a|, max|n|): every component measured against the
    gradient scale of its tensor, so near-zero entries are not judged by their
    own (truncation-dominated) magnitude. Absolute below ``floor``."""
    if analytic.size == 0:
        return 0.0
    diff = float(np.max(np.abs(analytic - numeric)))
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))))
    return diff / scale if scale > floor else diff


def numeric_gradient(f: Callable[[], float], x: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    """Central differences of scalar ``f`` w.r.t. ``x`` (perturbed in place, restored)."""
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = f()
        flat[i] = old - eps
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * eps)
    return grad


def grad_check(
    layer: Layer,
    x: np.ndarray,
    eps: float = 1e-3,
    rng: np.random.Generator | None = None,
    upstream: np.ndarray | None = None,
    labels: np.ndarray | None = None,
) -> float:
    """Largest per-tensor relative error between backward and central differences.

    The scalar probed is ``sum(layer(x) * upstream)`` with a fixed random
    ``upstream`` (for ``SoftmaxCrossEntropy``, the loss itself against
    ``labels``). Both the input and every parameter are checked. Dropout is
    re-run with an identically seeded generator so the mask stays fixed.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    x = np.array(x, dtype=np.float64)
    sample_seed = int(rng.integers(2**32))

    if isinstance(layer, SoftmaxCrossEntropy):
        if labels is None:
            labels = rng.integers(x.shape[-1], size=x.shape[:-1])

        def f():
            return layer.forward(x, labels)

        f()
        dx = layer.backward(1.0)
    else:
        def run():
            if isinstance(layer, Dropout):
                return layer.forward(x, train=True, rng=np.random.default_rng(sample_seed))
            return layer.forward(x, train=True)

        y = run()
        if upstream is None:
            upstream = rng.standard_normal(y.shape)
        layer.zero_grad()
        dx = layer.backward(upstream)

        def f():
            return float(np.sum(run() * upstream))

    analytic = {k: g.copy() for k, g in layer.grads.items()}
    worst = tensor_relative_error(dx, numeric_gradient(f, x, eps))
    for k, p in layer.params.items():
        num = numeric_gradient(f, p, eps)
        worst = max(worst, tensor_relative_error(analytic[k], num))
    return worst


def loss_grad_check(
    loss_fn: Callable[[], float],
    params: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    eps: float = 1e-3,
) -> dict[str, float]:
    """Per-parameter tensor relative error for a scalar loss of ``params``."""
    return {
        k: tensor_relative_error(analytic[k], numeric_gradient(loss_fn, params[k], eps))
        for k in params
    }
