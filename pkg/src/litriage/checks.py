"""Finite-difference verification of every layer and of a desk-scale model.

Random inputs are drawn so that no ReLU pre-activation and no max-pool
runner-up lies within ``KINK_MARGIN`` of a kink; a step of ``eps`` cannot
then cross a non-differentiable point.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .model import KMCNN, ModelConfig

KINK_MARGIN = 0.02

DESK_GRADCHECK = dict(n=16, dw=8, dk=4, channels=2, filters=4, hidden_dim=8, drop_rate=0.5)


def _away_from_zero(rng, shape, margin=0.1):
    z = rng.standard_normal(shape)
    return np.sign(z) * (margin + np.abs(z))


def _separated_columns(rng, shape, gap=0.2):
    # every column is a shuffled ladder, so maxima are unique by >= gap
    rows, cols = shape[-2], shape[-1]
    lead = int(np.prod(shape[:-2], dtype=np.int64))
    out = np.empty((lead, rows, cols))
    for b in range(lead):
        for c in range(cols):
            out[b, :, c] = rng.permutation(rows) * gap + rng.uniform(0, gap / 2, rows) - rows * gap / 2
    return out.reshape(shape)


def layer_gradchecks(trials: int = 100, seed: int = 0, eps: float = 1e-3) -> dict[str, float]:
    """Worst relative error per layer type over ``trials`` random cases."""
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}

    def record(name, err):
        worst[name] = max(worst.get(name, 0.0), err)

    for _ in range(trials):
        lrng = np.random.default_rng(rng.integers(2**63))
        record("dense", nn.grad_check(nn.Dense(5, 3, lrng), lrng.standard_normal((4, 5)), eps, lrng))
        h = int(lrng.integers(1, 4))
        record("conv1d", nn.grad_check(nn.Conv1D(4, h, 3, lrng), lrng.standard_normal((2, 8, 4)), eps, lrng))
        record("relu", nn.grad_check(nn.ReLU(), _away_from_zero(lrng, (3, 6)), eps, lrng))
        record("tanh", nn.grad_check(nn.Tanh(), lrng.standard_normal((3, 6)), eps, lrng))
        record("maxpool", nn.grad_check(nn.MaxPoolOverTime(), _separated_columns(lrng, (2, 6, 4)), eps, lrng))
        record("dropout", nn.grad_check(nn.Dropout(0.5), lrng.standard_normal((4, 6)), eps, lrng))
        record("softmax_xent", nn.grad_check(nn.SoftmaxCrossEntropy(), lrng.standard_normal((4, 2)) * 2, eps, lrng))
    return worst


def kink_margin(model: KMCNN, x: np.ndarray) -> float:
    """Smallest distance of any decision-relevant activation from a kink."""
    margins = []
    feats = []
    for conv, act, pool in zip(model.convs, model.conv_acts, model.pools):
        maps = conv.forward(x).mean(axis=1)
        srt = np.sort(maps, axis=-2)
        top = srt[..., -1, :]
        second = srt[..., -2, :] if maps.shape[-2] > 1 else np.full_like(top, -np.inf)
        if model.cfg.activation == "relu":
            margins.append(np.abs(top).min())
            margins.append(np.where(top > 0, top - np.maximum(second, 0), np.inf).min())
        else:
            margins.append((top - second).min())
        feats.append(pool.forward(act.forward(maps)))
    pre = model.hidden.forward(np.concatenate(feats, axis=-1))
    margins.append(np.abs(pre).min())
    return float(min(margins))


def full_model_gradcheck(
    trials: int = 100, seed: int = 0, eps: float = 1e-3, batch: int = 2, max_attempts: int = 100_000, **overrides
) -> float:
    """Worst per-parameter relative error of the full training loss (dropout
    mask held fixed) over ``trials`` kink-free random draws."""
    cfg_kw = {**DESK_GRADCHECK, **overrides}
    rng = np.random.default_rng(seed)
    worst, accepted, attempts = 0.0, 0, 0
    while accepted < trials:
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError(f"only {accepted} kink-free draws in {max_attempts} attempts")
        cfg = ModelConfig(seed=int(rng.integers(2**32)), **cfg_kw)
        model = KMCNN(cfg)
        x = rng.standard_normal((batch, cfg.channels, cfg.n, cfg.k))
        if kink_margin(model, x) < KINK_MARGIN:
            continue
        labels = rng.integers(2, size=batch)
        mask_seed = int(rng.integers(2**32))

        def loss():
            return model.loss(x, labels, train=True, rng=np.random.default_rng(mask_seed))

        _, grads = model.loss_and_grad(x, labels, rng=np.random.default_rng(mask_seed))
        analytic = {k: g.copy() for k, g in grads.items()}
        errs = nn.loss_grad_check(loss, model.parameters(), analytic, eps)
        worst = max(worst, max(errs.values()))
        accepted += 1
    return worst
