"""Numeric primitives with explicit backward passes.

Every forward returns (output, cache) and the matching backward consumes the
cache plus the upstream gradient. Parameters travel in flat dicts keyed by
dotted names; backwards return plain arrays that callers place into gradient
dicts under the same keys. All math preserves the input dtype so the same
code runs in float32 for training and float64 for gradient audits.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327


def linear_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Affine map on the last axis: x (..., din) -> (..., dout)."""
    return x @ w + b, (x, w)


def linear_bwd(dout: np.ndarray, cache):
    x, w = cache
    din = x.shape[-1]
    x2 = x.reshape(-1, din)
    d2 = dout.reshape(-1, dout.shape[-1])
    dw = x2.T @ d2
    db = d2.sum(axis=0)
    dx = (d2 @ w.T).reshape(x.shape)
    return dx, dw, db


def gelu_fwd(x: np.ndarray):
    """Exact Gaussian-error-linear unit, x * Phi(x)."""
    phi = 0.5 * (1.0 + erf(x * x.dtype.type(_INV_SQRT2)))
    return x * phi, (x, phi)


def gelu_bwd(dout: np.ndarray, cache):
    x, phi = cache
    pdf = np.exp(-0.5 * x * x) * x.dtype.type(_INV_SQRT_2PI)
    return dout * (phi + x * pdf)


def layernorm_fwd(x: np.ndarray, g: np.ndarray, b: np.ndarray, eps: float = 1e-5):
    """Normalize the last axis to zero mean, unit variance, then scale + shift."""
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    istd = 1.0 / np.sqrt(var + x.dtype.type(eps))
    xhat = xc * istd
    return xhat * g + b, (xhat, istd, g)


def layernorm_bwd(dout: np.ndarray, cache):
    xhat, istd, g = cache
    d = xhat.shape[-1]
    dg = (dout * xhat).reshape(-1, d).sum(axis=0)
    db = dout.reshape(-1, d).sum(axis=0)
    dxhat = dout * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = istd * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def dropout_fwd(x: np.ndarray, rate: float, rng: np.random.Generator | None, train: bool):
    """Inverted dropout; identity (cache None) when inactive.

    The keep mask is drawn as float32 regardless of model dtype so float32
    and float64 runs with the same stream see the same mask.
    """
    if not train or rate <= 0.0:
        return x, None
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    keep = rng.random(x.shape, dtype=np.float32) >= rate
    m = keep.astype(x.dtype) * x.dtype.type(1.0 / (1.0 - rate))
    return x * m, m


def dropout_bwd(dout: np.ndarray, m):
    return dout if m is None else dout * m


def masked_softmax_fwd(scores: np.ndarray, kmask: np.ndarray | None):
    """Softmax over the last axis; positions where kmask is False get weight 0.

    kmask must broadcast against scores. Rows with no attendable position
    come out all-zero instead of NaN.
    """
    if kmask is not None:
        scores = np.where(kmask, scores, scores.dtype.type(-np.inf))
    m = np.max(scores, axis=-1, keepdims=True)
    if kmask is not None:
        m = np.where(np.isfinite(m), m, scores.dtype.type(0))
    e = np.exp(scores - m)
    z = e.sum(axis=-1, keepdims=True)
    if kmask is not None:
        z = np.maximum(z, np.finfo(scores.dtype).tiny)
    p = e / z
    return p, p


def softmax_bwd(dout: np.ndarray, p: np.ndarray):
    inner = (dout * p).sum(axis=-1, keepdims=True)
    return p * (dout - inner)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return shifted - lse


def accumulate(total: dict, grads: dict) -> dict:
    """Sum gradient dicts in place (missing keys are created)."""
    for k, g in grads.items():
        if k in total:
            total[k] += g
        else:
            total[k] = g
    return total


def finite_difference(f, params: dict, *, step: float = 1e-5,
                      coords_per_tensor: int | None = None,
                      rng: np.random.Generator | None = None) -> dict:
    """Central finite differences of scalar f(params) per parameter coordinate.

    Returns {name: (flat_indices, fd_grad_values)}. With coords_per_tensor
    set, that many coordinates are sampled per tensor (all coordinates for
    smaller tensors); otherwise every coordinate is probed. Parameters are
    perturbed in place and restored, so f may close over `params`.
    """
    out = {}
    for name in sorted(params):
        p = params[name]
        flat = p.reshape(-1)
        n = flat.size
        if coords_per_tensor is None or n <= coords_per_tensor:
            idx = np.arange(n)
        else:
            idx = np.sort(rng.choice(n, size=coords_per_tensor, replace=False))
        vals = np.empty(len(idx), dtype=np.float64)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + step
            up = f()
            flat[i] = orig - step
            down = f()
            flat[i] = orig
            vals[j] = (up - down) / (2.0 * step)
        out[name] = (idx, vals)
    return out


def max_relative_error(analytic: dict, fd: dict, floor: float = 1e-6) -> float:
    """Largest relative disagreement between analytic grads and fd probes.

    Parameters the loss never touched may be absent from `analytic`; their
    gradient is zero, and the fd probe must agree.
    """
    worst = 0.0
    for name, (idx, vals) in fd.items():
        if name in analytic:
            a = analytic[name].reshape(-1)[idx]
        else:
            a = np.zeros(len(idx), dtype=np.float64)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(vals)), floor)
        worst = max(worst, float(np.max(np.abs(a - vals) / denom)))
    return worst
