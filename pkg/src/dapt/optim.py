"""Optimizers over flat parameter dicts.

AdamW with decoupled weight decay is the pretraining optimizer (lr 1e-4,
decay 1e-4, betas 0.9/0.999, eps 1e-8); the probe trainer uses the same
update with decay 0, which is plain Adam. Updates happen in place; only
parameters present in the gradient dict are touched, so unused heads keep
their initialization and collect no decay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdamWConfig:
    lr: float = 1e-4
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class AdamW:
    """Decoupled-decay Adam: p <- p * (1 - lr*wd) before the moment step.

    With a zero gradient the update reduces to exactly p * (1 - lr*wd), and
    with lr = 0 parameters never change.
    """

    def __init__(self, params: dict[str, np.ndarray], cfg: AdamWConfig):
        self.cfg = cfg
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for name in sorted(grads):
            g = grads[name]
            p = params[name]
            if c.weight_decay:
                p *= p.dtype.type(1.0 - c.lr * c.weight_decay)
            m = self.m[name]
            v = self.v[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * (g * g)
            p -= c.lr * (m / bc1) / (np.sqrt(v / bc2) + c.eps)

    def state_arrays(self) -> tuple[dict, dict, int]:
        return self.m, self.v, self.t

    def load_state(self, m: dict, v: dict, t: int) -> None:
        for k in self.m:
            self.m[k][...] = m[k]
            self.v[k][...] = v[k]
        self.t = t


def adam(params: dict[str, np.ndarray], lr: float = 1e-4,
         beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamW:
    """Adam is AdamW without decay; the probe trainer's optimizer."""
    return AdamW(params, AdamWConfig(lr=lr, weight_decay=0.0, beta1=beta1,
                                     beta2=beta2, eps=eps))
