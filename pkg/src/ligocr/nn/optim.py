"""RMSProp and Adam updates, in place over lists of parameter arrays."""
from __future__ import annotations

import numpy as np


def rmsprop_step(params, grads, state: dict, lr: float, rho: float = 0.9, eps: float = 1e-7) -> None:
    sq = state.setdefault("s", [np.zeros_like(p) for p in params])
    for p, g, s in zip(params, grads, sq):
        s *= rho
        s += (1 - rho) * g * g
        p -= lr * g / (np.sqrt(s) + eps)


def adam_step(params, grads, state: dict, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-7) -> None:
    ms = state.setdefault("m", [np.zeros_like(p) for p in params])
    vs = state.setdefault("v", [np.zeros_like(p) for p in params])
    t = state["t"] = state.get("t", 0) + 1
    c1, c2 = 1 - beta1 ** t, 1 - beta2 ** t
    for p, g, m, v in zip(params, grads, ms, vs):
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


OPTIMIZERS = {"rmsprop": rmsprop_step, "adam": adam_step}
