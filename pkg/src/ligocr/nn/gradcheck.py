"""Central finite-difference check of analytic gradients."""
from __future__ import annotations

import numpy as np

from .losses import weighted_cross_entropy
from .model import Model


class PrecisionError(RuntimeError):
    pass


def rel_error(a, b) -> np.ndarray:
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def _loss(model: Model, x, y, weights, seed):
    out = model.forward(x, training=True, rng=np.random.default_rng(seed))
    if model.ends_in_softmax:
        return weighted_cross_entropy(out, y, weights)
    # bare stacks: a fixed random projection of the output as the scalar
    proj = np.random.default_rng(seed + 1).standard_normal(out.shape)
    return float(np.sum(out * proj)), proj


def generic_point(model: Model, seed: int = 0) -> Model:
    """Move SReLU parameters off their initial values, in place.

    At the shipped init (a_l = 0) every sub-threshold unit outputs exactly 0,
    so pooling windows tie and the loss has a kink in a_l. Checking gradients
    there compares one-sided slopes; a random interior point avoids that.
    """
    rng = np.random.default_rng([seed, 7])

    def visit(layers):
        for layer in layers:
            if getattr(layer.config, "kind", None) == "srelu":
                c = layer.params["a_l"].shape
                layer.params.update(t_l=rng.uniform(-0.2, -0.05, c), a_l=rng.uniform(0.05, 0.3, c),
                                    t_r=rng.uniform(0.7, 1.3, c), a_r=rng.uniform(0.5, 1.5, c))
            visit(getattr(layer, "inner", ()))

    visit(model.layers)
    return model


def _sample(model: Model, max_params: int, per_tensor: int, rng):
    picks = []
    subsample = model.param_count() > max_params
    for t, p in enumerate(model.params()):
        flat = np.arange(p.size)
        if subsample and p.size > per_tensor:
            flat = np.sort(rng.choice(p.size, per_tensor, replace=False))
        picks.extend((t, int(i)) for i in flat)
    return picks


def _regions(model: Model) -> list[np.ndarray]:
    """Which linear piece every unit sits on after the last forward pass."""
    out = []

    def visit(layers):
        for layer in layers:
            kind = getattr(layer.config, "kind", None)
            if kind == "srelu":
                p = layer.params
                out.append((layer.x <= p["t_l"]).astype(np.int8) - (layer.x >= p["t_r"]))
            elif kind is not None:
                out.append(layer.x > 0)
            elif hasattr(layer, "idx"):
                out.append(layer.idx)
            visit(getattr(layer, "inner", ()))

    visit(model.layers)
    return out


def _same(a: list[np.ndarray], b: list[np.ndarray]) -> bool:
    return all(np.array_equal(u, v) for u, v in zip(a, b))


def _central(model: Model, x, y, weights, seed, arr: np.ndarray, i: int, eps: float, halvings: int):
    """Central difference at flat index ``i`` of ``arr``.

    If the two probes land on different linear pieces of some ReLU-family
    unit or pooling window, the difference spans a kink and says nothing
    about the derivative; the step is halved until both probes agree.
    """
    flat = arr.reshape(-1)
    orig = flat[i]
    for _ in range(halvings + 1):
        flat[i] = orig + eps
        lp, _ = _loss(model, x, y, weights, seed)
        rp = _regions(model)
        flat[i] = orig - eps
        lm, _ = _loss(model, x, y, weights, seed)
        same = _same(rp, _regions(model))
        flat[i] = orig
        if same:
            break
        eps /= 2
    return (lp - lm) / (2 * eps)


def grad_check(model: Model, x: np.ndarray, y: np.ndarray | None = None, weights=None, eps: float = 1e-5,
               max_params: int = 10_000, per_tensor: int = 20, seed: int = 0, wrt_input: bool = False,
               max_halvings: int = 12) -> float:
    """Max relative error between backprop and central differences.

    Every parameter is checked unless the model has more than ``max_params``,
    in which case ``per_tensor`` random entries of each tensor are. Dropout
    draws the same mask for every evaluation. With ``wrt_input`` the input
    gradient is checked as well. Steps that straddle a kink are shrunk (at
    most ``max_halvings`` times) so that both probes share one linear piece.
    """
    if model.dtype != np.float64:
        raise PrecisionError("gradient checking needs 64-bit parameters")
    x = np.array(x, np.float64)
    if y is None:
        y = np.zeros(len(x), np.int64)
    _, dout = _loss(model, x, y, weights, seed)
    dx = model.backward(dout)
    analytic = [g.copy() for g in model.grads()]
    params = model.params()
    worst = 0.0
    for t, i in _sample(model, max_params, per_tensor, np.random.default_rng(seed)):
        num = _central(model, x, y, weights, seed, params[t], i, eps, max_halvings)
        worst = max(worst, float(rel_error(analytic[t].reshape(-1)[i], num)))
    if wrt_input:
        for i in range(x.size):
            num = _central(model, x, y, weights, seed, x, i, eps, max_halvings)
            worst = max(worst, float(rel_error(dx.reshape(-1)[i], num)))
    return worst
