"""Layer configs and their forward/backward implementations (NHWC).

Configs are frozen dataclasses (declarative, serializable); ``build_layer``
turns one into a runtime layer holding parameters, the forward cache and
parameter gradients.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    pass


# --------------------------------------------------------------------------
# configs


def _pair(v) -> tuple[int, int]:
    if isinstance(v, int):
        return (v, v)
    a, b = v
    return (int(a), int(b))


@dataclass(frozen=True)
class Conv2D:
    filters: int
    kernel: tuple[int, int] = (3, 3)
    stride: tuple[int, int] = (1, 1)
    padding: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kernel", _pair(self.kernel))
        object.__setattr__(self, "stride", _pair(self.stride))
        if self.filters < 1 or min(self.kernel) < 1 or min(self.stride) < 1 or self.padding < 0:
            raise ValueError(f"invalid Conv2D config {self}")


@dataclass(frozen=True)
class MaxPool:
    pool: tuple[int, int] = (2, 2)
    stride: tuple[int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "pool", _pair(self.pool))
        object.__setattr__(self, "stride", _pair(self.stride if self.stride is not None else self.pool))
        if min(self.pool) < 1 or min(self.stride) < 1:
            raise ValueError(f"invalid MaxPool config {self}")


@dataclass(frozen=True)
class GlobalAveragePool:
    pass


@dataclass(frozen=True)
class Dense:
    units: int

    def __post_init__(self):
        if self.units < 1:
            raise ValueError(f"invalid Dense config {self}")


@dataclass(frozen=True)
class Dropout:
    rate: float

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {self.rate}")


@dataclass(frozen=True)
class Activation:
    kind: str = "relu"
    alpha: float = 0.01

    def __post_init__(self):
        if self.kind not in ("relu", "leaky_relu", "srelu"):
            raise ValueError(f"unknown activation {self.kind!r}")


@dataclass(frozen=True)
class Softmax:
    pass


@dataclass(frozen=True)
class Residual:
    """``inner(x) + shortcut(x)``; the shortcut is a strided 1x1 conv when
    ``projection`` is set, the identity otherwise."""

    inner: tuple
    projection: bool = False

    def __post_init__(self):
        object.__setattr__(self, "inner", tuple(self.inner))


LayerConfig = Union[Conv2D, MaxPool, GlobalAveragePool, Dense, Dropout, Activation, Softmax, Residual]


def conv_out(n: int, k: int, s: int, p: int) -> int:
    return (n + 2 * p - k) // s + 1


# --------------------------------------------------------------------------
# functional forms


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride=(1, 1), padding: int = 0) -> np.ndarray:
    """x: (N, H, W, C); w: (kh, kw, C, F); b: (F,). Returns (N, Ho, Wo, F)."""
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects a rank-4 input, got shape {x.shape}")
    kh, kw, c, f = w.shape
    if x.shape[3] != c:
        raise ShapeError(f"filter depth {c} does not match input channels {x.shape[3]}")
    sh, sw = _pair(stride)
    n, h, wd, _ = x.shape
    ho, wo = conv_out(h, kh, sh, padding), conv_out(wd, kw, sw, padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv output extent {ho}x{wo} for input {h}x{wd}, kernel {kh}x{kw}")
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0))) if padding else x
    out = np.empty((n * ho * wo, f), dtype=np.result_type(x, w))
    out[:] = b
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, i:i + sh * (ho - 1) + 1:sh, j:j + sw * (wo - 1) + 1:sw, :]
            out += patch.reshape(-1, c) @ w[i, j]
    return out.reshape(n, ho, wo, f)


def conv2d_backward(dy, x, w, stride=(1, 1), padding: int = 0):
    """Returns (dx, dw, db)."""
    kh, kw, c, f = w.shape
    sh, sw = _pair(stride)
    n, ho, wo, _ = dy.shape
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0))) if padding else x
    dxp = np.zeros_like(xp)
    dy2 = dy.reshape(-1, f)
    dw = np.empty_like(w)
    for i in range(kh):
        for j in range(kw):
            sl = (slice(None), slice(i, i + sh * (ho - 1) + 1, sh), slice(j, j + sw * (wo - 1) + 1, sw))
            dw[i, j] = xp[sl].reshape(-1, c).T @ dy2
            dxp[sl] += (dy2 @ w[i, j].T).reshape(n, ho, wo, c)
    db = dy2.sum(axis=0)
    dx = dxp[:, padding:padding + x.shape[1], padding:padding + x.shape[2], :] if padding else dxp
    return dx, dw, db


def maxpool_forward(x: np.ndarray, pool=(2, 2), stride=None) -> tuple[np.ndarray, np.ndarray]:
    """Returns (out, argmax index within each window); ties go to the first."""
    ph, pw = _pair(pool)
    sh, sw = _pair(stride if stride is not None else pool)
    n, h, w, c = x.shape
    if ph > h or pw > w:
        raise ShapeError(f"pool window {ph}x{pw} exceeds input {h}x{w}")
    ho, wo = conv_out(h, ph, sh, 0), conv_out(w, pw, sw, 0)
    win = sliding_window_view(x, (ph, pw), axis=(1, 2))[:, ::sh, ::sw][:, :ho, :wo]
    flat = win.reshape(n, ho, wo, c, ph * pw)
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool_backward(dy, idx, x_shape, pool=(2, 2), stride=None):
    ph, pw = _pair(pool)
    sh, sw = _pair(stride if stride is not None else pool)
    _, ho, wo, _ = dy.shape
    dx = np.zeros(x_shape, dtype=dy.dtype)
    for k in range(ph * pw):
        i, j = divmod(k, pw)
        dx[:, i:i + sh * (ho - 1) + 1:sh, j:j + sw * (wo - 1) + 1:sw, :] += np.where(idx == k, dy, 0)
    return dx


def srelu(x, t_l, a_l, t_r, a_r):
    with np.errstate(invalid="ignore"):
        return np.where(x <= t_l, a_l * (x - t_l) + t_l,
                        np.where(x >= t_r, a_r * (x - t_r) + t_r, x))


def activation_forward(x: np.ndarray, kind: str, alpha: float = 0.01, srelu_params=None) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0)
    if kind == "leaky_relu":
        return np.where(x > 0, x, alpha * x)
    if kind == "srelu":
        if srelu_params is None:
            raise ValueError("srelu needs its (t_l, a_l, t_r, a_r) parameters")
        return srelu(x, *srelu_params)
    raise ValueError(f"unknown activation {kind!r}")


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    z = np.asarray(z)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def dropout_forward(x: np.ndarray, rate: float, training: bool, rng: np.random.Generator | None):
    """Inverted dropout. Returns (output, mask or None)."""
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout needs a random generator")
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * mask, mask


# --------------------------------------------------------------------------
# runtime layers


def _fan_in_uniform(rng, shape, fan_in, dtype):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    def __init__(self, config):
        self.config = config
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def build(self, in_shape: tuple[int, ...], rng, dtype) -> tuple[int, ...]:
        return in_shape

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def named_params(self, prefix: str):
        """Yields (name, owning layer, key) in declaration order."""
        for k in self.params:
            yield f"{prefix}.{k}", self, k


class Conv2DLayer(Layer):
    def build(self, in_shape, rng, dtype):
        if len(in_shape) != 3:
            raise ShapeError(f"Conv2D needs an (H, W, C) input, got {in_shape}")
        cfg = self.config
        h, w, c = in_shape
        (kh, kw), (sh, sw) = cfg.kernel, cfg.stride
        ho, wo = conv_out(h, kh, sh, cfg.padding), conv_out(w, kw, sw, cfg.padding)
        if ho < 1 or wo < 1:
            raise ShapeError(f"{cfg} gives non-positive output {ho}x{wo} on input {h}x{w}")
        self.params = {"w": _fan_in_uniform(rng, (kh, kw, c, cfg.filters), kh * kw * c, dtype),
                       "b": np.zeros(cfg.filters, dtype)}
        return (ho, wo, cfg.filters)

    def forward(self, x, training=False, rng=None):
        self.x = x
        return conv2d_forward(x, self.params["w"], self.params["b"], self.config.stride, self.config.padding)

    def backward(self, dy):
        dx, dw, db = conv2d_backward(dy, self.x, self.params["w"], self.config.stride, self.config.padding)
        self.grads = {"w": dw, "b": db}
        return dx


class MaxPoolLayer(Layer):
    def build(self, in_shape, rng, dtype):
        h, w, c = in_shape
        (ph, pw), (sh, sw) = self.config.pool, self.config.stride
        if ph > h or pw > w:
            raise ShapeError(f"pool window {ph}x{pw} exceeds input {h}x{w}")
        return (conv_out(h, ph, sh, 0), conv_out(w, pw, sw, 0), c)

    def forward(self, x, training=False, rng=None):
        self.x_shape = x.shape
        out, self.idx = maxpool_forward(x, self.config.pool, self.config.stride)
        return out

    def backward(self, dy):
        return maxpool_backward(dy, self.idx, self.x_shape, self.config.pool, self.config.stride)


class GlobalAveragePoolLayer(Layer):
    def build(self, in_shape, rng, dtype):
        return (in_shape[-1],)

    def forward(self, x, training=False, rng=None):
        self.x_shape = x.shape
        return x.mean(axis=(1, 2))

    def backward(self, dy):
        n, h, w, c = self.x_shape
        return np.broadcast_to(dy[:, None, None, :] / (h * w), self.x_shape).copy()


class DenseLayer(Layer):
    def build(self, in_shape, rng, dtype):
        d = int(np.prod(in_shape))
        self.params = {"w": _fan_in_uniform(rng, (d, self.config.units), d, dtype),
                       "b": np.zeros(self.config.units, dtype)}
        return (self.config.units,)

    def forward(self, x, training=False, rng=None):
        self.x_shape = x.shape
        self.x2 = x.reshape(x.shape[0], -1)
        return self.x2 @ self.params["w"] + self.params["b"]

    def backward(self, dy):
        self.grads = {"w": self.x2.T @ dy, "b": dy.sum(axis=0)}
        return (dy @ self.params["w"].T).reshape(self.x_shape)


class DropoutLayer(Layer):
    def forward(self, x, training=False, rng=None):
        out, self.mask = dropout_forward(x, self.config.rate, training, rng)
        return out

    def backward(self, dy):
        return dy if self.mask is None else dy * self.mask


class ActivationLayer(Layer):
    def build(self, in_shape, rng, dtype):
        if self.config.kind == "srelu":
            c = in_shape[-1]
            self.params = {"t_l": np.zeros(c, dtype), "a_l": np.zeros(c, dtype),
                           "t_r": np.ones(c, dtype), "a_r": np.ones(c, dtype)}
        return in_shape

    def forward(self, x, training=False, rng=None):
        self.x = x
        p = self.params
        sp = (p["t_l"], p["a_l"], p["t_r"], p["a_r"]) if p else None
        return activation_forward(x, self.config.kind, self.config.alpha, sp)

    def backward(self, dy):
        x, kind = self.x, self.config.kind
        if kind == "relu":
            return dy * (x > 0)
        if kind == "leaky_relu":
            return dy * np.where(x > 0, 1.0, self.config.alpha).astype(dy.dtype)
        p = self.params
        lo, hi = x <= p["t_l"], x >= p["t_r"]
        axes = tuple(range(x.ndim - 1))
        with np.errstate(invalid="ignore"):
            self.grads = {
                "t_l": np.where(lo, dy * (1 - p["a_l"]), 0).sum(axis=axes),
                "a_l": np.where(lo, dy * (x - p["t_l"]), 0).sum(axis=axes),
                "t_r": np.where(hi, dy * (1 - p["a_r"]), 0).sum(axis=axes),
                "a_r": np.where(hi, dy * (x - p["t_r"]), 0).sum(axis=axes),
            }
        return dy * np.where(lo, p["a_l"], np.where(hi, p["a_r"], 1)).astype(dy.dtype)


class SoftmaxLayer(Layer):
    def forward(self, x, training=False, rng=None):
        self.p = softmax(x)
        return self.p

    def backward(self, dy):
        p = self.p
        return p * (dy - (dy * p).sum(axis=-1, keepdims=True))


class ResidualLayer(Layer):
    def build(self, in_shape, rng, dtype):
        self.inner = [build_layer(c) for c in self.config.inner]
        shape = in_shape
        for layer in self.inner:
            shape = layer.build(shape, rng, dtype)
        self.proj = None
        if self.config.projection:
            stride = 1
            for c in self.config.inner:
                if isinstance(c, (Conv2D, MaxPool)):
                    stride *= c.stride[0]
            self.proj = Conv2DLayer(Conv2D(shape[-1], (1, 1), (stride, stride), 0))
            proj_shape = self.proj.build(in_shape, rng, dtype)
            if proj_shape != shape:
                raise ShapeError(f"projection shape {proj_shape} does not match inner output {shape}")
        elif shape != in_shape:
            raise ShapeError(f"residual inner output {shape} differs from input {in_shape} and no projection is set")
        return shape

    def forward(self, x, training=False, rng=None):
        h = x
        for layer in self.inner:
            h = layer.forward(h, training, rng)
        return h + (self.proj.forward(x, training, rng) if self.proj else x)

    def backward(self, dy):
        d = dy
        for layer in reversed(self.inner):
            d = layer.backward(d)
        return d + (self.proj.backward(dy) if self.proj else dy)

    def named_params(self, prefix):
        for i, layer in enumerate(self.inner):
            yield from layer.named_params(f"{prefix}.{i}")
        if self.proj:
            yield from self.proj.named_params(f"{prefix}.proj")


_RUNTIME = {
    Conv2D: Conv2DLayer, MaxPool: MaxPoolLayer, GlobalAveragePool: GlobalAveragePoolLayer,
    Dense: DenseLayer, Dropout: DropoutLayer, Activation: ActivationLayer, Softmax: SoftmaxLayer,
    Residual: ResidualLayer,
}


def build_layer(config) -> Layer:
    try:
        return _RUNTIME[type(config)](config)
    except KeyError:
        raise TypeError(f"not a layer config: {config!r}") from None


def residual_forward(x, inner, projection=None, training=False, rng=None):
    """Functional residual: ``inner`` is a list of built layers, ``projection``
    an optional built 1x1 conv layer."""
    h = x
    for layer in inner:
        h = layer.forward(h, training, rng)
    s = projection.forward(x, training, rng) if projection is not None else x
    if h.shape != s.shape:
        raise ShapeError(f"residual branch shape {h.shape} differs from shortcut {s.shape}")
    return h + s
