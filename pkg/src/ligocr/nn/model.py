"""Sequential model over layer configs."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .layers import Layer, Softmax, build_layer


class Model:
    def __init__(self, configs: Sequence, input_shape: tuple[int, ...], *, seed: int = 0,
                 dtype=np.float64):
        self.configs = tuple(configs)
        self.input_shape = tuple(input_shape)
        self.dtype = np.dtype(dtype)
        if self.dtype not in (np.float32, np.float64):
            raise ValueError(f"unsupported dtype {self.dtype}")
        rng = np.random.default_rng(seed)
        self.layers: list[Layer] = [build_layer(c) for c in self.configs]
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.build(shape, rng, self.dtype)
        self.output_shape = shape
        self.ends_in_softmax = bool(self.configs) and isinstance(self.configs[-1], Softmax)

    @property
    def n_classes(self) -> int:
        return self.output_shape[-1]

    def named_params(self):
        for i, layer in enumerate(self.layers):
            yield from layer.named_params(str(i))

    def params(self) -> list[np.ndarray]:
        return [layer.params[k] for _, layer, k in self.named_params()]

    def grads(self) -> list[np.ndarray]:
        return [layer.grads[k] for _, layer, k in self.named_params()]

    def set_params(self, values: Sequence[np.ndarray]) -> None:
        slots = list(self.named_params())
        if len(values) != len(slots):
            raise ValueError(f"expected {len(slots)} parameter tensors, got {len(values)}")
        for (name, layer, k), v in zip(slots, values):
            if v.shape != layer.params[k].shape:
                raise ValueError(f"{name}: shape {v.shape} != {layer.params[k].shape}")
            layer.params[k] = np.array(v, dtype=self.dtype)

    def param_count(self) -> int:
        return sum(p.size for p in self.params())

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        h = np.asarray(x, dtype=self.dtype)
        for layer in self.layers:
            h = layer.forward(h, training, rng)
        return h

    def backward(self, dout: np.ndarray) -> np.ndarray:
        d = dout
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return d

    def predict_proba(self, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
        out = [self.forward(x[i:i + batch_size]) for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros((0, self.n_classes), self.dtype)
