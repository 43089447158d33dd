"""Shipped architectures and their training settings.

Each preset is a layer stack (built for a given output count) plus optimizer
settings. ``filters`` and ``epochs`` can be overridden for small runs; the
defaults are the full-size configurations.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

from .layers import Activation, Conv2D, Dense, Dropout, GlobalAveragePool, MaxPool, Residual, Softmax

DROPOUT = 0.2


def _head(n: int, pooled: bool = True) -> list:
    # without pooling the dense layer sees the flattened map, keeping stroke positions
    return ([GlobalAveragePool()] if pooled else []) + [Dropout(DROPOUT), Dense(n), Softmax()]


def level0_layers(n: int = 3, filters: int = 48) -> list:
    body = []
    for _ in range(2):
        body += [Conv2D(filters, 3, padding=1), Activation("srelu"), MaxPool(2)]
    return body + _head(n)


def degree_layers(n: int, filters: int = 128) -> list:
    body = []
    for i, k in enumerate((8, 7, 6, 3)):
        body += [Conv2D(filters, k, padding=k // 2), Activation("srelu")]
        if i in (1, 3):
            body.append(MaxPool(2))
    return body + _head(n, pooled=False)


def _block(filters: int, stride: int) -> Residual:
    inner = (Conv2D(filters, 3, stride=stride, padding=1), Activation("srelu"),
             Conv2D(filters, 3, padding=1))
    return Residual(inner, projection=stride != 1)


def residual_layers(n: int, filters: int = 32) -> list:
    body = [Conv2D(filters, 3, padding=1), Activation("srelu"), MaxPool(2)]
    for stride in (1, 2, 1, 2):
        body += [_block(filters, stride), Activation("srelu")]
    return body + _head(n)


@dataclass(frozen=True)
class Preset:
    name: str
    build: Callable[..., list]
    filters: int
    optimizer: str
    learning_rate: float
    epochs: int
    class_weights: str  # compute_class_weights mode

    def layers(self, n_classes: int, filters: int | None = None) -> list:
        return self.build(n_classes, filters or self.filters)


PRESETS: dict[str, Preset] = {
    "level0": Preset("level0", level0_layers, 48, "adam", 1e-3, 5, "preset"),
    "degree1": Preset("degree1", degree_layers, 128, "rmsprop", 1e-3, 25, "uniform"),
    "degree2": Preset("degree2", degree_layers, 128, "rmsprop", 1e-3, 25, "uniform"),
    "degree3": Preset("degree3", residual_layers, 32, "rmsprop", 1e-3, 25, "uniform"),
}
# alternates using the lower RMSProp rate and longer level-0 schedule
PRESETS.update({
    "level0-text": replace(PRESETS["level0"], name="level0-text", optimizer="rmsprop", learning_rate=1e-4, epochs=20),
    **{f"degree{d}-text": replace(PRESETS[f"degree{d}"], name=f"degree{d}-text", learning_rate=1e-4)
       for d in (1, 2, 3)},
})


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def preset_for(level: int, degree: int | None = None) -> Preset:
    return PRESETS["level0"] if level == 0 else get_preset(f"degree{degree}")
