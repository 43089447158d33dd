"""Mini-batch training with per-epoch history and best-val checkpointing."""
from __future__ import annotations

import contextlib
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from ..dataset import AugmentParams, ClassWeights, augment
from .losses import weighted_cross_entropy
from .model import Model
from .optim import OPTIMIZERS

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, what: str = "model"):
        super().__init__(f"{what}: loss became non-finite in epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    epochs: int = 5
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    batch_size: int = 32
    class_weights: ClassWeights = field(default_factory=ClassWeights)
    augment: AugmentParams | None = None
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainedModel:
    """A model plus what it predicts: ``labels[i]`` is the label value of output i."""

    model: Model
    labels: list[int]
    history: list[EpochRecord] = field(default_factory=list)
    class_keys: list[tuple[int, ...]] | None = None
    name: str = "model"

    @property
    def input_px(self) -> int:
        return self.model.input_shape[0]

    @property
    def n_classes(self) -> int:
        return self.model.n_classes

    def predict_proba(self, images: np.ndarray) -> np.ndarray:
        return self.model.predict_proba(to_input(images, self.model.dtype))


def to_input(images: np.ndarray, dtype=np.float64) -> np.ndarray:
    """(N, H, W) uint8 rasters -> (N, H, W, 1) intensities in [0, 1]."""
    images = np.asarray(images)
    if images.ndim == 3:
        images = images[..., None]
    return images.astype(dtype) / 255.0


@contextlib.contextmanager
def single_threaded(enabled: bool = True):
    """Pin BLAS to one thread so repeated runs are bit-identical."""
    if enabled:
        with threadpool_limits(limits=1):
            yield
    else:
        yield


def argmax(probs: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum: ties resolve to the lowest index
    return np.argmax(probs, axis=-1)


def evaluate_loss(model: Model, x: np.ndarray, y: np.ndarray, weights=None, batch_size: int = 256):
    """Unweighted-by-default mean loss and accuracy in inference mode."""
    if len(x) == 0:
        return float("nan"), float("nan")
    total, correct = 0.0, 0
    for i in range(0, len(x), batch_size):
        p = model.forward(x[i:i + batch_size])
        loss, _ = weighted_cross_entropy(p, y[i:i + batch_size], weights)
        total += loss * len(p)
        correct += int((argmax(p) == y[i:i + batch_size]).sum())
    return total / len(x), correct / len(x)


def train(model: Model, images: np.ndarray, labels: np.ndarray, val_images: np.ndarray | None,
          val_labels: np.ndarray | None, config: TrainConfig, *, label_values: Sequence[int] | None = None,
          name: str = "model", on_epoch: Callable[[EpochRecord], None] | None = None) -> TrainedModel:
    """Fit ``model`` on uint8 rasters; ``labels`` are output indices.

    Class weights are looked up by label value (``label_values[i]`` for
    output ``i``). The returned model carries the parameters of the epoch
    with the best validation accuracy (earliest on ties).
    """
    if not model.ends_in_softmax:
        raise ValueError("training needs a model ending in Softmax")
    n_out = model.n_classes
    label_values = list(range(n_out)) if label_values is None else list(label_values)
    if len(label_values) != n_out:
        raise ValueError(f"{len(label_values)} label values for {n_out} outputs")
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0:
        raise ValueError("empty training set")
    if labels.min() < 0 or labels.max() >= n_out:
        raise ValueError(f"labels outside [0, {n_out})")
    w = config.class_weights.vector(label_values)
    step = OPTIMIZERS[config.optimizer]
    state: dict = {}
    xv = to_input(val_images, model.dtype) if val_images is not None and len(val_images) else None
    yv = np.asarray(val_labels, dtype=np.int64) if xv is not None else None
    n = len(images)
    history: list[EpochRecord] = []
    best_acc, best_params = -1.0, None
    for epoch in range(1, config.epochs + 1):
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        total, correct = 0.0, 0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            batch = images[idx]
            if config.augment is not None:
                batch = np.stack([augment(r, config.augment, epoch * n + int(i)) for r, i in zip(batch, idx)])
            x = to_input(batch, model.dtype)
            y = labels[idx]
            probs = model.forward(x, training=True, rng=np.random.default_rng([config.seed, epoch, b, 1]))
            loss, dprobs = weighted_cross_entropy(probs, y, w)
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, name)
            model.backward(dprobs)
            step(model.params(), model.grads(), state, config.learning_rate)
            total += loss * len(idx)
            correct += int((argmax(probs) == y).sum())
        val_loss, val_acc = evaluate_loss(model, xv, yv) if xv is not None else (float("nan"), float("nan"))
        rec = EpochRecord(epoch, total / n, correct / n, val_loss, val_acc)
        if not math.isfinite(rec.train_loss):
            raise TrainingDiverged(epoch, name)
        history.append(rec)
        log.info("%s epoch %d: loss %.4f acc %.4f val_loss %.4f val_acc %.4f", name, *vars(rec).values())
        if on_epoch:
            on_epoch(rec)
        score = val_acc if xv is not None else float(epoch)
        if score > best_acc:
            best_acc, best_params = score, [p.copy() for p in model.params()]
    if best_params is not None:
        model.set_params(best_params)
    return TrainedModel(model, label_values, history, name=name)
