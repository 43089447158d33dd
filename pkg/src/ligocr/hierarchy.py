"""Two-level classifier: degree first, then the component within that degree."""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import AugmentParams, Corpus, compute_class_weights
from .nn.io import load_model, save_model, write_history
from .nn.model import Model
from .nn.presets import get_preset
from .nn.train import TrainConfig, TrainedModel, TrainingDiverged, train

log = logging.getLogger(__name__)

DEGREES = (1, 2, 3)


class HierarchyError(ValueError):
    pass


@dataclass
class HierarchicalModel:
    level0: TrainedModel
    level1: dict[int, TrainedModel]

    def __post_init__(self):
        degrees = list(self.level0.labels)
        if self.level0.n_classes != len(degrees):
            raise HierarchyError("level-0 output count does not match its degree labels")
        missing = [d for d in degrees if d not in self.level1]
        if missing:
            raise HierarchyError(f"no level-1 model for degree(s) {missing}")
        sizes = {self.level0.input_px} | {m.input_px for m in self.level1.values()}
        if len(sizes) != 1:
            raise HierarchyError(f"models disagree on input size: {sorted(sizes)}")

    @property
    def input_px(self) -> int:
        return self.level0.input_px

    @property
    def degrees(self) -> list[int]:
        return list(self.level0.labels)


# --------------------------------------------------------------------------
# training


@dataclass
class ModelSettings:
    """Per-model overrides on top of a preset; ``None`` keeps the preset value.

    ``batch_size`` and ``augment`` fall back to the hierarchy-wide values
    when left unset.
    """

    preset: str
    epochs: int | None = None
    learning_rate: float | None = None
    filters: int | None = None
    batch_size: int | None = None
    augment: AugmentParams | None = None


@dataclass
class HierarchySettings:
    level0: ModelSettings = field(default_factory=lambda: ModelSettings("level0"))
    level1: dict[int, ModelSettings] = field(
        default_factory=lambda: {d: ModelSettings(f"degree{d}") for d in DEGREES})
    batch_size: int = 32
    augment: AugmentParams | None = None
    seed: int = 0


def train_model(corpus: Corpus, level: int, degree: int | None = None, settings: ModelSettings | None = None, *,
                batch_size: int = 32, augment: AugmentParams | None = None, seed: int = 0) -> TrainedModel:
    """Train one network of the tree on the corpus train split, validating on val."""
    if level not in (0, 1):
        raise HierarchyError(f"level must be 0 or 1, got {level}")
    if level == 1 and degree is None:
        raise HierarchyError("a level-1 model needs a degree")
    if settings is None:
        settings = ModelSettings("level0" if level == 0 else f"degree{degree}")
    preset = get_preset(settings.preset)
    manifest = corpus.manifest
    px = manifest.image_px
    if level == 0:
        name = "level0"
        labels = manifest.degrees
        x, y = corpus.arrays(None, "train")
        xv, yv = corpus.arrays(None, "val")
        y, yv = (np.searchsorted(labels, v) for v in (y, yv))
        weights = compute_class_weights(manifest, preset.class_weights)
        keys = None
    else:
        name = f"degree{degree}"
        if degree not in manifest.class_counts:
            raise HierarchyError(f"corpus has no degree-{degree} samples")
        keys = manifest.class_keys(degree)
        labels = list(range(len(keys)))
        x, y = corpus.arrays(degree, "train")
        xv, yv = corpus.arrays(degree, "val")
        weights = compute_class_weights(labels, preset.class_weights)
    if len(x) == 0:
        raise HierarchyError(f"{name}: empty training split (run split_corpus first)")
    config = TrainConfig(epochs=settings.epochs or preset.epochs,
                         learning_rate=settings.learning_rate or preset.learning_rate,
                         optimizer=preset.optimizer, batch_size=settings.batch_size or batch_size,
                         class_weights=weights, augment=settings.augment or augment, seed=seed)
    model = Model(preset.layers(len(labels), settings.filters), (px, px, 1), seed=seed)
    try:
        tm = train(model, x, y, xv, yv, config, label_values=labels, name=name)
    except TrainingDiverged as exc:
        raise TrainingDiverged(exc.epoch, name) from None
    tm.class_keys = keys
    return tm


def train_hierarchy(corpus: Corpus, settings: HierarchySettings | None = None) -> HierarchicalModel:
    """Four independent trainings joined into one tree."""
    settings = settings or HierarchySettings()
    present = set(corpus.manifest.class_counts)
    for d in DEGREES:
        if d not in present:
            raise HierarchyError(f"corpus is missing degree {d}")
    common = dict(batch_size=settings.batch_size, augment=settings.augment, seed=settings.seed)
    level0 = train_model(corpus, 0, settings=settings.level0, **common)
    level1 = {d: train_model(corpus, 1, d, settings.level1.get(d), **common) for d in DEGREES}
    return HierarchicalModel(level0, level1)


def desk_settings(seed: int = 0) -> HierarchySettings:
    """Small-budget configuration for 32 px corpora on a laptop CPU.

    Level 0 and degree 1 are trained to useful accuracy; degrees 2 and 3
    get narrow nets and a couple of epochs, enough to exercise routing but
    not to recognise their large class sets.
    """
    return HierarchySettings(
        level0=ModelSettings("level0", epochs=5, filters=16, batch_size=32),
        level1={1: ModelSettings("degree1", epochs=25, filters=32, batch_size=4, augment=AugmentParams(seed=seed)),
                2: ModelSettings("degree2", epochs=2, filters=8, batch_size=16),
                3: ModelSettings("degree3", epochs=1, filters=4, batch_size=64)},
        seed=seed)


def model_filename(name: str) -> str:
    return f"{name}.ucnn"


def save_hierarchy(hm: HierarchicalModel, directory: str | Path) -> list[Path]:
    """One model file and one history CSV per network."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for tm in [hm.level0, *(hm.level1[d] for d in sorted(hm.level1))]:
        save_model(tm, directory / model_filename(tm.name))
        write_history(tm.history, directory / f"{tm.name}_history.csv")
        written += [directory / model_filename(tm.name), directory / f"{tm.name}_history.csv"]
    return written


def load_hierarchy(directory: str | Path) -> HierarchicalModel:
    directory = Path(directory)
    path = directory / model_filename("level0")
    if not path.exists():
        raise HierarchyError(f"{path} not found")
    level0 = load_model(path)
    level1 = {}
    for d in level0.labels:
        path = directory / model_filename(f"degree{d}")
        if not path.exists():
            raise HierarchyError(f"{path} not found (needed for degree {d})")
        level1[d] = load_model(path)
    return HierarchicalModel(level0, level1)


# --------------------------------------------------------------------------
# prediction


@dataclass(frozen=True)
class Prediction:
    degree: int
    class_id: int
    class_key: tuple[int, ...] | None
    level0_probs: np.ndarray
    level1_probs: np.ndarray


def resample(raster: np.ndarray, px: int) -> np.ndarray:
    """Nearest-neighbour resize to ``px`` x ``px``."""
    h, w = raster.shape
    rows = (np.arange(px) * h) // px
    cols = (np.arange(px) * w) // px
    return raster[rows[:, None], cols[None, :]]


def _prepare(model: HierarchicalModel, rasters: np.ndarray) -> np.ndarray:
    rasters = np.asarray(rasters)
    px = model.input_px
    if rasters.shape[1:] != (px, px):
        warnings.warn(f"resampling {rasters.shape[1]}x{rasters.shape[2]} input to {px}x{px}", stacklevel=3)
        rasters = np.stack([resample(r, px) for r in rasters])
    return rasters


def predict_batch(model: HierarchicalModel, rasters: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray,
                                                                           dict[int, np.ndarray]]:
    """Vectorised routing: (degrees, class_ids, level-0 probs, level-1 probs by degree).

    ``level1`` probabilities are only computed for rasters routed to that
    degree; the dict maps degree to a (count, classes) array in input order.
    """
    rasters = _prepare(model, rasters)
    p0 = model.level0.predict_proba(rasters)
    degrees = np.asarray(model.degrees)[np.argmax(p0, axis=1)]
    class_ids = np.zeros(len(rasters), np.int64)
    p1 = {}
    for d in model.degrees:
        sel = np.flatnonzero(degrees == d)
        if len(sel):
            p1[d] = model.level1[d].predict_proba(rasters[sel])
            class_ids[sel] = np.argmax(p1[d], axis=1)
    return degrees, class_ids, p0, p1


def predict(model: HierarchicalModel, raster: np.ndarray) -> Prediction:
    degrees, class_ids, p0, p1 = predict_batch(model, np.asarray(raster)[None])
    d, c = int(degrees[0]), int(class_ids[0])
    keys = model.level1[d].class_keys
    return Prediction(d, c, keys[c] if keys is not None else None, p0[0], p1[d][0])


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class MetricsReport:
    dataset: str
    accuracy: float
    precision: float
    recall: float
    f1: float
    confusion: np.ndarray  # rows: true class, cols: predicted class
    labels: tuple = ()

    def row(self) -> list:
        return [self.dataset, self.accuracy, self.precision, self.recall, self.f1]


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), np.int64)
    np.add.at(cm, (np.asarray(y_true, np.int64), np.asarray(y_pred, np.int64)), 1)
    return cm


def report_from_confusion(cm: np.ndarray, dataset: str = "", labels: Sequence = ()) -> MetricsReport:
    """Accuracy and macro precision/recall/F1; empty denominators give 0."""
    cm = np.asarray(cm, np.int64)
    total = cm.sum()
    if total == 0:
        raise HierarchyError(f"{dataset or 'metrics'}: no samples to evaluate")
    tp = np.diag(cm).astype(np.float64)
    pred, true = cm.sum(axis=0), cm.sum(axis=1)
    prec = np.divide(tp, pred, out=np.zeros_like(tp), where=pred > 0)
    rec = np.divide(tp, true, out=np.zeros_like(tp), where=true > 0)
    denom = prec + rec
    f1 = np.divide(2 * prec * rec, denom, out=np.zeros_like(tp), where=denom > 0)
    return MetricsReport(dataset, float(tp.sum() / total), float(prec.mean()), float(rec.mean()),
                         float(f1.mean()), cm, tuple(labels))


def classification_report(y_true, y_pred, n_classes: int, dataset: str = "", labels: Sequence = ()) -> MetricsReport:
    return report_from_confusion(confusion_matrix(y_true, y_pred, n_classes), dataset, labels)


@dataclass(frozen=True)
class EvaluationReport:
    level0: MetricsReport
    level1: dict[int, MetricsReport]  # conditioned on the true degree
    joint_accuracy: float  # degree and class both right
    path_valid: bool

    @property
    def reports(self) -> list[MetricsReport]:
        return [self.level0, *(self.level1[d] for d in sorted(self.level1))]


def evaluate(model: HierarchicalModel, rasters: np.ndarray, degrees: Sequence[int],
             class_ids: Sequence[int]) -> EvaluationReport:
    """Level-0 metrics over degrees, per-degree metrics over components.

    Per-degree rows score the level-1 model on every sample whose true degree
    matches, whatever level 0 predicted; ``joint_accuracy`` counts a sample as
    right only when both stages are.
    """
    degrees = np.asarray(degrees, np.int64)
    class_ids = np.asarray(class_ids, np.int64)
    if len(degrees) == 0:
        raise HierarchyError("cannot evaluate an empty sample set")
    rasters = _prepare(model, rasters)
    pred_deg, pred_cls, _, _ = predict_batch(model, rasters)
    valid = all(0 <= c < model.level1[int(d)].n_classes for d, c in zip(pred_deg, pred_cls))
    labels = model.degrees
    index = {d: i for i, d in enumerate(labels)}
    level0 = classification_report([index[int(d)] for d in degrees], [index[int(d)] for d in pred_deg],
                                   len(labels), "level0", labels)
    level1 = {}
    for d in labels:
        sel = np.flatnonzero(degrees == d)
        if not len(sel):
            continue
        tm = model.level1[d]
        p = np.argmax(tm.predict_proba(rasters[sel]), axis=1)
        level1[d] = classification_report(class_ids[sel], p, tm.n_classes, f"degree{d}")
    joint = float(np.mean((pred_deg == degrees) & (pred_cls == class_ids)))
    return EvaluationReport(level0, level1, joint, valid)


def evaluate_corpus(model: HierarchicalModel, corpus: Corpus, split: str | None = "val") -> EvaluationReport:
    idx = corpus.select(None, split)
    samples = corpus.manifest.samples
    rasters = np.stack([corpus.rasters[i] for i in idx]) if idx else np.zeros((0, 1, 1), np.uint8)
    return evaluate(model, rasters, [samples[i].degree for i in idx], [samples[i].class_id for i in idx])


METRIC_FIELDS = ["dataset", "accuracy", "precision", "recall", "f1"]


def write_reports(report: EvaluationReport, directory: str | Path) -> list[Path]:
    """``metrics.csv`` (one row per dataset plus joint accuracy) and one confusion CSV per dataset."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / "metrics.csv"]
    with open(paths[0], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for r in report.reports:
            w.writerow([r.dataset] + [repr(v) for v in r.row()[1:]])
        w.writerow(["joint", repr(report.joint_accuracy), "", "", ""])
    for r in report.reports:
        path = directory / f"confusion_{r.dataset}.csv"
        labels = list(r.labels) or list(range(len(r.confusion)))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["true\\pred", *labels])
            for lab, row in zip(labels, r.confusion):
                w.writerow([lab, *row.tolist()])
        paths.append(path)
    return paths
