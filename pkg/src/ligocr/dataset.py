"""Corpus generation, splitting, augmentation, class weights and persistence.

A corpus is a list of labeled rasters plus a manifest. Every sample carries
its degree (number of glyphs, the level-0 label), a class id dense within its
degree (the level-1 label), the base-form sequence it was composed from and
the style that rendered it.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .alphabet import AlphabetSpec, StyleSpec, base_form_dedup, compose_ligature
from .ccl import DEFAULT_AREA_FRACTION, DEFAULT_CONNECTIVITY, Connectivity, is_single_component, strip_small_components
from .permute import k_permutations
from .pgm import PGMError, encode_pgm, read_pgm

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
SPLITS = ("train", "val")
LEVEL0_PRESET_WEIGHTS = {1: 350.0, 2: 30.0, 3: 10.0}


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class CCSettings:
    conn: Connectivity = DEFAULT_CONNECTIVITY
    area_fraction: float = DEFAULT_AREA_FRACTION

    def accept(self, raster: np.ndarray) -> tuple[bool, np.ndarray]:
        stripped = strip_small_components(raster, self.conn, self.area_fraction)
        return is_single_component(stripped, self.conn), stripped


@dataclass(frozen=True)
class SampleRecord:
    path: str
    degree: int
    class_id: int
    class_key: tuple[int, ...]
    style_id: int
    split: str = "train"

    def to_json(self) -> str:
        d = dict(path=self.path, degree=self.degree, class_id=self.class_id,
                 class_key=list(self.class_key), style_id=self.style_id, split=self.split)
        return json.dumps(d, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class CorpusManifest:
    alphabet: str
    style_count: int
    image_px: int
    class_counts: dict[int, int]
    samples: tuple[SampleRecord, ...]

    def class_keys(self, degree: int) -> list[tuple[int, ...]]:
        keys = {s.class_id: s.class_key for s in self.samples if s.degree == degree}
        return [keys[i] for i in range(len(keys))]

    @property
    def degrees(self) -> list[int]:
        return sorted(self.class_counts)

    def checksum(self) -> str:
        body = "\n".join(s.to_json() for s in self.samples)
        return hashlib.sha256(body.encode()).hexdigest()


@dataclass
class Corpus:
    manifest: CorpusManifest
    rasters: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.rasters)

    def select(self, degree: int | None = None, split: str | None = None) -> list[int]:
        return [i for i, s in enumerate(self.manifest.samples)
                if (degree is None or s.degree == degree) and (split is None or s.split == split)]

    def arrays(self, degree: int | None = None, split: str | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Stacked rasters and labels.

        With ``degree=None`` the labels are degrees (the level-0 task),
        otherwise class ids within that degree.
        """
        idx = self.select(degree, split)
        px = self.manifest.image_px
        x = np.stack([self.rasters[i] for i in idx]) if idx else np.zeros((0, px, px), np.uint8)
        samples = self.manifest.samples
        y = np.array([samples[i].degree if degree is None else samples[i].class_id for i in idx], dtype=np.int64)
        return x, y


def sample_filename(degree: int, class_id: int, style_id: int) -> str:
    return f"{degree}_{class_id}_{style_id}.pgm"


def _compose_job(args):
    seq, styles, image_px, connector, cc, max_degree = args
    out = []
    for style in styles:
        raster = compose_ligature(seq, style, image_px, connector=connector, max_degree=max_degree)
        ok, stripped = cc.accept(raster)
        out.append((ok, stripped))
    return out


def generate_corpus(alphabet: AlphabetSpec, styles: Sequence[StyleSpec], max_degree: int = 3,
                    image_px: int = 100, cc: CCSettings = CCSettings(), workers: int = 1) -> Corpus:
    """Permute base forms, compose per style, keep single-component ligatures.

    A base-form sequence becomes a class only if it survives the filter under
    every style, so each degree holds exactly ``classes x styles`` samples.
    """
    if max_degree not in (1, 2, 3):
        raise CorpusError(f"max_degree must be 1, 2 or 3, got {max_degree}")
    if not styles:
        raise CorpusError("at least one style is required")
    reps = base_form_dedup(alphabet)
    styles = list(styles)
    samples: list[SampleRecord] = []
    rasters: list[np.ndarray] = []
    class_counts: dict[int, int] = {}
    for degree in range(1, max_degree + 1):
        seqs = list(k_permutations(reps, degree))
        jobs = [(seq, styles, image_px, alphabet.connector, cc, max_degree) for seq in seqs]
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = list(pool.map(_compose_job, jobs, chunksize=64))
        else:
            results = [_compose_job(j) for j in jobs]
        kept = []
        partial = 0
        for seq, res in zip(seqs, results):
            flags = [ok for ok, _ in res]
            if all(flags):
                kept.append((tuple(g.base_form_id for g in seq), [r for _, r in res]))
            elif any(flags):
                partial += 1
        if partial:
            log.warning("degree %d: %d sequences pass under some styles only; dropped", degree, partial)
        if not kept:
            raise CorpusError(f"degree {degree}: no sequence survives the single-component filter")
        kept.sort(key=lambda kv: kv[0])
        class_counts[degree] = len(kept)
        for class_id, (key, per_style) in enumerate(kept):
            for style, raster in zip(styles, per_style):
                samples.append(SampleRecord(sample_filename(degree, class_id, style.style_id),
                                            degree, class_id, key, style.style_id))
                rasters.append(raster)
        log.info("degree %d: %d of %d sequences kept", degree, len(kept), len(seqs))
    manifest = CorpusManifest(alphabet.name, len(styles), image_px, class_counts, tuple(samples))
    return Corpus(manifest, rasters)


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def split_corpus(corpus: Corpus | CorpusManifest, val_fraction: float = 0.2, seed: int = 0):
    """Stratified train/val split per (degree, class_id); deterministic in seed."""
    if not 0.0 < val_fraction < 1.0:
        raise CorpusError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    manifest = corpus.manifest if isinstance(corpus, Corpus) else corpus
    groups: dict[tuple[int, int], list[int]] = defaultdict(list)
    for i, s in enumerate(manifest.samples):
        groups[(s.degree, s.class_id)].append(i)
    split = ["train"] * len(manifest.samples)
    for (degree, class_id), idx in sorted(groups.items()):
        n = len(idx)
        if n < 2:
            raise CorpusError(f"class {class_id} of degree {degree} has {n} sample(s); a stratified split needs 2")
        n_val = min(max(_round_half_up(val_fraction * n), 1), n - 1)
        rng = np.random.default_rng([seed, degree, class_id])
        for j in rng.permutation(n)[:n_val]:
            split[idx[j]] = "val"
    samples = tuple(replace(s, split=sp) for s, sp in zip(manifest.samples, split))
    new = replace(manifest, samples=samples)
    return Corpus(new, corpus.rasters) if isinstance(corpus, Corpus) else new


# --------------------------------------------------------------------------
# augmentation


@dataclass(frozen=True)
class AugmentParams:
    rotation_max: float = 10.0
    zoom_range: tuple[float, float] = (0.9, 1.1)
    flip_horizontal: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rotation_max <= 15.0:
            raise ValueError(f"rotation_max must lie in [0, 15] degrees, got {self.rotation_max}")
        lo, hi = self.zoom_range
        if not (0.5 < lo <= hi < 1.5):
            raise ValueError(f"zoom_range must satisfy 0.5 < min <= max < 1.5, got {self.zoom_range}")

    @property
    def neutral(self) -> bool:
        return self.rotation_max == 0 and self.zoom_range == (1.0, 1.0) and not self.flip_horizontal


def augment(raster: np.ndarray, params: AugmentParams, draw_index: int) -> np.ndarray:
    """Random flip, rotation and zoom about the center, nearest-neighbour.

    The draw depends only on ``(params.seed, draw_index)``.
    """
    raster = np.asarray(raster)
    rng = np.random.default_rng([params.seed, draw_index])
    flip = bool(rng.random() < 0.5)
    angle = rng.uniform(-params.rotation_max, params.rotation_max)
    zoom = rng.uniform(*params.zoom_range)
    out = raster[:, ::-1] if params.flip_horizontal and flip else raster
    if angle == 0.0 and zoom == 1.0:
        return np.array(out, copy=True)
    h, w = out.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    t = math.radians(angle)
    c, s = math.cos(t), math.sin(t)
    # inverse map: output pixel -> source pixel
    dy, dx = (yy - cy) / zoom, (xx - cx) / zoom
    sy = c * dy - s * dx + cy
    sx = s * dy + c * dx + cx
    iy, ix = np.floor(sy + 0.5).astype(np.int64), np.floor(sx + 0.5).astype(np.int64)
    inside = (iy >= 0) & (iy < h) & (ix >= 0) & (ix < w)
    res = np.zeros_like(out)
    res[inside] = out[iy[inside], ix[inside]]
    return res


# --------------------------------------------------------------------------
# class weights


@dataclass(frozen=True)
class ClassWeights:
    weights: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        bad = {k: v for k, v in self.weights.items() if not v > 0}
        if bad:
            raise ValueError(f"class weights must be positive: {bad}")

    def __getitem__(self, label: int) -> float:
        return self.weights.get(label, 1.0)

    def vector(self, labels: Sequence[int]) -> np.ndarray:
        """Weights indexed by position in ``labels`` (model output order)."""
        return np.array([self[l] for l in labels], dtype=np.float64)


def compute_class_weights(data: CorpusManifest | Iterable[int], mode: str = "balanced") -> ClassWeights:
    """Weights per label value; a manifest is read as its level-0 (degree) labels.

    ``preset`` is the fixed level-0 map {1: 350, 2: 30, 3: 10}; ``balanced``
    is total / (classes * count); ``uniform`` is all ones.
    """
    if isinstance(data, CorpusManifest):
        labels = [s.degree for s in data.samples]
    else:
        labels = list(data)
    if not labels:
        raise ValueError("cannot weight an empty label set")
    counts = Counter(labels)
    if mode == "uniform":
        return ClassWeights({c: 1.0 for c in sorted(counts)})
    if mode == "balanced":
        total, k = len(labels), len(counts)
        return ClassWeights({c: total / (k * counts[c]) for c in sorted(counts)})
    if mode == "preset":
        missing = sorted(c for c in counts if c not in LEVEL0_PRESET_WEIGHTS)
        if missing:
            log.warning("classes %s have no preset weight; using 1", missing)
        return ClassWeights({c: LEVEL0_PRESET_WEIGHTS.get(c, 1.0) for c in sorted(counts)})
    raise ValueError(f"unknown class-weight mode {mode!r}")


# --------------------------------------------------------------------------
# persistence


def save_corpus(corpus: Corpus, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    m = corpus.manifest
    for rec, raster in zip(m.samples, corpus.rasters):
        (directory / rec.path).write_bytes(encode_pgm(raster))
    header = dict(alphabet=m.alphabet, style_count=m.style_count, image_px=m.image_px,
                  class_counts={str(k): v for k, v in sorted(m.class_counts.items())},
                  checksum=m.checksum(), samples=len(m.samples))
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines += [s.to_json() for s in m.samples]
    path = directory / MANIFEST_NAME
    path.write_text("\n".join(lines) + "\n")
    return path


def _parse_sample(line: str, lineno: int, path: Path) -> SampleRecord:
    try:
        d = json.loads(line)
        rec = SampleRecord(str(d["path"]), int(d["degree"]), int(d["class_id"]),
                           tuple(int(v) for v in d["class_key"]), int(d["style_id"]), str(d["split"]))
    except (ValueError, KeyError, TypeError) as exc:
        raise CorpusError(f"{path}:{lineno}: malformed manifest line ({exc})") from None
    if rec.split not in SPLITS or rec.degree not in (1, 2, 3) or len(rec.class_key) != rec.degree:
        raise CorpusError(f"{path}:{lineno}: invalid sample record {line!r}")
    return rec


def load_corpus(directory: str | Path) -> Corpus:
    directory = Path(directory)
    path = directory / MANIFEST_NAME
    if not path.is_file():
        raise CorpusError(f"missing manifest {path}")
    lines = path.read_text().splitlines()
    if not lines:
        raise CorpusError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
        class_counts = {int(k): int(v) for k, v in header["class_counts"].items()}
        expected = header["checksum"]
        image_px = int(header["image_px"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CorpusError(f"{path}:1: malformed manifest header ({exc})") from None
    samples = tuple(_parse_sample(l, i, path) for i, l in enumerate(lines[1:], start=2) if l.strip())
    manifest = CorpusManifest(str(header["alphabet"]), int(header["style_count"]), image_px,
                              class_counts, samples)
    if manifest.checksum() != expected:
        raise CorpusError(f"{path}: checksum mismatch (manifest edited or corrupted)")
    rasters = []
    for rec in samples:
        img = directory / rec.path
        if not img.is_file():
            raise CorpusError(f"missing image file {img}")
        try:
            r = read_pgm(img)
        except PGMError as exc:
            raise CorpusError(str(exc)) from None
        if r.shape != (image_px, image_px):
            raise CorpusError(f"{img}: expected {image_px}x{image_px}, got {r.shape[1]}x{r.shape[0]}")
        rasters.append(r)
    return Corpus(manifest, rasters)
