"""Model files and history CSVs.

Model file layout (all integers little-endian uint32)::

    b"UCNN" | version | descriptor length | descriptor (UTF-8 JSON)
    | tensor count | per tensor: ndim, dims..., float64 LE data

The descriptor holds the layer table, input shape, dtype, label values and
optional class keys. Tensors follow declaration order.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from . import layers as L
from .model import Model
from .train import EpochRecord, TrainedModel

MAGIC = b"UCNN"
VERSION = 1


class ModelFileError(ValueError):
    pass


_CONFIG_TYPES = {c.__name__: c for c in (L.Conv2D, L.MaxPool, L.GlobalAveragePool, L.Dense, L.Dropout,
                                         L.Activation, L.Softmax, L.Residual)}


def config_to_dict(cfg) -> dict:
    d = {"type": type(cfg).__name__}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "inner":
            v = [config_to_dict(c) for c in v]
        elif isinstance(v, tuple):
            v = list(v)
        d[f.name] = v
    return d


def config_from_dict(d: dict):
    d = dict(d)
    try:
        cls = _CONFIG_TYPES[d.pop("type")]
    except KeyError as exc:
        raise ModelFileError(f"unknown layer type {exc}") from None
    if "inner" in d:
        d["inner"] = tuple(config_from_dict(c) for c in d["inner"])
    return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def encode_model(tm: TrainedModel) -> bytes:
    m = tm.model
    desc = dict(name=tm.name, layers=[config_to_dict(c) for c in m.configs],
                input_shape=list(m.input_shape), dtype=m.dtype.name, labels=list(tm.labels),
                class_keys=[list(k) for k in tm.class_keys] if tm.class_keys is not None else None)
    blob = json.dumps(desc, sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<II", VERSION, len(blob)), blob]
    params = m.params()
    parts.append(struct.pack("<I", len(params)))
    for p in params:
        parts.append(struct.pack(f"<I{p.ndim}I", p.ndim, *p.shape))
        parts.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_model(data: bytes, name: str = "<bytes>") -> TrainedModel:
    if data[:4] != MAGIC:
        raise ModelFileError(f"{name}: not a model file (bad magic)")
    try:
        version, n = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise ModelFileError(f"{name}: unsupported format version {version}")
        off = 12
        desc = json.loads(data[off:off + n])
        off += n
        (count,) = struct.unpack_from("<I", data, off)
        off += 4
        tensors = []
        for _ in range(count):
            (ndim,) = struct.unpack_from("<I", data, off)
            shape = struct.unpack_from(f"<{ndim}I", data, off + 4)
            off += 4 + 4 * ndim
            size = int(np.prod(shape)) * 8
            if off + size > len(data):
                raise ModelFileError(f"{name}: truncated tensor data")
            tensors.append(np.frombuffer(data, "<f8", int(np.prod(shape)), off).reshape(shape))
            off += size
    except (struct.error, ValueError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise ModelFileError(f"{name}: corrupt model file ({exc})") from None
    if off != len(data):
        raise ModelFileError(f"{name}: {len(data) - off} trailing bytes")
    configs = [config_from_dict(c) for c in desc["layers"]]
    model = Model(configs, tuple(desc["input_shape"]), dtype=np.dtype(desc["dtype"]))
    model.set_params(tensors)
    keys = desc.get("class_keys")
    return TrainedModel(model, list(desc["labels"]), [], [tuple(k) for k in keys] if keys is not None else None,
                        desc.get("name", "model"))


def save_model(tm: TrainedModel, path: str | Path) -> None:
    Path(path).write_bytes(encode_model(tm))


def load_model(path: str | Path) -> TrainedModel:
    path = Path(path)
    return decode_model(path.read_bytes(), str(path))


HISTORY_FIELDS = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]


def write_history(history, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_FIELDS)
        for r in history:
            w.writerow([r.epoch] + [repr(float(getattr(r, f))) for f in HISTORY_FIELDS[1:]])


def read_history(path: str | Path) -> list[EpochRecord]:
    with open(path, newline="") as fh:
        return [EpochRecord(int(row["epoch"]), *(float(row[f]) for f in HISTORY_FIELDS[1:]))
                for row in csv.DictReader(fh)]
