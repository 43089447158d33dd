"""Binary PGM (P5, maxval 255) reading and writing."""
from __future__ import annotations

from pathlib import Path

import numpy as np


class PGMError(ValueError):
    pass


def encode_pgm(raster: np.ndarray) -> bytes:
    raster = np.asarray(raster)
    if raster.ndim != 2 or raster.dtype != np.uint8:
        raise ValueError(f"expected a 2-D uint8 raster, got {raster.dtype} {raster.shape}")
    h, w = raster.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(raster).tobytes()


def write_pgm(path: str | Path, raster: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(raster))


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise PGMError("truncated header")
        c = data[i:i + 1]
        if c == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    # exactly one whitespace byte separates the header from the raster
    return tokens, i + 1


def decode_pgm(data: bytes, name: str = "<bytes>") -> np.ndarray:
    try:
        (magic, w, h, maxval), offset = _header_tokens(data, 4)
        w, h, maxval = int(w), int(h), int(maxval)
    except (PGMError, ValueError) as exc:
        raise PGMError(f"{name}: malformed PGM header ({exc})") from None
    if magic not in (b"P5", b"P2"):
        raise PGMError(f"{name}: unsupported magic {magic!r}")
    if w <= 0 or h <= 0 or not 0 < maxval < 256:
        raise PGMError(f"{name}: unsupported geometry {w}x{h} maxval {maxval}")
    if magic == b"P2":
        vals = data[offset - 1:].split()
        if len(vals) < w * h:
            raise PGMError(f"{name}: truncated pixel data ({len(vals)} of {w * h} values)")
        pix = np.array([int(v) for v in vals[:w * h]], dtype=np.int64)
    else:
        body = data[offset:offset + w * h]
        if len(body) != w * h:
            raise PGMError(f"{name}: truncated pixel data ({len(body)} of {w * h} bytes)")
        pix = np.frombuffer(body, dtype=np.uint8).astype(np.int64)
    if maxval != 255:
        pix = (pix * 255 + maxval // 2) // maxval
    return pix.astype(np.uint8).reshape(h, w)


def read_pgm(path: str | Path) -> np.ndarray:
    path = Path(path)
    return decode_pgm(path.read_bytes(), str(path))
