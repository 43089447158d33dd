"""Connected-component labeling of binary rasters.

``two_pass_label`` is the production path: one raster scan assigning
provisional labels and recording equivalences in a union-find (path
compression, union by rank), then a second scan resolving roots, compacting
labels to 1..L in order of first row-major occurrence and accumulating
component statistics. ``flood_fill_label`` is a breadth-first labeler kept
only as an independent oracle; it numbers components the same way, so the
two label maps are directly comparable.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from .alphabet import FOREGROUND_THRESHOLD


class Connectivity(str, Enum):
    FOUR = "four"
    EIGHT = "eight"

    @classmethod
    def parse(cls, value) -> "Connectivity":
        if isinstance(value, cls):
            return value
        aliases = {4: cls.FOUR, 8: cls.EIGHT, "4": cls.FOUR, "8": cls.EIGHT}
        if value in aliases:
            return aliases[value]
        return cls(value)


DEFAULT_CONNECTIVITY = Connectivity.EIGHT
DEFAULT_AREA_FRACTION = 0.1


@dataclass(frozen=True)
class ComponentStats:
    label: int
    area: int
    bbox: tuple[int, int, int, int]  # min_x, min_y, max_x, max_y
    centroid: tuple[float, float]  # x, y


def _foreground(raster: np.ndarray) -> np.ndarray:
    raster = np.asarray(raster)
    if raster.ndim != 2 or raster.size == 0:
        raise ValueError(f"raster must be a non-empty 2-D array, got shape {raster.shape}")
    return np.ascontiguousarray(raster >= FOREGROUND_THRESHOLD)


@njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def _union(parent, rank, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return ra
    if rank[ra] < rank[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    if rank[ra] == rank[rb]:
        rank[ra] += 1
    return ra


@njit(cache=True)
def _two_pass(fg, eight):
    h, w = fg.shape
    labels = np.zeros((h, w), np.int64)
    parent = np.zeros(h * w + 1, np.int64)
    rank = np.zeros(h * w + 1, np.int64)
    nxt = 1
    for y in range(h):
        for x in range(w):
            if not fg[y, x]:
                continue
            cur = 0
            # already-visited neighbours: W, NW, N, NE
            for k in range(4):
                if k == 0:
                    yy, xx = y, x - 1
                elif k == 1:
                    if not eight:
                        continue
                    yy, xx = y - 1, x - 1
                elif k == 2:
                    yy, xx = y - 1, x
                else:
                    if not eight:
                        continue
                    yy, xx = y - 1, x + 1
                if yy < 0 or xx < 0 or xx >= w:
                    continue
                lab = labels[yy, xx]
                if lab == 0:
                    continue
                if cur == 0:
                    cur = lab
                else:
                    _union(parent, rank, cur, lab)
            if cur == 0:
                parent[nxt] = nxt
                cur = nxt
                nxt += 1
            labels[y, x] = cur

    remap = np.zeros(nxt, np.int64)
    area = np.zeros(nxt, np.int64)
    bbox = np.zeros((nxt, 4), np.int64)
    sums = np.zeros((nxt, 2), np.float64)
    count = 0
    for y in range(h):
        for x in range(w):
            lab = labels[y, x]
            if lab == 0:
                continue
            root = _find(parent, lab)
            final = remap[root]
            if final == 0:
                count += 1
                final = count
                remap[root] = final
                bbox[final, 0] = x
                bbox[final, 1] = y
                bbox[final, 2] = x
                bbox[final, 3] = y
            labels[y, x] = final
            area[final] += 1
            if x < bbox[final, 0]:
                bbox[final, 0] = x
            if x > bbox[final, 2]:
                bbox[final, 2] = x
            bbox[final, 3] = y
            sums[final, 0] += x
            sums[final, 1] += y
    return labels, count, area[1:count + 1], bbox[1:count + 1], sums[1:count + 1]


@njit(cache=True)
def _flood(fg, eight):
    h, w = fg.shape
    labels = np.zeros((h, w), np.int64)
    qy = np.empty(h * w, np.int64)
    qx = np.empty(h * w, np.int64)
    count = 0
    for sy in range(h):
        for sx in range(w):
            if not fg[sy, sx] or labels[sy, sx] != 0:
                continue
            count += 1
            labels[sy, sx] = count
            head = 0
            tail = 1
            qy[0] = sy
            qx[0] = sx
            while head < tail:
                y = qy[head]
                x = qx[head]
                head += 1
                for dy in range(-1, 2):
                    for dx in range(-1, 2):
                        if dy == 0 and dx == 0:
                            continue
                        if not eight and dy != 0 and dx != 0:
                            continue
                        yy = y + dy
                        xx = x + dx
                        if 0 <= yy < h and 0 <= xx < w and fg[yy, xx] and labels[yy, xx] == 0:
                            labels[yy, xx] = count
                            qy[tail] = yy
                            qx[tail] = xx
                            tail += 1
    return labels


def two_pass_label(raster: np.ndarray, conn=DEFAULT_CONNECTIVITY) -> tuple[np.ndarray, list[ComponentStats]]:
    """Label foreground components; returns the label map and per-label stats."""
    fg = _foreground(raster)
    eight = Connectivity.parse(conn) is Connectivity.EIGHT
    labels, count, area, bbox, sums = _two_pass(fg, eight)
    stats = [
        ComponentStats(
            label=i + 1,
            area=int(area[i]),
            bbox=tuple(int(v) for v in bbox[i]),
            centroid=(sums[i, 0] / area[i], sums[i, 1] / area[i]),
        )
        for i in range(count)
    ]
    return labels.astype(np.uint32), stats


def flood_fill_label(raster: np.ndarray, conn=DEFAULT_CONNECTIVITY) -> np.ndarray:
    """Breadth-first reference labeler (first-occurrence numbering)."""
    fg = _foreground(raster)
    return _flood(fg, Connectivity.parse(conn) is Connectivity.EIGHT).astype(np.uint32)


def count_components(raster: np.ndarray, conn=DEFAULT_CONNECTIVITY) -> int:
    return len(two_pass_label(raster, conn)[1])


def strip_small_components(raster: np.ndarray, conn=DEFAULT_CONNECTIVITY,
                           area_fraction: float = DEFAULT_AREA_FRACTION) -> np.ndarray:
    """Blank every component smaller than ``area_fraction`` of the largest one."""
    if not 0.0 < area_fraction < 1.0:
        raise ValueError(f"area_fraction must lie in (0, 1), got {area_fraction}")
    labels, stats = two_pass_label(raster, conn)
    out = np.array(raster, copy=True)
    if not stats:
        return out
    areas = np.array([0] + [s.area for s in stats])
    small = areas < area_fraction * areas.max()
    small[0] = False
    out[small[labels]] = 0
    return out


def is_single_component(raster: np.ndarray, conn=DEFAULT_CONNECTIVITY) -> bool:
    return count_components(raster, conn) == 1


def same_partition(a: np.ndarray, b: np.ndarray) -> bool:
    """True iff two label maps induce the same pixel partition (values may differ)."""
    a, b = np.asarray(a).ravel(), np.asarray(b).ravel()
    if a.shape != b.shape or not np.array_equal(a == 0, b == 0):
        return False
    pairs = np.unique(np.stack([a, b]), axis=1)
    return len(np.unique(pairs[0])) == pairs.shape[1] == len(np.unique(pairs[1]))
