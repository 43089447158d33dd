"""Stroke-based joinable glyph alphabet and its rasterizer.

Glyphs are drawn in a unit cell (x to the right, y downward) and rendered
without anti-aliasing, so connectivity of the result is exact: Bresenham
segments dilated by a square pen, diacritics filled with the midpoint circle
algorithm. Multi-glyph ligatures are laid out right to left; the first glyph
of a sequence occupies the rightmost cell.

Rasters throughout the package are 2-D ``uint8`` numpy arrays indexed
``[row, col]`` with 0 for background and 255 for full ink.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

MIN_CELL_PX = 16
INK = 255
FOREGROUND_THRESHOLD = 128

Point = tuple[float, float]
Segment = tuple[Point, Point]


class AlphabetError(ValueError):
    pass


class AlphabetParseError(AlphabetError):
    pass


class AlphabetInvariantError(AlphabetError):
    pass


@dataclass(frozen=True)
class Dot:
    cx: float
    cy: float
    r: float


@dataclass(frozen=True)
class GlyphSpec:
    glyph_id: int
    base_form_id: int
    strokes: tuple[Segment, ...]
    diacritics: tuple[Dot, ...] = ()
    joins_forward: bool = True
    joins_backward: bool = True


@dataclass(frozen=True)
class Connector:
    """Baseline bridge between two adjacent cells.

    The bridge runs from the left-side anchor ``(inset, y_b)`` of the right
    glyph to the right-side anchor ``(1 - inset, y_b)`` of the left glyph.
    """

    y_b: float = 0.5
    inset: float = 0.2

    @property
    def forward_anchor(self) -> Point:
        return (self.inset, self.y_b)

    @property
    def backward_anchor(self) -> Point:
        return (1.0 - self.inset, self.y_b)


@dataclass(frozen=True)
class AlphabetSpec:
    glyphs: tuple[GlyphSpec, ...]
    connector: Connector = field(default_factory=Connector)
    name: str = "unnamed"

    def __len__(self) -> int:
        return len(self.glyphs)

    @property
    def base_form_ids(self) -> list[int]:
        return sorted({g.base_form_id for g in self.glyphs})


@dataclass(frozen=True)
class StyleSpec:
    style_id: int = 0
    stroke_width: int = 1
    shear: float = 0.0
    scale: float = 1.0
    jitter: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.stroke_width < 1:
            raise ValueError(f"stroke_width must be >= 1, got {self.stroke_width}")
        if not 0.5 < self.scale <= 1.0:
            raise ValueError(f"scale must lie in (0.5, 1.0], got {self.scale}")
        if self.jitter < 0:
            raise ValueError(f"jitter must be >= 0, got {self.jitter}")


IDENTITY_STYLE = StyleSpec()

# (stroke_width, shear, scale, jitter); ordered so that any prefix mixes pen
# widths, slants and sizes.
_STYLE_TABLE = [
    (2, 0.0, 1.0, 0),
    (1, 0.2, 0.9, 0),
    (3, -0.2, 0.9, 0),
    (1, -0.2, 1.0, 1),
    (3, 0.2, 1.0, 0),
    (2, 0.2, 0.8, 1),
    (2, -0.2, 0.8, 0),
    (1, 0.0, 0.8, 1),
    (3, 0.0, 0.8, 1),
    (1, 0.0, 1.0, 0),
    (2, 0.0, 0.9, 1),
    (3, 0.0, 1.0, 1),
    (1, 0.2, 1.0, 1),
    (2, -0.2, 1.0, 1),
    (3, -0.2, 0.8, 0),
]


def default_styles(count: int = 15, seed: int = 0) -> list[StyleSpec]:
    """The shipped font-like styles, or the first ``count`` of them."""
    if not 1 <= count <= len(_STYLE_TABLE):
        raise ValueError(f"style count must be in 1..{len(_STYLE_TABLE)}, got {count}")
    return [
        StyleSpec(i, w, sh, sc, j, seed * 1000 + i)
        for i, (w, sh, sc, j) in enumerate(_STYLE_TABLE[:count])
    ]


# --------------------------------------------------------------------------
# rasterization primitives


def _round(v: float) -> int:
    return math.floor(v + 0.5)


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer points of the segment, 8-connected, endpoints included."""
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = []
    while True:
        out.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return out
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def disk_spans(r: int) -> list[tuple[int, int]]:
    """Midpoint circle fill as (row offset, half width) spans."""
    spans: dict[int, int] = {}
    x, y, d = r, 0, 1 - r
    while x >= y:
        for dy, half in ((y, x), (-y, x), (x, y), (-x, y)):
            spans[dy] = max(spans.get(dy, 0), half)
        y += 1
        if d < 0:
            d += 2 * y + 1
        else:
            x -= 1
            d += 2 * (y - x) + 1
    return sorted(spans.items())


def _plot(mask: np.ndarray, points) -> None:
    h, w = mask.shape
    for x, y in points:
        if 0 <= x < w and 0 <= y < h:
            mask[y, x] = True


def _dilate(mask: np.ndarray, width: int) -> np.ndarray:
    if width == 1:
        return mask
    lo, hi = -((width - 1) // 2), width // 2
    h, w = mask.shape
    out = np.zeros_like(mask)
    for dy in range(lo, hi + 1):
        for dx in range(lo, hi + 1):
            ys = slice(max(dy, 0), h + min(dy, 0))
            yd = slice(max(-dy, 0), h + min(-dy, 0))
            xs = slice(max(dx, 0), w + min(dx, 0))
            xd = slice(max(-dx, 0), w + min(-dx, 0))
            out[ys, xs] |= mask[yd, xd]
    return out


def _fill_disk(mask: np.ndarray, cx: int, cy: int, r: int) -> None:
    h, w = mask.shape
    for dy, half in disk_spans(r):
        y = cy + dy
        if 0 <= y < h:
            mask[y, max(cx - half, 0):min(cx + half + 1, w)] = True


class _Placement:
    """Maps unit-cell coordinates of one glyph to strip pixels."""

    def __init__(self, style: StyleSpec, cell: int, origin_x: int, y_b: float,
                 jitter: tuple[int, int] = (0, 0)):
        self.style = style
        self.cell = cell
        self.origin_x = origin_x
        self.vb = 0.5 + style.scale * (y_b - 0.5)
        self.jx, self.jy = jitter

    def __call__(self, x: float, y: float) -> tuple[int, int]:
        s = self.style.scale
        u = 0.5 + s * (x - 0.5)
        v = 0.5 + s * (y - 0.5)
        u += self.style.shear * (self.vb - v)
        span = self.cell - 1
        return (self.origin_x + _round(u * span) + self.jx, _round(v * span) + self.jy)


def _jitter(style: StyleSpec, position: int, glyph: GlyphSpec) -> tuple[int, int]:
    if style.jitter == 0:
        return (0, 0)
    rng = np.random.default_rng([style.seed, position, glyph.glyph_id])
    jx, jy = rng.integers(-style.jitter, style.jitter + 1, size=2)
    return int(jx), int(jy)


def _draw_glyph(lines: np.ndarray, dots: np.ndarray | None, glyph: GlyphSpec,
                place: _Placement) -> None:
    for (x0, y0), (x1, y1) in glyph.strokes:
        _plot(lines, bresenham(*place(x0, y0), *place(x1, y1)))
    if dots is not None:
        for d in glyph.diacritics:
            cx, cy = place(d.cx, d.cy)
            _fill_disk(dots, cx, cy, _round(d.r * place.style.scale * (place.cell - 1)))


def _to_raster(lines: np.ndarray, dots: np.ndarray, width: int) -> np.ndarray:
    ink = _dilate(lines, width) | dots
    return np.where(ink, INK, 0).astype(np.uint8)


def render_glyph(glyph: GlyphSpec, style: StyleSpec = IDENTITY_STYLE, cell_px: int = 100,
                 *, connector: Connector | None = None, diacritics: bool = True) -> np.ndarray:
    """Render one glyph into a ``cell_px`` x ``cell_px`` raster."""
    if cell_px < MIN_CELL_PX:
        raise ValueError(f"cell_px must be >= {MIN_CELL_PX}, got {cell_px}")
    connector = connector or Connector()
    lines = np.zeros((cell_px, cell_px), dtype=bool)
    dots = np.zeros_like(lines)
    place = _Placement(style, cell_px, 0, connector.y_b, _jitter(style, 0, glyph))
    _draw_glyph(lines, dots if diacritics else None, glyph, place)
    return _to_raster(lines, dots, style.stroke_width)


def _fit(strip: np.ndarray, canvas_px: int) -> np.ndarray:
    """Shrink (ink-preserving) and center a strip onto a square canvas.

    Shrinking maps each source pixel to ``floor(i * target / source)``, so
    8-adjacent ink stays 8-adjacent and no component is ever split.
    """
    h, w = strip.shape
    if max(h, w) > canvas_px:
        f = canvas_px / max(h, w)
        th, tw = max(1, _round(h * f)), max(1, _round(w * f))
        ys, xs = np.nonzero(strip)
        small = np.zeros((th, tw), dtype=strip.dtype)
        small[ys * th // h, xs * tw // w] = strip[ys, xs]
        strip, (h, w) = small, (th, tw)
    out = np.zeros((canvas_px, canvas_px), dtype=strip.dtype)
    top, left = (canvas_px - h) // 2, (canvas_px - w) // 2
    out[top:top + h, left:left + w] = strip
    return out


def compose_ligature(glyph_seq: Sequence[GlyphSpec], style: StyleSpec = IDENTITY_STYLE,
                     canvas_px: int = 100, *, connector: Connector | None = None,
                     max_degree: int = 3, diacritics: bool = True) -> np.ndarray:
    """Render a right-to-left glyph sequence onto a square canvas.

    Each glyph gets a cell of ``max(16, canvas_px // n)`` pixels; a strip
    wider than the canvas is shrunk to fit. The connector between glyph ``i``
    and ``i + 1`` is drawn iff the first joins forward and the second joins
    backward.
    """
    n = len(glyph_seq)
    if n == 0:
        raise ValueError("empty glyph sequence")
    if n > max_degree:
        raise ValueError(f"sequence of {n} glyphs exceeds max degree {max_degree}")
    if canvas_px < MIN_CELL_PX:
        raise ValueError(f"canvas_px must be >= {MIN_CELL_PX}, got {canvas_px}")
    connector = connector or Connector()
    cell = max(MIN_CELL_PX, canvas_px // n)
    lines = np.zeros((cell, n * cell), dtype=bool)
    dots = np.zeros_like(lines)
    places = []
    for p, g in enumerate(glyph_seq):
        place = _Placement(style, cell, (n - 1 - p) * cell, connector.y_b, _jitter(style, p, g))
        _draw_glyph(lines, dots if diacritics else None, g, place)
        places.append(place)
    for p in range(n - 1):
        if glyph_seq[p].joins_forward and glyph_seq[p + 1].joins_backward:
            a = places[p](*connector.forward_anchor)
            b = places[p + 1](*connector.backward_anchor)
            _plot(lines, bresenham(*a, *b))
    return _fit(_to_raster(lines, dots, style.stroke_width), canvas_px)


def base_form_dedup(alphabet: AlphabetSpec | Sequence[GlyphSpec]) -> list[GlyphSpec]:
    """One diacritic-free representative (lowest glyph id) per base form."""
    glyphs = alphabet.glyphs if isinstance(alphabet, AlphabetSpec) else alphabet
    reps: dict[int, GlyphSpec] = {}
    for g in sorted(glyphs, key=lambda g: g.glyph_id):
        reps.setdefault(g.base_form_id, replace(g, diacritics=()))
    return [reps[b] for b in sorted(reps)]


# --------------------------------------------------------------------------
# alphabet document format


def _parse_bool(tok: str, lineno: int) -> bool:
    if tok not in ("0", "1"):
        raise AlphabetParseError(f"line {lineno}: expected 0 or 1, got {tok!r}")
    return tok == "1"


def _parse_floats(toks: list[str], n: int, lineno: int, what: str) -> list[float]:
    if len(toks) != n:
        raise AlphabetParseError(f"line {lineno}: {what} takes {n} numbers, got {len(toks)}")
    try:
        return [float(t) for t in toks]
    except ValueError:
        raise AlphabetParseError(f"line {lineno}: non-numeric {what} argument in {toks}") from None


def load_alphabet(document: str, *, validate: bool = True) -> AlphabetSpec:
    """Parse an alphabet document.

    Grammar (one directive per line, ``#`` starts a comment)::

        name <text>
        connector <y_b> [<inset>]
        glyph <id> base <base_id> joinf <0|1> joinb <0|1>
        stroke <x0> <y0> <x1> <y1>
        dot <cx> <cy> <r>
    """
    name = "unnamed"
    connector = Connector()
    entries: list[dict] = []
    for lineno, raw in enumerate(document.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *toks = line.split()
        if head == "name":
            if not toks:
                raise AlphabetParseError(f"line {lineno}: name needs a value")
            name = " ".join(toks)
        elif head == "connector":
            if len(toks) not in (1, 2):
                raise AlphabetParseError(f"line {lineno}: connector takes y_b [inset]")
            vals = _parse_floats(toks, len(toks), lineno, "connector")
            connector = Connector(*vals)
        elif head == "glyph":
            if len(toks) != 7 or toks[1::2] != ["base", "joinf", "joinb"]:
                raise AlphabetParseError(
                    f"line {lineno}: expected 'glyph <id> base <id> joinf <0|1> joinb <0|1>'")
            try:
                gid, base = int(toks[0]), int(toks[2])
            except ValueError:
                raise AlphabetParseError(f"line {lineno}: glyph and base ids must be integers") from None
            if gid < 0 or base < 0:
                raise AlphabetParseError(f"line {lineno}: ids must be >= 0")
            entries.append(dict(glyph_id=gid, base_form_id=base,
                                joins_forward=_parse_bool(toks[4], lineno),
                                joins_backward=_parse_bool(toks[6], lineno),
                                strokes=[], diacritics=[], lineno=lineno))
        elif head in ("stroke", "dot"):
            if not entries:
                raise AlphabetParseError(f"line {lineno}: {head} before any glyph")
            if head == "stroke":
                x0, y0, x1, y1 = _parse_floats(toks, 4, lineno, "stroke")
                entries[-1]["strokes"].append(((x0, y0), (x1, y1)))
            else:
                entries[-1]["diacritics"].append(Dot(*_parse_floats(toks, 3, lineno, "dot")))
        else:
            raise AlphabetParseError(f"line {lineno}: unknown directive {head!r}")

    linenos = {}
    glyphs = []
    for e in entries:
        lineno = e.pop("lineno")
        linenos.setdefault(e["glyph_id"], lineno)
        glyphs.append(GlyphSpec(strokes=tuple(e.pop("strokes")),
                                diacritics=tuple(e.pop("diacritics")), **e))
    spec = AlphabetSpec(tuple(glyphs), connector, name)
    if validate:
        validate_alphabet(spec, linenos)
    return spec


def _where(gid: int, linenos: dict[int, int] | None) -> str:
    if linenos and gid in linenos:
        return f"line {linenos[gid]}: glyph {gid}"
    return f"glyph {gid}"


def validate_alphabet(spec: AlphabetSpec, linenos: dict[int, int] | None = None,
                      check_sizes: Sequence[int] = (16, 33, 100)) -> None:
    """Raise AlphabetInvariantError on the first violated invariant."""
    from .ccl import count_components

    if not spec.glyphs:
        raise AlphabetInvariantError("empty alphabet")
    seen: dict[int, GlyphSpec] = {}
    for g in spec.glyphs:
        if g.glyph_id in seen:
            raise AlphabetInvariantError(f"{_where(g.glyph_id, linenos)}: duplicate glyph_id {g.glyph_id}")
        seen[g.glyph_id] = g
    if sorted(seen) != list(range(len(seen))):
        raise AlphabetInvariantError("glyph ids must be contiguous from 0")

    c = spec.connector
    if not (0.0 < c.y_b < 1.0 and 0.0 < c.inset < 0.5):
        raise AlphabetInvariantError(f"connector y_b={c.y_b} inset={c.inset} out of range")
    lo, hi = c.inset, 1.0 - c.inset
    by_base: dict[int, GlyphSpec] = {}
    for g in spec.glyphs:
        where = _where(g.glyph_id, linenos)
        if not g.strokes:
            raise AlphabetInvariantError(f"{where}: no strokes")
        for seg in g.strokes:
            for x, y in seg:
                if not (lo <= x <= hi and 0.0 <= y <= 1.0):
                    raise AlphabetInvariantError(
                        f"{where}: stroke point ({x}, {y}) outside the body box [{lo}, {hi}] x [0, 1]")
        for d in g.diacritics:
            if not (lo <= d.cx <= hi and 0.0 <= d.cy <= 1.0 and 0.0 <= d.r < 0.5):
                raise AlphabetInvariantError(f"{where}: diacritic {d} outside the body box")
        ends = {p for seg in g.strokes for p in seg}
        if g.joins_forward and not _has_point(ends, c.forward_anchor):
            raise AlphabetInvariantError(f"{where}: joins forward but no stroke ends at {c.forward_anchor}")
        if g.joins_backward and not _has_point(ends, c.backward_anchor):
            raise AlphabetInvariantError(f"{where}: joins backward but no stroke ends at {c.backward_anchor}")
        ref = by_base.setdefault(g.base_form_id, g)
        if (ref.strokes, ref.joins_forward, ref.joins_backward) != (g.strokes, g.joins_forward, g.joins_backward):
            raise AlphabetInvariantError(
                f"{where}: differs from glyph {ref.glyph_id} of base form {g.base_form_id} beyond diacritics")
        for px in check_sizes:
            strokes_only = render_glyph(g, IDENTITY_STYLE, px, connector=c, diacritics=False)
            if count_components(strokes_only) != 1:
                raise AlphabetInvariantError(f"{where}: disconnected strokes at {px} px")
            if g.diacritics:
                full = render_glyph(g, IDENTITY_STYLE, px, connector=c)
                dots = _dots_mask(g, px, c)
                if (dots & (strokes_only >= FOREGROUND_THRESHOLD)).any():
                    raise AlphabetInvariantError(f"{where}: diacritic overlaps strokes at {px} px")
                if count_components(full) != 1 + len(g.diacritics):
                    raise AlphabetInvariantError(f"{where}: diacritic touches strokes at {px} px")


def _dots_mask(g: GlyphSpec, px: int, connector: Connector) -> np.ndarray:
    dots = np.zeros((px, px), dtype=bool)
    place = _Placement(IDENTITY_STYLE, px, 0, connector.y_b)
    _draw_glyph(np.zeros_like(dots), dots, g, place)
    return dots


def _has_point(points, target: Point, tol: float = 1e-9) -> bool:
    return any(abs(x - target[0]) <= tol and abs(y - target[1]) <= tol for x, y in points)


def dump_alphabet(spec: AlphabetSpec) -> str:
    out = [f"name {spec.name}", f"connector {spec.connector.y_b:g} {spec.connector.inset:g}"]
    for g in spec.glyphs:
        out.append("")
        out.append(f"glyph {g.glyph_id} base {g.base_form_id} "
                   f"joinf {int(g.joins_forward)} joinb {int(g.joins_backward)}")
        for (x0, y0), (x1, y1) in g.strokes:
            out.append(f"stroke {x0:g} {y0:g} {x1:g} {y1:g}")
        for d in g.diacritics:
            out.append(f"dot {d.cx:g} {d.cy:g} {d.r:g}")
    return "\n".join(out) + "\n"


def default_alphabet_text() -> str:
    return resources.files("ligocr").joinpath("data/default_alphabet.txt").read_text()


def default_alphabet() -> AlphabetSpec:
    return load_alphabet(default_alphabet_text())


def load_alphabet_file(path: str | Path) -> AlphabetSpec:
    return load_alphabet(Path(path).read_text())
