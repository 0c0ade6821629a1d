"""Exact integer-coordinate polygon sets.

A :class:`PolygonSet` is an immutable, canonical multi-polygon with holes.
Outer rings run counterclockwise, holes clockwise, and the cardinality of a
set is its *doubled* shoelace area so that it stays an exact integer.

Boolean operators and offsetting are delegated to Clipper (``pyclipper``),
which works on 64-bit integer coordinates and rounds intersection points to
the grid. Everything else (canonical form, hashing, areas, point location,
rasterization) is computed here in exact integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pyclipper

Point = tuple[int, int]
Ring = tuple[Point, ...]

COORD_LIMIT = 2**62 - 1
MASK64 = (1 << 64) - 1
_GOLDEN64 = 0x9E3779B97F4A7C15
_RING_SEPARATOR = 0xA5A5A5A5A5A5A5A5


class GeometryError(ValueError):
    """Input geometry violates the polygon-set contract."""


def snap(value: float) -> int:
    """Round to the integer grid, halves away from zero."""
    if value >= 0:
        return int(math.floor(value + 0.5))
    return -int(math.floor(-value + 0.5))


def _cross(o: Point, a: Point, b: Point) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def ring_doubled_area(ring: Sequence[Point]) -> int:
    """Signed doubled shoelace area; positive for counterclockwise rings."""
    if not ring:
        return 0
    xs = [p[0] for p in ring]
    ys = [p[1] for p in ring]
    return sum(x0 * y1 - x1 * y0 for x0, y0, x1, y1 in zip(xs, ys, xs[1:] + xs[:1], ys[1:] + ys[:1]))


def _clean_ring(ring: Sequence[Point]) -> list[Point]:
    """Drop repeated vertices and vertices joining two collinear edges."""
    pts = [(int(p[0]), int(p[1])) for p in ring]
    while len(pts) >= 3:
        out: list[Point] = []
        n = len(pts)
        px, py = pts[-1]
        for i in range(n):
            cx, cy = pts[i]
            nx, ny = pts[i + 1] if i + 1 < n else (out[0] if out else pts[0])
            if (cx - px) * (ny - py) - (cy - py) * (nx - px) == 0:
                continue
            out.append((cx, cy))
            px, py = cx, cy
        if len(out) == n:
            return pts
        # the wrap-around vertex may have been judged against a removed one
        pts = out
    return []


def _rotate_to_min(ring: list[Point]) -> Ring:
    k = min(range(len(ring)), key=ring.__getitem__)
    return tuple(ring[k:] + ring[:k])


def _segments_touch(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True

    def on_seg(a: Point, b: Point, p: Point) -> bool:
        return min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(
            a[1], b[1]
        )

    return (
        (d1 == 0 and on_seg(q1, q2, p1))
        or (d2 == 0 and on_seg(q1, q2, p2))
        or (d3 == 0 and on_seg(p1, p2, q1))
        or (d4 == 0 and on_seg(p1, p2, q2))
    )


def ring_is_simple(ring: Sequence[Point]) -> bool:
    """Exact O(n^2) test: no repeated vertex, non-adjacent edges never touch."""
    n = len(ring)
    if n < 3 or len(set(ring)) != n:
        return False
    for i in range(n):
        a1, a2 = ring[i], ring[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_touch(a1, a2, ring[j], ring[(j + 1) % n]):
                return False
    return True


def _check_coords(rings: Iterable[Sequence[Point]]) -> None:
    for ring in rings:
        for x, y in ring:
            if abs(x) > COORD_LIMIT or abs(y) > COORD_LIMIT:
                raise GeometryError(f"coordinate ({x}, {y}) exceeds the 2**62 limit")


class PolygonSet:
    """Immutable canonical polygon set.

    Instances are only produced in canonical form: every ring starts at its
    lexicographically smallest vertex, rings are sorted by (start vertex,
    vertex count), and there are no collinear, repeated or zero-area pieces.
    Use :func:`canonicalize` or :meth:`from_rings` to build one from raw
    vertex lists.
    """

    __slots__ = ("rings", "_area", "_digest", "_bbox")

    def __init__(self, rings: tuple[Ring, ...] = ()):
        self.rings = rings
        self._area: int | None = None
        self._digest: int | None = None
        self._bbox: tuple[int, int, int, int] | None = None

    # construction -----------------------------------------------------
    @classmethod
    def empty(cls) -> "PolygonSet":
        return cls(())

    @classmethod
    def from_rings(cls, rings: Iterable[Sequence[Sequence[int]]]) -> "PolygonSet":
        return canonicalize(rings)

    @classmethod
    def rectangle(cls, x0: int, y0: int, x1: int, y1: int) -> "PolygonSet":
        if x1 <= x0 or y1 <= y0:
            return cls.empty()
        return cls.from_rings([[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]])

    # set algebra ------------------------------------------------------
    def intersect(self, other: "PolygonSet") -> "PolygonSet":
        return intersect(self, other)

    def unite(self, other: "PolygonSet") -> "PolygonSet":
        return unite(self, other)

    def difference(self, other: "PolygonSet") -> "PolygonSet":
        return difference(self, other)

    def contains(self, other: "PolygonSet") -> bool:
        return contains(self, other)

    def intersection_area(self, other: "PolygonSet") -> int:
        return intersection_area(self, other)

    # measures ---------------------------------------------------------
    @property
    def area(self) -> int:
        """Doubled area (the cardinality used throughout the package)."""
        if self._area is None:
            self._area = sum(ring_doubled_area(r) for r in self.rings)
        return self._area

    @property
    def is_empty(self) -> bool:
        return not self.rings

    @property
    def digest(self) -> int:
        if self._digest is None:
            self._digest = polygon_hash(self)
        return self._digest

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        if self._bbox is None:
            if not self.rings:
                self._bbox = (0, 0, 0, 0)
            else:
                xs = [p[0] for r in self.rings for p in r]
                ys = [p[1] for r in self.rings for p in r]
                self._bbox = (min(xs), min(ys), max(xs), max(ys))
        return self._bbox

    @property
    def vertex_count(self) -> int:
        return sum(len(r) for r in self.rings)

    def centroid(self) -> tuple[float, float]:
        """Area-weighted barycenter (holes subtract)."""
        if self.is_empty:
            raise GeometryError("centroid of an empty set")
        cx = cy = 0
        for ring in self.rings:
            n = len(ring)
            for i in range(n):
                x0, y0 = ring[i]
                x1, y1 = ring[(i + 1) % n]
                c = x0 * y1 - x1 * y0
                cx += (x0 + x1) * c
                cy += (y0 + y1) * c
        a3 = 3 * self.area
        return cx / a3, cy / a3

    def locate(self, point: Sequence[float]) -> int:
        """Return 1 if ``point`` is inside, 0 on the boundary, -1 outside.

        Exact for integer (or :class:`fractions.Fraction`) coordinates.
        """
        px, py = point
        winding = 0
        for ring in self.rings:
            n = len(ring)
            for i in range(n):
                ax, ay = ring[i]
                bx, by = ring[(i + 1) % n]
                side = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
                if side == 0 and min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by):
                    return 0
                if ay <= py:
                    if by > py and side > 0:
                        winding += 1
                elif by <= py and side < 0:
                    winding -= 1
        return 1 if winding != 0 else -1

    def translate(self, dx: int, dy: int) -> "PolygonSet":
        return PolygonSet(tuple(tuple((x + dx, y + dy) for x, y in r) for r in self.rings))

    def scale(self, factor: int) -> "PolygonSet":
        if factor <= 0:
            raise GeometryError("scale factor must be positive")
        return PolygonSet(tuple(tuple((x * factor, y * factor) for x, y in r) for r in self.rings))

    # protocol ---------------------------------------------------------
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolygonSet):
            return NotImplemented
        return self.rings == other.rings

    def __hash__(self) -> int:
        return self.digest

    def __repr__(self) -> str:
        return f"PolygonSet(rings={len(self.rings)}, vertices={self.vertex_count}, area2={self.area})"

    def to_json(self) -> dict:
        return {"rings": [[[x, y] for x, y in r] for r in self.rings]}

    @classmethod
    def from_json(cls, data: dict) -> "PolygonSet":
        try:
            rings = [[(int(x), int(y)) for x, y in r] for r in data["rings"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise GeometryError(f"malformed polygon JSON: {exc}") from exc
        return canonicalize(rings)


def _paths(p: PolygonSet) -> list[Ring]:
    return list(p.rings)


def _fast_ring(path: Sequence[Sequence[int]]) -> tuple[list[Point], int] | None:
    """Clean-and-measure in one pass for rings with no degenerate vertex."""
    xs = [p[0] for p in path]
    ys = [p[1] for p in path]
    xp = xs[-1:] + xs[:-1]
    yp = ys[-1:] + ys[:-1]
    xn = xs[1:] + xs[:1]
    yn = ys[1:] + ys[:1]
    for x, y, a, b, c, d in zip(xs, ys, xp, yp, xn, yn):
        if (x - a) * (d - b) == (y - b) * (c - a):
            return None
    area = sum(x * d - c * y for x, y, c, d in zip(xs, ys, xn, yn))
    return list(zip(xs, ys)), area


def _from_clipper(paths: Iterable[Sequence[Sequence[int]]]) -> PolygonSet:
    rings: list[Ring] = []
    total = 0
    for path in paths:
        fast = _fast_ring(path) if len(path) >= 3 else None
        if fast is not None:
            cleaned, area = fast
        else:
            cleaned = _clean_ring(path)
            area = ring_doubled_area(cleaned) if cleaned else 0
        if area != 0:
            rings.append(_rotate_to_min(cleaned))
            total += area
    rings.sort(key=lambda r: (r[0], len(r)))
    out = PolygonSet(tuple(rings))
    out._area = total
    return out


def _execute(op: int, a: Sequence[Ring], b: Sequence[Ring]) -> PolygonSet:
    pc = pyclipper.Pyclipper()
    pc.StrictlySimple = True
    try:
        if a:
            pc.AddPaths(a, pyclipper.PT_SUBJECT, True)
        if b:
            pc.AddPaths(b, pyclipper.PT_CLIP, True)
        out = pc.Execute(op, pyclipper.PFT_NONZERO, pyclipper.PFT_NONZERO)
        # Clipper can leave output rings touching along an edge depending on
        # operand order; re-uniting the output merges them
        while len(out) > 1:
            pc = pyclipper.Pyclipper()
            pc.StrictlySimple = True
            pc.AddPaths(out, pyclipper.PT_SUBJECT, True)
            again = pc.Execute(pyclipper.CT_UNION, pyclipper.PFT_NONZERO, pyclipper.PFT_NONZERO)
            if len(again) >= len(out):
                break
            out = again
    except pyclipper.ClipperException as exc:
        raise GeometryError(str(exc)) from exc
    return _from_clipper(out)


def canonicalize(rings: Iterable[Sequence[Sequence[int]]]) -> PolygonSet:
    """Validate raw rings and return the canonical polygon set they bound.

    Each ring must be simple once repeated and collinear vertices are
    dropped; a self-crossing ring raises :class:`GeometryError`. Overlapping
    rings are merged under the non-zero fill rule.
    """
    if isinstance(rings, PolygonSet):
        return rings
    cleaned = []
    for ring in rings:
        r = _clean_ring([(int(x), int(y)) for x, y in ring])
        if not r:
            continue
        if not ring_is_simple(r):
            raise GeometryError("self-crossing ring")
        cleaned.append(r)
    _check_coords(cleaned)
    if not cleaned:
        return PolygonSet.empty()
    return _execute(pyclipper.CT_UNION, cleaned, [])


def _bbox_overlap(a: PolygonSet, b: PolygonSet) -> bool:
    ax0, ay0, ax1, ay1 = a.bbox
    bx0, by0, bx1, by1 = b.bbox
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


def _ordered(a: PolygonSet, b: PolygonSet) -> tuple[PolygonSet, PolygonSet]:
    # Clipper snaps crossings differently for subject and clip; a fixed
    # operand order keeps the binary operations commutative
    if (a.area, a.digest) <= (b.area, b.digest):
        return a, b
    return b, a


def intersect(a: PolygonSet, b: PolygonSet) -> PolygonSet:
    if a.is_empty or b.is_empty or not _bbox_overlap(a, b):
        return PolygonSet.empty()
    if a == b:
        return a
    a, b = _ordered(a, b)
    out = _execute(pyclipper.CT_INTERSECTION, a.rings, b.rings)
    # snapped crossing points can leak past an operand; A∩B never exceeds A
    if out.area >= a.area:
        return a
    if out.area >= b.area:
        return b
    return out


def unite(a: PolygonSet, b: PolygonSet) -> PolygonSet:
    if a.is_empty:
        return b
    if b.is_empty or a == b:
        return a
    a, b = _ordered(a, b)
    return _execute(pyclipper.CT_UNION, a.rings, b.rings)


def difference(a: PolygonSet, b: PolygonSet) -> PolygonSet:
    if a.is_empty or b.is_empty or not _bbox_overlap(a, b):
        return a
    return _execute(pyclipper.CT_DIFFERENCE, a.rings, b.rings)


def intersection_area(a: PolygonSet, b: PolygonSet) -> int:
    """Doubled area of ``a ∩ b`` without building the canonical result."""
    if a.is_empty or b.is_empty or not _bbox_overlap(a, b):
        return 0
    if a == b:
        return a.area
    a, b = _ordered(a, b)
    pc = pyclipper.Pyclipper()
    pc.StrictlySimple = True
    pc.AddPaths(a.rings, pyclipper.PT_SUBJECT, True)
    pc.AddPaths(b.rings, pyclipper.PT_CLIP, True)
    out = pc.Execute(pyclipper.CT_INTERSECTION, pyclipper.PFT_NONZERO, pyclipper.PFT_NONZERO)
    # Clipper sums integer products in doubles: exact while the area < 2**52
    return min(round(2.0 * sum(pyclipper.Area(p) for p in out)), a.area, b.area)


def doubled_area(a: PolygonSet) -> int:
    return a.area


def contains(a: PolygonSet, b: PolygonSet) -> bool:
    """True iff ``b`` is a subset of ``a`` (area-exact, zero-area slack)."""
    if b.is_empty:
        return True
    if a.is_empty:
        return False
    ax0, ay0, ax1, ay1 = a.bbox
    bx0, by0, bx1, by1 = b.bbox
    if bx0 < ax0 or by0 < ay0 or bx1 > ax1 or by1 > ay1:
        return False
    return intersect(a, b).area == b.area


def hash_combine(seed: int, value: int) -> int:
    """64-bit ``boost::hash_combine``."""
    seed ^= (value & MASK64) + _GOLDEN64 + ((seed << 6) & MASK64) + (seed >> 2)
    return seed & MASK64


def polygon_hash(a: PolygonSet) -> int:
    """Sequence hash over canonical vertex coordinates, ring-separated."""
    seed = 0
    for ring in a.rings:
        seed = hash_combine(seed, _RING_SEPARATOR)
        for x, y in ring:
            seed = hash_combine(seed, x)
            seed = hash_combine(seed, y)
    return seed


def offset(
    a: PolygonSet,
    delta: int,
    join: str = "round",
    arc_tolerance: float | None = None,
    miter_limit: float = 2.0,
) -> PolygonSet:
    """Dilate ``a`` by ``delta`` grid units.

    ``join`` is ``"round"`` (arc tolerance defaults to 0.25 % of ``delta``)
    or ``"miter"``.
    """
    if delta <= 0:
        raise GeometryError("offset delta must be positive")
    if a.is_empty:
        return a
    x0, y0, x1, y1 = a.bbox
    if max(abs(x0), abs(y0), abs(x1), abs(y1)) + 2 * delta > COORD_LIMIT:
        raise GeometryError("offset result exceeds the coordinate limit")
    pco = pyclipper.PyclipperOffset()
    if join == "round":
        pco.ArcTolerance = arc_tolerance if arc_tolerance is not None else 0.0025 * delta
        jt = pyclipper.JT_ROUND
    elif join == "miter":
        pco.MiterLimit = miter_limit
        jt = pyclipper.JT_MITER
    else:
        raise GeometryError(f"unknown join type {join!r}")
    pco.AddPaths(a.rings, jt, pyclipper.ET_CLOSEDPOLYGON)
    out = pco.Execute(delta)
    return _execute(pyclipper.CT_UNION, [tuple(map(tuple, p)) for p in out], [])


def regular_polygon_disk(center: Point, radius: float, n_vertices: int = 64) -> PolygonSet:
    """Inscribed regular ``n_vertices``-gon approximating a disk."""
    if radius <= 0:
        raise GeometryError("radius must be positive")
    cx, cy = center
    step = 2 * math.pi / n_vertices
    ring = [
        (cx + snap(radius * math.cos(k * step)), cy + snap(radius * math.sin(k * step)))
        for k in range(n_vertices)
    ]
    return canonicalize([ring])


def ring_sector(
    center: Point, r_inner: float, r_outer: float, angle_center: float, angle_width: float
) -> PolygonSet:
    """Trapezoid spanning an annular sector (two vertices per radius)."""
    if not 0 < r_inner < r_outer:
        raise GeometryError("ring sector needs 0 < r_inner < r_outer")
    if not 0 < angle_width < math.pi:
        raise GeometryError("ring sector width must lie in (0, pi)")
    cx, cy = center
    lo = angle_center - angle_width / 2
    hi = angle_center + angle_width / 2

    def at(r: float, ang: float) -> Point:
        return cx + snap(r * math.cos(ang)), cy + snap(r * math.sin(ang))

    ring = [at(r_inner, lo), at(r_outer, lo), at(r_outer, hi), at(r_inner, hi)]
    if ring_doubled_area(ring) < 0:
        ring.reverse()
    try:
        return canonicalize([ring])
    except GeometryError:
        # snapping collapsed the trapezoid
        return PolygonSet.empty()


# -- rasterization -----------------------------------------------------------


def raster_winding(
    a: PolygonSet, bounds: tuple[int, int, int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Winding numbers and boundary mask at the unit-cell centers of ``bounds``.

    Cell ``[row, col]`` has center ``(x0 + col + 0.5, y0 + row + 0.5)``.
    All comparisons are made in exact integer arithmetic (doubled coordinates).
    """
    x0, y0, x1, y1 = bounds
    w, h = x1 - x0, y1 - y0
    winding = np.zeros((h, w + 1), dtype=np.int64)
    boundary = np.zeros((h, w), dtype=bool)
    if a.is_empty or w <= 0 or h <= 0:
        return winding[:, :w], boundary
    edges = []
    for ring in a.rings:
        n = len(ring)
        for i in range(n):
            edges.append((*ring[i], *ring[(i + 1) % n]))
    e = np.asarray(edges, dtype=np.int64)
    ax, ay, bx, by = (2 * e[:, k] for k in range(4))
    # doubled y of each row center
    yc = 2 * np.arange(y0, y1, dtype=np.int64) + 1
    up = (ay[None, :] < yc[:, None]) & (yc[:, None] < by[None, :])
    down = (by[None, :] < yc[:, None]) & (yc[:, None] < ay[None, :])
    rows, cols = np.nonzero(up | down)
    if rows.size == 0:
        return winding[:, :w], boundary
    direction = np.where(up[rows, cols], 1, -1)
    eax, eay, ebx, eby = ax[cols], ay[cols], bx[cols], by[cols]
    den = eby - eay
    num = eax * den + (yc[rows] - eay) * (ebx - eax)
    neg = den < 0
    den = np.where(neg, -den, den)
    num = np.where(neg, -num, num)
    # crossing at doubled x = num/den; cell i (doubled center 2i+1) is strictly
    # left iff (2i+1)*den < num
    t = num - den - 2 * x0 * den
    two_den = 2 * den
    left_count = -((-t) // two_den)  # ceil(t / 2den), cells [0, left_count) are left
    on_edge = (t % two_den) == 0
    idx = np.clip(left_count, 0, w)
    np.add.at(winding, (rows, np.zeros_like(rows)), direction)
    np.add.at(winding, (rows, idx), -direction)
    winding = np.cumsum(winding, axis=1)[:, :w]
    hit = on_edge & (left_count >= 0) & (left_count < w)
    boundary[rows[hit], left_count[hit]] = True
    return winding, boundary


def rasterize(a: PolygonSet, bounds: tuple[int, int, int, int], closed: bool = False) -> np.ndarray:
    """Boolean mask of cell centers inside ``a`` (non-zero rule)."""
    winding, boundary = raster_winding(a, bounds)
    inside = winding != 0
    if closed:
        return inside | boundary
    return inside & ~boundary


# -- frames, JSON, SVG -------------------------------------------------------


@dataclass(frozen=True)
class FrameSpec:
    """Rectangular discernment frame on the integer grid."""

    bounds: tuple[int, int, int, int]
    scale: int = 10_000

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.bounds
        if x1 <= x0 or y1 <= y0:
            raise GeometryError("frame bounds must have positive area")
        if self.scale <= 0:
            raise GeometryError("frame scale must be positive")
        _check_coords([[(x0, y0), (x1, y1)]])

    @classmethod
    def from_meters(cls, x0: float, y0: float, x1: float, y1: float, scale: int = 10_000) -> "FrameSpec":
        return cls((snap(x0 * scale), snap(y0 * scale), snap(x1 * scale), snap(y1 * scale)), scale)

    def omega(self) -> PolygonSet:
        return PolygonSet.rectangle(*self.bounds)

    def contains(self, fe: PolygonSet) -> bool:
        if fe.is_empty:
            return True
        x0, y0, x1, y1 = self.bounds
        bx0, by0, bx1, by1 = fe.bbox
        return x0 <= bx0 and y0 <= by0 and bx1 <= x1 and by1 <= y1

    def to_units(self, meters: float) -> int:
        return snap(meters * self.scale)

    def point(self, x_m: float, y_m: float) -> Point:
        return snap(x_m * self.scale), snap(y_m * self.scale)

    def to_json(self) -> dict:
        return {"bounds": list(self.bounds), "scale": self.scale}

    @classmethod
    def from_json(cls, data: dict) -> "FrameSpec":
        return cls(tuple(int(v) for v in data["bounds"]), int(data.get("scale", 10_000)))


def svg_document(
    layers: Sequence[tuple[PolygonSet, str, float]],
    bounds: tuple[int, int, int, int],
    width: int = 800,
) -> str:
    """Render ``(polygon, color, opacity)`` layers, one ``<path>`` per ring."""
    x0, y0, x1, y1 = bounds
    height = max(1, round(width * (y1 - y0) / (x1 - x0)))
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="{x0} {-y1} {x1 - x0} {y1 - y0}">',
        '<g transform="scale(1,-1)">',
    ]
    for poly, color, opacity in layers:
        for ring in poly.rings:
            d = "M " + " L ".join(f"{x} {y}" for x, y in ring) + " Z"
            hole = ring_doubled_area(ring) < 0
            lines.append(
                f'<path d="{d}" fill="{"none" if hole else color}" fill-opacity="{opacity:.3f}" '
                f'stroke="{color}" fill-rule="nonzero" vector-effect="non-scaling-stroke"/>'
            )
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
