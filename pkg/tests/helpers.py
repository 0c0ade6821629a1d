"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import itertools
import math

import numpy as np

from polybel.evidence import BBA, BinaryWord, DiscreteFrame
from polybel.geometry import FrameSpec, PolygonSet, regular_polygon_disk

FRAME = FrameSpec((0, 0, 1000, 1000))


def random_rect(rng: np.random.Generator, lo: int = 40, hi: int = 400, grid: int = 1) -> PolygonSet:
    x0, y0 = (int(v) // grid * grid for v in rng.integers(0, 900, 2))
    w, h = (max(grid, int(v) // grid * grid) for v in rng.integers(lo, hi, 2))
    return PolygonSet.rectangle(x0, y0, min(x0 + w, 1000), min(y0 + h, 1000))


def random_disk(rng: np.random.Generator, n_vertices: int = 64) -> PolygonSet:
    r = int(rng.integers(30, 200))
    cx, cy = (int(v) for v in rng.integers(r, 1000 - r, 2))
    return regular_polygon_disk((cx, cy), r, n_vertices)


def random_bba(rng: np.random.Generator, max_n: int = 8, disks: bool = True, grid: int = 1) -> BBA:
    """BBA of up to ``max_n`` rectangles and 64-gon disks inside a 1000x1000 frame."""
    n = int(rng.integers(1, max_n + 1))
    masses = rng.dirichlet(np.ones(n))
    bba = BBA(FRAME)
    for k in range(n):
        fe = random_disk(rng) if disks and rng.uniform() < 0.5 else random_rect(rng, grid=grid)
        bba.add_mass(fe, float(masses[k]))
    return bba


def subset_oracle(nodes: list[PolygonSet]) -> set[int]:
    """Member bit-sets of maximal intersections by enumerating all 2^n subsets."""
    n = len(nodes)
    family = set()
    for mask in range(1, 1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        region = nodes[idx[0]]
        for i in idx[1:]:
            region = region.intersect(nodes[i])
            if region.is_empty:
                break
        if region.area <= 0:
            continue
        if all(region.intersection_area(nodes[j]) == 0 for j in range(n) if not mask >> j & 1):
            family.add(mask)
    return family


# ------------------------------------------------------------ raster oracle
def winding_grid(rings, x0: int, y0: int, x1: int, y1: int) -> np.ndarray:
    """Non-zero winding number at unit-cell centers, by ray crossing in floats.

    Written independently of the package rasterizer; cell centers sit on
    half-integers, so integer-vertex edges are never hit exactly.
    """
    xs = np.arange(x0, x1) + 0.5
    ys = np.arange(y0, y1) + 0.5
    px, py = np.meshgrid(xs, ys)
    wind = np.zeros(px.shape, dtype=np.int64)
    for ring in rings:
        pts = list(ring)
        for (ax, ay), (bx, by) in zip(pts, pts[1:] + pts[:1]):
            if ay == by:
                continue
            up = ay <= py
            crosses = up != (by <= py)
            side = (bx - ax) * (py - ay) - (px - ax) * (by - ay)
            wind += np.where(crosses & (by > ay) & (side > 0), 1, 0)
            wind -= np.where(crosses & (by < ay) & (side < 0), 1, 0)
    return wind


def raster_area(p: PolygonSet, bounds=(0, 0, 1000, 1000)) -> int:
    if p.is_empty:
        return 0
    return int(np.count_nonzero(winding_grid(p.rings, *bounds)))


def perimeter(p: PolygonSet) -> float:
    return sum(math.dist(a, b) for ring in p.rings for a, b in zip(ring, ring[1:] + ring[:1]))


# ------------------------------------------------------------ simplification oracle
def dense_jousselme(m1: BBA, m2: BBA) -> float:
    """Jousselme distance from scratch: explicit basis, explicit Jaccard matrix."""
    basis = list({fe for fe, _ in m1.items()} | {fe for fe, _ in m2.items()})
    v = np.array([m1.mass(fe) - m2.mass(fe) for fe in basis] + [m1.conflict - m2.conflict])
    n = len(basis)
    d = np.eye(n + 1)
    for i in range(n):
        for j in range(n):
            if i != j:
                inter = basis[i].intersect(basis[j]).area
                d[i, j] = inter / (basis[i].area + basis[j].area - inter)
    return math.sqrt(max(0.5 * float(v @ d @ v), 0.0))


def merged_pair(bba: BBA, i: int, j: int) -> BBA:
    """``bba`` with its ``i``-th and ``j``-th focal elements replaced by their union."""
    items = list(bba.items())
    out = BBA(bba.frame, bba.conflict)
    for k, (fe, m) in enumerate(items):
        if k not in (i, j):
            out.add_mass(fe, m)
    out.add_mass(items[i][0].unite(items[j][0]), items[i][1] + items[j][1])
    return out


# ------------------------------------------------------------ 1D oracles
def powerset_conjunctive(m1: dict[int, float], m2: dict[int, float]) -> dict[int, float]:
    """Conjunctive rule over plain integer subsets (0 is the empty set)."""
    out: dict[int, float] = {}
    for (a, ma), (b, mb) in itertools.product(m1.items(), m2.items()):
        out[a & b] = out.get(a & b, 0.0) + ma * mb
    return out


def powerset_disjunctive(m1: dict[int, float], m2: dict[int, float]) -> dict[int, float]:
    out: dict[int, float] = {}
    for (a, ma), (b, mb) in itertools.product(m1.items(), m2.items()):
        out[a | b] = out.get(a | b, 0.0) + ma * mb
    return out


def random_word_masses(rng: np.random.Generator, size: int = 6, n: int = 4, conflict: bool = False) -> dict[int, float]:
    words = rng.choice(np.arange(1, 1 << size), size=n, replace=False)
    masses = rng.dirichlet(np.ones(n + int(conflict)))
    out = {int(w): float(m) for w, m in zip(words, masses)}
    if conflict:
        out[0] = float(masses[-1])
    return out


def word_bba(masses: dict[int, float], size: int = 6) -> BBA:
    frame = DiscreteFrame(size)
    bba = BBA(frame)
    for w, m in masses.items():
        bba.add_mass(BinaryWord(w, size), m)
    return bba


# six-cell partition of a 300x200 frame, one cell per singleton
CELL_FRAME = FrameSpec((0, 0, 300, 200))
CELLS = [PolygonSet.rectangle(100 * (k % 3), 100 * (k // 3), 100 * (k % 3) + 100, 100 * (k // 3) + 100) for k in range(6)]


def word_to_polygon(w: int) -> PolygonSet:
    out = PolygonSet.empty()
    for k in range(6):
        if w >> k & 1:
            out = out.unite(CELLS[k])
    return out


def polygon_to_word(p: PolygonSet) -> int:
    w = 0
    for k, cell in enumerate(CELLS):
        inter = p.intersection_area(cell)
        if inter == cell.area:
            w |= 1 << k
        elif inter:
            raise AssertionError("polygon is not a union of partition cells")
    return w
