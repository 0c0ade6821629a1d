"""Pignistic decision making over focal-element intersection graphs.

The argmax of BetP over the frame can only sit inside a *maximal
intersection*: a positive-area intersection of some focal elements that no
other focal element overlaps. Those regions are enumerated by a depth-first
search over a DAG whose nodes are the focal elements sorted by decreasing
cardinality and whose edges mark positive-area pairwise intersections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .evidence import BBA, FocalElement
from .geometry import PolygonSet, raster_winding

MAX_NODES = 4096
DENSITY_RTOL = 1e-12


class DecisionError(ValueError):
    """BetP is undefined (all mass on the empty set, or no focal element)."""


def _normalizer(bba: BBA) -> float:
    k = 1.0 - bba.conflict
    if k <= 0.0 or len(bba) == 0:
        raise DecisionError("BetP undefined: all mass is on the empty set")
    return k


def betp_singleton_density(bba: BBA, point, closed: bool = True) -> float:
    """BetP density at ``point``: sum of m(B)/|B| over focal sets holding it.

    ``|B|`` is the doubled area, so the density is per doubled unit. With
    ``closed=False`` boundary points count as outside.
    """
    k = _normalizer(bba)
    lowest = 0 if closed else 1
    total = math.fsum(m / b.area for b, m in bba.items() if b.locate(point) >= lowest)
    return total / k


def betp_compound(bba: BBA, a: FocalElement) -> float:
    """Generalized BetP of a compound hypothesis."""
    k = _normalizer(bba)
    if a.area <= 0:
        raise DecisionError("BetP of a set with zero cardinality")
    terms = []
    for b, m in bba.items():
        inter = a.intersection_area(b)
        if inter > 0:
            terms.append(inter / b.area * m)
    return math.fsum(terms) / k


@dataclass
class IntersectionGraph:
    """DAG over focal elements in decreasing-cardinality order.

    ``adjacency[i]`` lists the targets ``j > i`` of edges leaving ``i``;
    ``inclusion`` holds the edges whose target is a subset of the source.
    ``including[j]`` is the bit-set of every ``i < j`` with ``A_j ⊆ A_i`` and
    survives simplification (it drives root suppression and early stopping).
    """

    nodes: list[FocalElement]
    masses: list[float]
    conflict: float
    adjacency: list[list[int]]
    inclusion: set[tuple[int, int]]
    including: list[int]
    simplified: bool = False

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, targets in enumerate(self.adjacency) for j in targets]

    def dump(self) -> str:
        lines = []
        for i, j in self.edges:
            lines.append(f"{i} -> {j} [inc]" if (i, j) in self.inclusion else f"{i} -> {j}")
        return "\n".join(lines) + ("\n" if lines else "")

    def components(self) -> list[list[int]]:
        """Weakly connected components, each sorted by node index."""
        parent = list(range(len(self.nodes)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j in self.edges:
            parent[find(i)] = find(j)
        groups: dict[int, list[int]] = {}
        for i in range(len(self.nodes)):
            groups.setdefault(find(i), []).append(i)
        return sorted(groups.values())


def build_graph(bba: BBA) -> IntersectionGraph:
    items = [(fe, m) for fe, m in bba.items() if fe.area > 0]
    if not items:
        raise DecisionError("no focal element with positive cardinality")
    if len(items) > MAX_NODES:
        raise DecisionError(f"intersection graph limited to {MAX_NODES} nodes")
    items.sort(key=lambda it: (-it[0].area, it[0].digest))
    nodes = [fe for fe, _ in items]
    n = len(nodes)
    adjacency: list[list[int]] = [[] for _ in range(n)]
    inclusion: set[tuple[int, int]] = set()
    including = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            inter = nodes[i].intersect(nodes[j])
            if inter.area > 0:
                adjacency[i].append(j)
                if inter.area == nodes[j].area:
                    inclusion.add((i, j))
                    including[j] |= 1 << i
    return IntersectionGraph(nodes, [m for _, m in items], bba.conflict, adjacency, inclusion, including)


def simplify_graph(g: IntersectionGraph) -> IntersectionGraph:
    """Keep only the highest-index incoming inclusion edge of every node."""
    keep_from = [-1] * len(g.nodes)
    for i, j in g.inclusion:
        keep_from[j] = max(keep_from[j], i)
    dropped = {(i, j) for i, j in g.inclusion if i != keep_from[j]}
    adjacency = [[j for j in targets if (i, j) not in dropped] for i, targets in enumerate(g.adjacency)]
    return IntersectionGraph(
        g.nodes,
        g.masses,
        g.conflict,
        adjacency,
        g.inclusion - dropped,
        list(g.including),
        simplified=True,
    )


@dataclass
class MaximalIntersection:
    region: FocalElement
    members: int
    betp_density: float

    def member_indices(self) -> list[int]:
        return [i for i in range(self.members.bit_length()) if self.members >> i & 1]


def _density(g: IntersectionGraph, members: int) -> float:
    k = 1.0 - g.conflict
    terms = [g.masses[i] / g.nodes[i].area for i in range(members.bit_length()) if members >> i & 1]
    return math.fsum(terms) / k


def maximal_intersections(
    g: IntersectionGraph, root_suppression: bool = True, early_stopping: bool = True
) -> tuple[list[MaximalIntersection], int]:
    """Enumerate maximal intersections; returns ``(intersections, visits)``.

    ``visits`` counts every node entered by the depth-first search, roots
    included.
    """
    nodes = g.nodes
    n = len(nodes)
    found: list[tuple[int, FocalElement]] = []
    visits = 0

    def store(members: int, region: FocalElement) -> None:
        for stored, _ in found:
            if members & stored == members:
                return
        found[:] = [(s, r) for s, r in found if s & members != s]
        found.append((members, region))

    for root in range(n):
        if root_suppression and g.including[root]:
            continue
        previous_roots = (1 << root) - 1
        visits += 1
        # frames: (node, path intersection, members, next child position, explored any)
        stack = [[root, nodes[root], 1 << root, 0, False]]
        while stack:
            frame = stack[-1]
            node, region, members, pos, explored = frame
            targets = g.adjacency[node]
            pushed = False
            while pos < len(targets):
                j = targets[pos]
                pos += 1
                if early_stopping and g.including[j] & previous_roots:
                    continue
                inter = region.intersect(nodes[j])
                if inter.area > 0:
                    frame[3] = pos
                    frame[4] = True
                    visits += 1
                    stack.append([j, inter, members | 1 << j, 0, False])
                    pushed = True
                    break
            if pushed:
                continue
            stack.pop()
            if not explored:
                store(members, region)

    result = [MaximalIntersection(region, members, _density(g, members)) for members, region in found]
    result.sort(key=lambda mi: mi.members)
    return result, visits


class Decision(NamedTuple):
    region: FocalElement
    density: float
    barycenter: tuple[float, float] | None
    members: int
    visits: int = 0


def _better(a: MaximalIntersection, b: MaximalIntersection) -> bool:
    """True if ``a`` beats ``b``: density, then larger set, then smaller digest."""
    scale = max(abs(a.betp_density), abs(b.betp_density))
    if abs(a.betp_density - b.betp_density) > DENSITY_RTOL * scale:
        return a.betp_density > b.betp_density
    if a.region.area != b.region.area:
        return a.region.area > b.region.area
    return a.region.digest < b.region.digest


def select_argmax(candidates: Sequence[MaximalIntersection]) -> MaximalIntersection:
    if not candidates:
        raise DecisionError("no maximal intersection")
    best = candidates[0]
    for cand in candidates[1:]:
        if _better(cand, best):
            best = cand
    return best


def betp_argmax(bba: BBA, optimize: bool = True) -> Decision:
    """Region of maximal BetP density, with its density and barycenter."""
    _normalizer(bba)
    g = build_graph(bba)
    if optimize:
        g = simplify_graph(g)
    candidates, visits = maximal_intersections(g, root_suppression=optimize, early_stopping=optimize)
    best = select_argmax(candidates)
    barycenter = best.region.centroid() if isinstance(best.region, PolygonSet) else None
    return Decision(best.region, best.betp_density, barycenter, best.members, visits)


def raster_betp(bba: BBA, bounds: tuple[int, int, int, int] | None = None) -> tuple[np.ndarray, tuple]:
    """Brute-force BetP density on unit cells (open focal sets).

    Boundary points are excluded from every focal set, so no raster value can
    exceed the true maximum density. Returns ``(density, bounds)``.
    """
    k = _normalizer(bba)
    if bounds is None:
        boxes = [fe.bbox for fe, _ in bba.items()]
        bounds = (
            min(b[0] for b in boxes),
            min(b[1] for b in boxes),
            max(b[2] for b in boxes),
            max(b[3] for b in boxes),
        )
    x0, y0, x1, y1 = bounds
    density = np.zeros((y1 - y0, x1 - x0))
    for fe, m in bba.items():
        bx0, by0, bx1, by1 = fe.bbox
        cx0, cy0 = max(bx0, x0), max(by0, y0)
        cx1, cy1 = min(bx1, x1), min(by1, y1)
        if cx1 <= cx0 or cy1 <= cy0:
            continue
        winding, boundary = raster_winding(fe, (cx0, cy0, cx1, cy1))
        inside = (winding != 0) & ~boundary
        density[cy0 - y0 : cy1 - y0, cx0 - x0 : cx1 - x0] += inside * (m / fe.area)
    return density / k, bounds


def raster_argmax(bba: BBA, bounds: tuple[int, int, int, int] | None = None) -> tuple[int, int, float]:
    """Lower-left corner of the unit cell with the highest raster density."""
    density, (x0, y0, _, _) = raster_betp(bba, bounds)
    row, col = np.unravel_index(int(np.argmax(density)), density.shape)
    return x0 + int(col), y0 + int(row), float(density[row, col])


__all__ = [
    "Decision",
    "DecisionError",
    "IntersectionGraph",
    "MaximalIntersection",
    "betp_argmax",
    "betp_compound",
    "betp_singleton_density",
    "build_graph",
    "maximal_intersections",
    "raster_argmax",
    "raster_betp",
    "select_argmax",
    "simplify_graph",
]
