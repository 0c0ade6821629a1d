"""BBA simplification by greedy pairwise aggregation.

At each step two focal elements are replaced by their union, carrying the sum
of their masses. The pair is the one whose merge leaves the BBA closest, in
Jousselme distance, to the *original* BBA.
"""

from __future__ import annotations

import math

import numpy as np

from .evidence import BBA, EvidenceError, FocalElement


def jaccard(a: FocalElement | None, b: FocalElement | None, inter_area: int | None = None) -> float:
    """|A∩B| / |A∪B|, with ``None`` standing for the empty set."""
    if a is None or b is None:
        return 1.0 if a is None and b is None else 0.0
    if inter_area is None:
        inter_area = a.intersection_area(b)
    union = a.area + b.area - inter_area
    return inter_area / union if union > 0 else 0.0


class _AreaCache:
    """Pairwise intersection areas of long-lived focal elements."""

    def __init__(self) -> None:
        self._areas: dict[tuple[int, int], int] = {}
        self._alive: list[FocalElement] = []

    def inter(self, a: FocalElement, b: FocalElement) -> int:
        if a is b:
            return a.area
        key = (id(a), id(b)) if id(a) < id(b) else (id(b), id(a))
        value = self._areas.get(key)
        if value is None:
            value = a.intersection_area(b)
            self._areas[key] = value
            self._alive.extend((a, b))
        return value

    def union_inter(self, a: FocalElement, b: FocalElement, u: FocalElement, x: FocalElement) -> int:
        """|(a ∪ b) ∩ x| where ``u`` is ``a ∪ b``, settled from cached areas when possible."""
        key = (id(u), id(x)) if id(u) < id(x) else (id(x), id(u))
        value = self._areas.get(key)
        if value is not None:
            return value
        if self.inter(a, x) == 0 and self.inter(b, x) == 0:
            value = 0
        else:
            value = u.intersection_area(x)
        self._areas[key] = value
        self._alive.extend((u, x))
        return value

    def jaccard(self, a: FocalElement, b: FocalElement, inter: int | None = None) -> float:
        if inter is None:
            inter = self.inter(a, b)
        union = a.area + b.area - inter
        return inter / union if union > 0 else 0.0


def similarity_matrix(elements: list[FocalElement | None]) -> np.ndarray:
    """Jaccard similarities; ``None`` entries denote the empty set."""
    n = len(elements)
    d = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = jaccard(elements[i], elements[j])
    return d


def _basis(m1: BBA, m2: BBA) -> tuple[list, np.ndarray, np.ndarray]:
    elements: list[FocalElement | None] = []
    v1: list[float] = []
    v2: list[float] = []
    for fe, m in m1.items():
        elements.append(fe)
        v1.append(m)
        v2.append(m2.mass(fe))
    for fe, m in m2.items():
        if fe not in m1:
            elements.append(fe)
            v1.append(0.0)
            v2.append(m)
    if m1.conflict or m2.conflict:
        elements.append(None)
        v1.append(m1.conflict)
        v2.append(m2.conflict)
    return elements, np.array(v1), np.array(v2)


def jousselme_distance(m1: BBA, m2: BBA) -> float:
    """sqrt(0.5 (m1 - m2)^T D (m1 - m2)) on the joint focal-element basis."""
    if m1.frame != m2.frame:
        raise EvidenceError("BBAs are defined on different frames")
    elements, v1, v2 = _basis(m1, m2)
    diff = v1 - v2
    value = 0.5 * float(diff @ similarity_matrix(elements) @ diff)
    return math.sqrt(max(value, 0.0))


def greedy_step(
    original: BBA, current: BBA, cache: _AreaCache | None = None
) -> tuple[BBA, float, tuple[FocalElement, FocalElement]]:
    """Perform one aggregation; returns ``(merged, distance, merged pair)``.

    With ``v = m_current - m_original`` on the joint basis, merging ``(A, B)``
    into ``U`` adds a sparse ``delta`` and the squared distance becomes
    ``0.5 (v'Dv + 2 delta'Dv + delta'D delta)``. Only the few nonzero entries
    of ``v`` (merged-away originals, merged elements) need similarities with
    ``U``. Conflict masses are identical on both sides and cancel.
    """
    cache = cache or _AreaCache()
    items = list(current.items())
    cur = [fe for fe, _ in items]
    m_cur = [m for _, m in items]
    n = len(cur)

    v: dict[FocalElement, float] = {}
    for fe, m in original.items():
        v[fe] = v.get(fe, 0.0) - m
    for fe, m in items:
        v[fe] = v.get(fe, 0.0) + m
    nz = [(fe, c) for fe, c in v.items() if c != 0.0]
    vdv = math.fsum(cx * cy * cache.jaccard(x, y) for x, cx in nz for y, cy in nz)
    dv_cur = [math.fsum(c * cache.jaccard(fe, x) for x, c in nz) for fe in cur]
    dv_index = {fe: k for k, fe in enumerate(cur)}

    best = None
    for i in range(n):
        for j in range(i + 1, n):
            a, b = cur[i], cur[j]
            union = a.unite(b)
            k_same = dv_index.get(union)
            if k_same is not None:
                union = cur[k_same]

            def sim_u(x: FocalElement) -> float:
                if k_same is not None:
                    return cache.jaccard(x, union)
                return cache.jaccard(x, union, cache.union_inter(a, b, union, x))

            delta: dict[int, float] = {}
            # keys: 0 = a, 1 = b, 2 = union (which may alias a or b)
            keys = {0: a, 1: b, 2: union}
            delta[0] = -m_cur[i]
            delta[1] = -m_cur[j]
            merged = m_cur[i] + m_cur[j]
            if union is a or union == a:
                delta[0] += merged
                del keys[2]
            elif union is b or union == b:
                delta[1] += merged
                del keys[2]
            else:
                delta[2] = merged
            dv = {0: dv_cur[i], 1: dv_cur[j]}
            if 2 in keys:
                dv[2] = dv_cur[k_same] if k_same is not None else math.fsum(c * sim_u(x) for x, c in nz)

            def sim(p: int, q: int) -> float:
                if p == q:
                    return 1.0
                if 2 in (p, q):
                    return sim_u(keys[q if p == 2 else p])
                return cache.jaccard(keys[p], keys[q])

            lin = math.fsum(d * dv[k] for k, d in delta.items())
            quad = math.fsum(delta[p] * delta[q] * sim(p, q) for p in delta for q in delta)
            dist = math.sqrt(max(0.5 * (vdv + 2.0 * lin + quad), 0.0))
            key = (dist, union.area, union.digest)
            if best is None or key < best[0]:
                best = (key, i, j, k_same, union)
    assert best is not None
    key, i, j, k_same, union = best
    out = BBA(current.frame, current.conflict)
    merged = m_cur[i] + m_cur[j]
    for k in range(n):
        if k in (i, j):
            continue
        if k == k_same:
            merged += m_cur[k]
            continue
        out._add_unchecked(cur[k], m_cur[k])
    out._add_unchecked(union, merged)
    return out, key[0], (cur[i], cur[j])


def simplify_bba(bba: BBA, target_count: int) -> BBA:
    """Aggregate focal elements pairwise until ``target_count`` remain."""
    if target_count < 1:
        raise EvidenceError("target_count must be at least 1")
    if len(bba) <= target_count:
        return bba
    cache = _AreaCache()
    current = bba
    while len(current) > target_count:
        current, _, _ = greedy_step(bba, current, cache)
    return current


__all__ = ["greedy_step", "jaccard", "jousselme_distance", "similarity_matrix", "simplify_bba"]
