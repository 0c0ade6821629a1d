"""Mass functions over 2D polygon and 1D binary-word focal elements.

A :class:`BBA` stores focal elements in a hash table keyed by their 64-bit
digest, chaining on collision and confirming every hit by equality. Masses on
the empty set are kept apart in ``conflict``.

Both focal-element kinds expose the same duck-typed surface: ``intersect``,
``unite``, ``contains``, ``area`` (doubled cardinality), ``is_empty``,
``digest`` and equality.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator, Union

from .geometry import FrameSpec, GeometryError, MASK64, PolygonSet, hash_combine

SUM_TOLERANCE = 1e-9
PURGE_THRESHOLD = 1e-12


class EvidenceError(ValueError):
    """Contract violation in a belief-function operation."""


class BinaryWord:
    """Subset of an enumerated frame of at most 64 singletons."""

    __slots__ = ("bits", "size")

    def __init__(self, bits: int, size: int):
        if not 0 < size <= 64:
            raise EvidenceError("1D frames hold between 1 and 64 singletons")
        if bits < 0 or bits >> size:
            raise EvidenceError(f"word {bits:#x} does not fit a {size}-singleton frame")
        self.bits = bits
        self.size = size

    def intersect(self, other: "BinaryWord") -> "BinaryWord":
        return BinaryWord(self.bits & other.bits, self.size)

    def unite(self, other: "BinaryWord") -> "BinaryWord":
        return BinaryWord(self.bits | other.bits, self.size)

    def contains(self, other: "BinaryWord") -> bool:
        return other.bits & ~self.bits == 0

    def intersection_area(self, other: "BinaryWord") -> int:
        return 2 * (self.bits & other.bits).bit_count()

    @property
    def area(self) -> int:
        # doubled, to share code paths with polygon cardinalities
        return 2 * self.bits.bit_count()

    @property
    def is_empty(self) -> bool:
        return self.bits == 0

    @property
    def digest(self) -> int:
        return hash_combine(hash_combine(0, self.size), self.bits) & MASK64

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryWord):
            return NotImplemented
        return self.bits == other.bits and self.size == other.size

    def __hash__(self) -> int:
        return self.digest

    def __repr__(self) -> str:
        return f"BinaryWord({self.bits:0{self.size}b})"


FocalElement = Union[PolygonSet, BinaryWord]


@dataclass(frozen=True)
class DiscreteFrame:
    """Enumerated frame of ``size`` singletons (bit i = singleton i)."""

    size: int

    def __post_init__(self) -> None:
        if not 0 < self.size <= 64:
            raise EvidenceError("1D frames hold between 1 and 64 singletons")

    def omega(self) -> BinaryWord:
        return BinaryWord((1 << self.size) - 1, self.size)

    def contains(self, fe: BinaryWord) -> bool:
        return isinstance(fe, BinaryWord) and fe.size == self.size

    def to_json(self) -> dict:
        return {"singletons": self.size}


Frame = Union[FrameSpec, DiscreteFrame]


def frame_from_json(data: dict) -> Frame:
    if "singletons" in data:
        return DiscreteFrame(int(data["singletons"]))
    return FrameSpec.from_json(data)


class BBA:
    """Sparse basic belief assignment.

    ``add_mass`` is the only mutator and is meant for the construction phase;
    every combination rule returns a fresh BBA.
    """

    def __init__(self, frame: Frame, conflict: float = 0.0):
        self.frame = frame
        self.conflict = float(conflict)
        self._table: dict[int, list[list]] = {}
        self._count = 0

    @classmethod
    def vacuous(cls, frame: Frame) -> "BBA":
        return cls(frame).add_mass(frame.omega(), 1.0)

    @classmethod
    def categorical(cls, frame: Frame, fe: FocalElement) -> "BBA":
        return cls(frame).add_mass(fe, 1.0)

    @classmethod
    def from_items(cls, frame: Frame, items, conflict: float = 0.0) -> "BBA":
        bba = cls(frame, conflict)
        for fe, mass in items:
            bba.add_mass(fe, mass)
        return bba

    def add_mass(self, fe: FocalElement, mass: float) -> "BBA":
        """Accumulate ``mass`` on ``fe``; an empty element feeds the conflict."""
        if not 0 < mass <= 1 + SUM_TOLERANCE:
            raise EvidenceError(f"mass {mass!r} outside (0, 1]")
        if fe.is_empty:
            self.conflict += mass
            return self
        if not self.frame.contains(fe):
            raise EvidenceError("focal element lies outside the frame")
        chain = self._table.setdefault(fe.digest, [])
        for entry in chain:
            if entry[0] == fe:
                entry[1] += mass
                return self
        chain.append([fe, mass])
        self._count += 1
        return self

    def _add_unchecked(self, fe: FocalElement, mass: float) -> None:
        chain = self._table.setdefault(fe.digest, [])
        for entry in chain:
            if entry[0] == fe:
                entry[1] += mass
                return
        chain.append([fe, mass])
        self._count += 1

    def mass(self, fe: FocalElement) -> float:
        if fe.is_empty:
            return self.conflict
        for entry in self._table.get(fe.digest, ()):
            if entry[0] == fe:
                return entry[1]
        return 0.0

    def items(self) -> Iterator[tuple[FocalElement, float]]:
        for chain in self._table.values():
            for fe, m in chain:
                yield fe, m

    def focal_elements(self) -> list[FocalElement]:
        return [fe for fe, _ in self.items()]

    def __len__(self) -> int:
        return self._count

    def __contains__(self, fe: FocalElement) -> bool:
        return any(entry[0] == fe for entry in self._table.get(fe.digest, ()))

    def total(self) -> float:
        return math.fsum([self.conflict, *(m for _, m in self.items())])

    def check(self) -> None:
        total = self.total()
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise EvidenceError(f"masses sum to {total!r}, not 1")

    def copy(self) -> "BBA":
        out = BBA(self.frame, self.conflict)
        for fe, m in self.items():
            out._add_unchecked(fe, m)
        return out

    def finalize(self, threshold: float = PURGE_THRESHOLD) -> "BBA":
        """Drop dust entries and rescale the rest, leaving the conflict alone."""
        kept = [(fe, m) for fe, m in self.items() if m >= threshold]
        out = BBA(self.frame, self.conflict)
        if not kept:
            out.conflict = 1.0
            return out
        scale = (1.0 - self.conflict) / math.fsum(m for _, m in kept)
        for fe, m in kept:
            out._add_unchecked(fe, m * scale)
        return out

    def to_json(self) -> dict:
        elements = []
        for fe, m in self.items():
            if isinstance(fe, PolygonSet):
                elements.append({"mass": m, "polygon": fe.to_json()})
            else:
                elements.append({"mass": m, "bits": fe.bits})
        return {"frame": self.frame.to_json(), "elements": elements, "conflict": self.conflict}

    @classmethod
    def from_json(cls, data: dict) -> "BBA":
        try:
            frame = frame_from_json(data["frame"])
            bba = cls(frame, float(data.get("conflict", 0.0)))
            for el in data["elements"]:
                if "polygon" in el:
                    fe = PolygonSet.from_json(el["polygon"])
                else:
                    fe = BinaryWord(int(el["bits"]), frame.size)
                bba.add_mass(fe, float(el["mass"]))
        except (KeyError, TypeError) as exc:
            raise EvidenceError(f"malformed BBA JSON: {exc}") from exc
        return bba

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def __repr__(self) -> str:
        return f"BBA({len(self)} focal elements, conflict={self.conflict:.6g})"


def _same_frame(m1: BBA, m2: BBA) -> None:
    if m1.frame != m2.frame:
        raise EvidenceError("BBAs are defined on different frames")


def conjunctive_combine(m1: BBA, m2: BBA) -> BBA:
    """Unnormalized conjunctive rule; empty intersections feed the conflict."""
    _same_frame(m1, m2)
    c1, c2 = m1.conflict, m2.conflict
    out = BBA(m1.frame, c1 + c2 - c1 * c2)
    items2 = list(m2.items())
    for b, mb in m1.items():
        for c, mc in items2:
            inter = b.intersect(c)
            if inter.is_empty:
                out.conflict += mb * mc
            else:
                out._add_unchecked(inter, mb * mc)
    return out


def disjunctive_combine(m1: BBA, m2: BBA) -> BBA:
    """Disjunctive rule: products accrue to unions."""
    _same_frame(m1, m2)
    out = BBA(m1.frame, m1.conflict * m2.conflict)
    items1 = list(m1.items())
    items2 = list(m2.items())
    for b, mb in items1:
        if m2.conflict:
            out._add_unchecked(b, mb * m2.conflict)
        for c, mc in items2:
            out._add_unchecked(b.unite(c), mb * mc)
    if m1.conflict:
        for c, mc in items2:
            out._add_unchecked(c, m1.conflict * mc)
    return out


def dempster_normalize(bba: BBA) -> BBA:
    """Redistribute the conflict proportionally (Dempster normalization)."""
    if bba.conflict >= 1.0 - PURGE_THRESHOLD:
        raise EvidenceError("cannot normalize a totally conflicting BBA")
    k = 1.0 - bba.conflict
    out = BBA(bba.frame)
    for fe, m in bba.items():
        out._add_unchecked(fe, m / k)
    return out


def belief(bba: BBA, a: FocalElement) -> float:
    return math.fsum(m for b, m in bba.items() if a.contains(b))


def plausibility(bba: BBA, a: FocalElement) -> float:
    return math.fsum(m for b, m in bba.items() if not b.intersect(a).is_empty)


def commonality(bba: BBA, a: FocalElement) -> float:
    total = math.fsum(m for b, m in bba.items() if b.contains(a))
    if a.is_empty:
        total += bba.conflict
    return total


def discount(bba: BBA, alpha: float) -> BBA:
    """Shafer discounting: scale every mass by 1 - alpha, give alpha to Omega."""
    if not 0.0 <= alpha <= 1.0:
        raise EvidenceError(f"discount rate {alpha!r} outside [0, 1]")
    keep = 1.0 - alpha
    out = BBA(bba.frame, bba.conflict * keep)
    for fe, m in bba.items():
        if m * keep > 0:
            out._add_unchecked(fe, m * keep)
    out._add_unchecked(bba.frame.omega(), alpha * bba.total())
    return out


def condition(bba: BBA, c: FocalElement) -> BBA:
    """Conjunctive combination with the categorical BBA on ``c``."""
    if c.area <= 0:
        raise EvidenceError("conditioning set must have positive cardinality")
    return conjunctive_combine(bba, BBA.categorical(bba.frame, c))


def is_consonant(bba: BBA) -> bool:
    """True iff the focal elements form a chain under inclusion."""
    elements = sorted(bba.focal_elements(), key=lambda fe: fe.area, reverse=True)
    return all(outer.contains(inner) for outer, inner in zip(elements, elements[1:]))


__all__ = [
    "BBA",
    "BinaryWord",
    "DiscreteFrame",
    "EvidenceError",
    "FocalElement",
    "Frame",
    "GeometryError",
    "belief",
    "commonality",
    "condition",
    "conjunctive_combine",
    "dempster_normalize",
    "discount",
    "disjunctive_combine",
    "frame_from_json",
    "is_consonant",
    "plausibility",
]
