"""Belief functions on two-dimensional frames with exact polygon focal elements."""

from .decision import Decision, DecisionError, betp_argmax, betp_compound, betp_singleton_density
from .evidence import (
    BBA,
    BinaryWord,
    DiscreteFrame,
    EvidenceError,
    belief,
    commonality,
    condition,
    conjunctive_combine,
    dempster_normalize,
    discount,
    disjunctive_combine,
    is_consonant,
    plausibility,
)
from .geometry import FrameSpec, GeometryError, PolygonSet, offset, regular_polygon_disk, ring_sector
from .simplify import jousselme_distance, simplify_bba

__all__ = [
    "BBA",
    "BinaryWord",
    "Decision",
    "DecisionError",
    "DiscreteFrame",
    "EvidenceError",
    "FrameSpec",
    "GeometryError",
    "PolygonSet",
    "belief",
    "betp_argmax",
    "betp_compound",
    "betp_singleton_density",
    "commonality",
    "condition",
    "conjunctive_combine",
    "dempster_normalize",
    "discount",
    "disjunctive_combine",
    "is_consonant",
    "jousselme_distance",
    "offset",
    "plausibility",
    "regular_polygon_disk",
    "ring_sector",
    "simplify_bba",
]
