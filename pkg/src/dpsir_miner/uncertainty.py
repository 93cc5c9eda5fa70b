"""Consistency-based uncertainty for repeated multi-label responses.

The score for a snippet is the average pairwise Jaccard distance over the
k label sets produced by repeating the same prompt k times. Identical runs
score 0, pairwise-disjoint runs score 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Hashable, Sequence


class UniverseKind(str, Enum):
    INDICATOR = "indicator"
    VARIABLE = "variable"
    LINK = "link"


@dataclass(frozen=True)
class LabelSetFamily:
    """The k label sets observed for one (snippet, step) pair."""

    sets: tuple[frozenset, ...]
    universe_kind: UniverseKind = UniverseKind.INDICATOR

    @classmethod
    def from_iterables(cls, sets: Sequence, universe_kind: UniverseKind = UniverseKind.INDICATOR) -> "LabelSetFamily":
        return cls(tuple(frozenset(s) for s in sets), universe_kind)

    @property
    def k(self) -> int:
        return len(self.sets)


def jaccard_distance(a: frozenset | set, b: frozenset | set) -> float:
    """(|A∪B| - |A∩B|) / |A∪B|, with the empty-vs-empty case defined as 0.

    Two empty responses agree perfectly, so agreement-on-nothing counts as
    full consistency rather than dividing by zero.
    """
    union = len(a | b)
    if union == 0:
        return 0.0
    return (union - len(a & b)) / union


def uncertainty_score(family: LabelSetFamily) -> float:
    """Average Jaccard distance over all C(k,2) unordered pairs of runs."""
    k = family.k
    if k < 2:
        raise ValueError("insufficient samples: uncertainty needs k >= 2 runs")
    total = sum(jaccard_distance(a, b) for a, b in combinations(family.sets, 2))
    return total / (k * (k - 1) / 2)


def link_key(source: Hashable, target: Hashable) -> tuple:
    """Identity used when matching links across runs.

    Only the ordered (source, target) pair matters; the free-form
    relationship text is deliberately ignored.
    """
    return (source, target)
