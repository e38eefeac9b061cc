"""Discriminative-attribute analysis and fixation-to-body-part accounting.

For a pair of classes, every cross-class image pair votes on which binary
attributes differ; grouping those votes by body part names the most
discriminative part. Fixations are assigned to their nearest visible part so
gaze dwell time per part can be ranked against that ground truth.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .core import Fixation, SchemaError


@dataclass(frozen=True)
class ComparisonVector:
    """Per-attribute count of cross-class image pairs that disagree on it."""

    counts: np.ndarray
    pair_count: int

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 1:
            raise SchemaError("comparison counts must be a flat vector")
        if np.any(counts < 0) or np.any(counts > self.pair_count):
            raise ValueError("counts must lie in [0, pair_count]")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class PartAttention:
    """Accumulated fixation durations and counts per body part."""

    durations_ms: Mapping[int, float]
    counts: Mapping[int, int]

    def __post_init__(self):
        object.__setattr__(self, "durations_ms", dict(self.durations_ms))
        object.__setattr__(self, "counts", dict(self.counts))

    @property
    def focused_parts(self) -> list[int]:
        return sorted(part for part, count in self.counts.items() if count > 0)

    @property
    def total_duration_ms(self) -> float:
        return float(sum(self.durations_ms.values()))


@dataclass(frozen=True)
class HitRateReport:
    hit_rate_at_k: Mapping[int, float]
    focused_parts_histogram: Mapping[int, int]

    def __post_init__(self):
        object.__setattr__(self, "hit_rate_at_k", dict(self.hit_rate_at_k))
        object.__setattr__(self, "focused_parts_histogram", dict(self.focused_parts_histogram))


class DiscriminativePart(NamedTuple):
    part: int
    degenerate: bool  # all per-part sums were zero; part 0 returned by tie rule


def comparison_vector(class_a: Sequence[Sequence[int]],
                      class_b: Sequence[Sequence[int]]) -> ComparisonVector:
    """Count, per attribute, the cross-class pairs whose binary values differ."""
    a = np.asarray(class_a, dtype=np.int64)
    b = np.asarray(class_b, dtype=np.int64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] == 0 or b.shape[0] == 0:
        raise SchemaError("each class needs a non-empty (images x attributes) matrix")
    if a.shape[1] != b.shape[1]:
        raise SchemaError(f"attribute lengths differ: {a.shape[1]} vs {b.shape[1]}")
    for matrix in (a, b):
        if not np.all((matrix == 0) | (matrix == 1)):
            raise SchemaError("attributes must be binary")
    ones_a = a.sum(axis=0)
    ones_b = b.sum(axis=0)
    m, n = a.shape[0], b.shape[0]
    # pairs differing on attribute j = (ones in A) * (zeros in B) + (zeros in A) * (ones in B)
    counts = ones_a * (n - ones_b) + (m - ones_a) * ones_b
    return ComparisonVector(counts=counts, pair_count=m * n)


def discriminative_part(vector: ComparisonVector,
                        attribute_to_part: Mapping[int, int]) -> DiscriminativePart:
    """Part with the largest grouped difference count; ties go to the smaller index."""
    num_attributes = vector.counts.shape[0]
    part_sums: dict[int, int] = {}
    for attr_idx in range(num_attributes):
        if attr_idx not in attribute_to_part:
            raise SchemaError(f"attribute {attr_idx} missing from attribute_to_part")
        part = attribute_to_part[attr_idx]
        part_sums[part] = part_sums.get(part, 0) + int(vector.counts[attr_idx])
    best = min(part_sums, key=lambda part: (-part_sums[part], part))
    degenerate = all(total == 0 for total in part_sums.values())
    if degenerate:
        best = 0
    return DiscriminativePart(part=best, degenerate=degenerate)


def assign_fixations(fixations: Sequence[Fixation],
                     part_centers: Sequence[tuple[int, float, float]]) -> PartAttention:
    """Assign each fixation to its Euclidean-nearest visible part center.

    Distance ties resolve to the smaller part index; durations accumulate per
    part, so their total equals the total fixation duration exactly.
    """
    if not part_centers:
        raise ValueError("at least one visible part center is required")
    centers = sorted(part_centers, key=lambda entry: entry[0])
    durations: dict[int, float] = {part: 0.0 for part, _, _ in centers}
    counts: dict[int, int] = {part: 0 for part, _, _ in centers}
    for fix in fixations:
        best_part = None
        best_dist = np.inf
        for part, cx, cy in centers:
            dist = (fix.x - cx) ** 2 + (fix.y - cy) ** 2
            if dist < best_dist:
                best_dist = dist
                best_part = part
        durations[best_part] += fix.duration_ms
        counts[best_part] += 1
    return PartAttention(durations_ms=durations, counts=counts)


def ranked_parts(attention: PartAttention) -> list[int]:
    """Fixated parts ordered by dwell time descending, ties by part index."""
    fixated = [part for part, count in attention.counts.items() if count > 0]
    return sorted(fixated, key=lambda part: (-attention.durations_ms[part], part))


def hit_rate(per_image: Sequence[tuple[PartAttention, int]],
             ks: Sequence[int]) -> HitRateReport:
    """Fraction of images whose ground-truth part ranks in the top k by dwell time.

    Also reports the histogram of how many distinct parts each image fixated.
    """
    if not per_image:
        raise ValueError("hit_rate needs at least one image")
    rates: dict[int, float] = {}
    histogram: dict[int, int] = {}
    rankings = []
    for attention, truth in per_image:
        ranking = ranked_parts(attention)
        if not ranking:
            raise ValueError("every image must have at least one fixated part")
        rankings.append((ranking, truth))
        n_focused = len(ranking)
        histogram[n_focused] = histogram.get(n_focused, 0) + 1
    for k in ks:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        hits = sum(1 for ranking, truth in rankings if truth in ranking[:k])
        rates[int(k)] = hits / len(rankings)
    return HitRateReport(hit_rate_at_k=rates, focused_parts_histogram=histogram)
