"""Similarity metrics between a candidate saliency map and a reference map:
KL divergence, Pearson correlation, histogram intersection, Spearman rank
correlation, shuffled AUC and information gain.

KL is reported in nats and information gain in bits, following the usual
conventions of their respective lineages.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import BoundsError, Fixation, SaliencyMap, ShapeError, round_half_up

EPSILON = 1e-7
METRIC_UNITS = {
    "kl_d": "nats",
    "cc": "correlation",
    "sim": "intersection",
    "rank_co": "correlation",
    "sauc": "auc",
    "ig": "bits",
}


@dataclass(frozen=True)
class DistributionMap:
    """A saliency field normalized to a probability distribution over pixels."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=np.float64, copy=True)
        if p.ndim != 2:
            raise ShapeError(f"distribution must be 2-D, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1, got {p.sum()}")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def from_saliency(cls, saliency: SaliencyMap) -> "DistributionMap":
        total = float(saliency.values.sum())
        if total <= 0:
            raise ValueError("cannot normalize an all-zero saliency map")
        return cls(probabilities=saliency.values / total)

    @property
    def height(self) -> int:
        return self.probabilities.shape[0]

    @property
    def width(self) -> int:
        return self.probabilities.shape[1]


@dataclass(frozen=True)
class FixationSet:
    """Integer pixel locations of fixations on one image, as (x, y) pairs."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.intp, copy=True)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ShapeError(f"fixation points must have shape (N, 2), got {pts.shape}")
        if pts.size and pts.min() < 0:
            raise ValueError("fixation coordinates must be non-negative")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_fixations(cls, fixations: Sequence[Fixation]) -> "FixationSet":
        pts = [(round_half_up(f.x), round_half_up(f.y)) for f in fixations]
        return cls(points=np.array(pts, dtype=np.intp).reshape(-1, 2))

    def __len__(self) -> int:
        return self.points.shape[0]


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"map shapes differ: {a.shape} vs {b.shape}")


def _values_at(values: np.ndarray, fixations: FixationSet) -> np.ndarray:
    if len(fixations) == 0:
        raise ValueError("fixation set must be non-empty")
    xs = fixations.points[:, 0]
    ys = fixations.points[:, 1]
    height, width = values.shape
    if xs.max() >= width or ys.max() >= height:
        raise BoundsError(f"fixation outside {width}x{height} map")
    return values[ys, xs]


def kl_divergence(reference: DistributionMap, candidate: DistributionMap) -> float:
    """sum(G * ln(eps + G / (eps + P))) in nats, with G the reference."""
    _check_same_shape(reference.probabilities, candidate.probabilities)
    g = reference.probabilities
    p = candidate.probabilities
    return float(np.sum(g * np.log(EPSILON + g / (EPSILON + p))))


def pearson_cc(a: SaliencyMap, b: SaliencyMap) -> float:
    """Pearson correlation of the flattened values; constant maps are rejected."""
    _check_same_shape(a.values, b.values)
    da = a.values.reshape(-1) - a.values.mean()
    db = b.values.reshape(-1) - b.values.mean()
    var_a = float(np.dot(da, da))
    var_b = float(np.dot(db, db))
    if var_a == 0.0 or var_b == 0.0:
        raise ValueError("correlation is undefined for a constant map")
    return float(np.dot(da, db)) / float(np.sqrt(var_a * var_b))


def sim(reference: DistributionMap, candidate: DistributionMap) -> float:
    """Histogram intersection: sum of the elementwise minimum."""
    _check_same_shape(reference.probabilities, candidate.probabilities)
    return float(np.minimum(reference.probabilities, candidate.probabilities).sum())


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    flat = values.reshape(-1)
    n = flat.size
    order = np.argsort(flat, kind="stable")
    sorted_values = flat[order]
    new_group = np.empty(n, dtype=bool)
    new_group[0] = True
    new_group[1:] = sorted_values[1:] != sorted_values[:-1]
    group = np.cumsum(new_group) - 1
    positions = np.arange(1, n + 1, dtype=np.float64)
    group_mean = np.bincount(group, weights=positions) / np.bincount(group)
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = group_mean[group]
    return ranks


def rank_correlation(a: SaliencyMap, b: SaliencyMap) -> float:
    """Spearman correlation: Pearson on tie-averaged rank vectors."""
    _check_same_shape(a.values, b.values)
    ranks_a = SaliencyMap(values=average_ranks(a.values).reshape(a.values.shape))
    ranks_b = SaliencyMap(values=average_ranks(b.values).reshape(b.values.shape))
    return pearson_cc(ranks_a, ranks_b)


def shuffled_auc(candidate: SaliencyMap, positives: FixationSet,
                 negatives: FixationSet) -> float:
    """ROC AUC of candidate values at positive vs negative fixation locations.

    Computed exactly from integer pair counts (ties credit one half), so it
    matches all-pairs enumeration bit for bit and complements sum to exactly 1.
    """
    pos_values = _values_at(candidate.values, positives)
    neg_values = _values_at(candidate.values, negatives)
    neg_sorted = np.sort(neg_values)
    below = np.searchsorted(neg_sorted, pos_values, side="left")
    below_or_equal = np.searchsorted(neg_sorted, pos_values, side="right")
    greater = int(below.sum())
    ties = int((below_or_equal - below).sum())
    numerator = 2 * greater + ties  # twice the Mann-Whitney U
    denominator = 2 * len(pos_values) * len(neg_values)
    if 2 * numerator <= denominator:
        return numerator / denominator
    return 1.0 - (denominator - numerator) / denominator


def information_gain(candidate: DistributionMap, baseline: DistributionMap,
                     positives: FixationSet) -> float:
    """Mean log2 probability advantage of the candidate over the baseline at fixations."""
    _check_same_shape(candidate.probabilities, baseline.probabilities)
    p = _values_at(candidate.probabilities, positives)
    b = _values_at(baseline.probabilities, positives)
    return float(np.mean(np.log2(p + EPSILON) - np.log2(b + EPSILON)))


def center_prior(width: int, height: int, sigma_fraction: float = 0.25) -> DistributionMap:
    """Center-weighted Gaussian baseline with sigma = fraction of the short side."""
    sigma = sigma_fraction * min(width, height)
    ys = np.arange(height, dtype=np.float64) - (height - 1) / 2.0
    xs = np.arange(width, dtype=np.float64) - (width - 1) / 2.0
    grid = np.exp(-(ys[:, None] ** 2 + xs[None, :] ** 2) / (2.0 * sigma * sigma))
    return DistributionMap(probabilities=grid / grid.sum())


def pool_negatives(fixation_sets: Sequence[FixationSet], exclude: int,
                   count: int, seed: int) -> FixationSet:
    """Sample negative locations from every set but `exclude`, with a fixed seed."""
    pooled = [fs.points for i, fs in enumerate(fixation_sets) if i != exclude and len(fs)]
    if not pooled:
        raise ValueError("no other fixation sets to pool negatives from")
    points = np.concatenate(pooled, axis=0)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(points.shape[0], size=min(count, points.shape[0]), replace=False)
    return FixationSet(points=points[np.sort(chosen)])


def compare_all(candidate: SaliencyMap, reference: SaliencyMap,
                positives: Optional[FixationSet] = None,
                negatives: Optional[FixationSet] = None,
                baseline: Optional[DistributionMap] = None) -> dict:
    """All six metrics in one report; per-metric failures are recorded, not raised.

    When positives are supplied without a baseline, information gain falls
    back to the center-prior baseline.
    """
    values: dict[str, Optional[float]] = {}
    errors: dict[str, str] = {}

    def attempt(name, fn):
        try:
            values[name] = fn()
        except Exception as exc:  # noqa: BLE001 - reported per metric
            values[name] = None
            errors[name] = str(exc)

    attempt("kl_d", lambda: kl_divergence(DistributionMap.from_saliency(reference),
                                          DistributionMap.from_saliency(candidate)))
    attempt("cc", lambda: pearson_cc(candidate, reference))
    attempt("sim", lambda: sim(DistributionMap.from_saliency(reference),
                               DistributionMap.from_saliency(candidate)))
    attempt("rank_co", lambda: rank_correlation(candidate, reference))

    if positives is not None and negatives is not None:
        attempt("sauc", lambda: shuffled_auc(candidate, positives, negatives))
    else:
        values["sauc"] = None
        errors["sauc"] = "not computed: positive and negative fixation sets required"

    if positives is not None:
        ig_baseline = baseline if baseline is not None \
            else center_prior(candidate.width, candidate.height)
        attempt("ig", lambda: information_gain(
            DistributionMap.from_saliency(candidate), ig_baseline, positives))
    else:
        values["ig"] = None
        errors["ig"] = "not computed: positive fixation set required"

    return {"metrics": values, "units": dict(METRIC_UNITS), "errors": errors}
