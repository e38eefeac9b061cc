"""Attention-guided crop planning: sliding-window scoring over a saliency map,
per-scale top-k selection with non-maximum suppression, and crop extraction.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import BoundsError, ConfigError, RasterImage, SaliencyMap, round_half_up
from .imageops import resample_bilinear

SCALE_TAGS = ("large", "medium", "small")


def default_stride(width: int, height: int) -> int:
    """One eighth of the short window side, at least one pixel."""
    return max(1, round_half_up(min(width, height) / 8.0))


@dataclass(frozen=True)
class WindowSpec:
    width: int
    height: int
    scale_tag: str
    k: int
    stride: Optional[int] = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("window dimensions must be positive")
        if self.scale_tag not in SCALE_TAGS:
            raise ValueError(f"scale_tag must be one of {SCALE_TAGS}, got {self.scale_tag!r}")
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.stride is None:
            object.__setattr__(self, "stride", default_stride(self.width, self.height))
        elif self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass(frozen=True)
class CropBox:
    x: int
    y: int
    width: int
    height: int
    score: float
    scale_tag: str


@dataclass(frozen=True)
class CropPlan:
    image_id: str
    boxes: tuple[CropBox, ...]
    resize_to: tuple[int, int]  # (width, height)

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))


# Window-size tables for the two shipped data regimes. The bird table is kept
# verbatim even though its large entries (246,264)/(269,246) look like typos
# for 246x269; "cub-corrected" carries the symmetric variant.
WINDOW_PRESETS: dict[str, dict[str, list[tuple[int, int]]]] = {
    "cub": {
        "small": [(123, 134), (134, 123), (123, 123), (134, 134)],
        "medium": [(174, 190), (190, 174), (174, 174), (190, 190)],
        "large": [(246, 264), (269, 246)],
    },
    "cub-corrected": {
        "small": [(123, 134), (134, 123), (123, 123), (134, 134)],
        "medium": [(174, 190), (190, 174), (174, 174), (190, 190)],
        "large": [(246, 269), (269, 246)],
    },
    "cxr": {
        "small": [(87, 95), (95, 87), (95, 95), (87, 87)],
        "medium": [(123, 135), (135, 123), (123, 123), (135, 135)],
        "large": [(180, 190), (190, 180)],
    },
}

DEFAULT_K = {"large": 2, "medium": 3, "small": 4}


def preset_windows(name: str, k: dict[str, int] | None = None,
                   stride: Optional[int] = None) -> list[WindowSpec]:
    """Window specs for a named preset; k maps scale tag to windows kept."""
    if name not in WINDOW_PRESETS:
        raise ConfigError(f"unknown window preset {name!r}; choose from {sorted(WINDOW_PRESETS)}")
    k = dict(DEFAULT_K if k is None else k)
    specs = []
    for tag in SCALE_TAGS:
        for w, h in WINDOW_PRESETS[name][tag]:
            specs.append(WindowSpec(width=w, height=h, scale_tag=tag, k=k[tag], stride=stride))
    return specs


def integral_image(saliency: SaliencyMap) -> np.ndarray:
    """Inclusive summed-area table: T[y, x] = sum over rows 0..y, cols 0..x."""
    return np.cumsum(np.cumsum(saliency.values, axis=0), axis=1)


def window_sum(table: np.ndarray, x: int, y: int, width: int, height: int) -> float:
    """Rectangle sum from an inclusive summed-area table via four lookups."""
    total = table[y + height - 1, x + width - 1]
    if y > 0:
        total = total - table[y - 1, x + width - 1]
    if x > 0:
        total = total - table[y + height - 1, x - 1]
    if x > 0 and y > 0:
        total = total + table[y - 1, x - 1]
    return float(total)


def axis_positions(dim: int, window: int, stride: int) -> np.ndarray:
    """Stride-spaced window offsets along one axis, always covering the far edge."""
    if window > dim:
        raise ConfigError(f"window of size {window} does not fit a map of size {dim}")
    last = dim - window
    positions = np.arange(0, last + 1, stride)
    if positions[-1] != last:
        positions = np.append(positions, last)
    return positions


def score_windows(saliency: SaliencyMap, spec: WindowSpec) -> list[CropBox]:
    """Score every reachable window position by its mean saliency.

    Boxes are emitted in row-major position order (top-left first).
    """
    xs = axis_positions(saliency.width, spec.width, spec.stride)
    ys = axis_positions(saliency.height, spec.height, spec.stride)

    padded = np.zeros((saliency.height + 1, saliency.width + 1), dtype=np.float64)
    padded[1:, 1:] = integral_image(saliency)
    sums = (padded[np.ix_(ys + spec.height, xs + spec.width)]
            - padded[np.ix_(ys, xs + spec.width)]
            - padded[np.ix_(ys + spec.height, xs)]
            + padded[np.ix_(ys, xs)])
    scores = sums / float(spec.width * spec.height)

    boxes = []
    for yi, y in enumerate(ys):
        for xi, x in enumerate(xs):
            boxes.append(CropBox(
                x=int(x), y=int(y), width=spec.width, height=spec.height,
                score=float(scores[yi, xi]), scale_tag=spec.scale_tag,
            ))
    return boxes


def iou(a: CropBox, b: CropBox) -> float:
    """Intersection over union of two axis-aligned boxes."""
    overlap_w = min(a.x + a.width, b.x + b.width) - max(a.x, b.x)
    overlap_h = min(a.y + a.height, b.y + b.height) - max(a.y, b.y)
    if overlap_w <= 0 or overlap_h <= 0:
        return 0.0
    intersection = float(overlap_w * overlap_h)
    union = float(a.width * a.height + b.width * b.height) - intersection
    return intersection / union


def _rank_key(box: CropBox):
    # score descending, ties by row-major position (top-left first)
    return (-box.score, box.y, box.x)


def select_topk(candidates: Sequence[CropBox], k: int, nms_iou: float) -> list[CropBox]:
    """Greedy NMS over score-ranked candidates, keeping at most k survivors."""
    kept: list[CropBox] = []
    if k <= 0:
        return kept
    for box in sorted(candidates, key=_rank_key):
        if all(iou(box, other) <= nms_iou for other in kept):
            kept.append(box)
            if len(kept) == k:
                break
    return kept


def plan_crops(saliency: SaliencyMap, specs: Sequence[WindowSpec],
               resize_to: tuple[int, int], nms_iou: float = 0.25,
               image_id: str = "") -> CropPlan:
    """Pool candidates per scale tag, NMS-select each scale's k, and combine.

    The returned boxes are sorted by score descending with row-major
    tie-breaking, so plans are deterministic even on constant maps.
    """
    if not specs:
        raise ConfigError("at least one WindowSpec is required")
    if saliency.is_all_zero:
        warnings.warn("planning crops on an all-zero saliency map; selection "
                      "degenerates to position order", stacklevel=2)

    tag_order: list[str] = []
    by_tag: dict[str, list[WindowSpec]] = {}
    for spec in specs:
        if spec.scale_tag not in by_tag:
            tag_order.append(spec.scale_tag)
            by_tag[spec.scale_tag] = []
        by_tag[spec.scale_tag].append(spec)

    selected: list[CropBox] = []
    for tag in tag_order:
        tag_specs = by_tag[tag]
        ks = {spec.k for spec in tag_specs}
        if len(ks) != 1:
            raise ConfigError(f"inconsistent k within scale {tag!r}: {sorted(ks)}")
        pooled: list[CropBox] = []
        for spec in tag_specs:
            pooled.extend(score_windows(saliency, spec))
        selected.extend(select_topk(pooled, ks.pop(), nms_iou))

    selected.sort(key=_rank_key)
    return CropPlan(image_id=image_id, boxes=tuple(selected), resize_to=tuple(resize_to))


def extract_and_resize(image: RasterImage, plan: CropPlan) -> list[RasterImage]:
    """Cut each planned box out of the image and resize it to plan.resize_to."""
    out_w, out_h = plan.resize_to
    crops = []
    for box in plan.boxes:
        if box.x < 0 or box.y < 0 or box.x + box.width > image.width \
                or box.y + box.height > image.height:
            raise BoundsError(
                f"box ({box.x},{box.y},{box.width},{box.height}) outside "
                f"{image.width}x{image.height} image"
            )
        patch = image.values[box.y:box.y + box.height, box.x:box.x + box.width]
        crops.append(RasterImage(values=np.clip(
            resample_bilinear(patch, out_h, out_w), 0.0, 1.0)))
    return crops
