"""Shared domain types for gaze samples, fixations, saliency maps and dataset manifests.

All types are immutable after construction: numpy-backed fields are copied and
marked read-only, so instances can be shared freely across workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np


class GazeKitError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(GazeKitError):
    """A malformed input row or token; the message names the offending line."""


class SchemaError(GazeKitError):
    """Structurally invalid input: bad columns, broken manifest, mixed report versions."""


class ShapeError(GazeKitError):
    """Dimension mismatch between maps, images or masks."""


class ConfigError(GazeKitError):
    """Invalid configuration, e.g. a window larger than the map it scans."""


class BoundsError(GazeKitError):
    """A box or coordinate falls outside the image it refers to."""


class FormatError(GazeKitError):
    """An input file is not in the expected on-disk format."""


class TrainingError(GazeKitError):
    """Training cannot proceed (single-class data) or diverged (NaN loss)."""


def round_half_up(x: float) -> int:
    """Round to nearest integer with exact halves going up (not banker's)."""
    return int(math.floor(x + 0.5))


def _read_only(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GazeSample:
    """One raw gaze observation: display-space coordinates at a session timestamp."""

    timestamp_us: int
    x: float
    y: float
    valid: bool

    def __post_init__(self):
        if self.valid and not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("valid gaze sample has non-finite coordinates")


@dataclass(frozen=True)
class Fixation:
    """A stable-gaze event: center coordinates in pixels plus dwell duration."""

    x: float
    y: float
    duration_ms: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("fixation coordinates must be finite")
        if not self.duration_ms > 0:
            raise ValueError(f"fixation duration must be > 0, got {self.duration_ms}")


@dataclass(frozen=True)
class Geometry:
    """Viewing geometry tying display pixels to visual angle."""

    viewing_distance_mm: float
    screen_width_mm: float
    screen_resolution_x: int
    screen_resolution_y: int
    foveal_angle_deg: float = 2.0

    def __post_init__(self):
        for name in ("viewing_distance_mm", "screen_width_mm",
                     "screen_resolution_x", "screen_resolution_y"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.foveal_angle_deg < 0:
            raise ValueError("foveal_angle_deg must be >= 0")

    @property
    def pixels_per_mm(self) -> float:
        return self.screen_resolution_x / self.screen_width_mm


@dataclass(frozen=True)
class SaliencyMap:
    """A non-negative attention field over image pixels, stored unnormalized.

    Normalization (max- or sum-) happens only at export or metric ingestion so
    repeated pipeline stages do not accumulate precision loss.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2:
            raise ShapeError(f"saliency values must be 2-D, got shape {v.shape}")
        if v.size == 0:
            raise ShapeError("saliency map must have at least one pixel")
        if not np.all(np.isfinite(v)):
            raise ValueError("saliency values must be finite")
        if np.any(v < 0):
            raise ValueError("saliency values must be non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def is_all_zero(self) -> bool:
        return not bool(np.any(self.values))


@dataclass(frozen=True)
class RasterImage:
    """A grayscale (H, W) or color (H, W, 3) image with values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = _read_only(self.values)
        if v.ndim == 2:
            pass
        elif v.ndim == 3 and v.shape[2] == 3:
            pass
        else:
            raise ShapeError(f"image must be (H, W) or (H, W, 3), got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ShapeError("image dimensions must be positive")
        if not np.all(np.isfinite(v)):
            raise ValueError("image values must be finite")
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("image values must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.values.ndim == 2 else 3


@dataclass(frozen=True)
class ImageRecord:
    """Manifest entry for one image: label, size, and optional part/attribute annotations."""

    id: str
    path: str
    width: int
    height: int
    label: int
    part_centers: Optional[tuple[tuple[int, float, float], ...]] = None
    attributes: Optional[tuple[int, ...]] = None
    split: Optional[str] = None
    fixations: Optional[str] = None

    def __post_init__(self):
        if self.label < 0:
            raise ValueError(f"label must be >= 0, got {self.label}")
        if self.split is not None and self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")


@dataclass(frozen=True)
class DatasetManifest:
    """A dataset description: images plus class/part/attribute bookkeeping."""

    images: tuple[ImageRecord, ...]
    num_classes: int
    num_parts: int
    num_attributes: int
    attribute_to_part: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "attribute_to_part", dict(self.attribute_to_part))
        self.validate()

    def validate(self) -> None:
        for attr_idx in range(self.num_attributes):
            if attr_idx not in self.attribute_to_part:
                raise SchemaError(f"attribute {attr_idx} missing from attribute_to_part")
        for attr_idx, part in self.attribute_to_part.items():
            if not (0 <= attr_idx < self.num_attributes):
                raise SchemaError(f"attribute index {attr_idx} out of range")
            if not (0 <= part < self.num_parts):
                raise SchemaError(f"part index {part} out of range for attribute {attr_idx}")
        for rec in self.images:
            if not (0 <= rec.label < self.num_classes):
                raise SchemaError(f"image {rec.id!r}: label {rec.label} out of range")
            if rec.part_centers is not None:
                for part, _, _ in rec.part_centers:
                    if not (0 <= part < self.num_parts):
                        raise SchemaError(f"image {rec.id!r}: part index {part} out of range")
            if rec.attributes is not None and len(rec.attributes) != self.num_attributes:
                raise SchemaError(
                    f"image {rec.id!r}: attribute vector length {len(rec.attributes)}"
                    f" != {self.num_attributes}"
                )

    def records_for_class(self, label: int) -> list[ImageRecord]:
        return [rec for rec in self.images if rec.label == label]


def check_monotonic(samples: Sequence[GazeSample]) -> None:
    """Reject sample sequences whose timestamps do not strictly increase."""
    for prev, cur in zip(samples, samples[1:]):
        if cur.timestamp_us <= prev.timestamp_us:
            raise SchemaError(
                f"timestamps must strictly increase: {prev.timestamp_us} then {cur.timestamp_us}"
            )
