"""Velocity-threshold fixation detection on raw gaze streams.

Samples are labelled fixation/saccade by angular velocity against a threshold;
contiguous fixation runs become candidates, nearby candidates are merged, and
short ones are discarded.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Fixation, GazeSample, Geometry, check_monotonic


@dataclass(frozen=True)
class IvtConfig:
    """Classifier parameters. Defaults follow common practice for high-rate trackers."""

    geometry: Geometry
    velocity_threshold_deg_s: float = 30.0
    min_fixation_duration_ms: float = 60.0
    merge_max_gap_ms: float = 75.0
    merge_max_angle_deg: float = 0.5

    def __post_init__(self):
        for name in ("velocity_threshold_deg_s", "min_fixation_duration_ms",
                     "merge_max_gap_ms", "merge_max_angle_deg"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


def pixels_to_degrees(dx, dy, geometry: Geometry):
    """Visual angle subtended by a pixel displacement on the display.

    The displacement is converted to millimeters via the horizontal pixel
    pitch, then to an angle with atan(d_mm / viewing_distance). Accepts
    scalars or numpy arrays.
    """
    displacement_mm = np.hypot(dx, dy) * (geometry.screen_width_mm / geometry.screen_resolution_x)
    angle = np.degrees(np.arctan(displacement_mm / geometry.viewing_distance_mm))
    if np.ndim(angle) == 0:
        return float(angle)
    return angle


def sample_velocities(samples: list[GazeSample], geometry: Geometry) -> np.ndarray:
    """Per-sample angular velocity in deg/s; NaN where it cannot be computed.

    Each valid sample uses a symmetric one-sample window when both immediate
    neighbours are valid, otherwise a forward difference, otherwise a backward
    difference. Invalid samples never contribute positions, so velocities are
    never interpolated across them.
    """
    n = len(samples)
    if n < 2:
        return np.full(n, np.nan)
    t = np.array([s.timestamp_us for s in samples], dtype=np.int64)
    x = np.array([s.x for s in samples], dtype=np.float64)
    y = np.array([s.y for s in samples], dtype=np.float64)
    valid = np.array([s.valid for s in samples], dtype=bool)

    idx = np.arange(n)
    prev_ok = np.zeros(n, dtype=bool)
    next_ok = np.zeros(n, dtype=bool)
    prev_ok[1:] = valid[:-1]
    next_ok[:-1] = valid[1:]

    sym = valid & prev_ok & next_ok
    fwd = valid & next_ok & ~sym
    bwd = valid & prev_ok & ~sym & ~fwd
    classifiable = sym | fwd | bwd

    a = np.where(sym | bwd, idx - 1, idx)
    b = np.where(sym | fwd, idx + 1, idx)
    a = np.clip(a, 0, n - 1)
    b = np.clip(b, 0, n - 1)

    angle = pixels_to_degrees(x[b] - x[a], y[b] - y[a], geometry)
    dt_s = (t[b] - t[a]).astype(np.float64) / 1e6
    dt_s[~classifiable] = 1.0
    velocity = np.where(classifiable, np.asarray(angle) / dt_s, np.nan)
    return velocity


def detect_fixations(samples: list[GazeSample], config: IvtConfig) -> list[Fixation]:
    """Run I-VT over a timestamp-ordered gaze stream.

    Returns time-ordered, non-overlapping fixations; fewer than two valid
    samples yield an empty list.
    """
    check_monotonic(samples)
    if sum(1 for s in samples if s.valid) < 2:
        return []

    velocity = sample_velocities(samples, config.geometry)
    with np.errstate(invalid="ignore"):
        is_fixation = np.nan_to_num(velocity, nan=np.inf) < config.velocity_threshold_deg_s

    member_idx = np.flatnonzero(is_fixation)
    if member_idx.size == 0:
        return []
    run_breaks = np.flatnonzero(np.diff(member_idx) > 1)
    runs = np.split(member_idx, run_breaks + 1)

    t = np.array([s.timestamp_us for s in samples], dtype=np.int64)
    x = np.array([s.x for s in samples], dtype=np.float64)
    y = np.array([s.y for s in samples], dtype=np.float64)

    # candidates as (member index array); merged greedily left to right when
    # both the time gap and the center separation are under the merge limits
    candidates: list[np.ndarray] = []
    for run in runs:
        if len(candidates) > 0:
            last = candidates[-1]
            gap_ms = (t[run[0]] - t[last[-1]]) / 1000.0
            center_angle = pixels_to_degrees(
                x[run].mean() - x[last].mean(),
                y[run].mean() - y[last].mean(),
                config.geometry,
            )
            if gap_ms < config.merge_max_gap_ms and center_angle < config.merge_max_angle_deg:
                candidates[-1] = np.concatenate([last, run])
                continue
        candidates.append(run)

    fixations = []
    for members in candidates:
        duration_ms = (t[members[-1]] - t[members[0]]) / 1000.0
        if duration_ms < config.min_fixation_duration_ms:
            continue
        fixations.append(Fixation(
            x=float(x[members].mean()),
            y=float(y[members].mean()),
            duration_ms=float(duration_ms),
        ))
    return fixations
