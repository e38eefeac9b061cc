"""Duration-weighted Gaussian saliency rendering and attention weighting.

Maps are accumulated on the display grid, where the Gaussian width is defined,
then resampled to the requested output size.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Fixation, Geometry, RasterImage, SaliencyMap, ShapeError
from .imageops import resample_bilinear, source_to_output


@dataclass(frozen=True)
class RenderConfig:
    sigma_px: float
    display_resolution: tuple[int, int]  # (width, height)
    output_size: tuple[int, int]  # (width, height)
    truncation_radius: Optional[float] = 4.0  # in multiples of sigma; None = exact

    def __post_init__(self):
        if not self.sigma_px > 0:
            raise ValueError(f"sigma_px must be > 0, got {self.sigma_px}")
        if self.truncation_radius is not None and self.truncation_radius < 3:
            raise ValueError("truncation_radius must be >= 3 (or None for exact accumulation)")
        for w, h in (self.display_resolution, self.output_size):
            if w < 1 or h < 1:
                raise ValueError("resolutions must be positive")


def sigma_from_geometry(geometry: Geometry) -> float:
    """Gaussian width in display pixels covered by the foveal angle.

    tan(angle) * viewing distance gives the foveal span in mm on the display;
    the horizontal pixel pitch converts it to pixels. Returned unrounded.
    """
    span_mm = math.tan(math.radians(geometry.foveal_angle_deg)) * geometry.viewing_distance_mm
    return span_mm * geometry.pixels_per_mm


def render_saliency(fixations: Sequence[Fixation], config: RenderConfig) -> SaliencyMap:
    """Accumulate one duration-weighted Gaussian per fixation.

    A(x, y) = sum_i d_i * exp(-((x - x_i)^2 + (y - y_i)^2) / (2 sigma^2)) on the
    display grid, with contributions dropped beyond truncation_radius * sigma,
    then bilinearly resampled to output_size. The result is unnormalized; an
    empty fixation list yields an all-zero map (flagged via is_all_zero).
    """
    disp_w, disp_h = config.display_resolution
    out_w, out_h = config.output_size
    canvas = np.zeros((disp_h, disp_w), dtype=np.float64)
    sigma = config.sigma_px
    inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma)

    for fix in fixations:
        if config.truncation_radius is None:
            x0, x1, y0, y1 = 0, disp_w, 0, disp_h
        else:
            radius = config.truncation_radius * sigma
            x0 = max(0, int(math.floor(fix.x - radius)))
            x1 = min(disp_w, int(math.ceil(fix.x + radius)) + 1)
            y0 = max(0, int(math.floor(fix.y - radius)))
            y1 = min(disp_h, int(math.ceil(fix.y + radius)) + 1)
            if x0 >= x1 or y0 >= y1:
                continue
        dx2 = (np.arange(x0, x1, dtype=np.float64) - fix.x) ** 2
        dy2 = (np.arange(y0, y1, dtype=np.float64) - fix.y) ** 2
        patch = np.exp(-(dy2[:, None] + dx2[None, :]) * inv_two_sigma_sq)
        if config.truncation_radius is not None:
            radius_sq = (config.truncation_radius * sigma) ** 2
            patch[dy2[:, None] + dx2[None, :] > radius_sq] = 0.0
        canvas[y0:y1, x0:x1] += fix.duration_ms * patch

    if (out_w, out_h) != (disp_w, disp_h):
        canvas = resample_bilinear(canvas, out_h, out_w)
        canvas = np.maximum(canvas, 0.0)
    return SaliencyMap(values=canvas)


def display_to_output(config: RenderConfig, x: float, y: float) -> tuple[float, float]:
    """Map display-space coordinates to the rendered output grid."""
    disp_w, disp_h = config.display_resolution
    out_w, out_h = config.output_size
    return (source_to_output(x, disp_w, out_w), source_to_output(y, disp_h, out_h))


def apply_attention(image: RasterImage, saliency: SaliencyMap) -> RasterImage:
    """Weight an image by a max-normalized saliency map, channel by channel.

    A uniform map leaves the image untouched; an all-zero map blanks it and
    emits a warning.
    """
    if (saliency.height, saliency.width) != (image.height, image.width):
        raise ShapeError(
            f"saliency {saliency.width}x{saliency.height} does not match "
            f"image {image.width}x{image.height}"
        )
    peak = float(saliency.values.max())
    if peak == 0.0:
        warnings.warn("applying an all-zero saliency map blanks the image", stacklevel=2)
        return RasterImage(values=np.zeros_like(image.values))
    weight = saliency.values / peak
    if image.values.ndim == 3:
        weight = weight[:, :, None]
    return RasterImage(values=image.values * weight)
