"""Raster helpers shared by the renderer and the crop planner."""
from __future__ import annotations

import numpy as np


def resample_bilinear(values: np.ndarray, out_height: int, out_width: int) -> np.ndarray:
    """Bilinearly resample a 2-D or (H, W, C) array to (out_height, out_width).

    Uses the pixel-center convention: output pixel j samples source coordinate
    (j + 0.5) * in/out - 0.5, clipped to the source grid. Resampling to the
    input size is therefore an exact identity.
    """
    if out_height < 1 or out_width < 1:
        raise ValueError("output size must be positive")
    in_h, in_w = values.shape[:2]

    def axis_coords(out_n: int, in_n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = (np.arange(out_n) + 0.5) * (in_n / out_n) - 0.5
        src = np.clip(src, 0.0, in_n - 1.0)
        lo = np.floor(src).astype(np.intp)
        lo = np.minimum(lo, in_n - 2) if in_n > 1 else np.zeros(out_n, dtype=np.intp)
        frac = src - lo
        return lo, lo + (1 if in_n > 1 else 0), frac

    y0, y1, fy = axis_coords(out_height, in_h)
    x0, x1, fx = axis_coords(out_width, in_w)

    if values.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]

    top = values[y0][:, x0] * (1.0 - fx) + values[y0][:, x1] * fx
    bottom = values[y1][:, x0] * (1.0 - fx) + values[y1][:, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def source_to_output(coord: float, in_n: int, out_n: int) -> float:
    """Map a source-grid coordinate to the resampled grid (pixel-center convention)."""
    return (coord + 0.5) * (out_n / in_n) - 0.5


def rgb_to_luma(values: np.ndarray) -> np.ndarray:
    """ITU-R BT.601 luma of an (H, W, 3) array."""
    return values[..., 0] * 0.299 + values[..., 1] * 0.587 + values[..., 2] * 0.114
