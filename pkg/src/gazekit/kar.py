"""Keep-and-retrain evaluation: top-percent keep masks, masked datasets,
retrained accuracy curves and their area under the curve.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import RasterImage, SaliencyMap, ShapeError, TrainingError, round_half_up
from .toy_model import TrainConfig, train_toy, evaluate

DEFAULT_PERCENTS = (5, 10, 15, 20, 25, 30, 50, 70, 90)


@dataclass(frozen=True)
class KeepMask:
    kept: np.ndarray  # boolean grid
    percent: float

    def __post_init__(self):
        kept = np.array(self.kept, dtype=bool, copy=True)
        if kept.ndim != 2:
            raise ShapeError(f"mask must be 2-D, got shape {kept.shape}")
        kept.setflags(write=False)
        object.__setattr__(self, "kept", kept)

    @property
    def height(self) -> int:
        return self.kept.shape[0]

    @property
    def width(self) -> int:
        return self.kept.shape[1]


@dataclass(frozen=True)
class KarCurve:
    points: tuple[tuple[float, float], ...]  # (percent, accuracy)
    auc: float
    failures: tuple[tuple[float, str], ...] = field(default=())


def keep_mask(saliency: SaliencyMap, percent: float) -> KeepMask:
    """Keep the top `percent` of pixels by saliency value.

    The kept count is round(percent/100 * pixels) with halves rounding up;
    equal values are broken by row-major index, smaller index first.
    """
    if not 0 < percent <= 100:
        raise ValueError(f"percent must be in (0, 100], got {percent}")
    flat = saliency.values.reshape(-1)
    n_keep = round_half_up(percent / 100.0 * flat.size)
    order = np.argsort(-flat, kind="stable")
    kept = np.zeros(flat.size, dtype=bool)
    kept[order[:n_keep]] = True
    return KeepMask(kept=kept.reshape(saliency.values.shape), percent=percent)


def apply_mask(image: RasterImage, mask: KeepMask) -> RasterImage:
    """Zero out every pixel outside the mask, across all channels."""
    if (mask.height, mask.width) != (image.height, image.width):
        raise ShapeError(
            f"mask {mask.width}x{mask.height} does not match image "
            f"{image.width}x{image.height}"
        )
    kept = mask.kept if image.values.ndim == 2 else mask.kept[:, :, None]
    return RasterImage(values=np.where(kept, image.values, 0.0))


def curve_auc(points: Sequence[tuple[float, float]]) -> float:
    """Normalized trapezoidal area: a constant curve at accuracy a scores a."""
    if len(points) < 2:
        raise ValueError("AUC needs at least two curve points")
    percents = np.array([p for p, _ in points], dtype=np.float64)
    accuracies = np.array([a for _, a in points], dtype=np.float64)
    if np.any(np.diff(percents) <= 0):
        raise ValueError("percents must strictly increase")
    area = np.trapezoid(accuracies, percents / 100.0)
    return float(area / ((percents[-1] - percents[0]) / 100.0))


def kar_run(train_images: Sequence[RasterImage], train_labels: Sequence[int],
            train_maps: Sequence[SaliencyMap],
            test_images: Sequence[RasterImage], test_labels: Sequence[int],
            test_maps: Sequence[SaliencyMap],
            percents: Sequence[float], config: TrainConfig,
            feature_dim: int = 16) -> KarCurve:
    """Mask, retrain and score once per insertion percentage.

    Every image (train and test alike) is masked with the keep mask of its own
    saliency map at the same percentage; a fresh baseline classifier is trained
    per point. Training failures are recorded per point instead of aborting.
    """
    if len(train_images) != len(train_maps) or len(test_images) != len(test_maps):
        raise ShapeError("each image needs exactly one saliency map")
    percents = list(percents)
    if any(b <= a for a, b in zip(percents, percents[1:])):
        raise ValueError("percents must strictly increase")

    points: list[tuple[float, float]] = []
    failures: list[tuple[float, str]] = []
    for percent in percents:
        masked_train = [apply_mask(img, keep_mask(m, percent))
                        for img, m in zip(train_images, train_maps)]
        masked_test = [apply_mask(img, keep_mask(m, percent))
                       for img, m in zip(test_images, test_maps)]
        try:
            model = train_toy(masked_train, train_labels, config, feature_dim=feature_dim)
            accuracy = evaluate(model, masked_test, test_labels)
        except TrainingError as exc:
            failures.append((percent, str(exc)))
            continue
        points.append((float(percent), accuracy))

    return KarCurve(points=tuple(points), auc=curve_auc(points), failures=tuple(failures))
