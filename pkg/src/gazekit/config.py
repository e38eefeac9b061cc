"""One-file experiment configuration with lossless JSON round-tripping."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .core import ConfigError, Geometry
from .crops import WINDOW_PRESETS
from .kar import DEFAULT_PERCENTS
from .toy_model import TrainConfig

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RenderSettings:
    sigma_px: Optional[float] = None  # None: derive from geometry
    display_resolution: tuple[int, int] = (1920, 1080)
    output_size: tuple[int, int] = (448, 448)
    truncation_radius: Optional[float] = 4.0


@dataclass(frozen=True)
class CropSettings:
    preset: str = "cub"
    k: tuple[int, int, int] = (2, 3, 4)  # windows kept at large, medium, small
    nms_iou: float = 0.25
    resize_to: tuple[int, int] = (224, 224)
    stride: Optional[int] = None

    def __post_init__(self):
        if self.preset not in WINDOW_PRESETS:
            raise ConfigError(f"unknown window preset {self.preset!r}")


@dataclass(frozen=True)
class KarSettings:
    percents: tuple[float, ...] = tuple(DEFAULT_PERCENTS)
    train: TrainConfig = field(default_factory=TrainConfig)
    feature_dim: int = 16
    test_fraction: float = 0.3


@dataclass(frozen=True)
class MetricSettings:
    epsilon: float = 1e-7
    sauc_seed: int = 0
    ig_baseline: str = "center"


@dataclass(frozen=True)
class PipelineConfig:
    geometry: Geometry = field(default_factory=lambda: Geometry(
        viewing_distance_mm=600.0, screen_width_mm=530.0,
        screen_resolution_x=1920, screen_resolution_y=1080, foveal_angle_deg=2.0))
    render: RenderSettings = field(default_factory=RenderSettings)
    crops: CropSettings = field(default_factory=CropSettings)
    kar: KarSettings = field(default_factory=KarSettings)
    metrics: MetricSettings = field(default_factory=MetricSettings)
    seed: int = 0

    def to_dict(self) -> dict:
        g = self.geometry
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "geometry": {
                "viewing_distance_mm": g.viewing_distance_mm,
                "screen_width_mm": g.screen_width_mm,
                "screen_resolution_x": g.screen_resolution_x,
                "screen_resolution_y": g.screen_resolution_y,
                "foveal_angle_deg": g.foveal_angle_deg,
            },
            "render": {
                "sigma_px": self.render.sigma_px,
                "display_resolution": list(self.render.display_resolution),
                "output_size": list(self.render.output_size),
                "truncation_radius": self.render.truncation_radius,
            },
            "crops": {
                "preset": self.crops.preset,
                "k": list(self.crops.k),
                "nms_iou": self.crops.nms_iou,
                "resize_to": list(self.crops.resize_to),
                "stride": self.crops.stride,
            },
            "kar": {
                "percents": list(self.kar.percents),
                "feature_dim": self.kar.feature_dim,
                "test_fraction": self.kar.test_fraction,
                "train": {
                    "epochs": self.kar.train.epochs,
                    "learning_rate": self.kar.train.learning_rate,
                    "lr_decay_factor": self.kar.train.lr_decay_factor,
                    "lr_decay_every": self.kar.train.lr_decay_every,
                    "batch_size": self.kar.train.batch_size,
                    "seed": self.kar.train.seed,
                },
            },
            "metrics": {
                "epsilon": self.metrics.epsilon,
                "sauc_seed": self.metrics.sauc_seed,
                "ig_baseline": self.metrics.ig_baseline,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        try:
            g = data["geometry"]
            render = data["render"]
            crops = data["crops"]
            kar = data["kar"]
            train = kar["train"]
            metrics = data["metrics"]
            return cls(
                seed=int(data["seed"]),
                geometry=Geometry(
                    viewing_distance_mm=float(g["viewing_distance_mm"]),
                    screen_width_mm=float(g["screen_width_mm"]),
                    screen_resolution_x=int(g["screen_resolution_x"]),
                    screen_resolution_y=int(g["screen_resolution_y"]),
                    foveal_angle_deg=float(g["foveal_angle_deg"]),
                ),
                render=RenderSettings(
                    sigma_px=render["sigma_px"],
                    display_resolution=tuple(render["display_resolution"]),
                    output_size=tuple(render["output_size"]),
                    truncation_radius=render["truncation_radius"],
                ),
                crops=CropSettings(
                    preset=crops["preset"],
                    k=tuple(crops["k"]),
                    nms_iou=float(crops["nms_iou"]),
                    resize_to=tuple(crops["resize_to"]),
                    stride=crops["stride"],
                ),
                kar=KarSettings(
                    percents=tuple(kar["percents"]),
                    feature_dim=int(kar["feature_dim"]),
                    test_fraction=float(kar["test_fraction"]),
                    train=TrainConfig(
                        epochs=int(train["epochs"]),
                        learning_rate=float(train["learning_rate"]),
                        lr_decay_factor=float(train["lr_decay_factor"]),
                        lr_decay_every=int(train["lr_decay_every"]),
                        batch_size=int(train["batch_size"]),
                        seed=int(train["seed"]),
                    ),
                ),
                metrics=MetricSettings(
                    epsilon=float(metrics["epsilon"]),
                    sauc_seed=int(metrics["sauc_seed"]),
                    ig_baseline=str(metrics["ig_baseline"]),
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed pipeline config: {exc}") from None


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    with open(path) as handle:
        return PipelineConfig.from_dict(json.load(handle))


def load_geometry(path: str | Path) -> Geometry:
    with open(path) as handle:
        data = json.load(handle)
    try:
        return Geometry(
            viewing_distance_mm=float(data["viewing_distance_mm"]),
            screen_width_mm=float(data["screen_width_mm"]),
            screen_resolution_x=int(data["screen_resolution_x"]),
            screen_resolution_y=int(data["screen_resolution_y"]),
            foveal_angle_deg=float(data.get("foveal_angle_deg", 2.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed geometry file {path}: {exc}") from None


def save_pipeline_config(config: PipelineConfig, path: str | Path) -> None:
    from .gaze_io import atomic_write_text

    atomic_write_text(path, json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
