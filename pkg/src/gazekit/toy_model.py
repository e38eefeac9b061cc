"""A small trainable classifier for desk-scale keep-and-retrain experiments.

Each branch is a linear feature stage; branch features are concatenated and
fed to a softmax head. Training is plain mini-batch gradient descent on
cross-entropy with a step-decay schedule, fully determined by the seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import RasterImage, ShapeError, TrainingError

MODES = ("baseline", "fusion")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 0.1
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 50
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "learning_rate", "lr_decay_factor",
                     "lr_decay_every", "batch_size"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class ToyClassifier:
    mode: str
    input_size: tuple[int, int]  # (height, width)
    channels: int
    feature_dims: tuple[int, int]  # (D_o, D_g); D_g is 0 in baseline mode
    num_classes: int
    weights: dict[str, np.ndarray]

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "baseline" and self.feature_dims[1] != 0:
            raise ValueError("baseline mode requires a zero-width second branch")


def _flatten(images: Sequence[RasterImage], input_size, channels) -> np.ndarray:
    rows = []
    for image in images:
        if (image.height, image.width) != tuple(input_size) or image.channels != channels:
            raise ShapeError(
                f"image {image.width}x{image.height}x{image.channels} does not match "
                f"model input {input_size[1]}x{input_size[0]}x{channels}"
            )
        rows.append(image.values.reshape(-1))
    return np.stack(rows)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(weights: dict[str, np.ndarray], x_o: np.ndarray, labels: np.ndarray,
                   x_g: Optional[np.ndarray] = None) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy and its analytic gradients for one batch.

    x_o (and x_g in fusion mode) are flattened input rows; weights use keys
    w_o/b_o, optionally w_g/b_g, and w_head/b_head.
    """
    batch = x_o.shape[0]
    f_o = x_o @ weights["w_o"].T + weights["b_o"]
    if x_g is not None:
        f_g = x_g @ weights["w_g"].T + weights["b_g"]
        features = np.hstack([f_o, f_g])
    else:
        features = f_o
    logits = features @ weights["w_head"].T + weights["b_head"]
    probs = _softmax(logits)
    eps = 1e-12
    loss = float(-np.mean(np.log(probs[np.arange(batch), labels] + eps)))

    d_logits = probs.copy()
    d_logits[np.arange(batch), labels] -= 1.0
    d_logits /= batch

    grads = {
        "w_head": d_logits.T @ features,
        "b_head": d_logits.sum(axis=0),
    }
    d_features = d_logits @ weights["w_head"]
    d_o = weights["w_o"].shape[0]
    grads["w_o"] = d_features[:, :d_o].T @ x_o
    grads["b_o"] = d_features[:, :d_o].sum(axis=0)
    if x_g is not None:
        grads["w_g"] = d_features[:, d_o:].T @ x_g
        grads["b_g"] = d_features[:, d_o:].sum(axis=0)
    return loss, grads


def init_weights(rng: np.random.Generator, input_dim: int, feature_dims: tuple[int, int],
                 num_classes: int) -> dict[str, np.ndarray]:
    d_o, d_g = feature_dims
    scale = 0.01
    weights = {
        "w_o": rng.normal(0.0, scale, size=(d_o, input_dim)),
        "b_o": np.zeros(d_o),
        "w_head": rng.normal(0.0, scale, size=(num_classes, d_o + d_g)),
        "b_head": np.zeros(num_classes),
    }
    if d_g > 0:
        weights["w_g"] = rng.normal(0.0, scale, size=(d_g, input_dim))
        weights["b_g"] = np.zeros(d_g)
    return weights


def train_toy(images: Sequence[RasterImage], labels: Sequence[int], config: TrainConfig,
              mode: str = "baseline", feature_dim: int = 16,
              companions: Optional[Sequence[RasterImage]] = None) -> ToyClassifier:
    """Fit a classifier; `companions` carries the attention-weighted images in fusion mode."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "fusion" and companions is None:
        raise ValueError("fusion mode requires companion images")
    if mode == "baseline" and companions is not None:
        raise ValueError("companion images are only meaningful in fusion mode")
    if len(images) == 0:
        raise ValueError("training set must be non-empty")
    if companions is not None and len(companions) != len(images):
        raise ShapeError("companions must pair one-to-one with images")

    labels_arr = np.asarray(labels, dtype=np.intp)
    classes = np.unique(labels_arr)
    if classes.size < 2:
        raise TrainingError("training requires at least two classes")
    num_classes = int(labels_arr.max()) + 1

    input_size = (images[0].height, images[0].width)
    channels = images[0].channels
    x_o = _flatten(images, input_size, channels)
    x_g = _flatten(companions, input_size, channels) if mode == "fusion" else None
    feature_dims = (feature_dim, feature_dim if mode == "fusion" else 0)

    rng = np.random.default_rng(config.seed)
    weights = init_weights(rng, x_o.shape[1], feature_dims, num_classes)

    n = x_o.shape[0]
    for epoch in range(config.epochs):
        lr = config.learning_rate * config.lr_decay_factor ** (epoch // config.lr_decay_every)
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = perm[start:start + config.batch_size]
            # divergence surfaces as TrainingError below, not as numpy warnings
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = loss_and_grads(
                    weights, x_o[batch], labels_arr[batch],
                    x_g[batch] if x_g is not None else None,
                )
            if not np.isfinite(loss):
                raise TrainingError(f"training diverged (non-finite loss) at epoch {epoch}")
            for key, grad in grads.items():
                weights[key] = weights[key] - lr * grad

    return ToyClassifier(
        mode=mode, input_size=input_size, channels=channels,
        feature_dims=feature_dims, num_classes=num_classes, weights=weights,
    )


def predict(model: ToyClassifier, images: Sequence[RasterImage],
            companions: Optional[Sequence[RasterImage]] = None) -> np.ndarray:
    """Class indices for a batch; argmax ties resolve to the smallest index."""
    if model.mode == "fusion" and companions is None:
        raise ValueError("fusion model requires companion images")
    x_o = _flatten(images, model.input_size, model.channels)
    x_g = _flatten(companions, model.input_size, model.channels) \
        if model.mode == "fusion" else None
    f_o = x_o @ model.weights["w_o"].T + model.weights["b_o"]
    if x_g is not None:
        features = np.hstack([f_o, x_g @ model.weights["w_g"].T + model.weights["b_g"]])
    else:
        features = f_o
    logits = features @ model.weights["w_head"].T + model.weights["b_head"]
    return np.argmax(logits, axis=1)


def evaluate(model: ToyClassifier, images: Sequence[RasterImage], labels: Sequence[int],
             companions: Optional[Sequence[RasterImage]] = None) -> float:
    """Fraction of correct argmax predictions on a non-empty test set."""
    if len(images) == 0:
        raise ValueError("test set must be non-empty")
    predictions = predict(model, images, companions)
    return float(np.mean(predictions == np.asarray(labels, dtype=np.intp)))
