"""File IO: gaze/fixation CSVs, grayscale saliency PNGs, dataset manifests.

All writers go through an atomic write-temp-then-rename so concurrent readers
never observe a half-written file.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .core import (
    DatasetManifest,
    Fixation,
    FormatError,
    GazeSample,
    ImageRecord,
    ParseError,
    SaliencyMap,
    SchemaError,
    check_monotonic,
)

GAZE_COLUMNS = ("timestamp_us", "x_px", "y_px", "valid")
FIXATION_COLUMNS = ("x_px", "y_px", "duration_ms")


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@dataclass(frozen=True)
class GazeCsvSchema:
    """Column names for raw gaze CSVs; defaults match the shipped format."""

    timestamp: str = "timestamp_us"
    x: str = "x_px"
    y: str = "y_px"
    valid: str = "valid"


def load_gaze_csv(path: str | Path, schema: GazeCsvSchema | None = None) -> list[GazeSample]:
    """Read raw gaze samples; rows with unusable coordinates keep their slot as valid=False."""
    schema = schema or GazeCsvSchema()
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty gaze CSV") from None
        header = [h.strip() for h in header]
        try:
            columns = {name: header.index(getattr(schema, name))
                       for name in ("timestamp", "x", "y", "valid")}
        except ValueError as exc:
            raise SchemaError(f"{path}: missing gaze column ({exc})") from None

        samples: list[GazeSample] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < len(header):
                raise ParseError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                timestamp = int(row[columns["timestamp"]])
                x = float(row[columns["x"]])
                y = float(row[columns["y"]])
                valid_token = row[columns["valid"]].strip()
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            if valid_token not in ("0", "1"):
                raise ParseError(f"{path}: line {lineno}: valid flag must be 0 or 1, got {valid_token!r}")
            valid = valid_token == "1" and math.isfinite(x) and math.isfinite(y)
            samples.append(GazeSample(timestamp_us=timestamp, x=x, y=y, valid=valid))
    check_monotonic(samples)
    return samples


def load_fixation_csv(path: str | Path) -> list[Fixation]:
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty fixation CSV") from None
        try:
            idx = {name: header.index(name) for name in FIXATION_COLUMNS}
        except ValueError as exc:
            raise SchemaError(f"{path}: missing fixation column ({exc})") from None
        fixations = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                fixations.append(Fixation(
                    x=float(row[idx["x_px"]]),
                    y=float(row[idx["y_px"]]),
                    duration_ms=float(row[idx["duration_ms"]]),
                ))
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
    return fixations


def write_fixation_csv(fixations: Sequence[Fixation], path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIXATION_COLUMNS)
    for fix in fixations:
        writer.writerow([repr(fix.x), repr(fix.y), repr(fix.duration_ms)])
    atomic_write_text(path, buf.getvalue())


def write_saliency_image(saliency: SaliencyMap, path: str | Path, depth: int = 16) -> None:
    """Export a saliency map as a max-normalized single-channel PNG.

    pixel = floor(value / max * (2^depth - 1) + 0.5); an all-zero map is
    written as an all-zero image rather than dividing by zero.
    """
    if depth not in (8, 16):
        raise ValueError(f"depth must be 8 or 16, got {depth}")
    peak = float(saliency.values.max())
    levels = (1 << depth) - 1
    if peak > 0:
        quantized = np.floor(saliency.values / peak * levels + 0.5)
    else:
        quantized = np.zeros_like(saliency.values)
    if depth == 8:
        image = Image.fromarray(quantized.astype(np.uint8), mode="L")
    else:
        image = Image.fromarray(quantized.astype(np.uint16))
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def read_saliency_image(path: str | Path, allow_color: bool = False) -> SaliencyMap:
    """Read a grayscale PNG back as a saliency map of raw pixel intensities.

    Color images are rejected unless allow_color is set, in which case they
    are reduced with BT.601 luma.
    """
    with Image.open(path) as image:
        if image.mode in ("L", "I", "I;16"):
            values = np.asarray(image, dtype=np.float64)
        elif allow_color:
            from .imageops import rgb_to_luma

            rgb = np.asarray(image.convert("RGB"), dtype=np.float64)
            values = rgb_to_luma(rgb)
        else:
            raise FormatError(
                f"{path}: expected single-channel image, got mode {image.mode!r}"
                " (pass allow_color to reduce with luma)"
            )
    return SaliencyMap(values=values)


def load_raster_image(path: str | Path) -> "RasterImage":
    """Read a PNG as a [0, 1] RasterImage (grayscale stays single-channel)."""
    from .core import RasterImage

    with Image.open(path) as image:
        if image.mode == "L":
            values = np.asarray(image, dtype=np.float64) / 255.0
        elif image.mode in ("I", "I;16"):
            values = np.asarray(image, dtype=np.float64) / 65535.0
        else:
            values = np.asarray(image.convert("RGB"), dtype=np.float64) / 255.0
    return RasterImage(values=values)


def write_raster_image(image: "RasterImage", path: str | Path) -> None:
    arr = np.floor(image.values * 255.0 + 0.5).astype(np.uint8)
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    images = []
    for rec in manifest.images:
        entry: dict = {
            "id": rec.id,
            "path": rec.path,
            "width": rec.width,
            "height": rec.height,
            "label": rec.label,
        }
        if rec.part_centers is not None:
            entry["part_centers"] = [[part, x, y] for part, x, y in rec.part_centers]
        if rec.attributes is not None:
            entry["attributes"] = list(rec.attributes)
        if rec.split is not None:
            entry["split"] = rec.split
        if rec.fixations is not None:
            entry["fixations"] = rec.fixations
        images.append(entry)
    return {
        "images": images,
        "num_classes": manifest.num_classes,
        "num_parts": manifest.num_parts,
        "num_attributes": manifest.num_attributes,
        "attribute_to_part": {str(k): v for k, v in manifest.attribute_to_part.items()},
    }


def manifest_from_dict(data: dict) -> DatasetManifest:
    try:
        raw_images = data["images"]
        num_classes = int(data["num_classes"])
        num_parts = int(data["num_parts"])
        num_attributes = int(data["num_attributes"])
        attr_map = {int(k): int(v) for k, v in data["attribute_to_part"].items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed manifest: {exc}") from None
    images = []
    for entry in raw_images:
        try:
            images.append(ImageRecord(
                id=str(entry["id"]),
                path=str(entry["path"]),
                width=int(entry["width"]),
                height=int(entry["height"]),
                label=int(entry["label"]),
                part_centers=tuple(
                    (int(p), float(x), float(y)) for p, x, y in entry["part_centers"]
                ) if "part_centers" in entry else None,
                attributes=tuple(int(a) for a in entry["attributes"])
                if "attributes" in entry else None,
                split=entry.get("split"),
                fixations=entry.get("fixations"),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed manifest image entry: {exc}") from None
    return DatasetManifest(
        images=tuple(images),
        num_classes=num_classes,
        num_parts=num_parts,
        num_attributes=num_attributes,
        attribute_to_part=attr_map,
    )


def load_manifest(path: str | Path) -> DatasetManifest:
    with open(path) as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    return manifest_from_dict(data)


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(manifest_to_dict(manifest), indent=2, sort_keys=True) + "\n")
