#!/usr/bin/env python3
"""Drive the whole CLI pipeline on a synthetic gaze session.

Builds a throwaway workspace containing a raw gaze stream, a random image, a
multi-peak saliency map and a tiny labelled image set, then runs every
subcommand in sequence:

    fixate -> render -> crops -> apply-attention -> kar-mask -> kar-run
           -> compare -> report

Usage: python scripts/run_synthetic_pipeline.py [--workspace DIR] [--seed N]
"""
import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from gazekit.cli import main as gazekit
from gazekit.core import DatasetManifest, ImageRecord, RasterImage, SaliencyMap
from gazekit.gaze_io import save_manifest, write_raster_image, write_saliency_image

SAMPLE_PERIOD_US = 833  # 1200 Hz


def write_gaze_session(path: Path, dwell_points, dwell_ms=300):
    lines = ["timestamp_us,x_px,y_px,valid"]
    t = 0
    n_dwell = int(dwell_ms * 1000 / SAMPLE_PERIOD_US)
    for index, (x, y) in enumerate(dwell_points):
        for _ in range(n_dwell):
            lines.append(f"{t},{x},{y},1")
            t += SAMPLE_PERIOD_US
        if index + 1 < len(dwell_points):
            nx, ny = dwell_points[index + 1]
            for i in range(1, 6):
                frac = i / 6
                lines.append(f"{t},{x + (nx - x) * frac},{y + (ny - y) * frac},1")
                t += SAMPLE_PERIOD_US
    path.write_text("\n".join(lines) + "\n")


def write_peaky_saliency(path: Path, size=448):
    values = np.zeros((size, size))
    ys, xs = np.mgrid[0:size, 0:size]
    for i, cy in enumerate(np.linspace(75, size - 75, 3)):
        for j, cx in enumerate(np.linspace(75, size - 75, 3)):
            values += (1.0 + 0.1 * (3 * i + j)) * np.exp(
                -((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * 18.0 ** 2))
    write_saliency_image(SaliencyMap(values=values), path, depth=16)


def write_kar_dataset(root: Path, rng, n_images=24):
    (root / "kar_images").mkdir()
    (root / "kar_saliency").mkdir()
    records = []
    for i in range(n_images):
        label = i % 2
        values = rng.normal(0.5, 0.05, size=(12, 12))
        values[4:8, 4:8] = 0.9 if label else 0.1
        write_raster_image(RasterImage(values=np.clip(values, 0, 1)),
                           root / "kar_images" / f"img{i:02d}.png")
        saliency = np.zeros((12, 12))
        saliency[4:8, 4:8] = 1.0
        write_saliency_image(SaliencyMap(values=saliency),
                             root / "kar_saliency" / f"img{i:02d}.png")
        records.append(ImageRecord(
            id=f"img{i:02d}", path=f"kar_images/img{i:02d}.png", width=12, height=12,
            label=label, split="train" if i < n_images * 3 // 4 else "test"))
    save_manifest(DatasetManifest(images=tuple(records), num_classes=2, num_parts=1,
                                  num_attributes=0, attribute_to_part={}),
                  root / "manifest.json")


def run(argv):
    print("$ gazekit " + " ".join(argv))
    code = gazekit(argv)
    if code != 0:
        sys.exit(f"subcommand failed with exit code {code}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workspace", default="pipeline_demo")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    workspace = Path(args.workspace)
    workspace.mkdir(parents=True, exist_ok=True)
    os.chdir(workspace)
    rng = np.random.default_rng(args.seed)

    with open("geometry.json", "w") as handle:
        json.dump({"viewing_distance_mm": 600.0, "screen_width_mm": 530.0,
                   "screen_resolution_x": 1920, "screen_resolution_y": 1080,
                   "foveal_angle_deg": 2.0}, handle, indent=2)
    write_gaze_session(Path("gaze.csv"),
                       [(500.0, 400.0), (1200.0, 700.0), (900.0, 300.0)])
    write_raster_image(RasterImage(values=rng.random((448, 448, 3))), "image.png")
    write_peaky_saliency(Path("peaky.png"))
    write_kar_dataset(Path("."), rng)

    run(["fixate", "--gaze", "gaze.csv", "--geometry", "geometry.json",
         "--out", "fixations.csv"])
    run(["render", "--fixations", "fixations.csv", "--geometry", "geometry.json",
         "--size", "448x448", "--out", "rendered.png"])
    run(["crops", "--saliency", "peaky.png", "--image", "image.png",
         "--preset", "cub", "--k", "2,3,4", "--nms", "0.25",
         "--out-dir", "crops", "--manifest-out", "crops.json"])
    run(["apply-attention", "--image", "image.png", "--saliency", "rendered.png",
         "--out", "weighted.png"])
    run(["kar-mask", "--saliency", "peaky.png", "--percent", "20", "--out", "mask.png"])
    run(["kar-run", "--manifest", "manifest.json", "--saliency-dir", "kar_saliency",
         "--percents", "5,10,15,20,25,30,50,70,90", "--seed", str(args.seed),
         "--epochs", "40", "--out", "kar.json"])
    run(["compare", "--candidate", "rendered.png", "--reference", "peaky.png",
         "--fixations", "fixations.csv", "--out", "compare.json"])
    run(["report", "kar.json", "compare.json", "--out", "report.json"])

    print(f"\nartifacts in {workspace.resolve()}:")
    for path in sorted(Path(".").rglob("*")):
        if path.is_file():
            print(f"  {path}")


if __name__ == "__main__":
    main()
