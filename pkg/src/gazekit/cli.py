"""Command-line front-end.

Subcommands: fixate, render, crops, apply-attention, kar-mask, kar-run,
compare, attrs, report. Every run is deterministic given identical inputs,
flags and seed; all randomness derives from --seed (or GAZEKIT_SEED). Exit
codes: 0 success, 1 processing error (machine-readable line on stderr),
2 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import attributes as attr_mod
from . import crops as crops_mod
from . import gaze_io, metrics
from .config import load_geometry, load_pipeline_config
from .core import ConfigError, GazeKitError, Geometry, SaliencyMap, SchemaError
from .fixation import IvtConfig, detect_fixations
from .gaze_io import atomic_write_text
from .kar import kar_run, keep_mask
from .render import RenderConfig, apply_attention, render_saliency, sigma_from_geometry
from .toy_model import TrainConfig

SCHEMA_VERSION = 1
AUC_CONVENTION = "trapezoid over percent/100, normalized by the percent span"


def _dump_json(data: dict, path: Optional[str]) -> None:
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(path, text)


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise ConfigError(f"expected WxH size, got {text!r}") from None


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("GAZEKIT_SEED")
    if env is not None:
        return int(env)
    if args.pipeline_config is not None:
        return args.pipeline_config.seed
    return 0


def _resolve_workers(args) -> int:
    if getattr(args, "workers", None):
        return max(1, args.workers)
    env = os.environ.get("GAZEKIT_WORKERS")
    return max(1, int(env)) if env else 1


def _geometry_from_args(args) -> Geometry:
    if args.geometry is not None:
        return load_geometry(args.geometry)
    if args.pipeline_config is not None:
        return args.pipeline_config.geometry
    raise ConfigError("a geometry file (--geometry) or --config is required")


def cmd_fixate(args) -> int:
    geometry = _geometry_from_args(args)
    ivt = IvtConfig(
        geometry=geometry,
        velocity_threshold_deg_s=args.velocity_threshold,
        min_fixation_duration_ms=args.min_duration,
        merge_max_gap_ms=args.merge_gap,
        merge_max_angle_deg=args.merge_angle,
    )
    samples = gaze_io.load_gaze_csv(args.gaze)
    fixations = detect_fixations(samples, ivt)
    gaze_io.write_fixation_csv(fixations, args.out)
    return 0


def cmd_render(args) -> int:
    geometry = _geometry_from_args(args)
    pc = args.pipeline_config
    sigma = args.sigma
    if sigma is None and pc is not None:
        sigma = pc.render.sigma_px
    if sigma is None:
        sigma = sigma_from_geometry(geometry)
    if args.display:
        display = _parse_size(args.display)
    elif pc is not None:
        display = tuple(pc.render.display_resolution)
    else:
        display = (geometry.screen_resolution_x, geometry.screen_resolution_y)
    if args.size:
        output_size = _parse_size(args.size)
    elif pc is not None:
        output_size = tuple(pc.render.output_size)
    else:
        raise ConfigError("an output size (--size WxH) or --config is required")
    truncation = None if args.exact else (
        args.truncation if args.truncation is not None else
        (pc.render.truncation_radius if pc is not None else 4.0))
    config = RenderConfig(
        sigma_px=sigma,
        display_resolution=display,
        output_size=output_size,
        truncation_radius=truncation,
    )
    fixations = gaze_io.load_fixation_csv(args.fixations)
    saliency = render_saliency(fixations, config)
    gaze_io.write_saliency_image(saliency, args.out, depth=args.depth)
    return 0


def cmd_crops(args) -> int:
    pc = args.pipeline_config
    preset = args.preset or (pc.crops.preset if pc else "cub")
    k_values = _parse_ints(args.k) if args.k else list(pc.crops.k if pc else (2, 3, 4))
    if len(k_values) != 3:
        raise ConfigError("--k needs exactly three values: large,medium,small")
    nms = args.nms if args.nms is not None else (pc.crops.nms_iou if pc else 0.25)
    resize_to = _parse_size(args.resize) if args.resize else \
        tuple(pc.crops.resize_to if pc else (224, 224))
    stride = args.stride if args.stride is not None else (pc.crops.stride if pc else None)

    saliency = gaze_io.read_saliency_image(args.saliency)
    image = gaze_io.load_raster_image(args.image)
    if (image.height, image.width) != (saliency.height, saliency.width):
        raise SchemaError(
            f"saliency {saliency.width}x{saliency.height} does not match "
            f"image {image.width}x{image.height}")

    image_id = args.image_id or Path(args.image).stem
    specs = crops_mod.preset_windows(
        preset, k={"large": k_values[0], "medium": k_values[1], "small": k_values[2]},
        stride=stride)
    plan = crops_mod.plan_crops(saliency, specs, resize_to=resize_to,
                                nms_iou=nms, image_id=image_id)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for index, (box, crop) in enumerate(zip(plan.boxes, crops_mod.extract_and_resize(image, plan))):
        gaze_io.write_raster_image(
            crop, out_dir / f"{image_id}_crop{index:02d}_{box.scale_tag}.png")
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "crops",
        "image_id": image_id,
        "resize_to": list(plan.resize_to),
        "boxes": [{"x": b.x, "y": b.y, "w": b.width, "h": b.height,
                   "score": b.score, "scale": b.scale_tag} for b in plan.boxes],
    }
    _dump_json(report, args.manifest_out)
    return 0


def cmd_apply_attention(args) -> int:
    image = gaze_io.load_raster_image(args.image)
    saliency = gaze_io.read_saliency_image(args.saliency)
    gaze_io.write_raster_image(apply_attention(image, saliency), args.out)
    return 0


def cmd_kar_mask(args) -> int:
    saliency = gaze_io.read_saliency_image(args.saliency)
    mask = keep_mask(saliency, args.percent)
    gaze_io.write_saliency_image(
        SaliencyMap(values=mask.kept.astype(np.float64)), args.out, depth=8)
    return 0


def _split_dataset(manifest, seed: int, test_fraction: float):
    records = list(manifest.images)
    if all(rec.split is not None for rec in records):
        train = [rec for rec in records if rec.split == "train"]
        test = [rec for rec in records if rec.split == "test"]
    else:
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(records))
        n_test = max(1, int(round(test_fraction * len(records))))
        test_idx = set(order[:n_test].tolist())
        train = [rec for i, rec in enumerate(records) if i not in test_idx]
        test = [rec for i, rec in enumerate(records) if i in test_idx]
    if not train or not test:
        raise SchemaError("manifest split produced an empty train or test set")
    return train, test


def cmd_kar_run(args) -> int:
    pc = args.pipeline_config
    manifest = gaze_io.load_manifest(args.manifest)
    seed = _resolve_seed(args)
    percents = _parse_floats(args.percents) if args.percents else \
        list(pc.kar.percents if pc else (5, 10, 15, 20, 25, 30, 50, 70, 90))
    base_train = pc.kar.train if pc else TrainConfig()
    train_config = TrainConfig(
        epochs=args.epochs or base_train.epochs,
        learning_rate=args.learning_rate or base_train.learning_rate,
        lr_decay_factor=base_train.lr_decay_factor,
        lr_decay_every=base_train.lr_decay_every,
        batch_size=args.batch_size or base_train.batch_size,
        seed=seed,
    )
    feature_dim = pc.kar.feature_dim if pc else 16
    test_fraction = args.test_fraction if args.test_fraction is not None else \
        (pc.kar.test_fraction if pc else 0.3)

    train_recs, test_recs = _split_dataset(manifest, seed, test_fraction)
    saliency_dir = Path(args.saliency_dir)

    def load_pair(rec):
        image = gaze_io.load_raster_image(rec.path)
        saliency = gaze_io.read_saliency_image(saliency_dir / f"{rec.id}.png")
        return image, rec.label, saliency

    train_loaded = [load_pair(rec) for rec in train_recs]
    test_loaded = [load_pair(rec) for rec in test_recs]
    curve = kar_run(
        [im for im, _, _ in train_loaded], [lb for _, lb, _ in train_loaded],
        [sa for _, _, sa in train_loaded],
        [im for im, _, _ in test_loaded], [lb for _, lb, _ in test_loaded],
        [sa for _, _, sa in test_loaded],
        percents, train_config, feature_dim=feature_dim,
    )
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "kar",
        "points": [{"percent": p, "accuracy": a} for p, a in curve.points],
        "auc": curve.auc,
        "auc_convention": AUC_CONVENTION,
        "failures": [{"percent": p, "error": e} for p, e in curve.failures],
        "config": {
            "epochs": train_config.epochs,
            "learning_rate": train_config.learning_rate,
            "lr_decay_factor": train_config.lr_decay_factor,
            "lr_decay_every": train_config.lr_decay_every,
            "batch_size": train_config.batch_size,
            "seed": train_config.seed,
            "feature_dim": feature_dim,
            "n_train": len(train_recs),
            "n_test": len(test_recs),
        },
    }
    _dump_json(report, args.out)
    return 0


def _fixation_set_from_csv(path) -> metrics.FixationSet:
    return metrics.FixationSet.from_fixations(gaze_io.load_fixation_csv(path))


def cmd_compare(args) -> int:
    candidate = gaze_io.read_saliency_image(args.candidate)
    reference = gaze_io.read_saliency_image(args.reference)
    positives = _fixation_set_from_csv(args.fixations) if args.fixations else None
    negatives = _fixation_set_from_csv(args.negatives) if args.negatives else None
    baseline = None
    if args.baseline:
        baseline = metrics.DistributionMap.from_saliency(
            gaze_io.read_saliency_image(args.baseline))
    result = metrics.compare_all(candidate, reference, positives=positives,
                                 negatives=negatives, baseline=baseline)
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "compare",
        "candidate": str(args.candidate),
        "reference": str(args.reference),
        **result,
    }
    _dump_json(report, args.out)
    return 0


def cmd_attrs(args) -> int:
    manifest = gaze_io.load_manifest(args.manifest)
    with open(args.pairs) as handle:
        rows = [line.strip() for line in handle if line.strip()]
    if rows and not rows[0].replace(",", "").replace(" ", "").isdigit():
        rows = rows[1:]  # header
    pairs = []
    for row in rows:
        a, b = (int(tok) for tok in row.split(","))
        pairs.append((a, b))
    if not pairs:
        raise SchemaError(f"{args.pairs}: no class pairs found")
    ks = _parse_ints(args.ks) if args.ks else [1, 2, 3, 4]
    fixation_dir = Path(args.fixation_dir)

    def fixation_path(rec):
        return Path(rec.fixations) if rec.fixations else fixation_dir / f"{rec.id}.csv"

    def analyze_pair(pair):
        class_a, class_b = pair
        recs_a = manifest.records_for_class(class_a)
        recs_b = manifest.records_for_class(class_b)
        if not recs_a or not recs_b:
            raise SchemaError(f"pair {class_a},{class_b}: class without images")
        vec = attr_mod.comparison_vector(
            [rec.attributes for rec in recs_a if rec.attributes is not None],
            [rec.attributes for rec in recs_b if rec.attributes is not None])
        result = attr_mod.discriminative_part(vec, manifest.attribute_to_part)
        observations = []
        for rec in recs_a + recs_b:
            if rec.part_centers is None:
                continue
            path = fixation_path(rec)
            if not path.exists():
                continue
            fixations = gaze_io.load_fixation_csv(path)
            if not fixations:
                continue
            attention = attr_mod.assign_fixations(fixations, rec.part_centers)
            observations.append((attention, result.part))
        return pair, result, observations

    workers = _resolve_workers(args)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            analyzed = list(pool.map(analyze_pair, pairs))
    else:
        analyzed = [analyze_pair(pair) for pair in pairs]

    per_pair = {}
    all_observations = []
    for (class_a, class_b), result, observations in analyzed:
        per_pair[f"{class_a}-{class_b}"] = {
            "discriminative_part": result.part,
            "degenerate": result.degenerate,
        }
        all_observations.extend(observations)
    if not all_observations:
        raise SchemaError("no images with part centers and fixations to rank")
    rate_report = attr_mod.hit_rate(all_observations, ks)
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "attrs",
        "per_pair": per_pair,
        "hit_rate": {str(k): v for k, v in sorted(rate_report.hit_rate_at_k.items())},
        "histogram": {str(n): c for n, c in sorted(rate_report.focused_parts_histogram.items())},
    }
    _dump_json(report, args.out)
    return 0


def _format_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(headers[i])), *(len(str(r[i])) for r in rows)) if rows
              else len(str(headers[i])) for i in range(len(headers))]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def cmd_report(args) -> int:
    reports = []
    for path in args.inputs:
        with open(path) as handle:
            try:
                data = json.load(handle)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: invalid JSON: {exc}") from None
        if data.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(
                f"{path}: schema_version {data.get('schema_version')!r} "
                f"does not match {SCHEMA_VERSION}")
        reports.append((str(path), data))

    sections: list[str] = []
    compare_rows = []
    metric_names = ["kl_d", "cc", "sim", "rank_co", "sauc", "ig"]
    for path, data in reports:
        if data.get("kind") != "compare":
            continue
        row = [data.get("candidate", path)]
        for name in metric_names:
            value = data["metrics"].get(name)
            row.append("-" if value is None else f"{value:.4f}")
        compare_rows.append(row)
    if compare_rows:
        headers = ["candidate", "KL-D (nats)", "CC", "SIM", "Rank-Co", "sAUC", "IG (bits)"]
        sections.append(_format_table(headers, compare_rows))

    for path, data in reports:
        if data.get("kind") != "kar":
            continue
        rows = [[f"{pt['percent']:g}", f"{pt['accuracy']:.4f}"] for pt in data["points"]]
        table = _format_table(["percent", "accuracy"], rows)
        sections.append(f"{path}\n{table}\nAUC = {data['auc']:.4f} ({data['auc_convention']})")

    for path, data in reports:
        if data.get("kind") != "attrs":
            continue
        rows = [[k, f"{v:.4f}"] for k, v in sorted(data["hit_rate"].items(), key=lambda kv: int(kv[0]))]
        sections.append(f"{path}\n{_format_table(['top-k', 'hit rate'], rows)}")

    text = "\n\n".join(sections) if sections else "(no renderable reports)"
    sys.stdout.write(text + "\n")
    if args.out:
        consolidated = {
            "schema_version": SCHEMA_VERSION,
            "kind": "report",
            "inputs": [{"path": path, "report": data} for path, data in reports],
        }
        _dump_json(consolidated, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazekit",
        description="Turn raw eye-gaze data into saliency maps, attention-guided "
                    "crops, keep-and-retrain curves and saliency similarity reports.")
    parser.add_argument("--config", help="pipeline config JSON; explicit flags win")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed for every random choice (env: GAZEKIT_SEED)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixate", help="detect fixations in a raw gaze CSV")
    p.add_argument("--gaze", required=True)
    p.add_argument("--geometry")
    p.add_argument("--out", required=True)
    p.add_argument("--velocity-threshold", type=float, default=30.0, dest="velocity_threshold")
    p.add_argument("--min-duration", type=float, default=60.0, dest="min_duration")
    p.add_argument("--merge-gap", type=float, default=75.0, dest="merge_gap")
    p.add_argument("--merge-angle", type=float, default=0.5, dest="merge_angle")
    p.set_defaults(func=cmd_fixate)

    p = sub.add_parser("render", help="render a fixation CSV into a saliency PNG")
    p.add_argument("--fixations", required=True)
    p.add_argument("--geometry")
    p.add_argument("--size", default=None, help="output size WxH (or from --config)")
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, default=None, help="Gaussian width in display px")
    p.add_argument("--display", default=None, help="display resolution WxH")
    p.add_argument("--depth", type=int, choices=(8, 16), default=16)
    p.add_argument("--truncation", type=float, default=None)
    p.add_argument("--exact", action="store_true", help="disable Gaussian truncation")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("crops", help="plan and cut attention-guided crops")
    p.add_argument("--saliency", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--preset", choices=sorted(crops_mod.WINDOW_PRESETS), default=None)
    p.add_argument("--k", default=None, help="windows kept per scale: large,medium,small")
    p.add_argument("--nms", type=float, default=None, help="NMS IoU threshold")
    p.add_argument("--resize", default=None, help="crop output size WxH")
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--image-id", default=None, dest="image_id")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--manifest-out", required=True, dest="manifest_out")
    p.set_defaults(func=cmd_crops)

    p = sub.add_parser("apply-attention", help="weight an image by a saliency map")
    p.add_argument("--image", required=True)
    p.add_argument("--saliency", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_apply_attention)

    p = sub.add_parser("kar-mask", help="write the top-percent keep mask of a map")
    p.add_argument("--saliency", required=True)
    p.add_argument("--percent", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_kar_mask)

    p = sub.add_parser("kar-run", help="keep-and-retrain accuracy curve over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--saliency-dir", required=True, dest="saliency_dir")
    p.add_argument("--percents", default=None)
    # SUPPRESS keeps a global --seed given before the subcommand intact
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None, dest="learning_rate")
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--test-fraction", type=float, default=None, dest="test_fraction")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_kar_run)

    p = sub.add_parser("compare", help="saliency similarity metrics between two maps")
    p.add_argument("--candidate", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--fixations", default=None, help="positive fixation CSV (sAUC, IG)")
    p.add_argument("--negatives", default=None, help="negative fixation CSV (sAUC)")
    p.add_argument("--baseline", default=None, help="baseline map PNG for IG")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("attrs", help="discriminative parts and gaze hit rates")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pairs", required=True, help="CSV of class-id pairs")
    p.add_argument("--fixation-dir", required=True, dest="fixation_dir")
    p.add_argument("--ks", default=None, help="comma-separated top-k values")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_attrs)

    p = sub.add_parser("report", help="consolidate prior JSON reports into tables")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.pipeline_config = load_pipeline_config(args.config) if args.config else None
        return args.func(args)
    except (GazeKitError, ValueError, OSError) as exc:
        error_line = json.dumps(
            {"error": str(exc), "type": type(exc).__name__, "command": args.command},
            sort_keys=True)
        print(error_line, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
