import json

import numpy as np
import pytest

from gazekit.cli import main
from gazekit.core import SaliencyMap
from gazekit.gaze_io import (
    read_saliency_image,
    save_manifest,
    write_fixation_csv,
    write_raster_image,
    write_saliency_image,
)
from gazekit.core import DatasetManifest, Fixation, ImageRecord, RasterImage


GEOMETRY = {
    "viewing_distance_mm": 600.0,
    "screen_width_mm": 530.0,
    "screen_resolution_x": 1920,
    "screen_resolution_y": 1080,
    "foveal_angle_deg": 2.0,
}


@pytest.fixture
def geometry_file(tmp_path):
    path = tmp_path / "geometry.json"
    path.write_text(json.dumps(GEOMETRY))
    return str(path)


def write_gaze_stream(path):
    period = 833
    lines = ["timestamp_us,x_px,y_px,valid"]
    t = 0
    for _ in range(600):  # 500 ms dwell at (400, 500)
        lines.append(f"{t},400.0,500.0,1")
        t += period
    for i in range(1, 7):  # fast saccade
        lines.append(f"{t},{400 + 60 * i},500.0,1")
        t += period
    for _ in range(600):  # 500 ms dwell at (760, 500)
        lines.append(f"{t},760.0,500.0,1")
        t += period
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestUsageErrors:
    def test_no_arguments_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["render", "--no-such-flag"])
        assert exc.value.code == 2

    def test_missing_input_file_is_processing_error(self, tmp_path, capsys):
        code = main(["compare", "--candidate", str(tmp_path / "nope.png"),
                     "--reference", str(tmp_path / "nope.png")])
        assert code == 1
        err = capsys.readouterr().err.strip()
        parsed = json.loads(err.splitlines()[-1])
        assert parsed["command"] == "compare"
        assert "nope.png" in parsed["error"]


class TestFixateAndRender:
    def test_fixate_then_render_pipeline(self, tmp_path, geometry_file, capsys):
        gaze = write_gaze_stream(tmp_path / "gaze.csv")
        fix_out = tmp_path / "fixations.csv"
        assert main(["fixate", "--gaze", gaze, "--geometry", geometry_file,
                     "--out", str(fix_out)]) == 0
        content = fix_out.read_text().splitlines()
        assert content[0] == "x_px,y_px,duration_ms"
        assert len(content) == 3  # two dwells

        png_out = tmp_path / "saliency.png"
        assert main(["render", "--fixations", str(fix_out), "--geometry", geometry_file,
                     "--size", "480x270", "--out", str(png_out)]) == 0
        assert read_saliency_image(png_out).values.max() == 65535

    def test_render_argmax_tracks_longer_fixation(self, tmp_path, geometry_file):
        fix_csv = tmp_path / "two.csv"
        write_fixation_csv([Fixation(400.0, 500.0, 100.0), Fixation(1400.0, 500.0, 400.0)],
                           fix_csv)
        out = tmp_path / "map.png"
        assert main(["render", "--fixations", str(fix_csv), "--geometry", geometry_file,
                     "--size", "192x108", "--out", str(out)]) == 0
        values = read_saliency_image(out).values
        peak_y, peak_x = np.unravel_index(np.argmax(values), values.shape)
        # 1400 px on a 1920-wide display maps to x = 140 of 192
        assert abs(peak_x - 140) <= 2
        assert abs(peak_y - 50) <= 2


def make_peaky_png(path, size=448, grid=3):
    values = np.zeros((size, size))
    coords = np.linspace(size / (grid * 2), size - size / (grid * 2), grid)
    ys, xs = np.mgrid[0:size, 0:size]
    for i, cy in enumerate(coords):
        for j, cx in enumerate(coords):
            values += (1.0 + 0.05 * (i * grid + j)) * np.exp(
                -((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * 18.0 ** 2))
    write_saliency_image(SaliencyMap(values=values), path, depth=16)
    return values


class TestCrops:
    def test_cub_preset_yields_nine_crops(self, tmp_path):
        saliency_png = tmp_path / "map.png"
        make_peaky_png(saliency_png)
        rng = np.random.default_rng(0)
        image_png = tmp_path / "bird.png"
        write_raster_image(RasterImage(values=rng.random((448, 448, 3))), image_png)
        out_dir = tmp_path / "crops"
        manifest_out = tmp_path / "crops.json"
        assert main(["crops", "--saliency", str(saliency_png), "--image", str(image_png),
                     "--preset", "cub", "--k", "2,3,4", "--nms", "0.25",
                     "--out-dir", str(out_dir), "--manifest-out", str(manifest_out)]) == 0
        manifest = json.loads(manifest_out.read_text())
        assert len(manifest["boxes"]) == 9
        assert manifest["resize_to"] == [224, 224]
        assert len(list(out_dir.glob("*.png"))) == 9
        scales = [b["scale"] for b in manifest["boxes"]]
        assert sorted(set(scales)) == ["large", "medium", "small"]

    def test_size_mismatch_is_processing_error(self, tmp_path, capsys):
        saliency_png = tmp_path / "map.png"
        write_saliency_image(SaliencyMap(values=np.ones((64, 64))), saliency_png)
        image_png = tmp_path / "img.png"
        write_raster_image(RasterImage(values=np.zeros((32, 32))), image_png)
        code = main(["crops", "--saliency", str(saliency_png), "--image", str(image_png),
                     "--preset", "cxr", "--out-dir", str(tmp_path / "o"),
                     "--manifest-out", str(tmp_path / "m.json")])
        assert code == 1


class TestApplyAttentionAndMask:
    def test_apply_attention(self, tmp_path):
        image_png = tmp_path / "img.png"
        write_raster_image(RasterImage(values=np.ones((8, 8))), image_png)
        saliency_png = tmp_path / "sal.png"
        values = np.zeros((8, 8))
        values[2, 2] = 9.0
        write_saliency_image(SaliencyMap(values=values), saliency_png, depth=8)
        out = tmp_path / "weighted.png"
        assert main(["apply-attention", "--image", str(image_png),
                     "--saliency", str(saliency_png), "--out", str(out)]) == 0
        weighted = read_saliency_image(out).values
        assert weighted[2, 2] == 255
        assert weighted[0, 0] == 0

    def test_kar_mask_counts(self, tmp_path):
        saliency_png = tmp_path / "sal.png"
        rng = np.random.default_rng(1)
        write_saliency_image(SaliencyMap(values=rng.random((10, 10))), saliency_png)
        out = tmp_path / "mask.png"
        assert main(["kar-mask", "--saliency", str(saliency_png),
                     "--percent", "20", "--out", str(out)]) == 0
        mask = read_saliency_image(out).values
        assert int((mask == 255).sum()) == 20
        assert int((mask == 0).sum()) == 80


def build_kar_workspace(tmp_path, n_images=24):
    rng = np.random.default_rng(7)
    image_dir = tmp_path / "images"
    saliency_dir = tmp_path / "saliency"
    image_dir.mkdir()
    saliency_dir.mkdir()
    records = []
    for i in range(n_images):
        label = i % 2
        values = rng.normal(0.5, 0.05, size=(12, 12))
        values[4:8, 4:8] = 0.9 if label else 0.1
        path = image_dir / f"img{i:02d}.png"
        write_raster_image(RasterImage(values=np.clip(values, 0, 1)), path)
        saliency = np.zeros((12, 12))
        saliency[4:8, 4:8] = 1.0
        write_saliency_image(SaliencyMap(values=saliency), saliency_dir / f"img{i:02d}.png")
        records.append(ImageRecord(
            id=f"img{i:02d}", path=str(path), width=12, height=12, label=label,
            split="train" if i < n_images * 3 // 4 else "test"))
    manifest = DatasetManifest(images=tuple(records), num_classes=2, num_parts=1,
                               num_attributes=0, attribute_to_part={})
    manifest_path = tmp_path / "manifest.json"
    save_manifest(manifest, manifest_path)
    return manifest_path, saliency_dir


class TestKarRun:
    def test_curve_report(self, tmp_path):
        manifest_path, saliency_dir = build_kar_workspace(tmp_path)
        out = tmp_path / "kar.json"
        assert main(["--seed", "5", "kar-run", "--manifest", str(manifest_path),
                     "--saliency-dir", str(saliency_dir), "--percents", "20,60",
                     "--epochs", "40", "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["kind"] == "kar"
        assert [pt["percent"] for pt in report["points"]] == [20, 60]
        assert 0.0 <= report["auc"] <= 1.0
        assert report["config"]["seed"] == 5

    def test_seed_determinism_bytes(self, tmp_path):
        manifest_path, saliency_dir = build_kar_workspace(tmp_path)
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            assert main(["--seed", "9", "kar-run", "--manifest", str(manifest_path),
                         "--saliency-dir", str(saliency_dir), "--percents", "30,70",
                         "--epochs", "25", "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_seed_accepted_after_subcommand_and_from_env(self, tmp_path, monkeypatch):
        manifest_path, saliency_dir = build_kar_workspace(tmp_path)

        def run(args, env_seed=None):
            if env_seed is None:
                monkeypatch.delenv("GAZEKIT_SEED", raising=False)
            else:
                monkeypatch.setenv("GAZEKIT_SEED", env_seed)
            out = tmp_path / "seeded.json"
            assert main(args + ["--out", str(out)]) == 0
            return json.loads(out.read_text())["config"]["seed"]

        base = ["kar-run", "--manifest", str(manifest_path),
                "--saliency-dir", str(saliency_dir), "--percents", "30,70",
                "--epochs", "5"]
        assert run(base + ["--seed", "7"]) == 7  # flag after the subcommand
        assert run(["--seed", "4"] + base) == 4  # global flag
        assert run(base, env_seed="11") == 11  # environment fallback
        assert run(base + ["--seed", "2"], env_seed="11") == 2  # flag beats env


class TestCompareAndReport:
    def make_compare_report(self, tmp_path, name, seed):
        rng = np.random.default_rng(seed)
        cand = tmp_path / f"cand{name}.png"
        ref = tmp_path / f"ref{name}.png"
        write_saliency_image(SaliencyMap(values=rng.random((16, 16))), cand)
        write_saliency_image(SaliencyMap(values=rng.random((16, 16))), ref)
        fix = tmp_path / f"fix{name}.csv"
        write_fixation_csv([Fixation(3.0, 4.0, 100.0), Fixation(10.0, 11.0, 200.0)], fix)
        neg = tmp_path / f"neg{name}.csv"
        write_fixation_csv([Fixation(1.0, 14.0, 100.0), Fixation(14.0, 1.0, 200.0)], neg)
        out = tmp_path / f"compare{name}.json"
        assert main(["compare", "--candidate", str(cand), "--reference", str(ref),
                     "--fixations", str(fix), "--negatives", str(neg),
                     "--out", str(out)]) == 0
        return out

    def test_compare_report_keys_and_units(self, tmp_path):
        out = self.make_compare_report(tmp_path, "x", 0)
        report = json.loads(out.read_text())
        assert set(report["metrics"]) == {"kl_d", "cc", "sim", "rank_co", "sauc", "ig"}
        assert report["units"] == {"kl_d": "nats", "cc": "correlation",
                                   "sim": "intersection", "rank_co": "correlation",
                                   "sauc": "auc", "ig": "bits"}
        assert all(v is not None for v in report["metrics"].values())

    def test_report_renders_two_row_table(self, tmp_path, capsys):
        first = self.make_compare_report(tmp_path, "a", 1)
        second = self.make_compare_report(tmp_path, "b", 2)
        assert main(["report", str(first), str(second)]) == 0
        out = capsys.readouterr().out
        assert "KL-D (nats)" in out
        assert "canda.png" in out and "candb.png" in out

    def test_report_renders_kar_curve(self, tmp_path, capsys):
        manifest_path, saliency_dir = build_kar_workspace(tmp_path)
        kar_out = tmp_path / "kar.json"
        assert main(["kar-run", "--manifest", str(manifest_path),
                     "--saliency-dir", str(saliency_dir), "--percents", "25,75",
                     "--epochs", "20", "--out", str(kar_out)]) == 0
        assert main(["report", str(kar_out)]) == 0
        out = capsys.readouterr().out
        assert "AUC =" in out
        assert "percent" in out

    def test_mixed_schema_versions_rejected(self, tmp_path, capsys):
        good = self.make_compare_report(tmp_path, "g", 3)
        bad = tmp_path / "bad.json"
        data = json.loads(good.read_text())
        data["schema_version"] = 99
        bad.write_text(json.dumps(data))
        assert main(["report", str(good), str(bad)]) == 1


class TestAttrsCommand:
    def test_attrs_report(self, tmp_path):
        fixation_dir = tmp_path / "fixations"
        fixation_dir.mkdir()
        records = []
        for i in range(6):
            label = i % 2
            image_id = f"im{i}"
            # part 0 near origin, part 1 far corner; attribute 0 (-> part 0)
            # differs between the classes, attribute 1 never does
            centers = ((0, 5.0, 5.0), (1, 50.0, 50.0))
            records.append(ImageRecord(
                id=image_id, path=f"{image_id}.png", width=64, height=64, label=label,
                part_centers=centers,
                attributes=(1, 0) if label == 0 else (0, 0)))
            # every image fixates both parts; class 0 dwells on part 0 longer
            long_ms, short_ms = (300.0, 50.0) if label == 0 else (50.0, 300.0)
            write_fixation_csv([Fixation(5.0, 5.0, long_ms),
                                Fixation(50.0, 50.0, short_ms)],
                               fixation_dir / f"{image_id}.csv")
        manifest = DatasetManifest(images=tuple(records), num_classes=2, num_parts=2,
                                   num_attributes=2, attribute_to_part={0: 0, 1: 1})
        manifest_path = tmp_path / "manifest.json"
        save_manifest(manifest, manifest_path)
        pairs = tmp_path / "pairs.csv"
        pairs.write_text("class_a,class_b\n0,1\n")
        out = tmp_path / "attrs.json"
        assert main(["attrs", "--manifest", str(manifest_path), "--pairs", str(pairs),
                     "--fixation-dir", str(fixation_dir), "--ks", "1,2",
                     "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["per_pair"]["0-1"] == {"discriminative_part": 0, "degenerate": False}
        # class-0 images rank part 0 first (hit), class-1 images second (top-2 hit)
        assert report["hit_rate"] == {"1": 0.5, "2": 1.0}
        assert sum(report["histogram"].values()) == 6

        # a worker pool must not change the report, whether set by flag or env
        parallel_out = tmp_path / "attrs_parallel.json"
        assert main(["attrs", "--manifest", str(manifest_path), "--pairs", str(pairs),
                     "--fixation-dir", str(fixation_dir), "--ks", "1,2",
                     "--workers", "3", "--out", str(parallel_out)]) == 0
        assert parallel_out.read_bytes() == out.read_bytes()

        env_out = tmp_path / "attrs_env.json"
        monkeypatch = pytest.MonkeyPatch()
        monkeypatch.setenv("GAZEKIT_WORKERS", "2")
        try:
            assert main(["attrs", "--manifest", str(manifest_path), "--pairs", str(pairs),
                         "--fixation-dir", str(fixation_dir), "--ks", "1,2",
                         "--out", str(env_out)]) == 0
        finally:
            monkeypatch.undo()
        assert env_out.read_bytes() == out.read_bytes()
