import hashlib
import json
from pathlib import Path

import numpy as np

from roomlayout.cli import main
from roomlayout.pipeline import PipelineConfig


def digest_tree(root: Path) -> dict:
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def run_synth(out_dir, n=1, seed=7, occlusion=0.5, noise=0.15, blur=2.0):
    return main([
        "synth", "--n-scenes", str(n), "--seed", str(seed),
        "--occlusion-level", str(occlusion), "--noise-amp", str(noise),
        "--blur", str(blur), "--out-dir", str(out_dir),
    ])


def run_refine(scene_dir, out_dir, extra=()):
    return main([
        "refine",
        "--image", str(scene_dir / "image.png"),
        "--coarse-map", str(scene_dir / "coarse.png"),
        "--heatmap", str(scene_dir / "heatmap.cfh"),
        "--out-dir", str(out_dir),
        *extra,
    ])


class TestSynth:
    def test_deterministic_bundles(self, tmp_path):
        assert run_synth(tmp_path / "a", n=1, seed=7) == 0
        assert run_synth(tmp_path / "b", n=1, seed=7) == 0
        assert digest_tree(tmp_path / "a") == digest_tree(tmp_path / "b")
        assert run_synth(tmp_path / "c", n=1, seed=8) == 0
        assert digest_tree(tmp_path / "a") != digest_tree(tmp_path / "c")

    def test_zero_occlusion_leaves_probability_intact(self, tmp_path):
        assert run_synth(tmp_path, n=1, seed=3, occlusion=0.0, noise=0.0, blur=0.0) == 0
        gt = json.loads((tmp_path / "scene_0000" / "gt.json").read_text())
        assert gt["occlusions"] == []
        from roomlayout import coarse, geometry
        from roomlayout.geometry import LayoutModel

        pmap = coarse.load_probability_png(tmp_path / "scene_0000" / "coarse.png")
        model = LayoutModel.from_json(gt["layout"])
        stroke = geometry.layout_to_contour(model, 404, 404, line_width=7)
        assert (pmap.values[stroke.mask] > 0.99).all()

    def test_generated_ground_truth_validates(self, tmp_path):
        from roomlayout.geometry import LayoutModel
        from roomlayout.hypothesis import validate_hypothesis

        assert run_synth(tmp_path, n=20, seed=5) == 0
        dirs = sorted(tmp_path.glob("scene_*"))
        assert len(dirs) == 20
        for d in dirs:
            gt = json.loads((d / "gt.json").read_text())
            model = LayoutModel.from_json(gt["layout"])
            assert validate_hypothesis(model, (gt["width"], gt["height"]))


class TestRefine:
    def test_refine_outputs_and_accuracy(self, tmp_path):
        assert run_synth(tmp_path / "data", n=1, seed=11) == 0
        scene = tmp_path / "data" / "scene_0000"
        out = tmp_path / "pred" / "scene_0000"
        assert run_refine(scene, out, extra=("--gt", str(scene / "gt.json"))) == 0
        for name in ("layout.json", "ranked.json", "labels.png", "overlay.png"):
            assert (out / name).exists()
        payload = json.loads((out / "layout.json").read_text())
        assert payload["layout"]["topology"] == "1111"
        assert 0.0 <= payload["score"] <= 1.0

        from roomlayout import geometry, metrics, synth
        from roomlayout.geometry import LayoutModel

        gt = synth.load_ground_truth(scene / "gt.json")
        pred_model = LayoutModel.from_json(payload["layout"])
        pred_lab = geometry.layout_to_labeling(pred_model, 404, 404)
        gt_lab = geometry.labeling_from_png(scene / "labels.png")
        assert metrics.pixel_error(pred_lab, gt_lab) < 0.05

    def test_missing_coarse_map_exits_2(self, tmp_path, capsys):
        assert run_synth(tmp_path / "data", n=1, seed=1) == 0
        scene = tmp_path / "data" / "scene_0000"
        code = main([
            "refine", "--image", str(scene / "image.png"),
            "--coarse-map", str(tmp_path / "nope.png"),
            "--out-dir", str(tmp_path / "out"),
        ])
        assert code == 2
        err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert err["error"] == "input-not-found"

    def test_rerun_is_byte_identical(self, tmp_path):
        assert run_synth(tmp_path / "data", n=1, seed=13) == 0
        scene = tmp_path / "data" / "scene_0000"
        assert run_refine(scene, tmp_path / "p1") == 0
        assert run_refine(scene, tmp_path / "p2") == 0
        assert digest_tree(tmp_path / "p1") == digest_tree(tmp_path / "p2")

    def test_debug_dir_dumps(self, tmp_path):
        assert run_synth(tmp_path / "data", n=1, seed=2) == 0
        scene = tmp_path / "data" / "scene_0000"
        assert run_refine(
            scene, tmp_path / "out", extra=("--debug-dir", str(tmp_path / "dbg"))
        ) == 0
        for name in ("mask.npy", "critical_lines.json", "hypotheses.json", "scores.json"):
            assert (tmp_path / "dbg" / name).exists()


class TestEval:
    def test_round_trip_eval(self, tmp_path, capsys):
        assert run_synth(tmp_path / "data", n=2, seed=21) == 0
        for d in sorted((tmp_path / "data").glob("scene_*")):
            assert run_refine(d, tmp_path / "pred" / d.name) == 0
        code = main([
            "eval", "--pred-dir", str(tmp_path / "pred"),
            "--gt-dir", str(tmp_path / "data"),
            "--out", str(tmp_path / "results.csv"),
        ])
        assert code == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["n_images"] == 2
        assert summary["mean_pixel_error_pct"] < 5.0
        rows = (tmp_path / "results.csv").read_text().strip().splitlines()
        assert rows[0] == "image,pixel_error,corner_error"
        assert len(rows) == 3

    def test_self_eval_is_zero(self, tmp_path, capsys):
        # predictions equal to ground truth -> 0.00% error
        assert run_synth(tmp_path / "data", n=1, seed=23) == 0
        scene = tmp_path / "data" / "scene_0000"
        gt = json.loads((scene / "gt.json").read_text())
        pred_dir = tmp_path / "pred" / "scene_0000"
        pred_dir.mkdir(parents=True)
        (pred_dir / "layout.json").write_text(json.dumps({"layout": gt["layout"]}))
        code = main([
            "eval", "--pred-dir", str(tmp_path / "pred"),
            "--gt-dir", str(tmp_path / "data"),
            "--out", str(tmp_path / "results.csv"),
        ])
        assert code == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["mean_pixel_error_pct"] == 0.0
        assert summary["mean_corner_error_pct"] == 0.0

    def test_unpaired_files_exit_3(self, tmp_path, capsys):
        assert run_synth(tmp_path / "data", n=2, seed=4) == 0
        scene = sorted((tmp_path / "data").glob("scene_*"))[0]
        assert run_refine(scene, tmp_path / "pred" / scene.name) == 0
        code = main([
            "eval", "--pred-dir", str(tmp_path / "pred"),
            "--gt-dir", str(tmp_path / "data"),
            "--out", str(tmp_path / "results.csv"),
        ])
        assert code == 3


class TestRenderAndConfig:
    def test_render_overlay(self, tmp_path):
        assert run_synth(tmp_path / "data", n=1, seed=6) == 0
        scene = tmp_path / "data" / "scene_0000"
        assert run_refine(scene, tmp_path / "pred") == 0
        code = main([
            "render", "--layout", str(tmp_path / "pred" / "layout.json"),
            "--image", str(scene / "image.png"),
            "--gt", str(scene / "gt.json"),
            "--out", str(tmp_path / "overlay.png"),
        ])
        assert code == 0
        from PIL import Image

        arr = np.asarray(Image.open(tmp_path / "overlay.png"))
        assert (arr == np.array([230, 30, 30])).all(axis=-1).any()
        assert (arr == np.array([0, 200, 0])).all(axis=-1).any()

    def test_config_round_trip(self, tmp_path):
        config = PipelineConfig(threshold=0.4, grid_extent=10.0, seed=3)
        path = tmp_path / "config.json"
        path.write_text(config.dumps())
        again = PipelineConfig.loads(path.read_text())
        assert again == config

    def test_config_flags_override_file(self, tmp_path):
        (tmp_path / "c.json").write_text(PipelineConfig(threshold=0.4).dumps())
        assert run_synth(tmp_path / "data", n=1, seed=9) == 0
        scene = tmp_path / "data" / "scene_0000"
        code = run_refine(
            scene, tmp_path / "out",
            extra=("--config", str(tmp_path / "c.json"), "--grid-extent", "5"),
        )
        assert code == 0
        payload = json.loads((tmp_path / "out" / "layout.json").read_text())
        assert payload["config"]["threshold"] == 0.4
        assert payload["config"]["grid_extent"] == 5.0


class TestExitCodes:
    def test_unwritable_output_exits_4(self, tmp_path, capsys):
        blocker = tmp_path / "blocked"
        blocker.write_text("a file where a directory must go")
        code = main([
            "synth", "--n-scenes", "1", "--seed", "1",
            "--out-dir", str(blocker / "sub"),
        ])
        assert code == 4
        err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert err["error"] == "unwritable-output"

    def test_no_valid_hypothesis_exits_5(self, tmp_path, capsys):
        # an all-zero coarse map and no heatmap leave nothing to work with
        from PIL import Image
        import numpy as np

        img = tmp_path / "image.png"
        Image.fromarray(np.full((404, 404, 3), 128, dtype=np.uint8)).save(img)
        pmap = tmp_path / "coarse.png"
        Image.fromarray(np.zeros((404, 404), dtype=np.uint16)).save(pmap)
        code = main([
            "refine", "--image", str(img), "--coarse-map", str(pmap),
            "--out-dir", str(tmp_path / "out"),
        ])
        assert code == 5
        err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert err["error"] == "no-valid-hypothesis"

    def test_precomputed_segments_bypass_detector(self, tmp_path):
        from roomlayout.vanishing import detect_line_segments, segments_to_jsonl

        assert run_synth(tmp_path / "data", n=1, seed=31) == 0
        scene_dir = tmp_path / "data" / "scene_0000"
        from PIL import Image
        import numpy as np

        image = np.asarray(Image.open(scene_dir / "image.png").convert("RGB"))
        segments = detect_line_segments(image, 15)
        seg_path = tmp_path / "segments.jsonl"
        segments_to_jsonl(segments, seg_path)
        code = run_refine(
            scene_dir, tmp_path / "via_file", extra=("--segments", str(seg_path))
        )
        assert code == 0
        assert run_refine(scene_dir, tmp_path / "via_detector") == 0
        a = json.loads((tmp_path / "via_file" / "layout.json").read_text())
        b = json.loads((tmp_path / "via_detector" / "layout.json").read_text())
        assert a["layout"] == b["layout"]


class TestOriginalResolution:
    def test_outputs_scale_to_original_image_size(self, tmp_path):
        # inputs at a non-working resolution: internal computation happens at
        # 404x404 but the emitted coordinates live in the original frame
        import math

        from PIL import Image

        assert run_synth(tmp_path / "data", n=1, seed=37) == 0
        scene_dir = tmp_path / "data" / "scene_0000"
        big = tmp_path / "big.png"
        Image.open(scene_dir / "image.png").resize((640, 480), Image.BILINEAR).save(big)
        code = main([
            "refine", "--image", str(big),
            "--coarse-map", str(scene_dir / "coarse.png"),
            "--heatmap", str(scene_dir / "heatmap.cfh"),
            "--out-dir", str(tmp_path / "pred"),
        ])
        assert code == 0
        payload = json.loads((tmp_path / "pred" / "layout.json").read_text())
        assert payload["width"] == 640 and payload["height"] == 480
        gt = json.loads((scene_dir / "gt.json").read_text())
        gt_by_id = {c["id"]: c["xy"] for c in gt["corners"]}
        sx, sy = 640 / 404, 480 / 404
        diag = math.hypot(640, 480)
        for c in payload["corners"]:
            if c["id"] not in gt_by_id or not c["in_bounds"]:
                continue
            gx, gy = gt_by_id[c["id"]]
            d = math.hypot(c["xy"][0] - gx * sx, c["xy"][1] - gy * sy)
            assert d < 0.02 * diag
        from PIL import Image as PILImage

        labels = np.asarray(PILImage.open(tmp_path / "pred" / "labels.png"))
        assert labels.shape == (480, 640)


class TestCroppedRoom:
    def test_absent_ceiling_scene_refines_without_l1(self, tmp_path):
        # a camera tilted down: the ceiling boundary lies above the frame, so
        # the refined layout must come out without l1 (absent topology)
        import numpy as np

        from roomlayout import geometry, metrics, pipeline, synth
        from roomlayout.coarse import synthesize_coarse
        from roomlayout.geometry import LayoutModel, Point2, line_through

        rng = np.random.default_rng(77)
        far_vp = Point2(3000.0, 150.0)
        vertical_vp = Point2(200.0, 6000.0)
        model = LayoutModel(
            v=Point2(205.0, 120.0),
            l2=line_through(Point2(202.0, 290.0), far_vp),
            l3=line_through(Point2(100.0, 202.0), vertical_vp),
            l4=line_through(Point2(310.0, 202.0), vertical_vp),
        )
        assert model.topology == "0111"
        pmap, heatmap = synthesize_coarse(
            model, 404, 404, blur_sigma=2.0, noise_amp=0.1, seed=77
        )
        image, labeling = synth.render_image(model, 404, 404, rng)
        result = pipeline.refine(image, pmap, heatmap)
        assert result.best.layout.l1 is None
        pe = metrics.pixel_error(
            geometry.layout_to_labeling(result.best.layout, 404, 404), labeling
        )
        assert pe < 0.05
