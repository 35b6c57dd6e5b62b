"""Format-contract tests: everything coarse-net emits must load cleanly in
the primary package with values in [0, 1] and the right dimensions."""

import hashlib
import subprocess
import sys

import numpy as np
import pytest

from coarse_net.cli import main
from coarse_net.infer import AdapterConfig, infer_coarse
from coarse_net.model import init_model, load_model, save_model

# the primary component; its loaders define the file formats
from roomlayout import coarse as roomlayout_coarse


@pytest.fixture(scope="module")
def model_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "net.pt"
    assert main(["init-model", "--out", str(path), "--seed", "3"]) == 0
    return path


@pytest.fixture(scope="module")
def sample_images(tmp_path_factory):
    """Five sample images: four synthetic scenes from the primary's CLI plus
    one constant-color frame."""
    root = tmp_path_factory.mktemp("samples")
    code = subprocess.run(
        [
            sys.executable, "-m", "roomlayout.cli", "synth",
            "--n-scenes", "4", "--seed", "19", "--out-dir", str(root / "scenes"),
        ],
        capture_output=True, text=True,
    )
    assert code.returncode == 0, code.stderr
    images = sorted((root / "scenes").glob("scene_*/image.png"))
    from PIL import Image

    flat = root / "flat.png"
    Image.new("RGB", (640, 480), (128, 140, 150)).save(flat)
    return images + [flat]


class TestModelFile:
    def test_round_trip(self, tmp_path):
        model = init_model(seed=7)
        path = tmp_path / "m.pt"
        save_model(model, path)
        again = load_model(path)
        for a, b in zip(model.state_dict().values(), again.state_dict().values()):
            assert (a == b).all()

    def test_seeded_init_deterministic(self, tmp_path):
        a, b = init_model(seed=5), init_model(seed=5)
        for pa, pb in zip(a.state_dict().values(), b.state_dict().values()):
            assert (pa == pb).all()

    def test_bad_file_rejected(self, tmp_path):
        bad = tmp_path / "bad.pt"
        import torch

        torch.save({"something": 1}, bad)
        with pytest.raises(ValueError):
            load_model(bad)


class TestFormatContract:
    def test_round_trip_on_sample_images(self, model_file, sample_images, tmp_path):
        assert len(sample_images) == 5
        config = AdapterConfig(
            model_path=str(model_file), input_size=404, output_dir=str(tmp_path)
        )
        for image in sample_images:
            written = infer_coarse(image, config, heatmap_pngs=True)
            pmap = roomlayout_coarse.load_probability_png(written["coarse"][0])
            assert (pmap.width, pmap.height) == (404, 404)
            assert pmap.values.min() >= 0.0 and pmap.values.max() <= 1.0

            heatmap = roomlayout_coarse.load_heatmap(written["heatmap_cfh"][0])
            assert (heatmap.width, heatmap.height) == (404, 404)
            assert heatmap.channels.min() >= 0.0
            assert np.allclose(heatmap.channels.sum(axis=0), 1.0, atol=1e-3)

            stem = written["heatmap_pngs"][0]
            stem = stem.with_name(stem.name.replace("_ceil.png", ""))
            heatmap_pngs = roomlayout_coarse.load_heatmap_pngs(stem)
            assert (heatmap_pngs.width, heatmap_pngs.height) == (404, 404)
        print("\nACCEPTANCE adapter-format-contract: PASS (5 images round-tripped)")

    def test_constant_image_outputs_in_range(self, model_file, tmp_path):
        from PIL import Image

        flat = tmp_path / "flat.png"
        Image.new("RGB", (100, 80), (200, 10, 30)).save(flat)
        config = AdapterConfig(
            model_path=str(model_file), input_size=404, output_dir=str(tmp_path)
        )
        written = infer_coarse(flat, config)
        pmap = roomlayout_coarse.load_probability_png(written["coarse"][0])
        assert 0.0 <= pmap.values.min() and pmap.values.max() <= 1.0

    def test_inference_deterministic(self, model_file, sample_images, tmp_path):
        image = sample_images[0]
        digests = []
        for run in ("a", "b"):
            out = tmp_path / run
            config = AdapterConfig(
                model_path=str(model_file), input_size=404, output_dir=str(out)
            )
            written = infer_coarse(image, config, heatmap_pngs=True)
            blob = b"".join(
                p.read_bytes() for ps in written.values() for p in sorted(ps)
            )
            digests.append(hashlib.sha256(blob).hexdigest())
        assert digests[0] == digests[1]

    def test_refine_consumes_adapter_output(self, model_file, sample_images, tmp_path):
        # the full consumer loop: adapter files drive the primary's refine
        # command (exit 0 or the documented no-hypothesis code)
        image = sample_images[0]
        config = AdapterConfig(
            model_path=str(model_file), input_size=404, output_dir=str(tmp_path)
        )
        written = infer_coarse(image, config)
        code = subprocess.run(
            [
                sys.executable, "-m", "roomlayout.cli", "refine",
                "--image", str(image),
                "--coarse-map", str(written["coarse"][0]),
                "--heatmap", str(written["heatmap_cfh"][0]),
                "--out-dir", str(tmp_path / "refined"),
            ],
            capture_output=True, text=True,
        )
        assert code.returncode in (0, 5), code.stdout + code.stderr


class TestCli:
    def test_missing_input_exits_2(self, model_file, tmp_path):
        code = main([
            "infer", "--model", str(model_file),
            "--input", str(tmp_path / "missing.png"),
            "--out-dir", str(tmp_path),
        ])
        assert code == 2

    def test_default_size_404(self, model_file, sample_images, tmp_path):
        code = main([
            "infer", "--model", str(model_file),
            "--input", str(sample_images[-1]),
            "--out-dir", str(tmp_path),
        ])
        assert code == 0
        out = roomlayout_coarse.load_probability_png(tmp_path / "flat_coarse.png")
        assert (out.width, out.height) == (404, 404)


class TestSizes:
    def test_custom_input_size(self, model_file, sample_images, tmp_path):
        code = main([
            "infer", "--model", str(model_file),
            "--input", str(sample_images[-1]),
            "--out-dir", str(tmp_path), "--size", "256",
        ])
        assert code == 0
        pmap = roomlayout_coarse.load_probability_png(tmp_path / "flat_coarse.png")
        assert (pmap.width, pmap.height) == (256, 256)
        heatmap = roomlayout_coarse.load_heatmap(tmp_path / "flat_heatmap.cfh")
        assert (heatmap.width, heatmap.height) == (256, 256)

    def test_model_load_failure_exits_nonzero(self, sample_images, tmp_path):
        bad = tmp_path / "bad.pt"
        bad.write_bytes(b"not a torch file")
        code = main([
            "infer", "--model", str(bad),
            "--input", str(sample_images[-1]),
            "--out-dir", str(tmp_path),
        ])
        assert code != 0
