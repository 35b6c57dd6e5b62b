"""Command-line entry point: refine, eval, synth, and render subcommands.

Exit codes: 0 ok, 2 unreadable/missing input, 3 prediction/ground-truth
pairing failure, 4 unwritable output, 5 no valid hypothesis. Errors print a
machine-readable JSON object on stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import coarse, geometry, metrics, synth
from .errors import LayoutError, NoValidHypothesis
from .geometry import LayoutModel
from .pipeline import WORKING_SIZE, PipelineConfig, refine

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PAIRING = 3
EXIT_OUTPUT = 4
EXIT_NO_HYPOTHESIS = 5


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _atomic_save_image(path: Path, image) -> None:
    tmp = path.with_name(path.name + ".tmp.png")
    image.save(tmp, format="PNG")
    tmp.replace(path)


class CliError(Exception):
    def __init__(self, code: int, kind: str, detail: str = ""):
        super().__init__(detail or kind)
        self.code = code
        self.kind = kind
        self.detail = detail

    def emit(self) -> int:
        print(json.dumps({"error": self.kind, "detail": self.detail}))
        return self.code


def _load_image(path: Path) -> np.ndarray:
    from PIL import Image

    if not path.exists():
        raise CliError(EXIT_INPUT, "input-not-found", str(path))
    try:
        return np.asarray(Image.open(path).convert("RGB"))
    except Exception as exc:
        raise CliError(EXIT_INPUT, "unreadable-image", f"{path}: {exc}")


def _resize_image(img: np.ndarray, size: int) -> np.ndarray:
    from PIL import Image

    if img.shape[0] == size and img.shape[1] == size:
        return img
    return np.asarray(Image.fromarray(img).resize((size, size), Image.BILINEAR))


def _resize_map(values: np.ndarray, size: int) -> np.ndarray:
    from PIL import Image

    if values.shape == (size, size):
        return values
    im = Image.fromarray(values.astype(np.float32), mode="F")
    out = np.asarray(im.resize((size, size), Image.BILINEAR), dtype=np.float64)
    return np.clip(out, 0.0, 1.0)


def _config_from_args(args) -> PipelineConfig:
    config = PipelineConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise CliError(EXIT_INPUT, "input-not-found", str(path))
        config = PipelineConfig.loads(path.read_text())
    for f in fields(PipelineConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(config, f.name, value)
    config.__post_init__()
    return config


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with pipeline parameters")
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--dilation-radius", dest="dilation_radius", type=int)
    parser.add_argument("--line-width-score", dest="line_width_score", type=int)
    parser.add_argument("--grid-extent", dest="grid_extent", type=float)
    parser.add_argument("--grid-step", dest="grid_step", type=float)
    parser.add_argument("--max-hypotheses", dest="max_hypotheses", type=int)
    parser.add_argument("--min-segment-length", dest="min_segment_length", type=float)
    parser.add_argument("--seed", type=int)


def _draw_layout(img: np.ndarray, model: LayoutModel, color, width: int = 3) -> np.ndarray:
    h, w = img.shape[:2]
    contour = geometry.layout_to_contour(model, w, h, line_width=width)
    out = img.copy()
    out[contour.mask] = color
    return out


def _write_overlay(path: Path, image: np.ndarray, pred: LayoutModel, gt: LayoutModel | None):
    from PIL import Image

    out = image
    if gt is not None:
        out = _draw_layout(out, gt, (0, 200, 0))
    out = _draw_layout(out, pred, (230, 30, 30))
    _atomic_save_image(path, Image.fromarray(out))


def cmd_refine(args) -> int:
    config = _config_from_args(args)
    image_path = Path(args.image)
    coarse_path = Path(args.coarse_map)
    out_dir = Path(args.out_dir)

    orig = _load_image(image_path)
    orig_h, orig_w = orig.shape[:2]
    if not coarse_path.exists():
        raise CliError(EXIT_INPUT, "input-not-found", str(coarse_path))
    try:
        pmap = coarse.load_probability_png(coarse_path)
    except Exception as exc:
        raise CliError(EXIT_INPUT, "unreadable-map", f"{coarse_path}: {exc}")

    heatmap = None
    if args.heatmap:
        try:
            heatmap = coarse.load_heatmap(args.heatmap)
        except FileNotFoundError as exc:
            raise CliError(EXIT_INPUT, "input-not-found", str(exc))
        except Exception as exc:
            raise CliError(EXIT_INPUT, "unreadable-map", f"{args.heatmap}: {exc}")

    size = WORKING_SIZE
    work_img = _resize_image(orig, size)
    work_p = coarse.ProbabilityMap(_resize_map(pmap.values, size))
    work_h = heatmap
    if heatmap is not None and (heatmap.height, heatmap.width) != (size, size):
        planes = np.stack([_resize_map(heatmap.channels[c], size) for c in range(5)])
        sums = planes.sum(axis=0)
        planes /= np.where(sums > 0, sums, 1.0)
        work_h = coarse.SemanticHeatmap(planes)

    segments = None
    if args.segments:
        seg_path = Path(args.segments)
        if not seg_path.exists():
            raise CliError(EXIT_INPUT, "input-not-found", str(seg_path))
        from . import vanishing

        try:
            segments = vanishing.segments_from_jsonl(seg_path)
        except LayoutError as exc:
            raise CliError(EXIT_INPUT, "unreadable-segments", str(exc))
        except ValueError as exc:
            raise CliError(EXIT_INPUT, "unreadable-segments", str(exc))

    try:
        result = refine(work_img, work_p, work_h, config, segments=segments)
    except NoValidHypothesis as exc:
        raise CliError(EXIT_NO_HYPOTHESIS, "no-valid-hypothesis", str(exc))
    except LayoutError as exc:
        raise CliError(EXIT_INPUT, type(exc).__name__, str(exc))

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        sx, sy = orig_w / size, orig_h / size
        best = result.best.layout.rescaled(sx, sy)
        corners = geometry.extract_corners(best, orig_w, orig_h)
        payload = {
            "layout": best.to_json(),
            "score": float(result.best.score),
            "layout_pixels": int(result.best.layout_pixels),
            "corners": [
                {
                    "id": c.id,
                    "xy": [float(v) for v in c.point.xy()],
                    "in_bounds": bool(c.in_bounds),
                }
                for c in corners
                if not c.point.is_ideal
            ],
            "width": orig_w,
            "height": orig_h,
            "config": config.to_json(),
        }
        _atomic_write_text(out_dir / "layout.json", json.dumps(payload, indent=2) + "\n")
        ranked = [
            {"layout": s.layout.rescaled(sx, sy).to_json(), "score": float(s.score)}
            for s in result.ranked
        ]
        _atomic_write_text(out_dir / "ranked.json", json.dumps(ranked, indent=2) + "\n")
        labeling = geometry.layout_to_labeling(best, orig_w, orig_h)
        tmp_labels = out_dir / "labels.png.tmp.png"
        geometry.labeling_to_png(labeling, tmp_labels)
        tmp_labels.replace(out_dir / "labels.png")

        gt_model = None
        if args.gt:
            gt = synth.load_ground_truth(Path(args.gt))
            gt_model = LayoutModel.from_json(gt["layout"])
        _write_overlay(out_dir / "overlay.png", orig, best, gt_model)

        if args.debug_dir:
            dbg = Path(args.debug_dir)
            dbg.mkdir(parents=True, exist_ok=True)
            np.save(dbg / "mask.npy", result.mask.mask)
            (dbg / "critical_lines.json").write_text(
                json.dumps(result.critical.to_json(), indent=2) + "\n"
            )
            (dbg / "hypotheses.json").write_text(
                json.dumps(result.hypotheses.to_json(), indent=2) + "\n"
            )
            (dbg / "scores.json").write_text(
                json.dumps(
                    [{"score": float(s.score), "layout": s.layout.to_json()} for s in result.ranked],
                    indent=2,
                ) + "\n"
            )
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, "unwritable-output", str(exc))
    return EXIT_OK


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, "unwritable-output", str(exc))
    if args.n_scenes < 1:
        raise CliError(EXIT_INPUT, "bad-argument", "n-scenes must be >= 1")

    seeds = np.random.SeedSequence(args.seed).generate_state(args.n_scenes)
    for i in range(args.n_scenes):
        scene = synth.make_scene(
            seed=int(seeds[i]),
            blur_sigma=args.blur,
            noise_amp=args.noise_amp,
            occlusion_fraction=args.occlusion_level,
        )
        synth.write_scene_bundle(scene, out_dir / f"scene_{i:04d}")
    manifest = {
        "n_scenes": args.n_scenes,
        "seed": args.seed,
        "noise_amp": args.noise_amp,
        "blur": args.blur,
        "occlusion_level": args.occlusion_level,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    pred_dir = Path(args.pred_dir)
    gt_dir = Path(args.gt_dir)
    if not pred_dir.is_dir() or not gt_dir.is_dir():
        raise CliError(EXIT_INPUT, "input-not-found", f"{pred_dir} or {gt_dir}")
    preds = {p.parent.name: p for p in sorted(pred_dir.glob("*/layout.json"))}
    gts = {p.parent.name: p for p in sorted(gt_dir.glob("*/gt.json"))}
    if set(preds) != set(gts) or not preds:
        missing = sorted(set(preds) ^ set(gts))
        raise CliError(EXIT_PAIRING, "unpaired-files", ", ".join(missing) or "empty")

    records = []
    for name in sorted(preds):
        pred = json.loads(preds[name].read_text())
        gt = synth.load_ground_truth(gts[name])
        width, height = gt["width"], gt["height"]
        pred_model = LayoutModel.from_json(pred["layout"])
        pred_lab = geometry.layout_to_labeling(pred_model, width, height)
        gt_lab = geometry.labeling_from_png(gt["_dir"] / gt["surfaces"])
        pe = metrics.pixel_error(pred_lab, gt_lab)
        pred_corners = geometry.extract_corners(pred_model, width, height)
        gt_corners = synth.corners_from_json(gt["corners"])
        ce = metrics.corner_error(pred_corners, gt_corners, (width, height))
        records.append(metrics.EvalRecord(name=name, pixel_error=pe, corner_error=ce))

    result = metrics.EvalResult(records=tuple(records))
    try:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        tmp_csv = out_path.with_name(out_path.name + ".tmp")
        with open(tmp_csv, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["image", "pixel_error", "corner_error"])
            for r in records:
                writer.writerow([r.name, f"{r.pixel_error:.6f}", f"{r.corner_error:.6f}"])
        tmp_csv.replace(out_path)
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, "unwritable-output", str(exc))
    print(
        json.dumps(
            {
                "n_images": len(records),
                "mean_pixel_error_pct": round(100 * result.mean_pixel_error, 2),
                "mean_corner_error_pct": round(100 * result.mean_corner_error, 2),
            }
        )
    )
    return EXIT_OK


def cmd_render(args) -> int:
    layout_path = Path(args.layout)
    if not layout_path.exists():
        raise CliError(EXIT_INPUT, "input-not-found", str(layout_path))
    payload = json.loads(layout_path.read_text())
    model = LayoutModel.from_json(payload.get("layout", payload))
    image = _load_image(Path(args.image))
    gt_model = None
    if args.gt:
        gt = synth.load_ground_truth(Path(args.gt))
        gt_model = LayoutModel.from_json(gt["layout"])
    try:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        _write_overlay(out, image, model, gt_model)
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, "unwritable-output", str(exc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roomlayout",
        description="Box-layout refinement from coarse contour probability maps",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", help="refine a coarse map into a box layout")
    p.add_argument("--image", required=True)
    p.add_argument("--coarse-map", dest="coarse_map", required=True)
    p.add_argument("--heatmap", help="CFH1 file or PNG-set stem of surface heatmaps")
    p.add_argument("--segments", help="JSON-lines file of precomputed segments, bypasses the detector")
    p.add_argument("--gt", help="ground-truth JSON, drawn green on the overlay")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--debug-dir", dest="debug_dir")
    _add_config_flags(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("synth", help="generate a synthetic scene corpus")
    p.add_argument("--n-scenes", dest="n_scenes", type=int, default=1)
    p.add_argument("--occlusion-level", dest="occlusion_level", type=float, default=0.5)
    p.add_argument("--noise-amp", dest="noise_amp", type=float, default=0.15)
    p.add_argument("--blur", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="evaluate predictions against ground truth")
    p.add_argument("--pred-dir", dest="pred_dir", required=True)
    p.add_argument("--gt-dir", dest="gt_dir", required=True)
    p.add_argument("--out", default="results.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="draw a layout JSON over an image")
    p.add_argument("--layout", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--gt")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        return exc.emit()


if __name__ == "__main__":
    sys.exit(main())
