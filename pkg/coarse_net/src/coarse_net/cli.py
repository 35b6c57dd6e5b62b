"""coarse-net command line: init-model and infer."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .infer import AdapterConfig, infer_coarse
from .model import init_model, save_model


def cmd_init_model(args) -> int:
    model = init_model(seed=args.seed, base=args.base)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, path)
    print(f"wrote {path}")
    return 0


def cmd_infer(args) -> int:
    config = AdapterConfig(
        model_path=args.model,
        input_size=args.size,
        output_dir=args.out_dir,
        device=args.device,
    )
    inputs = [Path(p) for p in args.input]
    for path in inputs:
        if not path.exists():
            print(f"error: input not found: {path}", file=sys.stderr)
            return 2
    try:
        for path in inputs:
            written = infer_coarse(path, config, heatmap_pngs=args.heatmap_pngs)
            names = ", ".join(str(p) for ps in written.values() for p in ps)
            print(f"{path.name}: {names}")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="coarse-net",
        description="Two-branch contour/surface inference emitting roomlayout map files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-model", help="write a seeded weight file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--base", type=int, default=16, help="encoder channel width")
    p.set_defaults(func=cmd_init_model)

    p = sub.add_parser("infer", help="run a model over images")
    p.add_argument("--model", required=True)
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--size", type=int, default=404)
    p.add_argument("--device", default="cpu")
    p.add_argument(
        "--heatmap-pngs", dest="heatmap_pngs", action="store_true",
        help="also write the five-PNG heatmap set",
    )
    p.set_defaults(func=cmd_infer)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
