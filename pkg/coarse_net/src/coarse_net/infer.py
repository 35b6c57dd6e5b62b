"""Run a weight file over images and write roomlayout-format map files.

Outputs per input image <stem>: <stem>_coarse.png (16-bit grayscale contour
probability, scaled by 65535), <stem>_heatmap.cfh ('CFH1', little-endian u32
width and height, five float32 planes ceiling/floor/left/center/right), and
optionally the five-PNG heatmap set <stem>_ceil.png ... <stem>_right.png.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .model import SURFACE_CHANNELS, TwoBranchNet, load_model

CFH1_MAGIC = b"CFH1"
HEATMAP_SUFFIXES = ("_ceil", "_floor", "_left", "_center", "_right")


@dataclass
class AdapterConfig:
    model_path: str
    input_size: int = 404
    output_dir: str = "."
    device: str = "cpu"

    def __post_init__(self):
        if self.input_size <= 0:
            raise ValueError("input_size must be positive")


def load_image(path, size: int) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        rgb = im.convert("RGB").resize((size, size), Image.BILINEAR)
    return np.asarray(rgb, dtype=np.float32) / 255.0


def write_probability_png(values: np.ndarray, path) -> None:
    from PIL import Image

    arr = np.round(np.clip(values, 0.0, 1.0) * 65535.0).astype(np.uint16)
    Image.fromarray(arr).save(path)


def write_heatmap_cfh(channels: np.ndarray, path) -> None:
    h, w = channels.shape[1:]
    with open(path, "wb") as f:
        f.write(CFH1_MAGIC)
        f.write(struct.pack("<II", w, h))
        f.write(channels.astype("<f4").tobytes(order="C"))


def write_heatmap_pngs(channels: np.ndarray, stem: Path) -> list[Path]:
    from PIL import Image

    paths = []
    for c, suffix in enumerate(HEATMAP_SUFFIXES):
        path = stem.with_name(stem.name + suffix + ".png")
        arr = np.round(np.clip(channels[c], 0.0, 1.0) * 65535.0).astype(np.uint16)
        Image.fromarray(arr).save(path)
        paths.append(path)
    return paths


@torch.no_grad()
def run_model(model: TwoBranchNet, image: np.ndarray, device: str = "cpu"):
    """(contour [H, W], surfaces [5, H, W]) as float32 in [0, 1], sum-1."""
    x = torch.from_numpy(image.transpose(2, 0, 1))[None].to(device)
    contour, surfaces = model(x)
    return (
        contour[0, 0].cpu().numpy().astype(np.float32),
        surfaces[0].cpu().numpy().astype(np.float32),
    )


def infer_coarse(
    image_path, config: AdapterConfig, heatmap_pngs: bool = False
) -> dict[str, list[Path]]:
    """Infer one image; returns the written paths keyed by kind."""
    model = load_model(config.model_path, device=config.device)
    image = load_image(image_path, config.input_size)
    contour, surfaces = run_model(model, image, device=config.device)
    assert surfaces.shape[0] == SURFACE_CHANNELS

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / Path(image_path).stem
    written: dict[str, list[Path]] = {}

    coarse_path = stem.with_name(stem.name + "_coarse.png")
    write_probability_png(contour, coarse_path)
    written["coarse"] = [coarse_path]

    cfh_path = stem.with_name(stem.name + "_heatmap.cfh")
    write_heatmap_cfh(surfaces, cfh_path)
    written["heatmap_cfh"] = [cfh_path]

    if heatmap_pngs:
        written["heatmap_pngs"] = write_heatmap_pngs(surfaces, stem)
    return written
