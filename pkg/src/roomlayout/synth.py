"""Seeded synthetic room scenes with exact ground truth.

Each scene samples a box layout (four boundary lines through far horizontal
and vertical vanishing points, plus an interior depth vanishing point),
renders an RGB image of the five surfaces with strong mutual contrast, and
derives the coarse probability map and semantic heatmap through the same
operations a trained network would approximate. Occlusion rectangles both
zero the probability map and draw a box into the image, emulating furniture
hiding the floor boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import coarse, geometry
from .coarse import ProbabilityMap, SemanticHeatmap, synthesize_coarse
from .geometry import Corner, LayoutModel, Line, Point2, line_through

# Per-surface base colors, luminance-separated so every adjacent pair
# produces a gradient well above the detector threshold.
SURFACE_COLORS = np.array(
    [
        [235, 232, 225],  # ceiling
        [60, 50, 45],     # floor
        [140, 132, 125],  # left wall
        [185, 178, 165],  # center wall
        [105, 100, 95],   # right wall
    ],
    dtype=np.float64,
)
OCCLUDER_COLOR = np.array([92, 86, 104], dtype=np.float64)
IMAGE_NOISE_SIGMA = 1.5


@dataclass(frozen=True)
class Scene:
    model: LayoutModel
    image: np.ndarray               # uint8 RGB
    pmap: ProbabilityMap
    heatmap: SemanticHeatmap
    labeling: geometry.SurfaceLabeling
    corners: list[Corner]
    occlusions: tuple[tuple[int, int, int, int], ...]
    floor_vp: Point2
    vertical_vp: Point2

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def height(self) -> int:
        return self.image.shape[0]


def sample_room(rng: np.random.Generator, width: int, height: int):
    """Random valid full-topology room; returns (model, floor_vp, vertical_vp)."""
    for _ in range(64):
        vx = rng.uniform(0.38, 0.62) * (width - 1)
        vy = rng.uniform(0.38, 0.62) * (height - 1)
        y_top = rng.uniform(0.10 * height, vy - 0.12 * height)
        y_bot = rng.uniform(vy + 0.12 * height, 0.92 * height)
        x_left = rng.uniform(0.08 * width, vx - 0.12 * width)
        x_right = rng.uniform(vx + 0.12 * width, 0.94 * width)
        side = rng.choice((-1.0, 1.0))
        vph = Point2(
            (width - 1) / 2.0 + side * rng.uniform(4.0, 12.0) * width,
            vy + rng.uniform(-0.4, 0.4) * height,
        )
        vpv = Point2(
            vx + rng.uniform(-0.5, 0.5) * width,
            rng.choice((-1.0, 1.0)) * rng.uniform(8.0, 24.0) * height,
        )
        xc = (width - 1) / 2.0
        yc = (height - 1) / 2.0
        model = LayoutModel(
            v=Point2(vx, vy),
            l1=line_through(Point2(xc, y_top), vph),
            l2=line_through(Point2(xc, y_bot), vph),
            l3=line_through(Point2(x_left, yc), vpv),
            l4=line_through(Point2(x_right, yc), vpv),
        )
        if not geometry.structural_issues(model, width, height):
            return model, vph, vpv
    raise RuntimeError("failed to sample a valid room")


def floor_occlusion_rect(
    model: LayoutModel,
    width: int,
    height: int,
    fraction: float,
    rng: np.random.Generator,
    pad: int = 14,
) -> tuple[int, int, int, int]:
    """Rectangle covering the given fraction of the floor boundary segment.

    The segment is the part of l2 between the floor corners (clipped to the
    image); fraction 1.0 covers all of it plus the pad margin.
    """
    corners = {c.id: c for c in geometry.extract_corners(model, width, height)}
    p2, p3 = corners.get("p2"), corners.get("p3")
    if p2 is None or p3 is None:
        raise ValueError("model lacks floor corners")
    x2, y2 = p2.point.xy()
    x3, y3 = p3.point.xy()
    x2, x3 = sorted((x2, x3))
    x2 = max(x2, 0.0)
    x3 = min(x3, width - 1.0)
    span = x3 - x2
    cover = fraction * span
    if fraction >= 1.0:
        x0 = x2
    else:
        x0 = x2 + rng.uniform(0.0, span - cover)
    x1 = x0 + cover
    line = model.l2
    ys = [-(line.a * x + line.c) / line.b for x in (x0, x1)]
    y0 = min(ys) - pad
    y1 = max(ys) + pad
    return (
        int(max(np.floor(x0 - pad * 0.5), 0)),
        int(max(np.floor(y0), 0)),
        int(min(np.ceil(x1 + pad * 0.5), width - 1)),
        int(min(np.ceil(y1), height - 1)),
    )


def _supersampled_model(model: LayoutModel, factor: int) -> LayoutModel:
    """Map the model to a factor-x grid whose pixel blocks average back.

    Fine pixel centers x' relate to coarse coordinates by x = (x' - t) / s
    with t = (s - 1) / 2, so a box average of each s*s block lands on the
    coarse pixel center.
    """
    s = float(factor)
    t = (s - 1.0) / 2.0
    vx, vy = model.v.xy()

    def remap(line: Optional[Line]) -> Optional[Line]:
        if line is None:
            return None
        return Line(line.a, line.b, s * line.c - t * (line.a + line.b))

    return LayoutModel(
        v=Point2(s * vx + t, s * vy + t),
        l1=remap(model.l1), l2=remap(model.l2), l3=remap(model.l3), l4=remap(model.l4),
    )


def render_image(
    model: LayoutModel,
    width: int,
    height: int,
    rng: np.random.Generator,
    occlusions: tuple[tuple[int, int, int, int], ...] = (),
) -> tuple[np.ndarray, geometry.SurfaceLabeling]:
    """Flat-shaded surfaces with per-scene color jitter, noise and occluders.

    Rendered at 2x and box-averaged down: the soft edge ramps are what a
    camera produces, and what keeps gradient orientations coherent along
    boundaries for the segment detector.
    """
    ss = 2
    labeling = geometry.layout_to_labeling(model, width, height)
    fine = geometry.layout_to_labeling(_supersampled_model(model, ss), width * ss, height * ss)
    jitter = rng.uniform(-10.0, 10.0, size=(5, 3))
    palette = np.clip(SURFACE_COLORS + jitter, 0, 255)
    img = palette[fine.labels]
    box_jitter = rng.uniform(-8.0, 8.0, size=3)
    for x0, y0, x1, y1 in occlusions:
        img[y0 * ss:(y1 + 1) * ss, x0 * ss:(x1 + 1) * ss] = np.clip(
            OCCLUDER_COLOR + box_jitter, 0, 255
        )
    img = img.reshape(height, ss, width, ss, 3).mean(axis=(1, 3))
    img = img + rng.normal(0.0, IMAGE_NOISE_SIGMA, size=img.shape)
    return np.clip(np.round(img), 0, 255).astype(np.uint8), labeling


def make_scene(
    seed: int,
    width: int = 404,
    height: int = 404,
    blur_sigma: float = 2.0,
    noise_amp: float = 0.15,
    occlusion_fraction: float = 0.5,
    n_occlusions: int = 1,
) -> Scene:
    """Deterministic synthetic scene; occlusion_fraction <= 0 disables boxes."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    model, floor_vp, vertical_vp = sample_room(rng, width, height)
    occlusions: list[tuple[int, int, int, int]] = []
    if occlusion_fraction > 0.0 and n_occlusions > 0:
        occlusions.append(
            floor_occlusion_rect(model, width, height, occlusion_fraction, rng)
        )
        for _ in range(n_occlusions - 1):
            w = int(rng.uniform(0.08, 0.18) * width)
            h = int(rng.uniform(0.08, 0.18) * height)
            x0 = int(rng.uniform(0, width - w - 1))
            y0 = int(rng.uniform(0.55 * height, height - h - 1))
            occlusions.append((x0, y0, x0 + w, y0 + h))
    pmap, heatmap = synthesize_coarse(
        model, width, height,
        blur_sigma=blur_sigma, noise_amp=noise_amp,
        occlusions=tuple(occlusions), seed=seed,
    )
    image, labeling = render_image(model, width, height, rng, tuple(occlusions))
    corners = geometry.extract_corners(model, width, height)
    return Scene(
        model=model, image=image, pmap=pmap, heatmap=heatmap, labeling=labeling,
        corners=corners, occlusions=tuple(occlusions),
        floor_vp=floor_vp, vertical_vp=vertical_vp,
    )


def ground_truth_json(scene: Scene, surfaces_filename: str = "labels.png") -> dict:
    return {
        "layout": scene.model.to_json(),
        "corners": [
            {
                "id": c.id,
                "xy": [float(v) for v in c.point.xy()],
                "in_bounds": bool(c.in_bounds),
            }
            for c in scene.corners
            if not c.point.is_ideal
        ],
        "surfaces": surfaces_filename,
        "width": scene.width,
        "height": scene.height,
        "floor_vp": [float(scene.floor_vp.x), float(scene.floor_vp.y), float(scene.floor_vp.w)],
        "vertical_vp": [float(scene.vertical_vp.x), float(scene.vertical_vp.y), float(scene.vertical_vp.w)],
        "occlusions": [[int(v) for v in r] for r in scene.occlusions],
    }


def write_scene_bundle(scene: Scene, out_dir) -> Path:
    """image.png, coarse.png, heatmap.cfh, labels.png and gt.json."""
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    Image.fromarray(scene.image).save(out_dir / "image.png")
    coarse.save_probability_png(scene.pmap, out_dir / "coarse.png")
    coarse.save_heatmap_cfh(scene.heatmap, out_dir / "heatmap.cfh")
    geometry.labeling_to_png(scene.labeling, out_dir / "labels.png")
    gt = ground_truth_json(scene)
    (out_dir / "gt.json").write_text(json.dumps(gt, indent=2) + "\n")
    return out_dir


def load_ground_truth(path) -> dict:
    path = Path(path)
    gt = json.loads(path.read_text())
    gt["_dir"] = path.parent
    return gt


def corners_from_json(entries: list[dict]) -> list[Corner]:
    return [
        Corner(e["id"], Point2(e["xy"][0], e["xy"][1]), bool(e.get("in_bounds", True)))
        for e in entries
    ]
