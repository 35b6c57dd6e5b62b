"""Coarse layout probability maps and semantic heatmaps.

Ingests, binarizes and synthesizes the per-pixel contour confidence map and
the five-channel surface heatmap that drive the refinement stage, without
depending on any neural runtime. File formats: probability maps are 16-bit
grayscale PNGs scaled by 65535; heatmaps are either five 16-bit PNGs with
suffixes _ceil/_floor/_left/_center/_right or a single 'CFH1' binary of
little-endian float32 planes.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import geometry
from .errors import EmptyMaskWarning
from .geometry import LayoutModel, SurfaceLabeling

HEATMAP_SUFFIXES = ("_ceil", "_floor", "_left", "_center", "_right")
CFH1_MAGIC = b"CFH1"

# Stroke width of the synthetic ground-truth contour, matching the width the
# upstream network is trained against.
SYNTH_STROKE_WIDTH = 7


@dataclass(frozen=True)
class ProbabilityMap:
    """Per-pixel layout-contour confidence in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("probability map must be 2-D")
        if not np.isfinite(values).all() or values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("probability values must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SemanticHeatmap:
    """Five per-pixel surface confidences (ceiling, floor, left, center, right)."""

    channels: np.ndarray

    def __post_init__(self):
        ch = np.ascontiguousarray(self.channels, dtype=np.float64)
        if ch.ndim != 3 or ch.shape[0] != 5:
            raise ValueError("heatmap must have shape (5, H, W)")
        if not np.isfinite(ch).all() or ch.min() < 0.0 or ch.max() > 1.0 + 1e-9:
            raise ValueError("heatmap values must lie in [0, 1]")
        sums = ch.sum(axis=0)
        if abs(float(sums.max()) - 1.0) > 1e-3 or abs(float(sums.min()) - 1.0) > 1e-3:
            raise ValueError("per-pixel channel sums must be within 1e-3 of 1")
        ch.setflags(write=False)
        object.__setattr__(self, "channels", ch)

    @property
    def height(self) -> int:
        return self.channels.shape[1]

    @property
    def width(self) -> int:
        return self.channels.shape[2]


@dataclass(frozen=True)
class ContourMask:
    """Thresholded and dilated contour mask guiding line selection."""

    mask: np.ndarray
    dilation_radius: int

    def __post_init__(self):
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def is_empty(self) -> bool:
        return not bool(self.mask.any())

    def contains(self, x: float, y: float) -> bool:
        xi, yi = int(round(x)), int(round(y))
        if not (0 <= xi < self.width and 0 <= yi < self.height):
            return False
        return bool(self.mask[yi, xi])


def binarize_and_dilate(pmap: ProbabilityMap, threshold: float = 0.5, radius: int = 4) -> ContourMask:
    """Threshold the probability map and dilate with a Chebyshev square.

    mask(i, j) is true iff some pixel within Chebyshev distance <= radius has
    P >= threshold. Emits EmptyMaskWarning when nothing exceeds the threshold
    so callers can fall back to regression-only inference.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    base = pmap.values >= threshold
    if not base.any():
        warnings.warn("no pixel exceeds the contour threshold", EmptyMaskWarning, stacklevel=2)
        return ContourMask(base, dilation_radius=radius)
    return ContourMask(geometry.dilate_mask(base, radius), dilation_radius=radius)


def argmax_labeling(pmap: ProbabilityMap) -> np.ndarray:
    """Two-class argmax of (background, contour); ties go to background."""
    return pmap.values > 0.5


def argmax_surfaces(heatmap: SemanticHeatmap) -> SurfaceLabeling:
    """Per-pixel argmax over the five surface channels; ties go to label 0."""
    return SurfaceLabeling(np.argmax(heatmap.channels, axis=0).astype(np.uint8))


def _blur(values: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0.0:
        return values
    return ndimage.gaussian_filter(values, sigma=sigma, mode="constant")


def synthesize_coarse(
    model: LayoutModel,
    width: int,
    height: int,
    blur_sigma: float = 0.0,
    noise_amp: float = 0.0,
    occlusions: tuple[tuple[int, int, int, int], ...] = (),
    seed: int = 0,
) -> tuple[ProbabilityMap, SemanticHeatmap]:
    """Emulate a coarse network output for a known layout (test oracle).

    The contour is stroked at SYNTH_STROKE_WIDTH pixels, Gaussian-blurred,
    perturbed with seeded uniform noise on its support, and zeroed inside the
    occlusion rectangles (x0, y0, x1, y1), inclusive pixel bounds. The heatmap
    is the per-channel blur of the one-hot surface labeling. Deterministic for
    a fixed seed.
    """
    if blur_sigma < 0.0:
        raise ValueError("blur_sigma must be >= 0")
    if not 0.0 <= noise_amp < 0.5:
        raise ValueError("noise_amp must be in [0, 0.5)")

    contour = geometry.layout_to_contour(model, width, height, line_width=SYNTH_STROKE_WIDTH)
    p = contour.mask.astype(np.float64)
    p = _blur(p, blur_sigma)
    if noise_amp > 0.0:
        rng = np.random.default_rng(seed)
        # Noise only where the blurred contour has support keeps the
        # background exactly zero, mimicking a confident network.
        noise = rng.uniform(-noise_amp, noise_amp, size=p.shape)
        p = np.where(p > 0.0, p + noise, p)
    p = np.clip(p, 0.0, 1.0)
    for x0, y0, x1, y1 in occlusions:
        xa, xb = sorted((int(x0), int(x1)))
        ya, yb = sorted((int(y0), int(y1)))
        p[max(ya, 0):yb + 1, max(xa, 0):xb + 1] = 0.0

    labeling = geometry.layout_to_labeling(model, width, height)
    onehot = np.zeros((5, height, width), dtype=np.float64)
    for c in range(5):
        onehot[c] = labeling.labels == c
    blurred = np.stack([_blur(onehot[c], blur_sigma) for c in range(5)])
    sums = blurred.sum(axis=0)
    blurred /= np.where(sums > 0.0, sums, 1.0)
    return ProbabilityMap(p), SemanticHeatmap(blurred)


# ---------------------------------------------------------------------------
# File formats


def save_probability_png(pmap: ProbabilityMap, path) -> None:
    from PIL import Image

    arr = np.round(pmap.values * 65535.0).astype(np.uint16)
    Image.fromarray(arr).save(path)


def load_probability_png(path) -> ProbabilityMap:
    from PIL import Image

    arr = np.asarray(Image.open(path))
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected single-channel grayscale")
    if arr.dtype == np.uint8:
        return ProbabilityMap(arr.astype(np.float64) / 255.0)
    return ProbabilityMap(arr.astype(np.float64) / 65535.0)


def save_heatmap_pngs(heatmap: SemanticHeatmap, stem) -> list[Path]:
    """Write five 16-bit PNGs <stem>_ceil.png .. <stem>_right.png."""
    from PIL import Image

    stem = Path(stem)
    paths = []
    for c, suffix in enumerate(HEATMAP_SUFFIXES):
        path = stem.with_name(stem.name + suffix + ".png")
        arr = np.round(heatmap.channels[c] * 65535.0).astype(np.uint16)
        Image.fromarray(arr).save(path)
        paths.append(path)
    return paths


def load_heatmap_pngs(stem) -> SemanticHeatmap:
    from PIL import Image

    stem = Path(stem)
    planes = []
    for suffix in HEATMAP_SUFFIXES:
        path = stem.with_name(stem.name + suffix + ".png")
        if not path.exists():
            raise FileNotFoundError(path)
        planes.append(np.asarray(Image.open(path)).astype(np.float64) / 65535.0)
    ch = np.stack(planes)
    sums = ch.sum(axis=0)
    ch /= np.where(sums > 0.0, sums, 1.0)
    return SemanticHeatmap(ch)


def save_heatmap_cfh(heatmap: SemanticHeatmap, path) -> None:
    """Single-file format: 'CFH1', u32 width, u32 height, 5 float32 planes."""
    with open(path, "wb") as f:
        f.write(CFH1_MAGIC)
        f.write(struct.pack("<II", heatmap.width, heatmap.height))
        f.write(heatmap.channels.astype("<f4").tobytes(order="C"))


def load_heatmap_cfh(path) -> SemanticHeatmap:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CFH1_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        width, height = struct.unpack("<II", f.read(8))
        data = np.frombuffer(f.read(), dtype="<f4")
    expected = 5 * width * height
    if data.size != expected:
        raise ValueError(f"{path}: expected {expected} floats, found {data.size}")
    ch = data.reshape(5, height, width).astype(np.float64)
    ch = np.clip(ch, 0.0, 1.0)
    sums = ch.sum(axis=0)
    ch /= np.where(sums > 0.0, sums, 1.0)
    return SemanticHeatmap(ch)


def load_heatmap(path) -> SemanticHeatmap:
    """Load either format: a CFH1 file, or the stem of a _ceil.png PNG set."""
    path = Path(path)
    if path.exists() and path.is_file():
        return load_heatmap_cfh(path)
    return load_heatmap_pngs(path)
