"""Evaluation metrics: pixel error, corner error, and contour F-scores.

Pixel error uses fixed semantic correspondence (floor compares to floor and
so on), the stricter standard reading for layout benchmarks. Corner error is
normalized by the image diagonal and the number of scored corners so values
are comparable across image sizes; unmatched ground-truth corners cost a
full diagonal. The ODS/OIS contour scores are a desk-scale reimplementation:
greedy one-to-one pixel matching within a tolerance, per-image F-measures
aggregated by mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .coarse import ProbabilityMap
from .errors import DimensionMismatch, EmptyDataset
from .geometry import Corner, ContourRaster, SurfaceLabeling

DEFAULT_THRESHOLDS = tuple(np.round(np.arange(0.05, 1.0, 0.05), 2))
MATCH_TOLERANCE_FRAC = 0.0075  # of the image diagonal


def pixel_error(pred: SurfaceLabeling, gt: SurfaceLabeling) -> float:
    """Fraction of pixels whose semantic surface label disagrees."""
    if pred.labels.shape != gt.labels.shape:
        raise DimensionMismatch(
            f"prediction {pred.labels.shape} vs ground truth {gt.labels.shape}"
        )
    return float(np.mean(pred.labels != gt.labels))


def corner_error(
    pred_corners: list[Corner],
    gt_corners: list[Corner],
    dims: tuple[int, int],
) -> float:
    """Normalized sum of distances between role-matched corners.

    Corners pair by id. Each matched pair contributes its Euclidean distance;
    a ground-truth corner with no finite prediction contributes one image
    diagonal. The sum is divided by (number of scored corners x diagonal), so
    0 is exact and 1 is everything missing.
    """
    width, height = dims
    diagonal = math.hypot(width, height)
    pred_by_id = {c.id: c for c in pred_corners}
    total = 0.0
    scored = 0
    for gt in gt_corners:
        if gt.point.is_ideal:
            continue
        scored += 1
        pred = pred_by_id.get(gt.id)
        if pred is None or pred.point.is_ideal:
            total += diagonal
            continue
        gx, gy = gt.point.xy()
        px, py = pred.point.xy()
        total += min(math.hypot(px - gx, py - gy), diagonal)
    if scored == 0:
        return 0.0
    return total / (scored * diagonal)


@dataclass(frozen=True)
class EvalRecord:
    name: str
    pixel_error: float
    corner_error: float


@dataclass(frozen=True)
class EvalResult:
    records: tuple[EvalRecord, ...]

    @property
    def mean_pixel_error(self) -> float:
        return float(np.mean([r.pixel_error for r in self.records]))

    @property
    def mean_corner_error(self) -> float:
        return float(np.mean([r.corner_error for r in self.records]))


@dataclass(frozen=True)
class ContourScore:
    ods: float
    ois: float
    thresholds: tuple[float, ...]
    precision: tuple[float, ...] = field(default=())   # dataset means per threshold
    recall: tuple[float, ...] = field(default=())


def _match_counts(pred_pts: np.ndarray, gt_pts: np.ndarray, tol: float) -> int:
    """Greedy one-to-one matching of predicted to ground-truth pixels.

    Predicted pixels are visited in row-major order; each takes its nearest
    unmatched ground-truth pixel within tol. Deterministic and desk-scale.
    """
    if len(pred_pts) == 0 or len(gt_pts) == 0:
        return 0
    tree = cKDTree(gt_pts)
    taken = np.zeros(len(gt_pts), dtype=bool)
    matched = 0
    k = min(len(gt_pts), 9)
    dists, idxs = tree.query(pred_pts, k=k, distance_upper_bound=tol + 1e-9)
    if k == 1:
        dists = dists[:, None]
        idxs = idxs[:, None]
    for row in range(len(pred_pts)):
        for d, j in zip(dists[row], idxs[row]):
            if not np.isfinite(d) or j >= len(gt_pts):
                break
            if not taken[j]:
                taken[j] = True
                matched += 1
                break
    return matched


def _image_prf(pmap: ProbabilityMap, gt: ContourRaster, threshold: float, tol: float):
    pred = pmap.values >= threshold
    npred = int(pred.sum())
    ngt = gt.count()
    if npred == 0 or ngt == 0:
        return 0.0, 0.0, 0.0
    pred_pts = np.column_stack(np.nonzero(pred)).astype(np.float64)
    gt_pts = np.column_stack(np.nonzero(gt.mask)).astype(np.float64)
    matched = _match_counts(pred_pts, gt_pts, tol)
    precision = matched / npred
    recall = matched / ngt
    f = 2 * precision * recall / (precision + recall) if matched else 0.0
    return precision, recall, f


def contour_fscore(
    pred_maps: list[ProbabilityMap],
    gt_contours: list[ContourRaster],
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS,
    match_tolerance: float | None = None,
) -> ContourScore:
    """ODS / OIS F-measures over a dataset of probability maps.

    ODS is the best dataset-mean F over a shared threshold; OIS is the mean
    of each image's best F, which is never below ODS. match_tolerance
    defaults to MATCH_TOLERANCE_FRAC of the image diagonal.
    """
    if not pred_maps or len(pred_maps) != len(gt_contours):
        raise EmptyDataset("need equally many predictions and ground truths")
    fs = np.zeros((len(pred_maps), len(thresholds)))
    ps = np.zeros_like(fs)
    rs = np.zeros_like(fs)
    for i, (pmap, gt) in enumerate(zip(pred_maps, gt_contours)):
        if (pmap.height, pmap.width) != (gt.height, gt.width):
            raise DimensionMismatch(f"image {i}: map and contour sizes differ")
        tol = match_tolerance
        if tol is None:
            tol = MATCH_TOLERANCE_FRAC * math.hypot(pmap.width, pmap.height)
        for t, threshold in enumerate(thresholds):
            ps[i, t], rs[i, t], fs[i, t] = _image_prf(pmap, gt, threshold, tol)
    mean_f = fs.mean(axis=0)
    ods = float(mean_f.max())
    ois = float(fs.max(axis=1).mean())
    return ContourScore(
        ods=ods,
        ois=ois,
        thresholds=tuple(float(t) for t in thresholds),
        precision=tuple(ps.mean(axis=0)),
        recall=tuple(rs.mean(axis=0)),
    )
