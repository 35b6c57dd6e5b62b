"""Recovery of occluded floor lines and undetected wall lines.

Detected lines inside the contour mask rarely cover all four boundaries:
the wall-floor boundary is routinely hidden behind furniture, and
low-contrast wall boundaries go undetected. This module rebuilds them, in
order of preference: geometric construction from corners that are still
observable, then a logistic-regression fit between semantic surface regions.
The final critical-line set is the provenance-tagged union of detected,
occlusion-recovered, and inferred lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .coarse import ContourMask
from .errors import InsufficientSupport
from .geometry import (
    CEILING, CENTER, FLOOR, LEFT, RIGHT,
    Line, Point2, SurfaceLabeling, intersect_lines, line_angle_between, line_through,
)
from .vanishing import ClassifiedLine, ClassifiedLines, MERGE_ANGLE_DEG, MERGE_OFFSET_PX

EXTENSION_COVERAGE = 0.60     # in-mask fraction below which extension is suspect
REGRESSION_MIN_PIXELS = 30
REGRESSION_BAND_PX = 8        # pixels this close to the other class join the fit
REGRESSION_ITERS = 200
REGRESSION_RIDGE = 1e-6
REGRESSION_MAX_SAMPLES = 20000

ROLE_PAIRS = {
    "l1": (CEILING, CENTER),
    "l2": (FLOOR, CENTER),
    "l3": (LEFT, CENTER),
    "l4": (CENTER, RIGHT),
}


@dataclass(frozen=True)
class CriticalLine:
    """Boundary candidate tagged with its target role and provenance."""

    role: str  # l1..l4
    line: Line
    strength: float
    provenance: str  # detected | occluded | undetected
    confident: bool = True


@dataclass(frozen=True)
class CriticalLineSet:
    """Disjoint union of detected, occlusion-recovered and inferred lines."""

    entries: tuple[CriticalLine, ...]

    def for_role(self, role: str) -> list[CriticalLine]:
        return [e for e in self.entries if e.role == role]

    def by_provenance(self, provenance: str) -> list[CriticalLine]:
        return [e for e in self.entries if e.provenance == provenance]

    def is_empty(self) -> bool:
        return not self.entries

    def to_json(self) -> list[dict]:
        return [
            {
                "role": e.role,
                "provenance": e.provenance,
                "line": list(e.line.coeffs()),
                "strength": e.strength,
                "confident": e.confident,
            }
            for e in self.entries
        ]


def line_mask_coverage(line: Line, mask: ContourMask) -> float:
    """Fraction of the line's in-image pixels that fall inside the mask."""
    w, h = mask.width, mask.height
    if abs(line.b) >= abs(line.a):
        xs = np.arange(w)
        ys = np.round(-(line.a * xs + line.c) / line.b).astype(int)
        keep = (ys >= 0) & (ys < h)
        xs, ys = xs[keep], ys[keep]
    else:
        ys = np.arange(h)
        xs = np.round(-(line.b * ys + line.c) / line.a).astype(int)
        keep = (xs >= 0) & (xs < w)
        xs, ys = xs[keep], ys[keep]
    if len(xs) == 0:
        return 0.0
    return float(mask.mask[ys, xs].mean())


def extend_partial_floor_line(partial: Line, mask: ContourMask) -> tuple[Line, bool]:
    """Extend a partially visible floor boundary across the image.

    The carrier line is already infinite; this validates the extension by
    requiring at least EXTENSION_COVERAGE of its in-image pixels to lie in
    the mask, returning (line, confident).
    """
    coverage = line_mask_coverage(partial, mask)
    return partial, coverage >= EXTENSION_COVERAGE


def infer_wall_line_from_ceiling(ceiling_corner: Point2, v_vertical: Point2) -> Line:
    """Wall boundary through a ceiling corner and the vertical vanishing point."""
    if ceiling_corner.is_ideal:
        raise ValueError("ceiling corner must be finite")
    return line_through(ceiling_corner, v_vertical)


def _boundary_band(labels: np.ndarray, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    mask_a = labels == a
    mask_b = labels == b
    size = 2 * REGRESSION_BAND_PX + 1
    near_b = ndimage.maximum_filter(mask_b.astype(np.uint8), size=size, mode="constant") > 0
    near_a = ndimage.maximum_filter(mask_a.astype(np.uint8), size=size, mode="constant") > 0
    return mask_a & near_b, mask_b & near_a


def regression_line_from_labeling(
    labeling: SurfaceLabeling, pair: tuple[int, int]
) -> Line:
    """Separating line between two labels via two-class logistic regression.

    Fits on boundary-adjacent pixels (within REGRESSION_BAND_PX of the other
    class) with normalized (x, y) features plus bias, a fixed iteration
    budget and centroid-based initialization, so the result is deterministic.
    Swapping the pair yields the same canonical line. Raises
    InsufficientSupport below REGRESSION_MIN_PIXELS per class.
    """
    a, b = pair
    labels = labeling.labels
    band_a, band_b = _boundary_band(labels, a, b)
    na, nb = int(band_a.sum()), int(band_b.sum())
    if na < REGRESSION_MIN_PIXELS or nb < REGRESSION_MIN_PIXELS:
        raise InsufficientSupport(
            f"boundary band has {na}/{nb} pixels for labels {a}/{b}"
        )
    h, w = labels.shape
    ya, xa = np.nonzero(band_a)
    yb, xb = np.nonzero(band_b)

    def subsample(xs, ys):
        n = len(xs)
        if n <= REGRESSION_MAX_SAMPLES:
            return xs, ys
        stride = int(math.ceil(n / REGRESSION_MAX_SAMPLES))
        return xs[::stride], ys[::stride]

    xa, ya = subsample(xa, ya)
    xb, yb = subsample(xb, yb)
    scale = float(max(w, h))
    feats = np.concatenate(
        [
            np.column_stack([xa / scale, ya / scale]),
            np.column_stack([xb / scale, yb / scale]),
        ]
    )
    target = np.concatenate([np.full(len(xa), -1.0), np.full(len(xb), 1.0)])

    mu_a = feats[: len(xa)].mean(axis=0)
    mu_b = feats[len(xa):].mean(axis=0)
    wvec = mu_b - mu_a
    norm = np.linalg.norm(wvec)
    if norm < 1e-12:
        wvec = np.array([1.0, 0.0])
    else:
        wvec = wvec / norm
    bias = -float(wvec @ ((mu_a + mu_b) / 2.0))

    # Newton (IRLS) steps with a small ridge term: on separable bands the
    # boundary settles at the max-margin line well inside the budget.
    n = len(feats)
    x1 = np.column_stack([feats, np.ones(n)])
    theta = np.array([wvec[0], wvec[1], bias])
    for _ in range(REGRESSION_ITERS):
        z = x1 @ theta
        p = 1.0 / (1.0 + np.exp(-z))
        y01 = (target + 1.0) / 2.0
        grad = x1.T @ (p - y01) / n + REGRESSION_RIDGE * theta
        s = np.maximum(p * (1.0 - p), 1e-12)
        hess = (x1 * s[:, None]).T @ x1 / n + REGRESSION_RIDGE * np.eye(3)
        step = np.linalg.solve(hess, grad)
        theta = theta - step
        if float(np.abs(step).max()) < 1e-12:
            break

    # back to pixel coordinates: w . (x/s, y/s) + b = 0
    return Line(theta[0] / scale, theta[1] / scale, theta[2])


def regression_line_for_role(labeling: SurfaceLabeling, role: str) -> Line:
    return regression_line_from_labeling(labeling, ROLE_PAIRS[role])


def recover_occluded_floor(
    l3: Optional[Line],
    l4: Optional[Line],
    left_corner_ray: Optional[Line],
    right_corner_ray: Optional[Line],
    floor_vp: Optional[Point2],
    surfaces: Optional[SurfaceLabeling],
) -> tuple[Line, str]:
    """Recover an occluded floor boundary, corner construction first.

    The floor corners are intersections of a wall boundary with the
    corner ray that runs from the image border toward the central vanishing
    point; each available corner plus the floor-direction vanishing point
    determines the floor line. With both corners the line through them is
    used directly. When no corner is observable, falls back to the logistic
    regression fit between floor and center-wall surfaces. Returns the line
    tagged 'occluded'. Raises InsufficientSupport when every branch fails.
    """
    p2 = p3 = None
    if l3 is not None and left_corner_ray is not None:
        try:
            pt = intersect_lines(l3, left_corner_ray)
            if not pt.is_ideal:
                p2 = pt
        except Exception:
            pass
    if l4 is not None and right_corner_ray is not None:
        try:
            pt = intersect_lines(l4, right_corner_ray)
            if not pt.is_ideal:
                p3 = pt
        except Exception:
            pass

    if p2 is not None and p3 is not None:
        try:
            return line_through(p2, p3), "occluded"
        except Exception:
            pass
    corner = p2 if p2 is not None else p3
    if corner is not None and floor_vp is not None:
        try:
            return line_through(corner, floor_vp), "occluded"
        except Exception:
            pass
    if surfaces is not None:
        return regression_line_for_role(surfaces, "l2"), "occluded"
    raise InsufficientSupport("no corner construction and no surface labeling")


def _central_pencil(v0: Optional[Point2], dims: tuple[int, int]) -> bool:
    """True when v0 is a genuine central vanishing point (finite, near image).

    Then the central-VP group holds corner rays rather than ceiling/floor
    boundary lines.
    """
    if v0 is None or v0.is_ideal:
        return False
    width, height = dims
    x, y = v0.xy()
    return -0.5 * width <= x <= 1.5 * width and -0.5 * height <= y <= 1.5 * height


def classify_roles(
    classified: ClassifiedLines, v0: Optional[Point2], dims: tuple[int, int]
) -> list[CriticalLine]:
    """Tag detected lines with their target boundary role.

    Ceiling lines become l1 candidates and floor lines l2 candidates, except
    members of the central-VP group when that group is a genuine in-image
    pencil: those are the layout's corner rays, kept out of the boundary
    pools (they feed the corner construction instead, see corner_rays_all).
    Wall lines split into l3/l4 by which side of v0 their support lies on.
    """
    width, height = dims
    vx = v0.xy()[0] if v0 is not None and not v0.is_ideal else (width - 1) / 2.0
    rays_are_central = _central_pencil(v0, dims)

    out: list[CriticalLine] = []
    for bucket, role in ((classified.ceiling, "l1"), (classified.floor, "l2")):
        for cl in bucket:
            if rays_are_central and cl.vp_group == 1:
                continue
            out.append(
                CriticalLine(role=role, line=cl.line, strength=cl.strength,
                             provenance="detected")
            )
    for cl in classified.wall:
        mx = cl.segments[0].midpoint()[0]
        role = "l3" if mx < vx else "l4"
        out.append(
            CriticalLine(role=role, line=cl.line, strength=cl.strength,
                         provenance="detected")
        )
    return out


def corner_rays_all(
    classified: ClassifiedLines, v0: Optional[Point2], dims: tuple[int, int]
) -> dict[str, Line]:
    """Strongest corner rays per quadrant: keys (floor|ceil)_(left|right).

    Corner rays belong to the central-VP group and run from the image border
    toward v0; they carry the box corners even when the boundary line they
    end on is hidden.
    """
    width, height = dims
    vx = v0.xy()[0] if v0 is not None and not v0.is_ideal else (width - 1) / 2.0
    best: dict[str, tuple[float, Line]] = {}
    for bucket, prefix in ((classified.floor, "floor"), (classified.ceiling, "ceil")):
        for cl in bucket:
            if cl.vp_group != 1:
                continue
            mx = cl.segments[0].midpoint()[0]
            key = f"{prefix}_left" if mx < vx else f"{prefix}_right"
            if key not in best or cl.strength > best[key][0]:
                best[key] = (cl.strength, cl.line)
    return {key: line for key, (_, line) in best.items()}


def assemble_critical_lines(
    original: ClassifiedLines | list[CriticalLine],
    recovered: list[CriticalLine] = (),
    v0: Optional[Point2] = None,
    dims: tuple[int, int] = (404, 404),
) -> CriticalLineSet:
    """Union of detected and recovered lines with provenance-priority dedup.

    Duplicates within a role (angular distance < 2 degrees, offset < 5 px)
    resolve as detected > occluded > undetected, strongest first within a
    provenance; survivors keep their own tags.
    """
    if isinstance(original, ClassifiedLines):
        entries = classify_roles(original, v0, dims)
    else:
        entries = list(original)
    entries = entries + list(recovered)

    priority = {"detected": 0, "occluded": 1, "undetected": 2}
    entries.sort(key=lambda e: (priority[e.provenance], -e.strength, e.line.coeffs()))
    kept: list[CriticalLine] = []
    for entry in entries:
        dup = False
        for ref in kept:
            if ref.role != entry.role:
                continue
            if (
                math.degrees(line_angle_between(ref.line, entry.line)) < MERGE_ANGLE_DEG
                and _offset_between(ref.line, entry.line) < MERGE_OFFSET_PX
            ):
                dup = True
                break
        if not dup:
            kept.append(entry)
    return CriticalLineSet(entries=tuple(kept))


def _offset_between(a: Line, b: Line) -> float:
    # distance between nearly parallel lines, measured where they matter:
    # sample b at a few points of a's in-image neighborhood is overkill here;
    # for near-parallel unit-normalized lines |c| difference is the offset.
    if a.a * b.a + a.b * b.b >= 0:
        return abs(a.c - b.c)
    return abs(a.c + b.c)
