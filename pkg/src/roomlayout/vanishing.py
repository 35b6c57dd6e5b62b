"""Line segment detection, vanishing point estimation, and critical lines.

The detector grows regions of gradient-aligned pixels (angle tolerance
22.5 degrees) and fits a segment per region, so it is deterministic and has
no external dependencies. Vanishing points come from exhaustive pairing of
segment carrier lines scored by strength-weighted angular consensus, then
weighted least-squares refinement; everything is done in the image plane
with homogeneous coordinates, so points at infinity need no special cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coarse import ContourMask
from .errors import DegenerateConfiguration, NoSegments
from .geometry import (
    COEF_TOL, Line, LineSegment, Point2, intersect_lines, line_angle_between,
)

GRAD_THRESHOLD = 6.0          # gradient magnitude floor on 0..255 luminance
ANGLE_TOLERANCE = math.radians(22.5)
CONSENSUS_DEG = 2.0           # angular consistency threshold for VP inliers
MAX_PAIR_SEGMENTS = 60        # strongest segments used to seed VP candidates
MERGE_ANGLE_DEG = 2.0         # near-duplicate carrier line thresholds
MERGE_OFFSET_PX = 5.0


def _luminance(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    return 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]


def segments_from_jsonl(path) -> list[LineSegment]:
    """Load precomputed segments, one JSON object per line.

    Format: {"p0": [x, y], "p1": [x, y], "strength": s}; bypasses the
    detector when an external one already ran.
    """
    import json

    segments = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            raw = raw.strip()
            if not raw:
                continue
            obj = json.loads(raw)
            try:
                segments.append(
                    LineSegment(
                        Point2(float(obj["p0"][0]), float(obj["p0"][1])),
                        Point2(float(obj["p1"][0]), float(obj["p1"][1])),
                        float(obj.get("strength", 1.0)),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad segment record: {exc}")
    if not segments:
        raise NoSegments(f"{path}: no segments")
    return segments


def segments_to_jsonl(segments: list[LineSegment], path) -> None:
    import json

    with open(path, "w") as f:
        for seg in segments:
            f.write(json.dumps({
                "p0": list(seg.p0.xy()), "p1": list(seg.p1.xy()),
                "strength": float(seg.strength),
            }) + "\n")


def detect_line_segments(image: np.ndarray, min_length: float = 15.0) -> list[LineSegment]:
    """Detect straight segments by gradient-orientation region growing.

    Pixels above GRAD_THRESHOLD are visited in descending magnitude order;
    each unvisited seed grows an 8-connected region of pixels whose level-line
    direction stays within ANGLE_TOLERANCE of the region's running mean
    (axial statistics). Regions are fitted by magnitude-weighted PCA and kept
    when long and thin enough. strength is the accumulated gradient
    magnitude. Raises NoSegments when nothing survives.
    """
    gray = _luminance(image)
    h, w = gray.shape
    gx = np.zeros_like(gray)
    gy = np.zeros_like(gray)
    gx[:, 1:-1] = 0.5 * (gray[:, 2:] - gray[:, :-2])
    gy[1:-1, :] = 0.5 * (gray[2:, :] - gray[:-2, :])
    mag = np.hypot(gx, gy)
    # level-line direction is perpendicular to the gradient; axial quantity
    ang2 = np.arctan2(gy, gx) * 2.0  # doubled angle folds the pi ambiguity

    strong = mag >= GRAD_THRESHOLD
    if not strong.any():
        raise NoSegments("no gradient above threshold")
    order = np.argsort(-mag, axis=None, kind="stable")
    order = order[strong.ravel()[order]]

    cos2 = np.cos(ang2)
    sin2 = np.sin(ang2)
    visited = ~strong
    segments: list[LineSegment] = []
    neighbors = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
    min_region = max(int(min_length), 8)
    cos_tol = math.cos(2.0 * ANGLE_TOLERANCE)

    for flat in order:
        sy, sx = divmod(int(flat), w)
        if visited[sy, sx]:
            continue
        stack = [(sy, sx)]
        visited[sy, sx] = True
        region: list[tuple[int, int]] = []
        vsum_c = 0.0
        vsum_s = 0.0
        while stack:
            y, x = stack.pop()
            region.append((y, x))
            vsum_c += cos2[y, x]
            vsum_s += sin2[y, x]
            norm = math.hypot(vsum_c, vsum_s)
            if norm <= 1e-12:
                mc, ms = cos2[y, x], sin2[y, x]
            else:
                mc, ms = vsum_c / norm, vsum_s / norm
            for dy, dx in neighbors:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and not visited[ny, nx]:
                    # alignment of doubled angles against the region mean
                    if cos2[ny, nx] * mc + sin2[ny, nx] * ms >= cos_tol:
                        visited[ny, nx] = True
                        stack.append((ny, nx))
        if len(region) < min_region:
            continue
        seg = _fit_segment(region, mag, min_length)
        if seg is not None:
            segments.append(seg)

    if not segments:
        raise NoSegments("no segment at least %g px long" % min_length)
    segments.sort(key=lambda s: (-s.strength, s.p0.x, s.p0.y, s.p1.x, s.p1.y))
    return segments


def _fit_segment(region, mag, min_length) -> Optional[LineSegment]:
    pts = np.array(region, dtype=np.float64)  # rows (y, x)
    wgt = mag[pts[:, 0].astype(int), pts[:, 1].astype(int)]
    total = wgt.sum()
    cy, cx = (pts * wgt[:, None]).sum(axis=0) / total
    dy = pts[:, 0] - cy
    dx = pts[:, 1] - cx
    sxx = (wgt * dx * dx).sum() / total
    syy = (wgt * dy * dy).sum() / total
    sxy = (wgt * dx * dy).sum() / total
    # principal axis of the 2x2 weighted covariance
    tr = sxx + syy
    det = sxx * syy - sxy * sxy
    disc = max(tr * tr / 4.0 - det, 0.0)
    lam1 = tr / 2.0 + math.sqrt(disc)
    lam2 = tr / 2.0 - math.sqrt(disc)
    if abs(sxy) > 1e-12:
        ax, ay = lam1 - syy, sxy
    elif sxx >= syy:
        ax, ay = 1.0, 0.0
    else:
        ax, ay = 0.0, 1.0
    an = math.hypot(ax, ay)
    ax, ay = ax / an, ay / an
    proj = dx * ax + dy * ay
    lo, hi = proj.min(), proj.max()
    length = hi - lo
    if length < min_length:
        return None
    width_rms = math.sqrt(max(lam2, 0.0))
    if width_rms > 2.0:
        return None
    p0 = Point2(cx + lo * ax, cy + lo * ay)
    p1 = Point2(cx + hi * ax, cy + hi * ay)
    if (p1.x, p1.y) < (p0.x, p0.y):
        p0, p1 = p1, p0
    return LineSegment(p0, p1, strength=float(total))


@dataclass(frozen=True)
class VanishingTriple:
    """Manhattan vanishing points with per-VP inlier support.

    v_horiz1 is the near/central horizontal VP (the depth direction the
    layout's corner rays converge to); v_horiz2 the far horizontal VP that
    ceiling and floor boundaries pass through; either horizontal VP may be
    missing on degenerate scenes.
    """

    v_vertical: Point2
    v_horiz1: Point2
    v_horiz2: Optional[Point2] = None
    support: tuple[int, ...] = (0, 0, 0)
    assignments: tuple[int, ...] = field(default=(), repr=False)


def _direction_to(point: Point2, mx: float, my: float) -> tuple[float, float]:
    # For an ideal point this degenerates to the direction itself.
    dx = point.x - mx * point.w
    dy = point.y - my * point.w
    n = math.hypot(dx, dy)
    return (dx / n, dy / n) if n > 0 else (1.0, 0.0)


def _consistency(point: Point2, segments: list[LineSegment]) -> np.ndarray:
    """|cos of angular deviation| between each segment and the VP direction."""
    out = np.empty(len(segments))
    for i, seg in enumerate(segments):
        mx, my = seg.midpoint()
        ux, uy = _direction_to(point, mx, my)
        dx, dy = seg.direction()
        out[i] = abs(ux * dx + uy * dy)
    return out


def _refine_vp(lines: list[Line], weights: list[float]) -> Point2:
    """Weighted least squares VP: smallest eigenvector of sum(w l l^T)."""
    m = np.zeros((3, 3))
    for line, wgt in zip(lines, weights):
        l = np.array(line.coeffs())
        m += wgt * np.outer(l, l)
    _, vecs = np.linalg.eigh(m)
    p = vecs[:, 0]
    for comp in p:
        if abs(comp) > 1e-12:
            if comp < 0:
                p = -p
            break
    return Point2(float(p[0]), float(p[1]), float(p[2])).normalized()


VERTICAL_GATE_DEG = 15.0   # within this of the image vertical axis
HORIZONTAL_GATE_DEG = 15.0


def _consensus_round(
    members: list[int], segments: list[LineSegment], assignment, cos_thresh: float,
    candidate_gate=None,
):
    """Best candidate over pairwise intersections of the member carriers.

    Returns (refined VP, inlier indices) or None; inliers are drawn from the
    member pool only, weighted by strength. candidate_gate, when given,
    rejects candidate points before scoring.
    """
    pool = [i for i in members if assignment[i] < 0]
    if len(pool) < 2:
        return None
    carriers = {i: segments[i].carrier() for i in pool}
    seeds = pool[:MAX_PAIR_SEGMENTS]
    candidates = []
    for ai in range(len(seeds)):
        for bi in range(ai + 1, len(seeds)):
            try:
                cand = intersect_lines(carriers[seeds[ai]], carriers[seeds[bi]])
            except Exception:
                continue
            if candidate_gate is None or candidate_gate(cand.normalized()):
                candidates.append(cand)
    if not candidates:
        return None
    pool_segs = [segments[i] for i in pool]
    strengths = np.array([s.strength for s in pool_segs])
    best_score, best_point = 0.0, None
    for cand in candidates:
        cons = _consistency(cand, pool_segs)
        score = float((strengths * (cons >= cos_thresh)).sum())
        if score > best_score + 1e-12:
            best_score, best_point = score, cand
    if best_point is None:
        return None
    cons = _consistency(best_point, pool_segs)
    inliers = [pool[k] for k in np.where(cons >= cos_thresh)[0]]
    if len(inliers) < 2:
        return None
    refined = _refine_vp(
        [carriers[i] for i in inliers], [segments[i].strength for i in inliers]
    )
    cons2 = _consistency(refined, pool_segs)
    inliers2 = [pool[k] for k in np.where(cons2 >= cos_thresh)[0]]
    if len(inliers2) >= 2:
        return refined, inliers2
    return best_point, inliers


def _ideal_of(segment: LineSegment) -> Point2:
    dx, dy = segment.direction()
    return Point2(dx, dy, 0.0)


def estimate_vanishing_points(
    segments: list[LineSegment], dims: Optional[tuple[int, int]] = None
) -> VanishingTriple:
    """Estimate the Manhattan vanishing points by gated angular consensus.

    Three rounds of candidate search over pairwise carrier intersections,
    each keeping the strength-weighted inlier maximum under a CONSENSUS_DEG
    deviation threshold: first among near-vertical segments (the wall
    boundary family), then among near-horizontal ones (ceiling/floor
    boundaries), then among everything left (the corner rays through the
    central vanishing point). Central-round candidates must lie between the
    wall lines and near the image, which keeps box corners from posing as
    the central point. Unassigned near-axis segments join their orientation
    bucket afterwards. Of the non-vertical groups, v_horiz1 is the one
    nearest the image center; groups landing on the same point merge.
    Raises DegenerateConfiguration with fewer than two distinct directions.
    """
    if len(segments) < 3:
        raise DegenerateConfiguration("need at least 3 segments")
    segments = sorted(segments, key=lambda s: (-s.strength, s.p0.x, s.p0.y, s.p1.x, s.p1.y))
    dirs = np.array([s.direction() for s in segments])
    spread = np.abs(dirs @ dirs[0])
    if spread.min() > math.cos(math.radians(5.0)):
        raise DegenerateConfiguration("all segments share one direction")

    n = len(segments)
    assignment = np.full(n, -1, dtype=int)
    vert_gate = math.cos(math.radians(VERTICAL_GATE_DEG))
    horiz_gate = math.sin(math.radians(HORIZONTAL_GATE_DEG))
    cos_thresh = math.cos(math.radians(CONSENSUS_DEG))
    is_vertical = np.abs(dirs[:, 1]) >= vert_gate
    is_horizontal = np.abs(dirs[:, 1]) <= horiz_gate

    if dims is not None:
        width, height = dims
    else:
        mids = np.array([s.midpoint() for s in segments])
        width = float(mids[:, 0].max() + 1)
        height = float(mids[:, 1].max() + 1)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0

    buckets: dict[str, list[int]] = {"V": [], "F": [], "C": []}
    points: dict[str, Optional[Point2]] = {"V": None, "F": None, "C": None}

    res = _consensus_round(
        [i for i in range(n) if is_vertical[i]], segments, assignment, cos_thresh
    )
    if res is not None:
        points["V"], buckets["V"] = res
        for i in buckets["V"]:
            assignment[i] = 0

    res = _consensus_round(
        [i for i in range(n) if is_horizontal[i]], segments, assignment, cos_thresh
    )
    if res is not None:
        points["F"], buckets["F"] = res
        for i in buckets["F"]:
            assignment[i] = 1

    def central_gate(point: Point2) -> bool:
        if point.is_ideal:
            return False
        x, y = point.xy()
        if not (-0.5 * width <= x <= 1.5 * width and -0.5 * height <= y <= 1.5 * height):
            return False
        walls = [segments[i].carrier() for i in buckets["V"]]
        if len(walls) >= 2:
            xs = []
            for line in walls:
                if abs(line.a) > COEF_TOL:
                    xs.append(-(line.b * cy + line.c) / line.a)
            if len(xs) >= 2 and not (min(xs) + 5.0 < x < max(xs) - 5.0):
                return False
        return True

    res = _consensus_round(
        [i for i in range(n)], segments, assignment, cos_thresh,
        candidate_gate=central_gate,
    )
    if res is not None:
        points["C"], buckets["C"] = res
        for i in buckets["C"]:
            assignment[i] = 2

    # leftovers join their orientation bucket; isolated evidence still names
    # a line's role even when no intersection pinned its vanishing point
    for i in range(n):
        if assignment[i] >= 0:
            continue
        if is_vertical[i]:
            buckets["V"].append(i)
            assignment[i] = 0
        elif is_horizontal[i]:
            buckets["F"].append(i)
            assignment[i] = 1

    for key in ("V", "F"):
        if points[key] is None and buckets[key]:
            if len(buckets[key]) >= 2:
                points[key] = _refine_vp(
                    [segments[i].carrier() for i in buckets[key]],
                    [segments[i].strength for i in buckets[key]],
                )
            else:
                points[key] = _ideal_of(segments[buckets[key][0]])

    nonempty = [k for k in ("V", "F", "C") if buckets[k]]
    if len(nonempty) < 2:
        raise DegenerateConfiguration("fewer than two vanishing directions found")

    # a pencil split by the orientation gates lands F and C on the same point
    pf, pc = points["F"], points["C"]
    if buckets["F"] and buckets["C"] and pf is not None and pc is not None:
        close = (
            (pf.is_ideal and pc.is_ideal and abs(pf.x * pc.y - pf.y * pc.x) < 1e-3)
            or (not pf.is_ideal and not pc.is_ideal and pf.distance_to(pc) < 5.0)
        )
        if close:
            members = buckets["F"] + buckets["C"]
            points["C"] = _refine_vp(
                [segments[i].carrier() for i in members],
                [segments[i].strength for i in members],
            )
            buckets["C"] = members
            buckets["F"] = []
            points["F"] = None

    def centrality(point: Optional[Point2]) -> float:
        if point is None or point.is_ideal:
            return float("inf")
        x, y = point.xy()
        return math.hypot(x - cx, y - cy)

    rest = [k for k in ("F", "C") if buckets[k]]
    rest.sort(key=lambda k: (centrality(points[k]), k))
    slot_of = {"V": 0}
    for slot, key in enumerate(rest, start=1):
        slot_of[key] = slot

    v_vertical = points["V"] if buckets["V"] else Point2(0.0, 1.0, 0.0)
    v_horiz1 = points[rest[0]] if rest else None
    if v_horiz1 is None:
        v_horiz1 = Point2(1.0, 0.0, 0.0)
    v_horiz2 = points[rest[1]] if len(rest) > 1 else None

    final_assignment = []
    for i in range(n):
        gid = -1
        for key, members in buckets.items():
            if i in members:
                gid = slot_of.get(key, -1)
                break
        final_assignment.append(gid)
    support = [0, 0, 0]
    for a in final_assignment:
        if 0 <= a < 3:
            support[a] += 1
    return VanishingTriple(
        v_vertical=v_vertical,
        v_horiz1=v_horiz1,
        v_horiz2=v_horiz2,
        support=tuple(support),
        assignments=tuple(final_assignment),
    )


def grid_search_candidates(v0: Point2, extent: float = 20.0, step: float = 5.0) -> list[Point2]:
    """Grid of candidate vanishing points around v0, row-major, v0 included."""
    if step <= 0:
        raise ValueError("step must be positive")
    if extent < 0:
        raise ValueError("extent must be nonnegative")
    x0, y0 = v0.xy()
    n = int(math.floor(extent / step + 1e-9))
    out = []
    for j in range(-n, n + 1):
        for i in range(-n, n + 1):
            out.append(Point2(x0 + i * step, y0 + j * step))
    return out


@dataclass(frozen=True)
class ClassifiedLine:
    """Candidate boundary line with its supporting evidence."""

    line: Line
    strength: float
    segments: tuple[LineSegment, ...]
    vp_group: int  # 0 vertical, 1 central horizontal, 2 far horizontal


@dataclass(frozen=True)
class ClassifiedLines:
    ceiling: tuple[ClassifiedLine, ...]
    wall: tuple[ClassifiedLine, ...]
    floor: tuple[ClassifiedLine, ...]

    def all_lines(self) -> list[ClassifiedLine]:
        return list(self.ceiling) + list(self.wall) + list(self.floor)

    def is_empty(self) -> bool:
        return not (self.ceiling or self.wall or self.floor)


def _line_offset(line: Line, other: ClassifiedLine) -> float:
    mx, my = other.segments[0].midpoint()
    return abs(line.eval(mx, my))


def refit_carrier(segments: tuple[LineSegment, ...]) -> Line:
    """Strength-weighted total-least-squares line through segment endpoints.

    Pooling fragments of one physical edge gives a far longer baseline than
    any fragment alone, which is what makes the extended carrier accurate.
    """
    pts = []
    wts = []
    for seg in segments:
        pts.append(seg.p0.xy())
        pts.append(seg.p1.xy())
        wts.extend([seg.strength, seg.strength])
    p = np.asarray(pts)
    w = np.asarray(wts)
    w = w / w.sum()
    cx, cy = (p * w[:, None]).sum(axis=0)
    dx = p[:, 0] - cx
    dy = p[:, 1] - cy
    sxx = float((w * dx * dx).sum())
    syy = float((w * dy * dy).sum())
    sxy = float((w * dx * dy).sum())
    # normal = eigenvector of the smaller eigenvalue of the scatter matrix
    tr = sxx + syy
    disc = math.sqrt(max(tr * tr / 4.0 - (sxx * syy - sxy * sxy), 0.0))
    lam_min = tr / 2.0 - disc
    if abs(sxy) > 1e-12:
        nx, ny = lam_min - syy, sxy
    elif sxx <= syy:
        nx, ny = 1.0, 0.0
    else:
        nx, ny = 0.0, 1.0
    return Line(nx, ny, -(nx * cx + ny * cy))


def merge_duplicate_lines(entries: list[ClassifiedLine]) -> list[ClassifiedLine]:
    """Merge near-duplicate carriers (< MERGE_ANGLE_DEG, < MERGE_OFFSET_PX).

    Strengths accumulate, supporting segments pool, and the carrier is refit
    through all pooled endpoints, so collinear fragments of one edge come out
    as a single accurate line.
    """
    entries = sorted(entries, key=lambda e: (-e.strength, e.line.coeffs()))
    kept: list[ClassifiedLine] = []
    for entry in entries:
        merged = False
        for k, ref in enumerate(kept):
            if (
                math.degrees(line_angle_between(entry.line, ref.line)) < MERGE_ANGLE_DEG
                and _line_offset(ref.line, entry) < MERGE_OFFSET_PX
            ):
                segments = ref.segments + entry.segments
                kept[k] = ClassifiedLine(
                    line=refit_carrier(segments),
                    strength=ref.strength + entry.strength,
                    segments=segments,
                    vp_group=ref.vp_group,
                )
                merged = True
                break
        if not merged:
            kept.append(entry)
    return kept


def select_critical_lines(
    segments: list[LineSegment],
    triple: VanishingTriple,
    mask: ContourMask,
    dims: tuple[int, int],
) -> ClassifiedLines:
    """Keep mask-supported segments and classify them into boundary roles.

    A segment survives when its midpoint and both endpoints lie inside the
    mask. Vertical-VP segments become wall candidates; the others split into
    ceiling/floor by whether their midpoint is above or below the central
    vanishing point. Near-duplicate carriers merge per bucket.
    """
    width, height = dims
    v0 = triple.v_horiz1
    if v0.is_ideal:
        v0y = (height - 1) / 2.0
    else:
        v0y = v0.xy()[1]

    assignments = triple.assignments
    ceiling: list[ClassifiedLine] = []
    wall: list[ClassifiedLine] = []
    floor: list[ClassifiedLine] = []
    for idx, seg in enumerate(segments):
        group = assignments[idx] if idx < len(assignments) else -1
        if group < 0:
            continue
        x0, y0 = seg.p0.xy()
        x1, y1 = seg.p1.xy()
        mx, my = seg.midpoint()
        if not (mask.contains(mx, my) and mask.contains(x0, y0) and mask.contains(x1, y1)):
            continue
        entry = ClassifiedLine(
            line=seg.carrier(), strength=seg.strength, segments=(seg,), vp_group=group
        )
        if group == 0:
            wall.append(entry)
        elif my < v0y:
            ceiling.append(entry)
        else:
            floor.append(entry)
    return ClassifiedLines(
        ceiling=tuple(merge_duplicate_lines(ceiling)),
        wall=tuple(merge_duplicate_lines(wall)),
        floor=tuple(merge_duplicate_lines(floor)),
    )
