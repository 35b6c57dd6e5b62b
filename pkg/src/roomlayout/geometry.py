"""2D projective primitives and rasterization of box layouts.

Conventions: pixel (x, y) is the center of column x, row y; x grows right,
y grows down. A Line stores unit-normalized homogeneous coefficients
(a, b, c) of a*x + b*y + c = 0. Ideal points (w == 0) are legal everywhere,
which is what lets off-image corners and vanishing points at infinity flow
through without special cases.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import CoincidentPoints, IdenticalLines, InvalidTopology

# Tolerance on unit-normalized coefficients for line identity / parallelism.
# Pixel-scale geometry never approaches this legitimately.
COEF_TOL = 1e-9

CEILING, FLOOR, LEFT, CENTER, RIGHT = 0, 1, 2, 3, 4
LABEL_NAMES = ("ceiling", "floor", "left", "center", "right")
UNLABELED = 255

ROLES = ("l1", "l2", "l3", "l4")
# Label claimed by each boundary role when it is a pixel's first crossing.
ROLE_LABELS = {"l1": CEILING, "l2": FLOOR, "l3": LEFT, "l4": RIGHT}


@dataclass(frozen=True)
class Point2:
    """Homogeneous 2D point. w == 0 encodes a direction (ideal point)."""

    x: float
    y: float
    w: float = 1.0

    def __post_init__(self):
        if self.x == 0.0 and self.y == 0.0 and self.w == 0.0:
            raise ValueError("homogeneous point (0,0,0) is undefined")

    @property
    def is_ideal(self) -> bool:
        return abs(self.w) <= COEF_TOL * max(abs(self.x), abs(self.y), 1.0)

    def xy(self) -> tuple[float, float]:
        if self.is_ideal:
            raise ValueError("ideal point has no finite coordinates")
        return self.x / self.w, self.y / self.w

    def normalized(self) -> "Point2":
        if self.is_ideal:
            n = math.hypot(self.x, self.y)
            return Point2(self.x / n, self.y / n, 0.0)
        return Point2(self.x / self.w, self.y / self.w, 1.0)

    def distance_to(self, other: "Point2") -> float:
        ax, ay = self.xy()
        bx, by = other.xy()
        return math.hypot(ax - bx, ay - by)


@dataclass(frozen=True)
class Line:
    """Unit-normalized line a*x + b*y + c = 0 with canonical sign.

    Canonical sign: first coefficient of (a, b) that is nonzero (beyond
    COEF_TOL) is positive, so negating all coefficients maps to the same
    object.
    """

    a: float
    b: float
    c: float

    def __post_init__(self):
        n = math.hypot(self.a, self.b)
        if n == 0.0:
            raise ValueError("line with a = b = 0 is not a line")
        a, b, c = self.a / n, self.b / n, self.c / n
        if a < -COEF_TOL or (abs(a) <= COEF_TOL and b < 0.0):
            a, b, c = -a, -b, -c
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    def eval(self, x: float, y: float) -> float:
        """Signed distance of pixel (x, y) from the line."""
        return (self.a * x + self.b * y) + self.c

    @property
    def angle(self) -> float:
        """Axial direction of the line in radians, folded to [0, pi)."""
        ang = math.atan2(-self.a, self.b)
        return ang % math.pi

    def coeffs(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)


def line_through(p: Point2, q: Point2) -> Line:
    """Join of two homogeneous points. Raises CoincidentPoints when degenerate."""
    a = p.y * q.w - p.w * q.y
    b = p.w * q.x - p.x * q.w
    c = p.x * q.y - p.y * q.x
    scale = max(abs(p.x), abs(p.y), abs(p.w), 1.0) * max(abs(q.x), abs(q.y), abs(q.w), 1.0)
    if math.hypot(a, b) <= COEF_TOL * scale:
        raise CoincidentPoints(f"points {p} and {q} do not span a line")
    return Line(a, b, c)


def intersect_lines(m: Line, n: Line) -> Point2:
    """Meet of two lines as a homogeneous point.

    Parallel distinct lines yield an ideal point (w == 0); identical lines
    (proportional coefficient triples within COEF_TOL) raise IdenticalLines.
    """
    x = m.b * n.c - m.c * n.b
    y = m.c * n.a - m.a * n.c
    w = m.a * n.b - m.b * n.a
    if max(abs(x), abs(y)) <= COEF_TOL * max(abs(m.c), abs(n.c), 1.0) and abs(w) <= COEF_TOL:
        raise IdenticalLines(f"lines {m} and {n} coincide")
    return Point2(x, y, w)


def line_angle_between(m: Line, n: Line) -> float:
    """Axial angle between two lines in radians, folded to [0, pi/2]."""
    d = abs(m.angle - n.angle) % math.pi
    return min(d, math.pi - d)


@dataclass(frozen=True)
class LineSegment:
    """Detected segment with its accumulated gradient strength."""

    p0: Point2
    p1: Point2
    strength: float = 1.0

    def __post_init__(self):
        if self.p0.xy() == self.p1.xy():
            raise ValueError("segment endpoints coincide")
        if self.strength < 0.0:
            raise ValueError("segment strength must be nonnegative")

    def carrier(self) -> Line:
        return line_through(self.p0, self.p1)

    def midpoint(self) -> tuple[float, float]:
        x0, y0 = self.p0.xy()
        x1, y1 = self.p1.xy()
        return (0.5 * (x0 + x1), 0.5 * (y0 + y1))

    def length(self) -> float:
        return self.p0.distance_to(self.p1)

    def direction(self) -> tuple[float, float]:
        x0, y0 = self.p0.xy()
        x1, y1 = self.p1.xy()
        n = math.hypot(x1 - x0, y1 - y0)
        return ((x1 - x0) / n, (y1 - y0) / n)


@dataclass(frozen=True)
class LayoutModel:
    """Box layout: up to four boundary lines and a vanishing point.

    l1 ceiling boundary, l2 floor boundary, l3 left wall boundary, l4 right
    wall boundary; any line may be absent when that boundary falls outside
    the image. v is the vanishing point of the depth direction; the four
    corner rays of the box emanate from the corners away from v.
    """

    v: Point2
    l1: Optional[Line] = None
    l2: Optional[Line] = None
    l3: Optional[Line] = None
    l4: Optional[Line] = None

    @property
    def topology(self) -> str:
        """Presence pattern of (l1, l2, l3, l4), e.g. '1011'."""
        return "".join("1" if line is not None else "0" for line in self.line_tuple())

    def line_tuple(self) -> tuple[Optional[Line], ...]:
        return (self.l1, self.l2, self.l3, self.l4)

    def lines(self) -> dict[str, Optional[Line]]:
        return dict(zip(ROLES, self.line_tuple()))

    def present(self) -> list[tuple[str, Line]]:
        return [(role, line) for role, line in zip(ROLES, self.line_tuple()) if line is not None]

    def to_json(self) -> dict:
        vx, vy = self.v.xy()
        return {
            "v": [float(vx), float(vy)],
            "lines": {
                role: ([float(c) for c in line.coeffs()] if line is not None else None)
                for role, line in zip(ROLES, self.line_tuple())
            },
            "topology": self.topology,
        }

    @staticmethod
    def from_json(obj: dict) -> "LayoutModel":
        lines = {}
        for role in ROLES:
            coeffs = obj["lines"].get(role)
            lines[role] = Line(*coeffs) if coeffs is not None else None
        model = LayoutModel(v=Point2(obj["v"][0], obj["v"][1]), **lines)
        if "topology" in obj and obj["topology"] != model.topology:
            raise ValueError(
                f"topology field {obj['topology']!r} disagrees with lines {model.topology!r}"
            )
        return model

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False)

    @staticmethod
    def loads(text: str) -> "LayoutModel":
        return LayoutModel.from_json(json.loads(text))

    def rescaled(self, sx: float, sy: float) -> "LayoutModel":
        """Map the model to an image scaled by (sx, sy)."""
        vx, vy = self.v.xy()
        lines = {}
        for role, line in zip(ROLES, self.line_tuple()):
            if line is None:
                lines[role] = None
            else:
                # x = x'/sx, y = y'/sy turns ax+by+c into (a/sx)x' + (b/sy)y' + c.
                lines[role] = Line(line.a / sx, line.b / sy, line.c)
        return LayoutModel(v=Point2(vx * sx, vy * sy), **lines)

    def mirrored(self, width: int) -> "LayoutModel":
        """Horizontal mirror about the pixel-center span [0, width-1]."""
        vx, vy = self.v.xy()
        w1 = float(width - 1)

        def flip(line: Optional[Line]) -> Optional[Line]:
            if line is None:
                return None
            return Line(-line.a, line.b, line.c + line.a * w1)

        # Mirroring swaps the left and right wall boundaries.
        return LayoutModel(
            v=Point2(w1 - vx, vy),
            l1=flip(self.l1), l2=flip(self.l2), l3=flip(self.l4), l4=flip(self.l3),
        )


@dataclass(frozen=True)
class SurfaceLabeling:
    """Per-pixel surface label raster; values are the label constants 0..4."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def classes(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.labels))


@dataclass(frozen=True)
class ContourRaster:
    """Boolean layout-contour raster at a given stroke width."""

    mask: np.ndarray
    line_width: int = 1

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

    def count(self) -> int:
        return int(self.mask.sum())


def structural_issues(model: LayoutModel, width: int, height: int) -> list[str]:
    """Cheap realizability checks of a layout model, without rasterizing.

    Checked: v finite and off every present line; ceiling above floor at the
    image center column; l3 left of l4 at the image center row; v inside the
    region bounded by the present lines (between l1/l2 vertically and l3/l4
    horizontally, and on the inner side of a single present line).
    Returns a list of human-readable violations (empty when none).
    """
    issues = []
    if model.v.is_ideal:
        return ["vanishing point is ideal"]
    vx, vy = model.v.xy()

    for role, line in model.present():
        if abs(line.eval(vx, vy)) <= COEF_TOL:
            issues.append(f"v lies on {role}")
    if issues:
        return issues

    xc = 0.5 * (width - 1)
    yc = 0.5 * (height - 1)

    def y_at(line: Line, x: float) -> Optional[float]:
        if abs(line.b) <= COEF_TOL:
            return None
        return -(line.a * x + line.c) / line.b

    def x_at(line: Line, y: float) -> Optional[float]:
        if abs(line.a) <= COEF_TOL:
            return None
        return -(line.b * y + line.c) / line.a

    y1c = y_at(model.l1, xc) if model.l1 is not None else None
    y2c = y_at(model.l2, xc) if model.l2 is not None else None
    if model.l1 is not None and y1c is None:
        issues.append("l1 is vertical")
    if model.l2 is not None and y2c is None:
        issues.append("l2 is vertical")
    if y1c is not None and y2c is not None and not y1c < y2c:
        issues.append("ceiling boundary is not above floor boundary at the center column")

    x3c = x_at(model.l3, yc) if model.l3 is not None else None
    x4c = x_at(model.l4, yc) if model.l4 is not None else None
    if model.l3 is not None and x3c is None:
        issues.append("l3 is horizontal")
    if model.l4 is not None and x4c is None:
        issues.append("l4 is horizontal")
    if x3c is not None and x4c is not None and not x3c < x4c:
        issues.append("left wall boundary is not left of right wall boundary")

    # v must sit on the inner side of each boundary at its own row/column.
    y1v = y_at(model.l1, vx) if model.l1 is not None else None
    y2v = y_at(model.l2, vx) if model.l2 is not None else None
    x3v = x_at(model.l3, vy) if model.l3 is not None else None
    x4v = x_at(model.l4, vy) if model.l4 is not None else None
    if y1v is not None and not y1v < vy:
        issues.append("v is not below the ceiling boundary")
    if y2v is not None and not vy < y2v:
        issues.append("v is not above the floor boundary")
    if x3v is not None and not x3v < vx:
        issues.append("v is not right of the left wall boundary")
    if x4v is not None and not vx < x4v:
        issues.append("v is not left of the right wall boundary")
    return issues


def _first_crossing_planes(model: LayoutModel, width: int, height: int):
    """Per present line: u = s(pixel)/s(v), plus its strictness and label.

    A pixel belongs to the surface of the first line crossed by the segment
    from v to the pixel; u orders those crossings. Boundary pixels (u == 0)
    go to the lower-id label, hence <= for l1..l3 and < for l4.
    """
    vx, vy = model.v.xy()
    X = np.arange(width, dtype=np.float64)[None, :]
    Y = np.arange(height, dtype=np.float64)[:, None]
    planes, labels, strict = [], [], []
    for role, line in model.present():
        sv = line.eval(vx, vy)
        if abs(sv) <= COEF_TOL:
            raise InvalidTopology(f"v lies on {role}")
        s = (line.a * X + line.b * Y) + line.c
        planes.append(s / sv)
        labels.append(ROLE_LABELS[role])
        strict.append(role == "l4")
    return planes, labels, strict


def layout_to_labeling(model: LayoutModel, width: int, height: int) -> SurfaceLabeling:
    """Rasterize a layout into per-pixel surface labels.

    Raises InvalidTopology when the model fails the structural checks.
    """
    if width < 2 or height < 2:
        raise ValueError("image must be at least 2x2")
    issues = structural_issues(model, width, height)
    if issues:
        raise InvalidTopology("; ".join(issues))

    planes, labels, strict = _first_crossing_planes(model, width, height)
    if not planes:
        return SurfaceLabeling(np.full((height, width), CENTER, dtype=np.uint8))

    stack = np.empty((len(planes), height, width), dtype=np.float64)
    for i, (u, is_strict) in enumerate(zip(planes, strict)):
        violated = (u < 0.0) if is_strict else (u <= 0.0)
        stack[i] = np.where(violated, u, np.inf)
    idx = np.argmin(stack, axis=0)  # first minimum wins, matching label priority
    any_violated = np.isfinite(stack.min(axis=0))
    out = np.where(any_violated, np.asarray(labels, dtype=np.uint8)[idx], np.uint8(CENTER))
    return SurfaceLabeling(out.astype(np.uint8))


def labeling_boundary(labeling: SurfaceLabeling) -> np.ndarray:
    """One-pixel contour: pixels with a 4-neighbor of strictly greater label.

    Marking only the lower-label side keeps the contour one pixel wide and
    consistent with the rasterization tie rule.
    """
    lab = labeling.labels
    b = np.zeros(lab.shape, dtype=bool)
    b[:-1, :] |= lab[:-1, :] < lab[1:, :]
    b[1:, :] |= lab[1:, :] < lab[:-1, :]
    b[:, :-1] |= lab[:, :-1] < lab[:, 1:]
    b[:, 1:] |= lab[:, 1:] < lab[:, :-1]
    return b


def dilate_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    """Chebyshev (square structuring element) binary dilation."""
    if radius <= 0:
        return mask.copy()
    size = 2 * radius + 1
    return ndimage.maximum_filter(mask.astype(np.uint8), size=size, mode="constant") > 0


def layout_to_contour(
    model: LayoutModel, width: int, height: int, line_width: int = 1
) -> ContourRaster:
    """Rasterize the layout contour at the given stroke width.

    The 1-px contour is the labeling boundary set; wider strokes dilate it by
    (line_width - 1) // 2 with a square element.
    """
    if line_width < 1:
        raise ValueError("line_width must be >= 1")
    labeling = layout_to_labeling(model, width, height)
    mask = labeling_boundary(labeling)
    radius = (line_width - 1) // 2
    if radius > 0:
        mask = dilate_mask(mask, radius)
    return ContourRaster(mask, line_width=line_width)


@dataclass(frozen=True)
class Corner:
    """Named layout keypoint with an out-of-bounds flag."""

    id: str
    point: Point2
    in_bounds: bool


def _clip_line_to_rect(line: Line, width: int, height: int) -> list[tuple[float, float]]:
    """Intersections of a line with the pixel-center rectangle, deduplicated."""
    x0, x1 = 0.0, float(width - 1)
    y0, y1 = 0.0, float(height - 1)
    pts = []
    if abs(line.b) > COEF_TOL:
        for x in (x0, x1):
            y = -(line.a * x + line.c) / line.b
            if y0 - 1e-9 <= y <= y1 + 1e-9:
                pts.append((x, min(max(y, y0), y1)))
    if abs(line.a) > COEF_TOL:
        for y in (y0, y1):
            x = -(line.b * y + line.c) / line.a
            if x0 - 1e-9 <= x <= x1 + 1e-9:
                pts.append((min(max(x, x0), x1), y))
    pts.sort()
    dedup: list[tuple[float, float]] = []
    for p in pts:
        if not dedup or math.hypot(p[0] - dedup[-1][0], p[1] - dedup[-1][1]) > 1e-6:
            dedup.append(p)
    return dedup


def extract_corners(model: LayoutModel, width: int, height: int) -> list[Corner]:
    """Corners p1..p4 (pairwise line meets) and border exits e{i}a/e{i}b.

    p1 = l1^l3, p2 = l2^l3, p3 = l2^l4, p4 = l1^l4, reported whenever both
    lines are present; ideal meets (parallel lines) and off-image corners are
    flagged, not dropped. Each present line contributes its two crossings of
    the image rectangle, 'a' being the lexicographically smaller one.
    """
    corners: list[Corner] = []
    pairs = {"p1": ("l1", "l3"), "p2": ("l2", "l3"), "p3": ("l2", "l4"), "p4": ("l1", "l4")}
    lines = model.lines()
    for pid, (ra, rb) in pairs.items():
        la, lb = lines[ra], lines[rb]
        if la is None or lb is None:
            continue
        try:
            pt = intersect_lines(la, lb)
        except IdenticalLines:
            continue
        if pt.is_ideal:
            corners.append(Corner(pid, pt.normalized(), False))
            continue
        x, y = pt.xy()
        inside = bool(0.0 <= x <= width - 1 and 0.0 <= y <= height - 1)
        corners.append(Corner(pid, Point2(float(x), float(y)), inside))
    for i, role in enumerate(ROLES, start=1):
        line = lines[role]
        if line is None:
            continue
        exits = _clip_line_to_rect(line, width, height)
        # order along the line's dominant axis so the a/b suffixes stay
        # stable between nearly identical lines, including near-axis ones
        if abs(line.b) >= abs(line.a):
            exits.sort(key=lambda p: p[0])
        else:
            exits.sort(key=lambda p: p[1])
        for suffix, (x, y) in zip(("a", "b"), exits):
            corners.append(Corner(f"e{i}{suffix}", Point2(x, y), True))
    return corners


def labeling_to_png(labeling: SurfaceLabeling, path) -> None:
    from PIL import Image

    Image.fromarray(labeling.labels, mode="L").save(path)


def labeling_from_png(path) -> SurfaceLabeling:
    from PIL import Image

    arr = np.asarray(Image.open(path), dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel label image")
    bad = (arr > RIGHT) & (arr != UNLABELED)
    if bad.any():
        raise ValueError(f"{path}: label values outside 0..4/255")
    return SurfaceLabeling(arr)
