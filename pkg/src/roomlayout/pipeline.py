"""End-to-end layout refinement: coarse map in, best box layout out.

Stages: binarize/dilate the coarse contour into a guidance mask; detect
segments and estimate the vanishing triple; keep mask-supported segments as
critical lines; recover the occluded floor boundary and undetected wall
boundaries; enumerate hypotheses over a vanishing-point grid; rank by mean
probability mass under the contour. Degraded inputs degrade the pipeline
gracefully: with no usable segments or an empty mask, boundaries come from
the regression fallback alone.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import coarse as coarse_mod
from . import inference, ranking, vanishing
from .coarse import ContourMask, ProbabilityMap, SemanticHeatmap
from .errors import (
    DegenerateConfiguration, EmptyMaskWarning, InsufficientSupport, NoSegments,
    NoValidHypothesis,
)
from .geometry import Point2, SurfaceLabeling
from .hypothesis import HypothesisSet, enumerate_hypotheses
from .inference import CriticalLine, CriticalLineSet
from .ranking import ScoredLayout
from .vanishing import ClassifiedLines, VanishingTriple

WORKING_SIZE = 404  # all internal computation happens at this resolution


@dataclass
class PipelineConfig:
    """Free parameters of the refinement stages; defaults match the module
    design decisions and serialize to/from JSON for reproducible runs."""

    threshold: float = 0.5
    dilation_radius: int = 4
    line_width_score: int = 5
    grid_extent: float = 20.0
    grid_step: float = 5.0
    max_hypotheses: int = 2000
    min_segment_length: float = 15.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        if self.dilation_radius < 0 or self.line_width_score < 1:
            raise ValueError("bad mask/stroke parameters")
        if self.grid_step <= 0 or self.grid_extent < 0:
            raise ValueError("bad grid parameters")
        if self.max_hypotheses < 1 or self.min_segment_length <= 0:
            raise ValueError("bad search parameters")

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(obj: dict) -> "PipelineConfig":
        return PipelineConfig(**obj)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @staticmethod
    def loads(text: str) -> "PipelineConfig":
        return PipelineConfig.from_json(json.loads(text))


@dataclass
class RefineResult:
    best: ScoredLayout
    ranked: list[ScoredLayout]
    mask: ContourMask
    segments: list
    triple: Optional[VanishingTriple]
    classified: Optional[ClassifiedLines]
    critical: CriticalLineSet
    hypotheses: HypothesisSet
    surfaces: Optional[SurfaceLabeling]


def _regression_fallback_lines(
    surfaces: SurfaceLabeling, roles: list[str], provenance: str
) -> list[CriticalLine]:
    out = []
    for role in roles:
        try:
            line = inference.regression_line_for_role(surfaces, role)
        except InsufficientSupport:
            continue
        out.append(
            CriticalLine(role=role, line=line, strength=1.0,
                         provenance=provenance, confident=False)
        )
    return out


def _recover_lines(
    detected: list[CriticalLine],
    classified: Optional[ClassifiedLines],
    triple: Optional[VanishingTriple],
    mask: ContourMask,
    surfaces: Optional[SurfaceLabeling],
    dims: tuple[int, int],
) -> list[CriticalLine]:
    """Occlusion recovery for l2 and geometric fill-in for missing l3/l4."""
    recovered: list[CriticalLine] = []
    have = {role: [e for e in detected if e.role == role] for role in ("l1", "l2", "l3", "l4")}
    v0 = triple.v_horiz1 if triple is not None else None
    floor_vp = triple.v_horiz2 if triple is not None else None
    vertical_vp = triple.v_vertical if triple is not None else Point2(0.0, -1.0, 0.0)

    rays = {}
    if classified is not None:
        rays = inference.corner_rays_all(classified, v0, dims)

    best = {
        role: max(entries, key=lambda e: e.strength).line if entries else None
        for role, entries in have.items()
    }

    # Floor boundary: extend/validate a partial detection, otherwise run the
    # corner-construction / regression cascade.
    l2_needs_recovery = not have["l2"]
    if have["l2"]:
        _, confident = inference.extend_partial_floor_line(best["l2"], mask)
        if not confident:
            l2_needs_recovery = True
    if l2_needs_recovery:
        try:
            line, provenance = inference.recover_occluded_floor(
                best["l3"], best["l4"],
                rays.get("floor_left"), rays.get("floor_right"),
                floor_vp, surfaces,
            )
            recovered.append(
                CriticalLine(role="l2", line=line, strength=1.0, provenance=provenance)
            )
        except InsufficientSupport:
            pass

    # Wall boundaries: connect a ceiling corner to the vertical vanishing
    # point; regression between wall surfaces when no corner is observable.
    for role, ray_key in (("l3", "ceil_left"), ("l4", "ceil_right")):
        if have[role]:
            continue
        line = None
        ray = rays.get(ray_key)
        if best["l1"] is not None and ray is not None:
            try:
                corner = inference.intersect_lines(best["l1"], ray)
                if not corner.is_ideal:
                    line = inference.infer_wall_line_from_ceiling(
                        corner.normalized(), vertical_vp
                    )
            except Exception:
                line = None
        if line is not None:
            recovered.append(
                CriticalLine(role=role, line=line, strength=1.0, provenance="undetected")
            )
        elif surfaces is not None:
            recovered.extend(
                _regression_fallback_lines(surfaces, [role], "undetected")
            )
    return recovered


def refine(
    image: np.ndarray,
    pmap: ProbabilityMap,
    heatmap: Optional[SemanticHeatmap] = None,
    config: Optional[PipelineConfig] = None,
    segments: Optional[list] = None,
) -> RefineResult:
    """Run the full refinement at the working resolution.

    image: RGB uint8 array matching pmap's dimensions. segments, when given,
    bypass the built-in detector (precomputed import). Raises
    NoValidHypothesis when no boundary evidence survives at all.
    """
    config = config or PipelineConfig()
    height, width = pmap.values.shape
    if image.shape[:2] != (height, width):
        raise ValueError("image and probability map dimensions differ")
    dims = (width, height)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyMaskWarning)
        mask = coarse_mod.binarize_and_dilate(
            pmap, threshold=config.threshold, radius=config.dilation_radius
        )

    surfaces = coarse_mod.argmax_surfaces(heatmap) if heatmap is not None else None

    if segments is None:
        try:
            segments = vanishing.detect_line_segments(
                image, min_length=config.min_segment_length
            )
        except NoSegments:
            segments = []

    # The coarse mask is the guidance signal: estimating the triple only on
    # mask-supported segments keeps clutter edges out of the vote.
    if not mask.is_empty:
        supported = [
            s for s in segments
            if mask.contains(*s.midpoint())
            and mask.contains(*s.p0.xy()) and mask.contains(*s.p1.xy())
        ]
    else:
        supported = segments

    triple: Optional[VanishingTriple] = None
    if len(supported) >= 3:
        try:
            triple = vanishing.estimate_vanishing_points(supported, dims=dims)
        except DegenerateConfiguration:
            triple = None
    if triple is None and len(segments) >= 3:
        try:
            triple = vanishing.estimate_vanishing_points(segments, dims=dims)
            supported = segments
        except DegenerateConfiguration:
            triple = None

    classified: Optional[ClassifiedLines] = None
    detected: list[CriticalLine] = []
    if triple is not None and not mask.is_empty:
        classified = vanishing.select_critical_lines(supported, triple, mask, dims)
        detected = inference.classify_roles(classified, triple.v_horiz1, dims)

    recovered = _recover_lines(detected, classified, triple, mask, surfaces, dims)
    if not detected and surfaces is not None:
        # regression-only regime: no segment evidence at all, so every
        # boundary the recovery cascade left open comes from the surface fit
        covered = {e.role for e in recovered}
        missing = [r for r in ("l1", "l2", "l3", "l4") if r not in covered]
        recovered = recovered + _regression_fallback_lines(surfaces, missing, "undetected")
    critical = inference.assemble_critical_lines(
        detected, recovered,
        v0=triple.v_horiz1 if triple is not None else None, dims=dims,
    )
    if critical.is_empty():
        raise NoValidHypothesis("no boundary evidence available")

    if triple is not None and not triple.v_horiz1.is_ideal:
        v0 = triple.v_horiz1
    else:
        v0 = Point2((width - 1) / 2.0, (height - 1) / 2.0)
    candidates = vanishing.grid_search_candidates(
        v0, extent=config.grid_extent, step=config.grid_step
    )
    # A boundary with any evidence (detected or recovered) stays in every
    # hypothesis; absence only covers boundaries no stage could place. When
    # the evidence is too inconsistent to validate, retry unrestricted.
    allow_absent = {role: not critical.for_role(role) for role in ("l1", "l2", "l3", "l4")}
    try:
        hset = enumerate_hypotheses(
            critical, candidates, dims,
            max_hypotheses=config.max_hypotheses, allow_absent=allow_absent,
        )
    except NoValidHypothesis:
        hset = enumerate_hypotheses(
            critical, candidates, dims, max_hypotheses=config.max_hypotheses,
        )
    ranked = ranking.ranked_list(hset, pmap, line_width=config.line_width_score)
    if not ranked:
        raise NoValidHypothesis("every hypothesis had an empty contour")
    best = ranking.select_best(hset, pmap, line_width=config.line_width_score)
    return RefineResult(
        best=best, ranked=ranked, mask=mask, segments=segments, triple=triple,
        classified=classified, critical=critical, hypotheses=hset, surfaces=surfaces,
    )
