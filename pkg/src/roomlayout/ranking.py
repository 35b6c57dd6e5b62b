"""Hypothesis scoring against the coarse probability map and selection.

The score of a layout is the mean of the probability map over the layout's
contour pixels rasterized at a configurable stroke width; the best layout is
the argmax over the hypothesis set. Batches that share a line combo are
scored through the fast run engine, with the per-pixel path as fallback and
reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _runs
from .coarse import ProbabilityMap
from .errors import ZeroContour
from .geometry import LayoutModel, layout_to_contour
from .hypothesis import HypothesisSet

SCORE_LINE_WIDTH = 5  # between the mask dilation (4 px) and the training stroke (7 px)


@dataclass(frozen=True)
class ScoredLayout:
    layout: LayoutModel
    score: float
    layout_pixels: int

    def __post_init__(self):
        if self.layout_pixels <= 0:
            raise ValueError("a scored layout must cover at least one contour pixel")


def row_prefix(pmap: ProbabilityMap) -> np.ndarray:
    """Row prefix sums of P, prefix[y, x] = sum of P[y, :x]."""
    h, w = pmap.values.shape
    prefix = np.zeros((h, w + 1))
    np.cumsum(pmap.values, axis=1, out=prefix[:, 1:])
    return prefix


def score_layout(
    model: LayoutModel, pmap: ProbabilityMap, line_width: int = SCORE_LINE_WIDTH
) -> ScoredLayout:
    """Mean probability over the layout contour at the given stroke width.

    Raises ZeroContour when no contour pixel falls inside the image.
    """
    contour = layout_to_contour(model, pmap.width, pmap.height, line_width=line_width)
    n = contour.count()
    if n == 0:
        raise ZeroContour("layout has no contour pixel inside the image")
    total = float(pmap.values[contour.mask].sum())
    return ScoredLayout(layout=model, score=total / n, layout_pixels=n)


def score_hypotheses(
    hset: HypothesisSet,
    pmap: ProbabilityMap,
    line_width: int = SCORE_LINE_WIDTH,
    prefix: np.ndarray | None = None,
) -> list[ScoredLayout | None]:
    """Score every member, None where the contour is empty.

    Consecutive hypotheses sharing a line combo are evaluated as one batch;
    flagged batch members fall back to the per-pixel reference path.
    """
    if prefix is None:
        prefix = row_prefix(pmap)
    width, height = pmap.width, pmap.height
    out: list[ScoredLayout | None] = [None] * len(hset.hypotheses)

    groups: list[tuple[tuple, list[int]]] = []
    for idx, hyp in enumerate(hset.hypotheses):
        key = hyp.model.line_tuple()
        if groups and groups[-1][0] == key:
            groups[-1][1].append(idx)
        else:
            groups.append((key, [idx]))

    for key, indices in groups:
        lines = dict(zip(("l1", "l2", "l3", "l4"), key))
        vs = np.array(
            [hset.hypotheses[i].model.v.xy() for i in indices], dtype=np.float64
        )
        res = _runs.evaluate_combo(
            lines, vs, width, height,
            line_width=line_width, prefix=prefix, check_valid=False,
        )
        for b, idx in enumerate(indices):
            model = hset.hypotheses[idx].model
            if res.needs_slow[b]:
                try:
                    out[idx] = score_layout(model, pmap, line_width)
                except ZeroContour:
                    out[idx] = None
            elif res.count[b] > 0:
                out[idx] = ScoredLayout(
                    layout=model,
                    score=float(res.psum[b]) / int(res.count[b]),
                    layout_pixels=int(res.count[b]),
                )
    return out


def select_best(
    hset: HypothesisSet, pmap: ProbabilityMap, line_width: int = SCORE_LINE_WIDTH
) -> ScoredLayout:
    """Argmax of the score over the hypothesis set; ties keep the lower index.

    Raises ZeroContour only when every member has an empty contour.
    """
    if len(hset.hypotheses) == 0:
        raise ValueError("empty hypothesis set")
    scored = score_hypotheses(hset, pmap, line_width)
    best: ScoredLayout | None = None
    for s in scored:
        if s is None:
            continue
        if best is None or s.score > best.score:
            best = s
    if best is None:
        raise ZeroContour("every hypothesis has an empty contour")
    return best


def ranked_list(
    hset: HypothesisSet, pmap: ProbabilityMap, line_width: int = SCORE_LINE_WIDTH
) -> list[ScoredLayout]:
    """All scoreable hypotheses sorted by descending score (stable)."""
    scored = [s for s in score_hypotheses(hset, pmap, line_width) if s is not None]
    return sorted(scored, key=lambda s: -s.score)
