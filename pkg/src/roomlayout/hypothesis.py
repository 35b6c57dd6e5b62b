"""Enumeration and validation of layout hypotheses.

Hypotheses are the Cartesian product of per-role line choices (absent
included, so cropped-room topologies are covered) with the candidate
vanishing points. Validation rejects models whose boundaries are ordered
inconsistently or whose rasterized surfaces fall apart into multiple
regions.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _runs
from .errors import InvalidTopology, NoValidHypothesis
from .geometry import (
    LayoutModel, Line, Point2, ROLES, layout_to_labeling, structural_issues,
)
from .inference import CriticalLine, CriticalLineSet

MAX_HYPOTHESES = 2000

_CONN4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)


def labeling_is_connected(labels: np.ndarray) -> bool:
    """Every label class present forms a single 4-connected region."""
    for c in np.unique(labels):
        _, n = ndimage.label(labels == c, structure=_CONN4)
        if n != 1:
            return False
    return True


def validate_hypothesis(model: LayoutModel, dims: tuple[int, int]) -> bool:
    """Geometric realizability of a layout model at the given dimensions.

    Checks, in order: ceiling above floor at the center column; left wall
    boundary left of the right one; the vanishing point strictly inside the
    region its rays must emanate from; and single-4-connectedness of every
    rasterized surface class.
    """
    width, height = dims
    if structural_issues(model, width, height):
        return False
    try:
        labeling = layout_to_labeling(model, width, height)
    except InvalidTopology:
        return False
    return labeling_is_connected(labeling.labels)


@dataclass(frozen=True)
class Hypothesis:
    model: LayoutModel
    strength: float
    provenances: tuple[str, ...]  # per present line, in role order


@dataclass(frozen=True)
class HypothesisSet:
    hypotheses: tuple[Hypothesis, ...]
    topology_counts: dict
    provenance_counts: dict

    def __len__(self) -> int:
        return len(self.hypotheses)

    def models(self) -> list[LayoutModel]:
        return [h.model for h in self.hypotheses]

    def to_json(self) -> list[dict]:
        return [
            {
                "layout": h.model.to_json(),
                "strength": h.strength,
                "provenances": list(h.provenances),
            }
            for h in self.hypotheses
        ]


def _role_pools(crit: CriticalLineSet) -> dict[str, list[CriticalLine | None]]:
    pools: dict[str, list[CriticalLine | None]] = {}
    priority = {"detected": 0, "occluded": 1, "undetected": 2}
    for role in ROLES:
        lines = sorted(
            crit.for_role(role),
            key=lambda e: (priority[e.provenance], -e.strength, e.line.coeffs()),
        )
        pools[role] = list(lines) + [None]
    return pools


def enumerate_hypotheses(
    crit: CriticalLineSet,
    candidates_v: list[Point2],
    dims: tuple[int, int],
    max_hypotheses: int = MAX_HYPOTHESES,
    allow_absent: dict[str, bool] | None = None,
) -> HypothesisSet:
    """All valid layouts from role-compatible line choices and candidate v's.

    Combos iterate in strength order per role with 'absent' last; candidate
    vanishing points run in their given (row-major grid) order, so the result
    order is deterministic. When more than max_hypotheses pass validation,
    the strongest by total supporting strength are kept (ties keep the
    earlier index). Raises NoValidHypothesis when nothing passes.

    allow_absent restricts which roles may go unassigned (default: all of
    them); the refinement pipeline uses it to keep boundaries with any
    surviving evidence in every hypothesis, since the mean-probability score
    would otherwise always prefer dropping an occluded boundary over keeping
    its recovered line.
    """
    if not candidates_v:
        raise NoValidHypothesis("no candidate vanishing points")
    if crit.is_empty():
        raise NoValidHypothesis("empty critical line set")
    pools = _role_pools(crit)
    if allow_absent is not None:
        for role in ROLES:
            if not allow_absent.get(role, True) and len(pools[role]) > 1:
                pools[role] = pools[role][:-1]
    vs = np.array([p.xy() for p in candidates_v], dtype=np.float64)
    width, height = dims

    hypotheses: list[Hypothesis] = []
    for c1 in pools["l1"]:
        for c2 in pools["l2"]:
            for c3 in pools["l3"]:
                for c4 in pools["l4"]:
                    chosen = [c for c in (c1, c2, c3, c4) if c is not None]
                    if not chosen:
                        continue
                    lines = {
                        "l1": c1.line if c1 else None,
                        "l2": c2.line if c2 else None,
                        "l3": c3.line if c3 else None,
                        "l4": c4.line if c4 else None,
                    }
                    ok = _runs.structural_ok_batch(lines, vs, width, height)
                    if not ok.any():
                        continue
                    res = _runs.evaluate_combo(
                        lines, vs, width, height, prefix=None, check_valid=True
                    )
                    strength = sum(c.strength for c in chosen)
                    provs = tuple(c.provenance for c in chosen)
                    for b in range(len(vs)):
                        if not ok[b]:
                            continue
                        model = LayoutModel(
                            v=candidates_v[b],
                            l1=lines["l1"], l2=lines["l2"],
                            l3=lines["l3"], l4=lines["l4"],
                        )
                        if res.needs_slow[b]:
                            if not validate_hypothesis(model, dims):
                                continue
                        elif not res.valid[b]:
                            continue
                        hypotheses.append(
                            Hypothesis(model=model, strength=strength, provenances=provs)
                        )

    if not hypotheses:
        raise NoValidHypothesis("every combination failed validation")
    if len(hypotheses) > max_hypotheses:
        order = sorted(
            range(len(hypotheses)), key=lambda i: (-hypotheses[i].strength, i)
        )[:max_hypotheses]
        hypotheses = [hypotheses[i] for i in sorted(order)]

    topo = Counter(h.model.topology for h in hypotheses)
    prov = Counter(h.provenances for h in hypotheses)
    return HypothesisSet(
        hypotheses=tuple(hypotheses),
        topology_counts=dict(topo),
        provenance_counts=dict(prov),
    )
