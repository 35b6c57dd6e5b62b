"""Batched row-run evaluation of layout hypotheses.

Search needs thousands of (line combo, candidate v) evaluations per image;
rasterizing each one is two orders of magnitude too slow. Every surface
region of a valid layout is a convex sector, so each image row intersects
each class in one interval whose endpoints move linearly with the row. This
module computes those runs analytically for a whole batch of vanishing
points at once, then derives connectivity, the one-sided boundary, its
dilation, and the probability-mass score from interval arithmetic.

Exactness contract: run boundaries are snapped by re-evaluating the same
float expressions the per-pixel reference path (geometry.layout_to_labeling)
uses, at candidate pixels around every analytic breakpoint. Whenever a row's
class pattern cannot be pinned down that way (near-duplicate lines, more
transitions than expected) the hypothesis is flagged `needs_slow` and the
caller re-evaluates it with the reference path instead of trusting the run
table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CENTER, COEF_TOL, ROLE_LABELS, Line

# A valid room row crosses at most 5 runs (4 transitions); slack for the
# probe assembly before falling back to the reference path.
MAX_TRANSITIONS = 6
MAX_BOUNDARY_INTERVALS = 12


@dataclass
class BatchResult:
    valid: np.ndarray        # [B] bool, connectivity check outcome
    needs_slow: np.ndarray   # [B] bool, row structure not representable
    psum: np.ndarray         # [B] float64, sum of P over the stroke
    count: np.ndarray        # [B] int64, stroke pixel count


def structural_ok_batch(
    lines: dict[str, Line | None], vs: np.ndarray, width: int, height: int
) -> np.ndarray:
    """Vectorized mirror of geometry.structural_issues over candidate v's."""
    vx = vs[:, 0].astype(np.float64)
    vy = vs[:, 1].astype(np.float64)
    ok = np.ones(len(vs), dtype=bool)

    for line in lines.values():
        if line is None:
            continue
        sv = (line.a * vx + line.b * vy) + line.c
        ok &= np.abs(sv) > COEF_TOL

    xc = 0.5 * (width - 1)
    yc = 0.5 * (height - 1)

    def y_at(line: Line, x):
        return -(line.a * x + line.c) / line.b

    def x_at(line: Line, y):
        return -(line.b * y + line.c) / line.a

    l1, l2, l3, l4 = (lines.get(r) for r in ("l1", "l2", "l3", "l4"))
    if l1 is not None and abs(l1.b) <= COEF_TOL:
        return np.zeros(len(vs), dtype=bool)
    if l2 is not None and abs(l2.b) <= COEF_TOL:
        return np.zeros(len(vs), dtype=bool)
    if l3 is not None and abs(l3.a) <= COEF_TOL:
        return np.zeros(len(vs), dtype=bool)
    if l4 is not None and abs(l4.a) <= COEF_TOL:
        return np.zeros(len(vs), dtype=bool)
    if l1 is not None and l2 is not None and not y_at(l1, xc) < y_at(l2, xc):
        return np.zeros(len(vs), dtype=bool)
    if l3 is not None and l4 is not None and not x_at(l3, yc) < x_at(l4, yc):
        return np.zeros(len(vs), dtype=bool)

    if l1 is not None:
        ok &= y_at(l1, vx) < vy
    if l2 is not None:
        ok &= vy < y_at(l2, vx)
    if l3 is not None:
        ok &= x_at(l3, vy) < vx
    if l4 is not None:
        ok &= vx < x_at(l4, vy)
    return ok


def _probe_classes(A, Bc, C, sv, strict, labels, xp, y):
    """Classify probe pixels with the reference path's exact float recipe.

    A, Bc, C: [m] line coefficients; sv: [B, m]; xp: [B, H, P] probe columns;
    y: [H] row coordinates. Returns [B, H, P] uint8 labels. Runs a first-wins
    minimum over the lines in role order, matching the reference argmin.
    """
    m = A.shape[0]
    best_u = np.full(xp.shape, np.inf)
    best_lbl = np.full(xp.shape, CENTER, dtype=np.uint8)
    yc = y[None, :, None]
    for i in range(m):
        s = (A[i] * xp + Bc[i] * yc) + C[i]
        u = s / sv[:, i, None, None]
        violated = (u < 0.0) if strict[i] else (u <= 0.0)
        take = violated & (u < best_u)
        best_u = np.where(take, u, best_u)
        best_lbl = np.where(take, np.uint8(labels[i]), best_lbl)
    return best_lbl


def _interval_union_sum(starts, ends, prefix, width):
    """Probability mass and pixel count of the union of per-row intervals.

    starts/ends: [B, H, K] int32, empty slots start > end, all values in
    [0, width]. prefix: [H, width + 1] float64 row prefix sums, or None to
    only count pixels. Returns ([B] sum, [B] count).

    Intervals are sorted by packing (start, end) into one int32 key, which is
    far cheaper than argsort plus gathers; width must stay below 2**15.
    """
    if width >= (1 << 15):
        raise ValueError("interval arithmetic supports widths below 32768")
    packed = np.left_shift(starts, 16) | (ends + 1)
    packed = np.sort(packed, axis=-1)
    # Empty slots sort to the back; drop slots no row uses.
    occupancy = ((packed >> 16) <= (packed & 0xFFFF) - 1).sum(axis=-1).max() if packed.size else 0
    packed = packed[..., : max(int(occupancy), 1)]
    s = packed >> 16
    e = (packed & 0xFFFF) - 1
    emax = np.maximum.accumulate(e, axis=-1)
    prev = np.empty_like(emax)
    prev[..., 0] = -1
    prev[..., 1:] = emax[..., :-1]
    cs = np.maximum(s, prev + 1)
    length = np.maximum(e - cs + 1, 0)
    count = length.sum(axis=(1, 2), dtype=np.int64)
    if prefix is None:
        return None, count
    last = prefix.shape[-1] - 1
    lo = np.minimum(cs, last)
    hi = np.minimum(e + 1, last)
    rows = np.arange(prefix.shape[0], dtype=np.intp)[None, :, None]
    seg = prefix[rows, hi] - prefix[rows, lo]
    psum = np.where(length > 0, seg, 0.0).sum(axis=(1, 2))
    return psum, count


def _class_at(cols, tcols, rclass):
    """Class of pixel column `cols` given transition columns and run classes.

    cols: [..., K]; tcols: [..., R] ascending transition columns padded with
    a sentinel > any column; rclass: [..., R+1].
    """
    slot = (tcols[..., None, :] <= cols[..., :, None]).sum(axis=-1)
    return np.take_along_axis(rclass, slot, axis=-1)


try:
    from . import _kernels
except ImportError:  # numba unavailable; the numpy path covers everything
    _kernels = None


def evaluate_combo(
    lines: dict[str, Line | None],
    vs: np.ndarray,
    width: int,
    height: int,
    line_width: int = 5,
    prefix: np.ndarray | None = None,
    check_valid: bool = True,
    force_numpy: bool = False,
) -> BatchResult:
    """Evaluate one line combo against a batch of vanishing points.

    prefix: optional [H, W+1] float64 row prefix sums of the probability map
    (prefix[y, x] = sum of P[y, :x]); when given, psum/count describe the
    boundary stroke dilated to `line_width`.
    """
    present = [(role, line) for role, line in lines.items() if line is not None]
    nv = len(vs)
    if not present:
        return BatchResult(
            valid=np.ones(nv, dtype=bool),
            needs_slow=np.zeros(nv, dtype=bool),
            psum=np.zeros(nv),
            count=np.zeros(nv, dtype=np.int64),
        )
    m = len(present)
    A = np.array([line.a for _, line in present])
    Bc = np.array([line.b for _, line in present])
    C = np.array([line.c for _, line in present])
    labels = [ROLE_LABELS[role] for role, _ in present]
    strict = [role == "l4" for role, _ in present]

    vx = vs[:, 0].astype(np.float64)
    vy = vs[:, 1].astype(np.float64)
    sv = (A[None, :] * vx[:, None] + Bc[None, :] * vy[:, None]) + C[None, :]
    needs_slow = np.abs(sv).min(axis=1) <= COEF_TOL

    y = np.arange(height, dtype=np.float64)

    # Analytic breakpoints: u_i = 0 and u_i = u_j, both linear in x per row.
    bps = []
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(m):
            if abs(A[i]) > COEF_TOL:
                xz = -(Bc[i] * y + C[i]) / A[i]
                bps.append(np.broadcast_to(xz[None, :], (nv, height)))
        for i in range(m):
            for j in range(i + 1, m):
                den = A[i] * sv[:, j] - A[j] * sv[:, i]
                num = (Bc[j] * y[None, :] + C[j]) * sv[:, i, None] - (
                    Bc[i] * y[None, :] + C[i]
                ) * sv[:, j, None]
                bp = num / den[:, None]
                bps.append(bp)
    if bps:
        bp = np.stack(bps, axis=-1)  # [B, H, K]
        bp = np.where(np.isfinite(bp), bp, 1e18)
    else:
        bp = np.full((nv, height, 1), 1e18)
    bp = np.clip(bp, -2.0, float(width) + 1.0)

    if _kernels is not None and not force_numpy:
        dummy = prefix if prefix is not None else np.zeros((height, width + 1))
        out_valid = np.ones(nv, dtype=np.bool_)
        out_slow = np.zeros(nv, dtype=np.bool_)
        out_psum = np.zeros(nv)
        out_count = np.zeros(nv, dtype=np.int64)
        _kernels.evaluate_batch(
            np.ascontiguousarray(A), np.ascontiguousarray(Bc), np.ascontiguousarray(C),
            np.asarray(labels, dtype=np.uint8), np.asarray(strict, dtype=np.bool_),
            np.ascontiguousarray(sv), np.ascontiguousarray(bp),
            width, height, (line_width - 1) // 2,
            np.ascontiguousarray(dummy), check_valid, prefix is not None,
            out_valid, out_slow, out_psum, out_count,
        )
        return BatchResult(
            valid=out_valid, needs_slow=out_slow | needs_slow,
            psum=out_psum, count=out_count,
        )

    # Probes ceil(x*)-1 and ceil(x*) bracket the transition pixel even when
    # the breakpoint falls exactly on a pixel center.
    base = np.ceil(bp).astype(np.int32)
    probes = np.concatenate([base - 1, base], axis=-1)
    edges = np.broadcast_to(
        np.array([0, width - 1], dtype=np.int32), (nv, height, 2)
    )
    probes = np.concatenate([probes, edges], axis=-1)
    probes = np.clip(probes, 0, width - 1)
    probes = np.sort(probes, axis=-1)

    pclass = _probe_classes(A, Bc, C, sv, strict, labels, probes.astype(np.float64), y)

    # Transitions: class changes between consecutive probes. They are only
    # trustworthy when the columns are adjacent pixels.
    changed = pclass[..., 1:] != pclass[..., :-1]
    adjacent = probes[..., 1:] == probes[..., :-1] + 1
    bad = changed & ~adjacent
    needs_slow |= bad.any(axis=(1, 2))
    nslots = min(MAX_TRANSITIONS, changed.shape[-1])
    ntrans = changed.sum(axis=-1)
    needs_slow |= (ntrans > nslots).any(axis=1)

    # Pack transition columns / right-side classes into fixed slots.
    order = np.argsort(~changed, axis=-1, kind="stable")[..., :nslots]
    is_trans = np.take_along_axis(changed, order, axis=-1)
    tcols = np.take_along_axis(probes[..., 1:], order, axis=-1).astype(np.int32)
    tclass = np.take_along_axis(pclass[..., 1:], order, axis=-1)
    sentinel = np.int32(width)
    tcols = np.where(is_trans, tcols, sentinel)
    # Re-sort by column so runs are in ascending x order.
    corder = np.argsort(tcols, axis=-1, kind="stable")
    tcols = np.take_along_axis(tcols, corder, axis=-1)
    tclass = np.take_along_axis(tclass, corder, axis=-1)
    is_trans = np.take_along_axis(is_trans, corder, axis=-1)

    nrun = nslots + 1
    rclass = np.full(pclass.shape[:2] + (nrun,), 255, dtype=np.uint8)
    rclass[..., 0] = pclass[..., 0]
    rclass[..., 1:] = np.where(is_trans, tclass, np.uint8(255))
    rstart = np.concatenate(
        [np.zeros(tcols.shape[:2] + (1,), dtype=np.int32), tcols], axis=-1
    )
    rend = np.concatenate(
        [tcols, np.full(tcols.shape[:2] + (1,), sentinel, dtype=np.int32)], axis=-1
    ) - 1
    empty_run = rclass == 255
    rstart = np.where(empty_run, sentinel, rstart)
    rend = np.where(empty_run, sentinel - 1, rend)

    valid = np.ones(nv, dtype=bool)
    if check_valid:
        valid, flag = _connectivity(rclass, rstart, rend, labels)
        needs_slow |= flag

    psum = np.zeros(nv)
    count = np.zeros(nv, dtype=np.int64)
    if prefix is not None:
        psum, count, flag = _stroke_score(
            rclass, rstart, rend, tcols, is_trans, width, height, line_width, prefix
        )
        needs_slow |= flag
    return BatchResult(valid=valid, needs_slow=needs_slow, psum=psum, count=count)


def _connectivity(rclass, rstart, rend, labels):
    """Single-4-connected-region check per class from the run table.

    Row intervals of a convex region are single runs; a class occupying two
    runs in one row cannot happen geometrically, so it flags the slow path.
    """
    nv = rclass.shape[0]
    valid = np.ones(nv, dtype=bool)
    flag = np.zeros(nv, dtype=bool)
    for c in sorted(set(labels) | {CENTER}):
        is_c = rclass == c
        percount = is_c.sum(axis=-1)
        flag |= (percount > 1).any(axis=1)
        has = percount > 0  # [B, H]
        present = has.any(axis=1)
        slot = np.argmax(is_c, axis=-1)
        s = np.take_along_axis(rstart, slot[..., None], axis=-1)[..., 0]
        e = np.take_along_axis(rend, slot[..., None], axis=-1)[..., 0]

        first = np.argmax(has, axis=1)
        last = has.shape[1] - 1 - np.argmax(has[:, ::-1], axis=1)
        contiguous = has.sum(axis=1) == (last - first + 1)

        both = has[:, :-1] & has[:, 1:]
        overlap = np.maximum(s[:, :-1], s[:, 1:]) <= np.minimum(e[:, :-1], e[:, 1:])
        linked = (~both | overlap).all(axis=1)
        valid &= ~present | (contiguous & linked)
    return valid, flag


def _stroke_score(rclass, rstart, rend, tcols, is_trans, width, height, line_width, prefix):
    """Probability mass and pixel count of the dilated one-sided boundary."""
    nv, H = rclass.shape[:2]
    R = tcols.shape[-1]
    flag = np.zeros(nv, dtype=bool)
    w32 = np.int32(width)

    # Horizontal marks: at each transition, the lower-label side owns the
    # boundary pixel (left run pixel t-1 when left < right, else pixel t).
    lclass = rclass[..., :R]
    rclass_right = np.where(is_trans, rclass[..., 1:], np.uint8(255))
    left_lower = lclass < rclass_right
    hcol = np.where(left_lower, tcols - 1, tcols)
    hstart = np.where(is_trans, hcol, w32)
    hend = np.where(is_trans, hcol, w32 - 1)

    # Vertical marks: cut adjacent rows at the union of their transition
    # columns; inside each cell both rows are constant, and the lower class
    # side gets marked over the cell.
    allcols = np.concatenate([tcols[:, :-1, :], tcols[:, 1:, :]], axis=-1)
    allcols = np.sort(allcols, axis=-1)  # [B, H-1, 2R]
    cell_start = np.concatenate(
        [np.zeros(allcols.shape[:2] + (1,), dtype=np.int32), allcols], axis=-1
    )
    cell_end = np.empty_like(cell_start)
    cell_end[..., :-1] = allcols - 1
    cell_end[..., -1] = w32 - 1
    cell_end = np.minimum(cell_end, w32 - 1)
    cell_ok = cell_start <= cell_end
    cls_up = _class_at(cell_start, tcols[:, :-1, :], rclass[:, :-1, :])
    cls_dn = _class_at(cell_start, tcols[:, 1:, :], rclass[:, 1:, :])
    up_lower = cell_ok & (cls_up < cls_dn)
    dn_lower = cell_ok & (cls_dn < cls_up)
    ncell = cell_start.shape[-1]

    nb = R + 2 * ncell
    bstart = np.full((nv, H, nb), w32, dtype=np.int32)
    bend = np.full((nv, H, nb), w32 - 1, dtype=np.int32)
    bstart[..., :R] = hstart
    bend[..., :R] = hend
    # marks on the upper row of each pair
    bstart[:, :-1, R:R + ncell] = np.where(up_lower, cell_start, w32)
    bend[:, :-1, R:R + ncell] = np.where(up_lower, cell_end, w32 - 1)
    # marks on the lower row of each pair
    bstart[:, 1:, R + ncell:] = np.where(dn_lower, cell_start, w32)
    bend[:, 1:, R + ncell:] = np.where(dn_lower, cell_end, w32 - 1)

    # Compact to a fixed number of interval slots before dilation.
    packed = np.left_shift(bstart, 16) | (bend + 1)
    packed = np.sort(packed, axis=-1)
    nonempty = ((packed >> 16) <= (packed & 0xFFFF) - 1).sum(axis=-1)
    flag |= (nonempty > MAX_BOUNDARY_INTERVALS).any(axis=1)
    packed = packed[..., :MAX_BOUNDARY_INTERVALS]
    bstart = packed >> 16
    bend = (packed & 0xFFFF) - 1

    radius = (line_width - 1) // 2
    if radius > 0:
        occupied = bstart <= bend
        xs = np.where(occupied, np.maximum(bstart - radius, 0), w32)
        xe = np.where(occupied, np.minimum(bend + radius, w32 - 1), w32 - 1)
        k = bstart.shape[-1]
        nwin = 2 * radius + 1
        bstart = np.full((nv, H, nwin * k), w32, dtype=np.int32)
        bend = np.full((nv, H, nwin * k), w32 - 1, dtype=np.int32)
        for i, dy in enumerate(range(-radius, radius + 1)):
            src_lo = max(0, -dy)
            src_hi = H - max(0, dy)
            bstart[:, src_lo + dy:src_hi + dy, i * k:(i + 1) * k] = xs[:, src_lo:src_hi]
            bend[:, src_lo + dy:src_hi + dy, i * k:(i + 1) * k] = xe[:, src_lo:src_hi]

    psum, count = _interval_union_sum(bstart, bend, prefix, width)
    return psum, count, flag
