"""Numba kernel behind the batched hypothesis evaluator.

Same semantics as the numpy implementation in _runs.py, specialized into one
pass over (batch, row) with small fixed-size scratch buffers. fastmath stays
off so scalar float evaluation is bit-identical to the vectorized reference
path.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MAX_RUNS = 7           # transitions per row + 1; valid rooms need at most 5
MAX_MARKS = 24         # boundary intervals per row before flagging slow
CENTER = 3

I32 = np.int32


@njit(cache=True, fastmath=False)
def _class_at_pixel(x, y, A, Bc, C, svb, strict, labels):
    best_u = np.inf
    best = np.uint8(CENTER)
    for i in range(A.shape[0]):
        s = (A[i] * x + Bc[i] * y) + C[i]
        u = s / svb[i]
        if strict[i]:
            violated = u < 0.0
        else:
            violated = u <= 0.0
        if violated and u < best_u:
            best_u = u
            best = labels[i]
    return best


@njit(cache=True, fastmath=False)
def _row_class(col, ncols, tcols, rcls):
    """Class of a pixel column given a row's transition columns."""
    idx = 0
    for r in range(ncols):
        if tcols[r] <= col:
            idx += 1
        else:
            break
    return rcls[idx]


@njit(cache=True, fastmath=False)
def evaluate_batch(
    A, Bc, C, labels, strict, sv, bp, width, height, radius,
    prefix, do_valid, do_score,
    out_valid, out_slow, out_psum, out_count,
):
    """Evaluate every batch element; see _runs.evaluate_combo for semantics.

    bp: [B, H, K] analytic breakpoint x positions (clipped by caller).
    prefix: [H, W+1] row prefix sums of P (ignored unless do_score).
    """
    B = sv.shape[0]
    K = bp.shape[2]
    nprobe = 2 * K + 2

    for b in range(B):
        slow = False
        svb = sv[b]

        tcols = np.empty((height, MAX_RUNS - 1), dtype=I32)
        rcls = np.empty((height, MAX_RUNS), dtype=np.uint8)
        ntr = np.zeros(height, dtype=I32)

        probes = np.empty(nprobe, dtype=I32)
        for y in range(height):
            n = 0
            for k in range(K):
                x = bp[b, y, k]
                cb = int(np.ceil(x))
                lo = cb - 1
                if lo < 0:
                    lo = 0
                elif lo > width - 1:
                    lo = width - 1
                hi = cb
                if hi < 0:
                    hi = 0
                elif hi > width - 1:
                    hi = width - 1
                probes[n] = lo
                probes[n + 1] = hi
                n += 2
            probes[n] = 0
            probes[n + 1] = width - 1
            n += 2
            # insertion sort, n is tiny
            for i in range(1, n):
                key = probes[i]
                j = i - 1
                while j >= 0 and probes[j] > key:
                    probes[j + 1] = probes[j]
                    j -= 1
                probes[j + 1] = key

            yf = float(y)
            prev_col = I32(-1)
            prev_cls = np.uint8(255)
            count = I32(0)
            for i in range(n):
                col = probes[i]
                if col == prev_col:
                    continue
                cls = _class_at_pixel(float(col), yf, A, Bc, C, svb, strict, labels)
                if prev_col < 0:
                    rcls[y, 0] = cls
                elif cls != prev_cls:
                    if col != prev_col + 1:
                        slow = True
                    if count >= MAX_RUNS - 1:
                        slow = True
                    else:
                        tcols[y, count] = col
                        rcls[y, count + 1] = cls
                        count += 1
                prev_col = col
                prev_cls = cls
            ntr[y] = count

        valid = True
        if do_valid and not slow:
            for c in range(5):
                cc = np.uint8(c)
                present = False
                okc = True
                prev_has = False
                gap_after = False
                prev_s = I32(0)
                prev_e = I32(-1)
                for y in range(height):
                    found = 0
                    s = I32(0)
                    e = I32(-1)
                    start = I32(0)
                    for r in range(ntr[y] + 1):
                        if r < ntr[y]:
                            end = tcols[y, r] - 1
                        else:
                            end = I32(width - 1)
                        if rcls[y, r] == cc:
                            found += 1
                            s = start
                            e = end
                        start = end + 1
                    if found > 1:
                        slow = True
                    if found > 0:
                        if present and gap_after:
                            okc = False  # class reappears after a row gap
                        if prev_has:
                            lo = s if s > prev_s else prev_s
                            hi = e if e < prev_e else prev_e
                            if lo > hi:
                                okc = False
                        present = True
                        prev_has = True
                        prev_s = s
                        prev_e = e
                    else:
                        if present:
                            gap_after = True
                        prev_has = False
                if present and not okc:
                    valid = False

        psum = 0.0
        total = 0
        if do_score and not slow:
            marks_s = np.empty((height, MAX_MARKS), dtype=I32)
            marks_e = np.empty((height, MAX_MARKS), dtype=I32)
            nmark = np.zeros(height, dtype=I32)

            # horizontal marks: boundary pixel goes to the lower-label side
            for y in range(height):
                nm = 0
                for r in range(ntr[y]):
                    t = tcols[y, r]
                    if rcls[y, r] < rcls[y, r + 1]:
                        col = t - 1
                    else:
                        col = t
                    if 0 <= col < width:
                        marks_s[y, nm] = col
                        marks_e[y, nm] = col
                        nm += 1
                nmark[y] = nm

            # vertical marks: cells from the merged transition columns of
            # adjacent rows; constant classes inside each cell
            for y in range(height - 1):
                ia = I32(0)
                ib = I32(0)
                na = ntr[y]
                nbels = ntr[y + 1]
                cell_start = I32(0)
                while True:
                    # next boundary column among both rows' transitions
                    nxt = I32(width)
                    if ia < na and tcols[y, ia] < nxt:
                        nxt = tcols[y, ia]
                    if ib < nbels and tcols[y + 1, ib] < nxt:
                        nxt = tcols[y + 1, ib]
                    cell_end = nxt - 1
                    if cell_end > width - 1:
                        cell_end = I32(width - 1)
                    if cell_start <= cell_end:
                        cu = _row_class(cell_start, na, tcols[y], rcls[y])
                        cd = _row_class(cell_start, nbels, tcols[y + 1], rcls[y + 1])
                        if cu < cd:
                            if nmark[y] >= MAX_MARKS:
                                slow = True
                            else:
                                marks_s[y, nmark[y]] = cell_start
                                marks_e[y, nmark[y]] = cell_end
                                nmark[y] += 1
                        elif cd < cu:
                            if nmark[y + 1] >= MAX_MARKS:
                                slow = True
                            else:
                                marks_s[y + 1, nmark[y + 1]] = cell_start
                                marks_e[y + 1, nmark[y + 1]] = cell_end
                                nmark[y + 1] += 1
                    if nxt >= width:
                        break
                    while ia < na and tcols[y, ia] == nxt:
                        ia += 1
                    while ib < nbels and tcols[y + 1, ib] == nxt:
                        ib += 1
                    cell_start = nxt
                if slow:
                    break

            if not slow:
                cap = (2 * radius + 1) * MAX_MARKS
                seg_s = np.empty(cap, dtype=I32)
                seg_e = np.empty(cap, dtype=I32)
                for y in range(height):
                    ns = 0
                    ylo = y - radius
                    if ylo < 0:
                        ylo = 0
                    yhi = y + radius
                    if yhi > height - 1:
                        yhi = height - 1
                    for yy in range(ylo, yhi + 1):
                        for i in range(nmark[yy]):
                            s = marks_s[yy, i] - radius
                            if s < 0:
                                s = 0
                            e = marks_e[yy, i] + radius
                            if e > width - 1:
                                e = width - 1
                            seg_s[ns] = s
                            seg_e[ns] = e
                            ns += 1
                    # insertion sort by start
                    for i in range(1, ns):
                        ks = seg_s[i]
                        ke = seg_e[i]
                        j = i - 1
                        while j >= 0 and seg_s[j] > ks:
                            seg_s[j + 1] = seg_s[j]
                            seg_e[j + 1] = seg_e[j]
                            j -= 1
                        seg_s[j + 1] = ks
                        seg_e[j + 1] = ke
                    prev_end = I32(-1)
                    for i in range(ns):
                        cs = seg_s[i]
                        if cs <= prev_end:
                            cs = prev_end + 1
                        ce = seg_e[i]
                        if cs <= ce:
                            total += ce - cs + 1
                            psum += prefix[y, ce + 1] - prefix[y, cs]
                        if ce > prev_end:
                            prev_end = ce

        out_valid[b] = valid
        out_slow[b] = slow
        out_psum[b] = psum
        out_count[b] = total
