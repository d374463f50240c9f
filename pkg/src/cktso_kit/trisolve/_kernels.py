"""Compiled triangular-solve kernels.

Lower rows hold row indices in ``l_cols``; upper rows are read through
``upos`` (U entries mapped to positions) and start with the unit diagonal.
A row's entries can be split into a first segment of ``seg[i]`` entries and
the remainder; solving the two pieces in turn performs exactly the same
floating-point operations as one sweep over the row.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True)
def lower_rows(rows, l_start, l_len, l_cols, l_vals, l_diag, y):
    for t in range(len(rows)):
        i = rows[t]
        s = y[i]
        for q in range(l_start[i], l_start[i] + l_len[i]):
            s -= l_vals[q] * y[l_cols[q]]
        y[i] = s / l_diag[i]


@nb.njit(cache=True, nogil=True)
def lower_head(rows, seg, l_start, l_cols, l_vals, y):
    """First segment only; the partial sum stays in ``y``."""
    for t in range(len(rows)):
        i = rows[t]
        s = y[i]
        for q in range(l_start[i], l_start[i] + seg[i]):
            s -= l_vals[q] * y[l_cols[q]]
        y[i] = s


@nb.njit(cache=True, nogil=True)
def lower_tail(rows, seg, l_start, l_len, l_cols, l_vals, l_diag, y):
    for t in range(len(rows)):
        i = rows[t]
        s = y[i]
        for q in range(l_start[i] + seg[i], l_start[i] + l_len[i]):
            s -= l_vals[q] * y[l_cols[q]]
        y[i] = s / l_diag[i]


@nb.njit(cache=True, nogil=True)
def upper_rows(rows, u_start, u_len, upos, u_vals, x):
    for t in range(len(rows)):
        i = rows[t]
        s = x[i]
        for q in range(u_start[i] + 1, u_start[i] + u_len[i]):
            s -= u_vals[q] * x[upos[q]]
        x[i] = s


@nb.njit(cache=True, nogil=True)
def upper_head(rows, seg, u_start, upos, u_vals, x):
    for t in range(len(rows)):
        i = rows[t]
        s = x[i]
        for q in range(u_start[i] + 1, u_start[i] + 1 + seg[i]):
            s -= u_vals[q] * x[upos[q]]
        x[i] = s


@nb.njit(cache=True, nogil=True)
def upper_tail(rows, seg, u_start, u_len, upos, u_vals, x):
    for t in range(len(rows)):
        i = rows[t]
        s = x[i]
        for q in range(u_start[i] + 1 + seg[i], u_start[i] + u_len[i]):
            s -= u_vals[q] * x[upos[q]]
        x[i] = s


@nb.njit(cache=True, nogil=True)
def partition_rows(rows, first, last, key, cols, vals, cut_of, front_low):
    """One quicksort partition step per row, in place.

    Entries ``first[t]..last[t]`` of ``rows[t]`` are split around
    ``cut_of[t]``: with ``front_low`` keys below the cut move to the front,
    otherwise keys at or above it do. ``key`` is permuted along with
    ``cols``/``vals``. Returns the size of the front segment per row.
    """
    seg = np.zeros(len(rows), np.int64)
    for t in range(len(rows)):
        lo = first[t]
        hi = last[t] - 1
        cut = cut_of[t]
        while True:
            while lo <= hi and ((key[lo] < cut) == front_low):
                lo += 1
            while lo <= hi and ((key[hi] < cut) != front_low):
                hi -= 1
            if lo >= hi:
                break
            key[lo], key[hi] = key[hi], key[lo]
            cols[lo], cols[hi] = cols[hi], cols[lo]
            vals[lo], vals[hi] = vals[hi], vals[lo]
            lo += 1
            hi -= 1
        seg[t] = lo - first[t]
    return seg


@nb.njit(cache=True)
def sparse_levels(n_rows, descending, starts, lens, skip, cols):
    """Dependency levels of rows [0, n_rows) of a triangular factor.

    ``cols`` holds positions; for the upper factor rows are visited from
    the bottom and entries at or beyond ``n_rows`` are already solved.
    ``skip`` is 1 for the upper factor's leading diagonal entry.
    """
    level = np.zeros(n_rows, np.int64)
    for t in range(n_rows):
        i = n_rows - 1 - t if descending else t
        best = -1
        for q in range(starts[i] + skip, starts[i] + lens[i]):
            j = cols[q]
            if j < n_rows and level[j] > best:
                best = level[j]
        level[i] = best + 1
    return level
