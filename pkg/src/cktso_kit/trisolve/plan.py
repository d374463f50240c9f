"""Structure-adaptive partitioning of a triangular factor for parallel solves.

A factor is split at row ``P0`` into a sparse triangular block (rows above
``P0``) and a dense bottom-right corner. The corner, together with the
rectangular block beside it, is cut into ``m`` trapezoid slices with equal
nonzero counts. Each slice is a rectangular part, updated in parallel from
already solved entries, and a small triangular piece solved sequentially.
The sparse block is levelized: wide levels run in parallel, the narrow
remainder runs sequentially.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import StaleSymbolic
from ..factor.lu import LUFactors, _gather_index
from ..symbolic import DEFAULT_ALPHA, _group_levels, dividing_level
from . import _kernels as K

LOWER = "lower"
UPPER = "upper"

DEFAULT_FRAC = 0.70
DEFAULT_MIN_NNZ = 300_000
DEFAULT_SLICES = 8


@dataclass(eq=False)
class SolvePlan:
    target: str
    n: int
    n_threads: int
    generation: int
    positions: np.ndarray | None  # P0..Pm, or None when unpartitioned
    cluster: list  # per level: one row array per thread
    remainder: np.ndarray  # narrow levels, in solve order
    slice_rows: list  # per slice: one row array per thread (rectangular parts)
    piece_rows: list  # per slice: all rows in solve order (triangular pieces)
    seg: np.ndarray  # size of each row's first segment (rows of the corner only)
    layout: int
    setup_ops: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def partitioned(self) -> bool:
        return self.positions is not None

    @property
    def m(self) -> int:
        return len(self.positions) - 1 if self.partitioned else 0

    @property
    def p0(self):
        return int(self.positions[0]) if self.partitioned else None

    def check(self, lu: LUFactors):
        if self.generation != lu.structure_generation:
            raise StaleSymbolic(
                f"solve plan built for structure {self.generation}, factors are at {lu.structure_generation}")
        if self.n != lu.n:
            raise StaleSymbolic("solve plan built for a different factor size")
        if self.layout != lu.layout:
            # values were recomputed in a new storage order; only re-split rows
            if self.partitioned:
                _segment(self, lu)
            self.layout = lu.layout


def _row_weights(lu: LUFactors, target):
    return (lu.l_len + 1) if target == LOWER else lu.u_len.copy()


def find_p0(lu: LUFactors, target, frac=DEFAULT_FRAC, min_nnz=DEFAULT_MIN_NNZ):
    """Boundary of the smallest dense corner meeting both thresholds, or None.

    Scans from the last row upwards, growing the corner one row at a time,
    and stops at the first row where the corner holds at least ``frac`` of
    the factor's nonzeros and at least ``min_nnz`` of them.
    """
    n = lu.n
    if n == 0:
        return None
    w = _row_weights(lu, target)
    total = int(w.sum())
    if target == LOWER:
        # entries of column p and below, plus the diagonal of row p
        grow = np.bincount(_live(lu.l_start, lu.l_len, lu.l_cols), minlength=n) + 1
    else:
        grow = w
    corner = np.cumsum(grow[::-1])[::-1]
    need = max(frac * total, min_nnz)
    ok = np.flatnonzero(corner >= need)
    return int(ok[-1]) if len(ok) else None


def _live(start, length, cols):
    return cols[_gather_index(start, length)]


def balanced_cuts(weights, m):
    """Cut ``weights`` into ``m`` contiguous runs with near-equal sums.

    Returns m+1 boundaries. The spread between the heaviest and lightest run
    is at most the largest single weight: a lower bound L is lowered from the
    mean until the runs can all land in [L, L + max weight].
    """
    w = np.asarray(weights, np.int64)
    N = len(w)
    S = np.zeros(N + 1, np.int64)
    np.cumsum(w, out=S[1:])
    T = int(S[-1])
    r = int(w.max()) if N else 0
    tries = 0
    for L in range(T // m, max(T // m - r, 0) - 1, -1):
        tries += 1
        spans = _reach(S, m, L, r)
        if spans is not None:
            return _backtrack(S, spans, L, r), tries
    # not reached for positive weights; fall back to nearest-target cuts
    targets = np.arange(m + 1) * T / m
    cuts = np.searchsorted(S, targets)
    cuts[0], cuts[-1] = 0, N
    return np.maximum.accumulate(cuts), tries


def _reach(S, m, L, r):
    a = b = 0
    spans = [(0, 0)]
    for _ in range(m):
        lo = int(np.searchsorted(S, S[a] + L, "left"))
        hi = int(np.searchsorted(S, S[b] + L + r, "right")) - 1
        if lo > hi:
            return None
        a, b = lo, hi
        spans.append((a, b))
    N = len(S) - 1
    return spans if a <= N <= b else None


def _backtrack(S, spans, L, r):
    m = len(spans) - 1
    cuts = np.zeros(m + 1, np.int64)
    cuts[m] = len(S) - 1
    for k in range(m - 1, 0, -1):
        a, b = spans[k]
        hi_val = S[cuts[k + 1]] - L
        j = int(np.searchsorted(S, hi_val, "right")) - 1
        cuts[k] = min(j, b)
    return cuts


def _split_by_weight(rows, w, k):
    """Contiguous split of ``rows`` into k parts of similar total weight."""
    if k == 1 or len(rows) == 0:
        return [rows] + [rows[:0]] * (k - 1)
    c = np.cumsum(w)
    cut = np.searchsorted(c, c[-1] * np.arange(1, k) / k, "left")
    return np.split(rows, np.minimum(cut + 1, len(rows)))


def _segment(plan: SolvePlan, lu: LUFactors):
    """Split every corner row around its slice boundary, in place."""
    pos = plan.positions
    n = lu.n
    rows = np.arange(pos[0], n, dtype=np.int64)
    k = np.searchsorted(pos, rows, "right")  # slice index, 1-based
    if plan.target == LOWER:
        first = lu.l_start[rows]
        last = first + lu.l_len[rows]
        key = lu.l_cols.copy()
        seg = K.partition_rows(rows, first, last, key, lu.l_cols, lu.l_vals, pos[k - 1], True)
    else:
        first = lu.u_start[rows] + 1
        last = lu.u_start[rows] + lu.u_len[rows]
        key = lu.u_positions()
        seg = K.partition_rows(rows, first, last, key, lu.u_cols, lu.u_vals, pos[k], False)
    full = np.zeros(n, np.int64)
    full[rows] = seg
    plan.seg = full
    return int((last - first).sum())


def build_solve_plan(lu: LUFactors, target=LOWER, n_threads=1, frac=DEFAULT_FRAC,
                     min_nnz=DEFAULT_MIN_NNZ, m=DEFAULT_SLICES, alpha=DEFAULT_ALPHA) -> SolvePlan:
    """Partition one factor for :func:`solve_lower_par` / :func:`solve_upper_par`.

    Reorders entries inside the dense rows of the factor (never their set).
    ``setup_ops`` counts the array elements the setup touched.
    """
    if target not in (LOWER, UPPER):
        raise ValueError(f"target must be {LOWER!r} or {UPPER!r}")
    if n_threads < 1 or m < 1:
        raise ValueError("n_threads and m must be positive")
    n = lu.n
    ops = 2 * n + (int(lu.l_len.sum()) if target == LOWER else int(lu.u_len.sum()))
    p0 = find_p0(lu, target, frac, min_nnz)
    positions = None
    slice_rows, piece_rows = [], []
    if p0 is not None:
        w = _row_weights(lu, target)[p0:]
        mm = min(m, n - p0)
        cuts, tries = balanced_cuts(w, mm)
        ops += len(w) + tries * mm
        positions = (cuts + p0).astype(np.int64)
    n_sparse = n if positions is None else int(positions[0])

    # levels of the sparse block
    if target == LOWER:
        level = K.sparse_levels(n_sparse, False, lu.l_start, lu.l_len, 0, lu.l_cols)
        wrow = lu.l_len + 1
    else:
        level = K.sparse_levels(n_sparse, True, lu.u_start, lu.u_len, 1, lu.u_positions())
        wrow = lu.u_len.copy()
    ops += n_sparse + int(wrow[:n_sparse].sum())
    cluster, remainder = [], np.zeros(0, np.int64)
    if n_sparse:
        lv = _group_levels(level)
        div = dividing_level(lv, n_threads, alpha)
        for k in range(div):
            rows = lv.level(k)
            if target == UPPER:
                rows = rows[::-1]
            cluster.append(_split_by_weight(rows, wrow[rows], n_threads))
        remainder = np.sort(lv.nodes[lv.level_ptr[div]:])
        if target == UPPER:
            remainder = remainder[::-1].copy()

    plan = SolvePlan(target, n, n_threads, lu.structure_generation, positions, cluster,
                     remainder, slice_rows, piece_rows, np.zeros(n, np.int64), lu.layout)
    if positions is not None:
        ops += _segment(plan, lu)
        seg = plan.seg
        for k in range(1, len(positions)):
            rows = np.arange(positions[k - 1], positions[k], dtype=np.int64)
            if target == LOWER:
                rect_w = seg[rows]
            else:
                rows = rows[::-1].copy()
                rect_w = seg[rows]
            slice_rows.append(_split_by_weight(rows, rect_w + 1, n_threads))
            piece_rows.append(rows)
        ops += n - n_sparse
    plan.setup_ops = ops
    plan.stats = {
        "partitioned": plan.partitioned,
        "p0": plan.p0,
        "m": plan.m,
        "cluster_levels": len(cluster),
        "remainder_rows": int(len(remainder)),
    }
    return plan
