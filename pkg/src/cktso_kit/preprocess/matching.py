"""Static pivoting: maximum-product bipartite matching with dual scaling.

Rows are matched to columns by successive shortest augmenting paths
(Dijkstra on reduced costs) over the cost

    c(i, j) = log(max_k |a(i, k)|) - log|a(i, j)|,

so a minimum-cost perfect matching maximises the product of the matched
magnitudes. The dual potentials u (rows) and v (columns) certify
optimality and give the scaling ``exp(u_i) / rowmax_i`` and ``exp(v_j)``
under which matched entries have magnitude one and all others at most one.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from ..errors import StructurallySingular
from ..sparse import Permutation, ScalingPair, SparseMatrix


@dataclass(frozen=True, eq=False)
class StaticPivotResult:
    row_perm: Permutation
    scaling: ScalingPair
    matched: np.ndarray
    log_product: float


def _costs(A: SparseMatrix):
    absval = np.abs(A.values)
    usable = absval > 0
    rowmax = np.zeros(A.n)
    r = A.row_indices()
    np.maximum.at(rowmax, r[usable], absval[usable])
    cost = np.full(A.nnz, np.inf)
    with np.errstate(divide="ignore"):
        cost[usable] = np.log(rowmax[r[usable]]) - np.log(absval[usable])
    return cost, rowmax


def max_weight_matching(A: SparseMatrix, want_scaling: bool = True) -> StaticPivotResult:
    n = A.n
    cost, rowmax = _costs(A)
    rp, ci = A.row_ptr, A.col_idx
    if np.any(rowmax == 0):
        bad = int(np.flatnonzero(rowmax == 0)[0])
        raise StructurallySingular(f"row {bad} has no nonzero entry")

    u = np.zeros(n)  # the row maximum has cost 0, so min_j c(i, j) = 0
    v = np.full(n, np.inf)
    r = A.row_indices()
    finite = np.isfinite(cost)
    np.minimum.at(v, ci[finite], cost[finite])
    if np.any(np.isinf(v)):
        bad = int(np.flatnonzero(np.isinf(v))[0])
        raise StructurallySingular(f"column {bad} has no nonzero entry")

    col_of_row = np.full(n, -1, np.int64)
    row_of_col = np.full(n, -1, np.int64)
    # cheap start: tight edges, first come first served
    for i in range(n):
        for p in range(rp[i], rp[i + 1]):
            j = ci[p]
            if row_of_col[j] < 0 and np.isfinite(cost[p]) and cost[p] - u[i] - v[j] <= 0.0:
                col_of_row[i] = j
                row_of_col[j] = i
                break

    dist = np.full(n, np.inf)
    for s in range(n):
        if col_of_row[s] >= 0:
            continue
        _augment(s, rp, ci, cost, u, v, col_of_row, row_of_col, dist)

    perm = Permutation(row_of_col)
    rows = perm.perm
    logp = float(np.sum(np.log(np.abs(_matched_values(A, col_of_row)))))
    if want_scaling:
        # u and v are known only up to an additive constant; centre them to
        # keep the scale factors near one.
        shift = 0.5 * (np.mean(v) - np.mean(u - np.log(rowmax)))
        row_scale = np.exp(u - np.log(rowmax) + shift)[rows]
        col_scale = np.exp(v - shift)
        scaling = ScalingPair(row_scale, col_scale)
    else:
        scaling = ScalingPair.ones(n)
    return StaticPivotResult(perm, scaling, np.ones(n, bool), logp)


def _matched_values(A, col_of_row):
    out = np.empty(A.n)
    for i in range(A.n):
        cols, vals = A.row(i)
        out[i] = vals[np.searchsorted(cols, col_of_row[i])]
    return out


def _augment(s, rp, ci, cost, u, v, col_of_row, row_of_col, dist):
    """Grow a shortest-path tree from free row ``s`` and flip the found path."""
    dist[:] = np.inf
    pred_row = {}
    done = []
    heap = []

    final = set()

    def relax(i, base):
        for p in range(rp[i], rp[i + 1]):
            c = cost[p]
            if c == np.inf:
                continue
            j = ci[p]
            if j in final:
                continue
            # reduced costs are >= 0 in exact arithmetic; clamp rounding noise
            d = base + max(c - u[i] - v[j], 0.0)
            if d < dist[j]:
                dist[j] = d
                pred_row[j] = i
                heapq.heappush(heap, (d, j))

    relax(s, 0.0)
    end = -1
    while heap:
        d, j = heapq.heappop(heap)
        if j in final or d > dist[j]:
            continue
        final.add(j)
        done.append(j)
        if row_of_col[j] < 0:
            end = j
            break
        relax(row_of_col[j], d)
    if end < 0:
        raise StructurallySingular(f"no augmenting path from row {s}: matrix is structurally singular")

    D = dist[end]
    u[s] += D
    for j in done:
        if j == end:
            continue
        i = row_of_col[j]
        v[j] -= D - dist[j]
        u[i] += D - dist[j]
    j = end
    while True:
        i = pred_row[j]
        prev = col_of_row[i]
        col_of_row[i] = j
        row_of_col[j] = i
        if i == s:
            break
        j = prev
