"""Row dependency analysis: elimination tree, elimination graph, levels.

In the up-looking (row-by-row) factorization row ``i`` needs row ``j`` exactly
when ``L(i, j)`` is nonzero. The elimination graph is that relation for one
concrete factor pattern; the elimination tree bounds it for every possible
sequence of column exchanges. The tree is the column elimination tree of
``A^T``: two rows interact when they share a column, so it is built from the
rows of ``A`` without forming ``A A^T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import StaleSymbolic
from .sparse import SparseMatrix

NONE = -1
DEFAULT_ALPHA = 2.0


@dataclass(frozen=True, eq=False)
class ETree:
    parent: np.ndarray
    postorder: np.ndarray

    @property
    def n(self):
        return len(self.parent)

    def is_ancestor(self, anc, node) -> bool:
        p = self.parent
        while node != NONE and node < anc:
            node = p[node]
        return node == anc

    def ancestors(self, node):
        out = []
        node = self.parent[node]
        while node != NONE:
            out.append(int(node))
            node = self.parent[node]
        return out


@dataclass(frozen=True, eq=False)
class Levelization:
    level_of: np.ndarray
    level_ptr: np.ndarray
    nodes: np.ndarray  # grouped by level, ascending row index inside a level

    @property
    def n_levels(self) -> int:
        return len(self.level_ptr) - 1

    def level(self, k) -> np.ndarray:
        return self.nodes[self.level_ptr[k]:self.level_ptr[k + 1]]

    def sizes(self) -> np.ndarray:
        return np.diff(self.level_ptr)


@dataclass(frozen=True, eq=False)
class EGraphView:
    """Levels of the exact dependency graph of one L pattern.

    No edges are stored; kernels read them straight from the rows of L.
    """

    levels: Levelization
    generation: int

    def check(self, generation):
        if generation != self.generation:
            raise StaleSymbolic(
                f"dependency view built for structure {self.generation}, factors are at {generation}")


@nb.njit(cache=True)
def _etree_rows(n, rp, ci):
    parent = np.full(n, -1, np.int64)
    ancestor = np.full(n, -1, np.int64)
    prev = np.full(n, -1, np.int64)
    for k in range(n):
        for p in range(rp[k], rp[k + 1]):
            i = prev[ci[p]]
            while i != -1 and i < k:
                nxt = ancestor[i]
                ancestor[i] = k
                if nxt == -1:
                    parent[i] = k
                i = nxt
            prev[ci[p]] = k
    return parent


def postorder(parent) -> np.ndarray:
    n = len(parent)
    children = [[] for _ in range(n)]
    roots = []
    for i in range(n):
        (children[parent[i]] if parent[i] != NONE else roots).append(i)
    out = []
    for r in roots:
        stack = [(r, 0)]
        while stack:
            v, k = stack.pop()
            if k < len(children[v]):
                stack.append((v, k + 1))
                stack.append((children[v][k], 0))
            else:
                out.append(v)
    return np.array(out, np.int64)


def build_etree(A: SparseMatrix) -> ETree:
    parent = _etree_rows(A.n, A.row_ptr, A.col_idx)
    return ETree(parent, postorder(parent))


def _group_levels(level_of) -> Levelization:
    n = len(level_of)
    n_levels = int(level_of.max()) + 1 if n else 0
    counts = np.bincount(level_of, minlength=n_levels)
    ptr = np.zeros(n_levels + 1, np.int64)
    np.cumsum(counts, out=ptr[1:])
    nodes = np.argsort(level_of, kind="stable").astype(np.int64)
    return Levelization(level_of, ptr, nodes)


def levelize_etree(t: ETree) -> Levelization:
    """Level of a node = height of its subtree (leaves are level 0)."""
    level = np.zeros(t.n, np.int64)
    for i in range(t.n):
        p = t.parent[i]
        if p != NONE and level[p] < level[i] + 1:
            level[p] = level[i] + 1
    return _group_levels(level)


@nb.njit(cache=True)
def _egraph_levels(n, starts, lens, cols):
    level = np.zeros(n, np.int64)
    for i in range(n):
        best = -1
        for q in range(starts[i], starts[i] + lens[i]):
            lv = level[cols[q]]
            if lv > best:
                best = lv
        level[i] = best + 1
    return level


def levelize_egraph(l_starts, l_lens, l_cols, generation=0) -> EGraphView:
    """Levels from a strictly-lower row pattern given as (start, length, cols)."""
    n = len(l_starts)
    level = _egraph_levels(n, np.asarray(l_starts), np.asarray(l_lens), np.asarray(l_cols))
    return EGraphView(_group_levels(level), generation)


def levelize_lower(L: SparseMatrix) -> EGraphView:
    """Convenience wrapper for a CSR lower-triangular pattern (diagonal ignored)."""
    r = L.row_indices()
    strict = L.col_idx < r
    cols = L.col_idx[strict]
    lens = np.bincount(r[strict], minlength=L.n)
    starts = np.zeros(L.n, np.int64)
    starts[1:] = np.cumsum(lens)[:-1]
    return levelize_egraph(starts, lens, cols)


def dividing_level(lv: Levelization, n_threads: int, alpha: float = DEFAULT_ALPHA) -> int:
    """First level holding fewer than ``n_threads * alpha`` nodes."""
    if n_threads < 1:
        raise ValueError("n_threads must be at least 1")
    small = np.flatnonzero(lv.sizes() < n_threads * alpha)
    return int(small[0]) if len(small) else lv.n_levels


@nb.njit(cache=True)
def _close_upwards(parent, need):
    # ancestors have larger indices, so one ascending sweep closes the set
    for i in range(len(parent)):
        if need[i] and parent[i] != -1:
            need[parent[i]] = True


def restart_rows(t: ETree, finished) -> np.ndarray:
    """Unfinished rows plus all their tree ancestors, ascending."""
    need = ~np.asarray(finished, bool)
    _close_upwards(t.parent, need)
    return np.flatnonzero(need).astype(np.int64)
