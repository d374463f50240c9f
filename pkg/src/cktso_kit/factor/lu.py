from __future__ import annotations

import numpy as np

from ..sparse import Permutation, SparseMatrix


class LUFactors:
    """Row-major L and U with column exchanges.

    ``A_pre[:, colperm] = L @ U`` where L carries the pivots on its diagonal
    and U has an explicit unit diagonal. Rows are addressed through
    ``*_start``/``*_len`` into shared pools so that a restarted row can be
    rewritten without moving its neighbours; :meth:`compact` repacks them.
    """

    def __init__(self, n, pattern: SparseMatrix, l_cap, u_cap):
        self.n = n
        self.pattern_ptr = pattern.row_ptr
        self.pattern_idx = pattern.col_idx
        self.l_start = np.zeros(n, np.int64)
        self.l_len = np.zeros(n, np.int64)
        self.l_cols = np.zeros(l_cap, np.int64)
        self.l_vals = np.zeros(l_cap)
        self.l_diag = np.zeros(n)
        self.u_start = np.zeros(n, np.int64)
        self.u_len = np.zeros(n, np.int64)
        self.u_cols = np.zeros(u_cap, np.int64)
        self.u_vals = np.zeros(u_cap)
        self.colperm = np.arange(n, dtype=np.int64)
        self.pos_of = np.arange(n, dtype=np.int64)
        # used lengths of the L and U pools
        self.tops = np.zeros(2, np.int64)
        self.structure_generation = 0
        # bumped whenever rows move inside the pools
        self.layout = 0
        self.flops = 0
        self._u_pos = None
        self._u_pos_gen = -1

    # -- bookkeeping -------------------------------------------------------
    @property
    def fill_nnz(self) -> int:
        """NNZ(L + U - I): strict L plus all of U (unit diagonal counted once)."""
        return int(self.l_len.sum() + self.u_len.sum())

    @property
    def pivot_cols(self) -> Permutation:
        return Permutation(self.colperm.copy())

    def same_pattern(self, A: SparseMatrix) -> bool:
        return (A.n == self.n
                and (A.row_ptr is self.pattern_ptr or np.array_equal(A.row_ptr, self.pattern_ptr))
                and (A.col_idx is self.pattern_idx or np.array_equal(A.col_idx, self.pattern_idx)))

    def grow(self, l_need=0, u_need=0):
        if l_need > len(self.l_cols):
            cap = max(l_need, 2 * len(self.l_cols))
            self.l_cols = np.concatenate([self.l_cols, np.zeros(cap - len(self.l_cols), np.int64)])
            self.l_vals = np.concatenate([self.l_vals, np.zeros(cap - len(self.l_vals))])
        if u_need > len(self.u_cols):
            cap = max(u_need, 2 * len(self.u_cols))
            self.u_cols = np.concatenate([self.u_cols, np.zeros(cap - len(self.u_cols), np.int64)])
            self.u_vals = np.concatenate([self.u_vals, np.zeros(cap - len(self.u_vals))])

    def compact(self):
        """Repack rows contiguously in row order, dropping dead pool space."""
        def pack(start, length, cols, vals):
            idx = _gather_index(start, length)
            new_start = np.zeros(self.n, np.int64)
            new_start[1:] = np.cumsum(length)[:-1]
            return new_start, cols[idx].copy(), vals[idx].copy()

        self.l_start, self.l_cols, self.l_vals = pack(self.l_start, self.l_len, self.l_cols, self.l_vals)
        self.u_start, self.u_cols, self.u_vals = pack(self.u_start, self.u_len, self.u_cols, self.u_vals)
        self.tops[0] = len(self.l_cols)
        self.tops[1] = len(self.u_cols)
        self.layout += 1
        self._u_pos = None

    def recount_flops(self) -> int:
        lc = _gather_index(self.l_start, self.l_len)
        self.flops = int(2 * (self.u_len[self.l_cols[lc]] - 1).sum() + (self.u_len - 1).sum())
        return self.flops

    def u_positions(self) -> np.ndarray:
        """``u_cols`` mapped to final positions; cached per structure."""
        if self._u_pos is None or self._u_pos_gen != self.structure_generation \
                or len(self._u_pos) != len(self.u_cols):
            self._u_pos = self.pos_of[self.u_cols]
            self._u_pos_gen = self.structure_generation
        return self._u_pos

    def row_L(self, i):
        s, k = self.l_start[i], self.l_len[i]
        return self.l_cols[s:s + k], self.l_vals[s:s + k]

    def row_U(self, i):
        """(positions, values) of U(i, :), diagonal first."""
        s, k = self.u_start[i], self.u_len[i]
        return self.pos_of[self.u_cols[s:s + k]], self.u_vals[s:s + k]

    # -- dense views for testing and diagnostics --------------------------
    def dense_L(self) -> np.ndarray:
        L = np.zeros((self.n, self.n))
        for i in range(self.n):
            c, v = self.row_L(i)
            L[i, c] = v
            L[i, i] = self.l_diag[i]
        return L

    def dense_U(self) -> np.ndarray:
        U = np.zeros((self.n, self.n))
        for i in range(self.n):
            c, v = self.row_U(i)
            U[i, c] = v
        return U

    def reconstruct(self) -> np.ndarray:
        """Dense A_pre rebuilt from the factors (column exchanges undone)."""
        LU = self.dense_L() @ self.dense_U()
        out = np.empty_like(LU)
        out[:, self.colperm] = LU
        return out

    def snapshot(self):
        """Values and structure copied out, for bitwise comparisons."""
        self_c = LUFactors.__new__(LUFactors)
        self_c.__dict__.update({k: (v.copy() if isinstance(v, np.ndarray) else v)
                                for k, v in self.__dict__.items()})
        self_c.pattern_ptr = self.pattern_ptr
        self_c.pattern_idx = self.pattern_idx
        return self_c

    def canonical(self):
        """Per-row (L cols, L vals, diag, U cols, U vals) with U sorted by column."""
        out = []
        for i in range(self.n):
            lc, lv = self.row_L(i)
            s, k = self.u_start[i], self.u_len[i]
            uc, uv = self.u_cols[s:s + k], self.u_vals[s:s + k]
            o = np.argsort(uc, kind="stable")
            out.append((lc.copy(), lv.copy(), self.l_diag[i], uc[o].copy(), uv[o].copy()))
        return out


def _gather_index(start, length):
    total = int(length.sum())
    if total == 0:
        return np.zeros(0, np.int64)
    offs = np.repeat(start - np.concatenate([[0], np.cumsum(length)[:-1]]), length)
    return np.arange(total, dtype=np.int64) + offs
