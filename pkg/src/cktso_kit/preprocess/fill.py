"""Pivot-free symbolic up-looking factorization: exact fill and flop counts."""

from __future__ import annotations

import numba as nb
import numpy as np

from ..errors import ZeroDiagonal
from ..sparse import Permutation, SparseMatrix, symmetric_permute


@nb.njit(cache=True, nogil=True)
def _symbolic_counts(n, rp, ci):
    cap = max(16, 2 * len(ci))
    u_idx = np.empty(cap, np.int64)
    u_ptr = np.zeros(n + 1, np.int64)
    mark = np.full(n, -1, np.int64)
    seen = np.full(n, -1, np.int64)
    stack = np.empty(n, np.int64)
    row_cols = np.empty(n, np.int64)
    l_nnz = 0
    flops = 0
    for i in range(n):
        has_diag = False
        nu = 0
        nl = 0
        top = 0
        for p in range(rp[i], rp[i + 1]):
            c = ci[p]
            if c == i:
                has_diag = True
            if c >= i:
                if mark[c] != i:
                    mark[c] = i
                    row_cols[nu] = c
                    nu += 1
            elif seen[c] != i:
                seen[c] = i
                stack[top] = c
                top += 1
        if not has_diag:
            return -1 - i, 0, 0
        while top > 0:
            top -= 1
            j = stack[top]
            nl += 1
            flops += 2 * (u_ptr[j + 1] - u_ptr[j])
            for q in range(u_ptr[j], u_ptr[j + 1]):
                c = u_idx[q]
                if c < i:
                    if seen[c] != i:
                        seen[c] = i
                        stack[top] = c
                        top += 1
                elif mark[c] != i:
                    mark[c] = i
                    row_cols[nu] = c
                    nu += 1
        l_nnz += nl
        # store the off-diagonal part of U(i, :)
        need = u_ptr[i] + nu
        if need > len(u_idx):
            grown = np.empty(max(need, 2 * len(u_idx)), np.int64)
            grown[: u_ptr[i]] = u_idx[: u_ptr[i]]
            u_idx = grown
        k = u_ptr[i]
        for t in range(nu):
            if row_cols[t] != i:
                u_idx[k] = row_cols[t]
                k += 1
        u_ptr[i + 1] = k
        flops += k - u_ptr[i]
    return 0, l_nnz + u_ptr[n] + n, flops


def symbolic_fill_count(A: SparseMatrix, sym_perm: Permutation | None = None) -> tuple[int, int]:
    """Return ``(NNZ(L+U-I), flops)`` of a diagonal-pivot factorization of Q A Q^T.

    Flops count two per multiply-accumulate of the row updates plus one
    division per off-diagonal entry of U.
    """
    B = A if sym_perm is None else symmetric_permute(A, sym_perm)
    status, fill, flops = _symbolic_counts(B.n, B.row_ptr, B.col_idx)
    if status < 0:
        raise ZeroDiagonal(f"row {-1 - status} has no structural diagonal")
    return int(fill), int(flops)
