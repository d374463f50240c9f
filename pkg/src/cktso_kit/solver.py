"""High-level solver: preprocess once, factor repeatedly, solve.

The preprocessed matrix is ``A_pre = Q (S_r P A S_c) Q^T`` where P is the
static-pivot row permutation, S_r/S_c the matching scalings and Q the
fill-reducing ordering; the factors satisfy ``A_pre[:, colperm] = L U``.
:class:`Solver` keeps those pieces together so callers work with A only.
"""

from __future__ import annotations

import time

import numpy as np

from .errors import DimensionError
from .factor import DEFAULT_EPS, FactorContext, factor_driver, factor_full, refactor
from .preprocess import METHODS, run_portfolio
from .preprocess.dissection import LEAF_SIZE
from .sparse import Permutation, SparseMatrix, permute
from .trisolve import (
    DEFAULT_MIN_NNZ,
    LOWER,
    UPPER,
    build_solve_plan,
    solve_lower_par,
    solve_lower_seq,
    solve_upper_par,
    solve_upper_seq,
)


def relative_residual(A: SparseMatrix, x, b) -> float:
    """``||A x - b||_inf / (||A||_inf ||x||_inf)``; 0 for a zero solution of a zero system."""
    r = np.abs(A.matvec(x) - b).max(initial=0.0)
    denom = A.norm_inf() * np.abs(x).max(initial=0.0)
    if denom == 0.0:
        return 0.0 if r == 0.0 else float("inf")
    return float(r / denom)


class Solver:
    """Sparse LU solver for a sequence of matrices sharing one pattern."""

    def __init__(self, A: SparseMatrix, n_threads: int = 1, eps: float = DEFAULT_EPS,
                 scaling: bool = True, min_dense_nnz: int = DEFAULT_MIN_NNZ,
                 leaf_size: int = LEAF_SIZE, methods=METHODS):
        self.A = A
        self.n = A.n
        self.n_threads = n_threads
        self.eps = eps
        self.scaling = scaling
        self.min_dense_nnz = min_dense_nnz
        self.leaf_size = leaf_size
        self.methods = tuple(methods)
        self.pre = None
        self.ctx = None
        self.lu = None
        self.plans = None
        self.times = {}
        self.last_outcome = None
        self.last_restart = np.zeros(0, np.int64)

    # -- phases ------------------------------------------------------------
    def analyze(self):
        t0 = time.perf_counter()
        self.pre = run_portfolio(self.A, self.scaling, self.methods, self.leaf_size)
        self.times["preprocess"] = time.perf_counter() - t0
        self._build_value_map()
        t0 = time.perf_counter()
        self.ctx = FactorContext(self.pre.A_pre, self.n_threads, self.eps)
        self.times["symbolic"] = time.perf_counter() - t0
        return self.pre

    def _build_value_map(self):
        pre = self.pre
        A = self.A
        ids = SparseMatrix(A.n, A.row_ptr, A.col_idx, np.arange(A.nnz, dtype=np.float64))
        ident = Permutation.identity(A.n)
        q = pre.chosen.sym_perm
        mapped = permute(permute(ids, pre.pivot.row_perm, ident), q, q)
        self._src = mapped.values.astype(np.int64)
        rows = mapped.row_indices()
        s = pre.pivot.scaling
        if pre.scaled:
            self._weight = s.row_scale[q.perm[rows]] * s.col_scale[q.perm[mapped.col_idx]]
        else:
            self._weight = None
        # right-hand side gather and solution scatter
        self._b_src = pre.pivot.row_perm.perm[q.perm]
        self._b_scale = s.row_scale[q.perm] if pre.scaled else None
        self._x_scale = s.col_scale[q.perm] if pre.scaled else None

    def preprocessed(self, A: SparseMatrix | None = None) -> SparseMatrix:
        """A_pre for new values of A (same pattern as the analyzed matrix)."""
        if self.pre is None:
            self.analyze()
        if A is None or A is self.A:
            return self.pre.A_pre
        if A.n != self.n or not (np.array_equal(A.row_ptr, self.A.row_ptr)
                                 and np.array_equal(A.col_idx, self.A.col_idx)):
            raise DimensionError("matrix pattern differs from the analyzed one")
        vals = A.values[self._src]
        if self._weight is not None:
            vals = vals * self._weight
        return self.pre.A_pre.with_values(vals)

    def factor(self, A: SparseMatrix | None = None, force_row: int = -1):
        """Factor A; after the first call reuse pivots through the fast path."""
        A_pre = self.preprocessed(A)
        t0 = time.perf_counter()
        if self.lu is None:
            self.lu = factor_full(A_pre, self.eps, ctx=self.ctx)
            self.last_outcome = None
            self.last_restart = np.zeros(0, np.int64)
        else:
            _, self.last_outcome, self.last_restart = factor_driver(
                A_pre, self.ctx, self.lu, force_row=force_row)
        self.times["factor"] = time.perf_counter() - t0
        return self.lu

    def factor_full(self, A: SparseMatrix | None = None):
        A_pre = self.preprocessed(A)
        t0 = time.perf_counter()
        self.lu = factor_full(A_pre, self.eps, ctx=self.ctx)
        self.plans = None
        self.times["factor"] = time.perf_counter() - t0
        return self.lu

    def refactor(self, A: SparseMatrix | None = None):
        A_pre = self.preprocessed(A)
        t0 = time.perf_counter()
        refactor(A_pre, self.lu, ctx=self.ctx)
        self.times["factor"] = time.perf_counter() - t0
        return self.lu

    def build_plans(self):
        t0 = time.perf_counter()
        self.plans = {
            LOWER: build_solve_plan(self.lu, LOWER, self.n_threads, min_nnz=self.min_dense_nnz),
            UPPER: build_solve_plan(self.lu, UPPER, self.n_threads, min_nnz=self.min_dense_nnz),
        }
        self.times["plan"] = time.perf_counter() - t0
        return self.plans

    def _plans_current(self):
        return (self.plans is not None
                and self.plans[LOWER].generation == self.lu.structure_generation)

    def solve(self, b, parallel: bool = False) -> np.ndarray:
        """Solve A x = b with the current factors."""
        if self.lu is None:
            self.factor()
        b = np.asarray(b, np.float64)
        if b.shape != (self.n,):
            raise DimensionError(f"right-hand side must have length {self.n}")
        v = b[self._b_src]
        if self._b_scale is not None:
            v = v * self._b_scale
        v = np.ascontiguousarray(v, np.float64)
        t0 = time.perf_counter()
        if parallel:
            if not self._plans_current():
                self.build_plans()
                t0 = time.perf_counter()
            solve_lower_par(self.plans[LOWER], self.lu, v)
            solve_upper_par(self.plans[UPPER], self.lu, v)
        else:
            solve_lower_seq(self.lu, v)
            solve_upper_seq(self.lu, v)
        self.times["solve"] = time.perf_counter() - t0
        x_pre = np.empty(self.n)
        x_pre[self.lu.colperm] = v
        if self._x_scale is not None:
            x_pre *= self._x_scale
        x = np.empty(self.n)
        x[self.pre.chosen.sym_perm.perm] = x_pre
        return x

    def close(self):
        if self.ctx is not None:
            self.ctx.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
