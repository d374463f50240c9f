from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from ..sparse import Permutation, SparseMatrix, apply_scaling, permute, symmetrized_pattern
from .dissection import LEAF_SIZE, order_nd_cmd
from .fill import symbolic_fill_count
from .matching import StaticPivotResult, max_weight_matching
from .ordering import order_amd, order_amf

METHODS = ("AMD", "AMF", "ND_CMD")


@dataclass(frozen=True, eq=False)
class OrderingCandidate:
    method: str
    sym_perm: Permutation
    fill_nnz: int
    flops: int
    seconds: float = 0.0


@dataclass(frozen=True, eq=False)
class PreprocessResult:
    chosen: OrderingCandidate
    pivot: StaticPivotResult
    A_pre: SparseMatrix
    candidates: tuple
    scaled: bool

    @property
    def col_perm(self) -> Permutation:
        return self.chosen.sym_perm

    @property
    def row_perm(self) -> Permutation:
        """Row permutation taking A to A_pre (static pivot then ordering)."""
        return self.chosen.sym_perm.compose(self.pivot.row_perm)


def static_pivot(A: SparseMatrix, want_scaling: bool = True):
    piv = max_weight_matching(A, want_scaling)
    A1 = permute(A, piv.row_perm, Permutation.identity(A.n))
    if want_scaling:
        A1 = apply_scaling(A1, piv.scaling)
    return piv, A1


def run_method(method: str, A1: SparseMatrix, pattern=None, leaf_size=LEAF_SIZE) -> OrderingCandidate:
    """Order the pivoted matrix ``A1`` with one method and count its fill."""
    t0 = time.perf_counter()
    if pattern is None:
        pattern = symmetrized_pattern(A1)
    if method == "AMD":
        q = order_amd(pattern)
    elif method == "AMF":
        q = order_amf(pattern)
    elif method == "ND_CMD":
        q = order_nd_cmd(pattern, leaf_size)
    else:
        raise ValueError(f"unknown ordering method {method!r}")
    fill, flops = symbolic_fill_count(A1, q)
    return OrderingCandidate(method, q, fill, flops, time.perf_counter() - t0)


def select(candidates) -> OrderingCandidate:
    return min(candidates, key=lambda c: (c.fill_nnz, c.flops, METHODS.index(c.method)))


def run_portfolio(A: SparseMatrix, want_scaling: bool = True, methods=METHODS,
                  leaf_size: int = LEAF_SIZE) -> PreprocessResult:
    """Static pivoting, then all orderings concurrently; keep the least fill."""
    piv, A1 = static_pivot(A, want_scaling)
    pattern = symmetrized_pattern(A1)
    with ThreadPoolExecutor(max_workers=len(methods), thread_name_prefix="ordering") as ex:
        futures = [ex.submit(run_method, m, A1, pattern, leaf_size) for m in methods]
        candidates = tuple(f.result() for f in futures)
    best = select(candidates)
    A_pre = permute(A1, best.sym_perm, best.sym_perm)
    return PreprocessResult(best, piv, A_pre, candidates, want_scaling)
