"""Sequential and plan-driven parallel triangular solves.

All solves work in place on a float64 vector indexed by factor row/position:
``solve_lower_*`` turns b into y with ``L y = b`` and ``solve_upper_*``
turns y into z with ``U z = y``. Mapping z back to matrix columns is the
caller's job (see :class:`cktso_kit.solver.Solver`).
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..factor.lu import LUFactors
from . import _kernels as K
from .plan import LOWER, UPPER, SolvePlan

_pools: dict = {}
_pools_lock = threading.Lock()


def _executor(n_threads) -> ThreadPoolExecutor:
    with _pools_lock:
        ex = _pools.get(n_threads)
        if ex is None:
            ex = _pools[n_threads] = ThreadPoolExecutor(n_threads, thread_name_prefix="solve")
        return ex


def _vector(v, n):
    if not isinstance(v, np.ndarray) or v.dtype != np.float64 or v.shape != (n,) \
            or not v.flags.c_contiguous or not v.flags.writeable:
        raise TypeError(f"solve vector must be a writeable contiguous float64 array of length {n}")
    return v


def solve_lower_seq(lu: LUFactors, v: np.ndarray) -> np.ndarray:
    _vector(v, lu.n)
    K.lower_rows(np.arange(lu.n, dtype=np.int64), lu.l_start, lu.l_len, lu.l_cols, lu.l_vals, lu.l_diag, v)
    return v


def solve_upper_seq(lu: LUFactors, v: np.ndarray) -> np.ndarray:
    _vector(v, lu.n)
    K.upper_rows(np.arange(lu.n - 1, -1, -1, dtype=np.int64), lu.u_start, lu.u_len,
                 lu.u_positions(), lu.u_vals, v)
    return v


def _run(n_threads, body):
    """Run ``body(tid, barrier)`` on every worker; re-raise the first error."""
    if n_threads == 1:
        body(0, None)
        return
    barrier = threading.Barrier(n_threads)

    def task(tid):
        try:
            body(tid, barrier)
        except threading.BrokenBarrierError:
            pass
        except BaseException:
            barrier.abort()
            raise

    for f in [_executor(n_threads).submit(task, t) for t in range(n_threads)]:
        f.result()


def _sync(barrier):
    if barrier is not None:
        barrier.wait()


def _lower_body(plan: SolvePlan, lu: LUFactors, v):
    ls, ll, lc, lv, ld = lu.l_start, lu.l_len, lu.l_cols, lu.l_vals, lu.l_diag
    seg = plan.seg

    def body(tid, barrier):
        for parts in plan.cluster:
            K.lower_rows(parts[tid], ls, ll, lc, lv, ld, v)
            _sync(barrier)
        if tid == 0:
            K.lower_rows(plan.remainder, ls, ll, lc, lv, ld, v)
        _sync(barrier)
        for parts, piece in zip(plan.slice_rows, plan.piece_rows):
            K.lower_head(parts[tid], seg, ls, lc, lv, v)
            _sync(barrier)
            if tid == 0:
                K.lower_tail(piece, seg, ls, ll, lc, lv, ld, v)
            _sync(barrier)
    return body


def _upper_body(plan: SolvePlan, lu: LUFactors, v):
    us, ul, up, uv = lu.u_start, lu.u_len, lu.u_positions(), lu.u_vals
    seg = plan.seg

    def body(tid, barrier):
        for parts, piece in zip(reversed(plan.slice_rows), reversed(plan.piece_rows)):
            K.upper_head(parts[tid], seg, us, up, uv, v)
            _sync(barrier)
            if tid == 0:
                K.upper_tail(piece, seg, us, ul, up, uv, v)
            _sync(barrier)
        for parts in plan.cluster:
            K.upper_rows(parts[tid], us, ul, up, uv, v)
            _sync(barrier)
        if tid == 0:
            K.upper_rows(plan.remainder, us, ul, up, uv, v)
    return body


def solve_lower_par(plan: SolvePlan, lu: LUFactors, v: np.ndarray, n_threads=None) -> np.ndarray:
    """Plan-driven forward substitution; same arithmetic as :func:`solve_lower_seq`."""
    if plan.target != LOWER:
        raise ValueError("plan was built for the upper factor")
    plan.check(lu)
    _vector(v, lu.n)
    _run(_threads(plan, n_threads), _lower_body(plan, lu, v))
    return v


def solve_upper_par(plan: SolvePlan, lu: LUFactors, v: np.ndarray, n_threads=None) -> np.ndarray:
    """Plan-driven back substitution: dense corner slices first, then the sparse block."""
    if plan.target != UPPER:
        raise ValueError("plan was built for the lower factor")
    plan.check(lu)
    _vector(v, lu.n)
    _run(_threads(plan, n_threads), _upper_body(plan, lu, v))
    return v


def _threads(plan, n_threads):
    if n_threads is not None and n_threads != plan.n_threads:
        raise ValueError(f"plan was built for {plan.n_threads} threads")
    return plan.n_threads
