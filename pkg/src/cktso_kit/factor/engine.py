"""Numeric factorization: full, re-factorization, fast factor and tail.

The first factorization of a pattern goes through :func:`factor_full`.
Later factorizations of matrices with the same pattern call
:func:`factor_driver`, which first tries the previous pivot order with a
pivot check (:func:`fast_factor`) and, if some row fails, recomputes only
the failing rows and their elimination-tree ancestors with full pivoting
(:func:`tail_factor`).
"""

from __future__ import annotations

import itertools
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericallySingular, StaleSymbolic, ZeroPivot, ZeroRow
from ..sparse import SparseMatrix
from ..symbolic import (
    DEFAULT_ALPHA,
    NONE,
    build_etree,
    dividing_level,
    levelize_egraph,
    levelize_etree,
    restart_rows,
)
from . import _kernels as K
from .lu import LUFactors

DEFAULT_EPS = 1e-3

_WAIT = 1e-3

COMPLETED = "completed"
INTERRUPTED = "interrupted"


@dataclass(frozen=True, eq=False)
class FactorOutcome:
    status: str
    failed_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    finished: np.ndarray | None = None

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED


class _Workspace:
    """Per-thread dense accumulator and DFS scratch."""

    def __init__(self, n):
        self.x = np.zeros(n)
        self.mark = np.zeros(n, np.int64)
        self.rmark = np.zeros(n, np.int64)
        self.used = np.zeros(n, np.int64)
        self.pat = np.zeros(max(n, 1), np.int64)
        self.stack = np.zeros(max(n, 1), np.int64)
        self.reach = np.zeros(max(n, 1), np.int64)
        self.st = np.zeros(1, np.int64)
        self.stamp = 0

    def next_stamp(self):
        self.stamp += 1
        return self.stamp


class FactorContext:
    """Everything the factor kernels share across repeated factorizations.

    Holds the elimination tree of the pattern, the dependency levels of the
    current factors (rebuilt only when their structure changes), per-thread
    workspaces, the per-row finish flags and the interruption state.
    ``symbolic_work`` counts dependency-level rebuilds.

    Concurrent column exchanges are only safe when every row holds its own
    diagonal structurally (which static pivoting guarantees); without that,
    ``parallel_pivot`` is False and pivoting runs on one thread.
    """

    def __init__(self, A_pre: SparseMatrix, n_threads: int = 1, eps: float = DEFAULT_EPS,
                 alpha: float = DEFAULT_ALPHA):
        if n_threads < 1:
            raise ValueError("n_threads must be at least 1")
        if not 0.0 < eps <= 1.0:
            raise ValueError("eps must lie in (0, 1]")
        self.n = A_pre.n
        self.n_threads = int(n_threads)
        self.eps = float(eps)
        self.alpha = float(alpha)
        self.etree = build_etree(A_pre)
        self.parallel_pivot = self.n_threads > 1 and A_pre.has_full_diagonal()
        self.etree_levels = levelize_etree(self.etree)
        self.etree_dividing = dividing_level(self.etree_levels, self.n_threads, self.alpha)
        self.egraph = None
        self.dividing = 0
        self.symbolic_work = 0
        self.finish = np.zeros(self.n, np.uint8)
        self.failed = np.zeros(self.n, np.uint8)
        self.workspaces = [_Workspace(self.n) for _ in range(self.n_threads)]
        self._pool = None
        self._lock = threading.Lock()
        self._progress = threading.Condition(threading.Lock())
        self._reset_flags()

    # -- shared state ----------------------------------------------------------
    def _reset_flags(self):
        self.interrupted = False
        self.stop = False
        self.error = None
        self.grow_need = None

    def wait_progress(self):
        # Python threads share one interpreter lock, so a bare spin starves the
        # thread being waited on; block briefly until some row is stored.
        with self._progress:
            self._progress.wait(_WAIT)

    def notify_progress(self):
        with self._progress:
            self._progress.notify_all()

    def executor(self) -> ThreadPoolExecutor:
        if self._pool is None:
            self._pool = ThreadPoolExecutor(self.n_threads, thread_name_prefix="factor")
        return self._pool

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def run_threads(self, fn, n_tasks=None):
        """Run ``fn(tid)`` on every worker and wait; re-raise the first error."""
        n_tasks = self.n_threads if n_tasks is None else n_tasks
        if n_tasks == 1:
            fn(0)
        else:
            for f in [self.executor().submit(fn, t) for t in range(n_tasks)]:
                f.result()
        if self.error is not None:
            err, self.error = self.error, None
            raise err

    def _guard(self, fn):
        def run(tid):
            try:
                fn(tid)
            except BaseException as e:  # noqa: BLE001 - forwarded to the caller
                if self.error is None:
                    self.error = e
                self.stop = True
                self.interrupted = True
        return run

    def check_eps(self, eps):
        if eps is not None and float(eps) != self.eps:
            raise ValueError(f"eps is fixed at {self.eps} for this context")

    def refresh_egraph(self, lu: LUFactors) -> bool:
        """Rebuild the dependency levels if the factor structure moved on."""
        if self.egraph is not None and self.egraph.generation == lu.structure_generation:
            return False
        self.egraph = levelize_egraph(lu.l_start, lu.l_len, lu.l_cols, lu.structure_generation)
        self.dividing = dividing_level(self.egraph.levels, self.n_threads, self.alpha)
        self.symbolic_work += 1
        return True


def _chunks(rows, k):
    return [rows[t::k] for t in range(k)]


# -- full factorization with pivoting ---------------------------------------------

def _check_rows(A: SparseMatrix):
    empty = np.flatnonzero(np.diff(A.row_ptr) == 0)
    if len(empty):
        raise ZeroRow(int(empty[0]))


def _seq_pivot_rows(ctx: FactorContext, A: SparseMatrix, lu: LUFactors, rows):
    """Single-threaded pivoting factorization of ``rows`` with pool growth."""
    ws = ctx.workspaces[0]
    rows = np.ascontiguousarray(rows, np.int64)
    t = 0
    while True:
        r = K.factor_rows_seq(rows, t, ctx.eps, A.row_ptr, A.col_idx, A.values,
                              lu.colperm, lu.pos_of, lu.l_start, lu.l_len, lu.l_cols, lu.l_vals,
                              lu.l_diag, lu.u_start, lu.u_len, lu.u_cols, lu.u_vals, ctx.finish,
                              lu.tops, ws.stamp, ws.x, ws.mark, ws.rmark, ws.used, ws.pat,
                              ws.stack, ws.reach, ws.st)
        ws.stamp += len(rows) + 1
        if r == len(rows):
            return
        if r < -ctx.n:
            raise RuntimeError(f"row {-r - ctx.n - 1} met a dependency outside its elimination subtree")
        if r < 0:
            raise NumericallySingular(-r - 1)
        t = r
        lu.grow(lu.tops[0] + ctx.n, lu.tops[1] + ctx.n)


def _pivot_row(ctx: FactorContext, A: SparseMatrix, lu: LUFactors, ws: _Workspace, i, children):
    """Factor row i with pivoting from a worker thread.

    ``children`` lists the tree children that may still be running; until
    they finish, already-final dependencies are applied as they appear.
    Returns False if the run was stopped before the row was stored.
    """
    arp, aci = A.row_ptr, A.col_idx
    finish = ctx.finish
    s = ws.next_stamp()
    K.scatter_row(i, s, arp, aci, A.values, ws.x, ws.mark, ws.pat, ws.st)
    if children is not None and len(children):
        seen = -1
        while True:
            done = int(np.count_nonzero(finish[children]))
            if done == len(children):
                break
            if done != seen:
                seen = done
                nr = K.reach_rows(i, ws.next_stamp(), True, arp, aci, lu.u_start, lu.u_len, lu.u_cols,
                                  lu.pos_of, finish, ws.rmark, ws.stack, ws.reach)
                K.apply_rows(s, ws.reach, nr, lu.colperm, lu.u_start, lu.u_len, lu.u_cols, lu.u_vals,
                             ws.x, ws.mark, ws.pat, ws.st, ws.used)
            if ctx.stop:
                return False
            ctx.wait_progress()
    nr = K.reach_rows(i, ws.next_stamp(), False, arp, aci, lu.u_start, lu.u_len, lu.u_cols,
                      lu.pos_of, finish, ws.rmark, ws.stack, ws.reach)
    if nr < 0:
        raise RuntimeError(f"row {i} depends on an unfinished row outside its elimination subtree")
    K.apply_rows(s, ws.reach, nr, lu.colperm, lu.u_start, lu.u_len, lu.u_cols, lu.u_vals,
                 ws.x, ws.mark, ws.pat, ws.st, ws.used)
    piv, nu = K.choose_pivot(i, s, ctx.eps, lu.colperm, lu.pos_of, finish, ws.x, ws.mark, ws.pat, ws.st)
    if piv == -1:
        raise NumericallySingular(i)
    if piv < 0:
        raise RuntimeError(f"row {i} found a pivot candidate owned by a finished row")
    with ctx._lock:
        if ctx.stop:
            return False
        if lu.tops[0] + nr > len(lu.l_cols) or lu.tops[1] + nu > len(lu.u_cols):
            need = ctx.grow_need or (0, 0)
            ctx.grow_need = (max(need[0], nr), max(need[1], nu))
            ctx.stop = True
            return False
        m = K.commit_row(i, piv, ws.reach, nr, lu.tops[0], lu.tops[1], lu.colperm, lu.pos_of,
                         ws.x, ws.pat, ws.st, lu.l_start, lu.l_len, lu.l_cols, lu.l_vals, lu.l_diag,
                         lu.u_start, lu.u_len, lu.u_cols, lu.u_vals, finish)
        lu.tops[0] += nr
        lu.tops[1] += m
    ctx.notify_progress()
    return True


def _grow_after_stop(ctx: FactorContext, lu: LUFactors):
    nl, nu = ctx.grow_need
    lu.grow(lu.tops[0] + max(nl, ctx.n), lu.tops[1] + max(nu, ctx.n))
    ctx._reset_flags()


def _par_cluster_pivot(ctx, A, lu, levels, n_levels):
    """Tree levels below the dividing level, one fork/join per level."""
    for k in range(n_levels):
        todo = levels.level(k)
        while len(todo):
            parts = _chunks(todo, ctx.n_threads)

            def work(tid, parts=parts):
                ws = ctx.workspaces[tid]
                for i in parts[tid]:
                    if not _pivot_row(ctx, A, lu, ws, int(i), None):
                        return

            ctx.run_threads(ctx._guard(work))
            todo = todo[ctx.finish[todo] == 0]
            if len(todo):
                _grow_after_stop(ctx, lu)


def _par_pipeline_pivot(ctx, A, lu, rows):
    """Pipelined pivoting factorization of an ancestor-closed ascending row set."""
    rows = np.asarray(rows, np.int64)
    while len(rows):
        in_set = np.zeros(ctx.n, bool)
        in_set[rows] = True
        parent = ctx.etree.parent
        kids = {}
        for r in rows:
            p = parent[r]
            if p != NONE and in_set[p]:
                kids.setdefault(int(p), []).append(int(r))
        children = [np.array(kids.get(int(r), ()), np.int64) for r in rows]
        cursor = itertools.count()

        def work(tid):
            ws = ctx.workspaces[tid]
            while not ctx.stop:
                t = next(cursor)
                if t >= len(rows):
                    return
                if not _pivot_row(ctx, A, lu, ws, int(rows[t]), children[t]):
                    return

        ctx.run_threads(ctx._guard(work))
        rows = rows[ctx.finish[rows] == 0]
        if len(rows):
            _grow_after_stop(ctx, lu)


def factor_full(A_pre: SparseMatrix, eps: float = DEFAULT_EPS, n_threads: int = 1,
                ctx: FactorContext | None = None) -> LUFactors:
    """Factorization with threshold pivoting from scratch.

    One thread walks the rows in order. More threads factor the lower levels
    of the elimination tree level by level and pipeline the rest.
    """
    if ctx is None:
        ctx = FactorContext(A_pre, n_threads, eps)
    else:
        ctx.check_eps(eps)
    _check_rows(A_pre)
    n = A_pre.n
    cap = max(2 * A_pre.nnz, 4 * n, 1)
    lu = LUFactors(n, A_pre, cap, cap)
    ctx.finish[:] = 0
    ctx._reset_flags()
    if not ctx.parallel_pivot:
        _seq_pivot_rows(ctx, A_pre, lu, np.arange(n, dtype=np.int64))
    else:
        lv = ctx.etree_levels
        _par_cluster_pivot(ctx, A_pre, lu, lv, ctx.etree_dividing)
        rest = np.sort(lv.nodes[lv.level_ptr[ctx.etree_dividing]:])
        _par_pipeline_pivot(ctx, A_pre, lu, rest)
    lu.compact()
    lu.recount_flops()
    return lu


# -- fixed-pattern kernels ----------------------------------------------------------

def _require_pattern(A: SparseMatrix, lu: LUFactors):
    if not lu.same_pattern(A):
        raise ValueError("matrix pattern differs from the one the factors were built for")


def _fixed_rows(ctx, A, lu, rows, check, stop, force_row, ws):
    return K.refactor_rows(np.ascontiguousarray(rows, np.int64), check, stop, ctx.eps, force_row,
                           A.row_ptr, A.col_idx, A.values, lu.colperm,
                           lu.l_start, lu.l_len, lu.l_cols, lu.l_vals, lu.l_diag,
                           lu.u_start, lu.u_len, lu.u_cols, lu.u_vals, ws.x, ctx.finish, ctx.failed)


def _fixed_cluster(ctx, A, lu, check, force_row):
    """Levels below the dividing level; a failure ends the run after its level."""
    lv = ctx.egraph.levels
    for k in range(ctx.dividing):
        parts = _chunks(lv.level(k), ctx.n_threads)

        def work(tid, parts=parts):
            r = _fixed_rows(ctx, A, lu, parts[tid], check, False, force_row, ctx.workspaces[tid])
            if r != 0:
                ctx.interrupted = True

        ctx.run_threads(ctx._guard(work))
        if ctx.interrupted:
            return


def _fixed_pipeline(ctx, A, lu, check, force_row):
    lv = ctx.egraph.levels
    rows = lv.nodes[lv.level_ptr[ctx.dividing]:]
    if ctx.n_threads == 1:
        if _fixed_rows(ctx, A, lu, rows, check, True, force_row, ctx.workspaces[0]) != 0:
            ctx.interrupted = True
        return
    cursor = itertools.count()
    args = (ctx.eps, force_row, A.row_ptr, A.col_idx, A.values, lu.colperm,
            lu.l_start, lu.l_len, lu.l_cols, lu.l_vals, lu.l_diag,
            lu.u_start, lu.u_len, lu.u_cols, lu.u_vals)

    def work(tid):
        x = ctx.workspaces[tid].x
        while not ctx.interrupted:
            t = next(cursor)
            if t >= len(rows):
                return
            i = int(rows[t])
            k = 0
            while True:
                k = K.pipeline_step(i, k, check, *args, x, ctx.finish)
                if k == -1:
                    ctx.notify_progress()
                    break
                if k < -1:
                    ctx.failed[i] = 1
                    ctx.interrupted = True
                    ctx.notify_progress()
                    return
                if ctx.interrupted:
                    return
                ctx.wait_progress()

    ctx.run_threads(ctx._guard(work))


def _run_fixed(ctx, A, lu, check, force_row):
    ctx.refresh_egraph(lu)
    ctx.finish[:] = 0
    ctx.failed[:] = 0
    ctx._reset_flags()
    _fixed_cluster(ctx, A, lu, check, force_row)
    if not ctx.interrupted:
        _fixed_pipeline(ctx, A, lu, check, force_row)


def refactor(A_pre: SparseMatrix, lu: LUFactors, n_threads: int = 1,
             ctx: FactorContext | None = None) -> LUFactors:
    """Recompute values with the stored pattern and pivot order, no checks."""
    _require_pattern(A_pre, lu)
    if ctx is None:
        ctx = FactorContext(A_pre, n_threads)
    if ctx.n_threads == 1:
        ctx.finish[:] = 0
        ctx.failed[:] = 0
        r = _fixed_rows(ctx, A_pre, lu, np.arange(lu.n, dtype=np.int64), False, True, -1,
                        ctx.workspaces[0])
        if r < 0:
            raise ZeroPivot(-r - 1)
        return lu
    _run_fixed(ctx, A_pre, lu, False, -1)
    bad = np.flatnonzero(ctx.failed)
    if len(bad):
        raise ZeroPivot(int(bad[0]))
    return lu


def fast_factor(A_pre: SparseMatrix, ctx: FactorContext, lu: LUFactors, eps: float | None = None,
                n_threads: int | None = None, force_row: int = -1) -> FactorOutcome:
    """Re-factorization with the previous pivots and a pivot check per row.

    ``force_row`` makes that row fail its check regardless of its values,
    which lets tests and benchmarks inject re-pivoting.
    """
    ctx.check_eps(eps)
    if n_threads is not None and n_threads != ctx.n_threads:
        raise ValueError(f"context runs {ctx.n_threads} threads")
    _require_pattern(A_pre, lu)
    if ctx.egraph is None:
        ctx.refresh_egraph(lu)
    ctx.egraph.check(lu.structure_generation)
    _run_fixed(ctx, A_pre, lu, True, int(force_row))
    failed = np.flatnonzero(ctx.failed).astype(np.int64)
    if len(failed):
        return FactorOutcome(INTERRUPTED, failed, ctx.finish.astype(bool))
    return FactorOutcome(COMPLETED, failed, None)


def tail_factor(A_pre: SparseMatrix, ctx: FactorContext, lu: LUFactors, restart,
                eps: float | None = None, n_threads: int | None = None) -> LUFactors:
    """Recompute ``restart`` rows with full symbolic prediction and pivoting.

    Rows outside ``restart`` must be finished and final. The structure
    generation moves on only if some row's pattern or pivot changed.
    """
    ctx.check_eps(eps)
    if n_threads is not None and n_threads != ctx.n_threads:
        raise ValueError(f"context runs {ctx.n_threads} threads")
    restart = np.unique(np.asarray(restart, np.int64))
    if len(restart) == 0:
        return lu
    _require_pattern(A_pre, lu)
    old = (lu.l_start.copy(), lu.l_len.copy(), lu.u_start.copy(), lu.u_len.copy())
    # room for the restarted rows to come back a little larger
    lu.grow(lu.tops[0] + int(1.25 * old[1][restart].sum()) + len(restart),
            lu.tops[1] + int(1.25 * old[3][restart].sum()) + len(restart))
    ctx.finish[:] = 1
    ctx.finish[restart] = 0
    ctx._reset_flags()
    if not ctx.parallel_pivot:
        _seq_pivot_rows(ctx, A_pre, lu, restart)
    else:
        _par_pipeline_pivot(ctx, A_pre, lu, restart)
    changed = not (
        np.array_equal(lu.u_cols[old[2][restart]], lu.u_cols[lu.u_start[restart]])
        and K.same_rows(restart, old[0], old[1], lu.l_start, lu.l_len, lu.l_cols, np.zeros(lu.n, np.int64))
        and K.same_rows(restart, old[2], old[3], lu.u_start, lu.u_len, lu.u_cols, np.zeros(lu.n, np.int64)))
    lu.compact()
    lu.recount_flops()
    if changed:
        lu.structure_generation += 1
    return lu


def factor_driver(A_pre: SparseMatrix, ctx: FactorContext, lu: LUFactors, eps: float | None = None,
                  n_threads: int | None = None, force_row: int = -1):
    """Fast factor, then tail factorization of the restart rows if needed.

    Returns ``(lu, outcome, restart)`` where ``restart`` is the list of rows
    that were recomputed with pivoting (empty on the fast path).
    """
    ctx.refresh_egraph(lu)
    outcome = fast_factor(A_pre, ctx, lu, eps, n_threads, force_row)
    restart = np.zeros(0, np.int64)
    if not outcome.completed:
        restart = restart_rows(ctx.etree, outcome.finished)
        tail_factor(A_pre, ctx, lu, restart, eps, n_threads)
        ctx.refresh_egraph(lu)
    return lu, outcome, restart
