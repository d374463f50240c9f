"""Command-line benchmark and verification harness.

    cktso-kit analyze|factor|solve|bench <matrix.mtx | --gen SPEC> [options]

Each run writes one JSON report (schema 1) to standard output or ``--out``
and, unless ``--json`` is given, a short table to standard error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import SolverError
from .factor import DEFAULT_EPS, FactorContext, factor_driver, factor_full, fast_factor, refactor
from .generators import from_spec
from .mmio import read_matrix_market
from .preprocess import run_portfolio
from .solver import Solver, relative_residual
from .sparse import to_csr
from .trisolve import DEFAULT_MIN_NNZ

SCHEMA = 1
THREADS_ENV = "CKTSO_KIT_THREADS"


@dataclass
class RunReport:
    command: str
    matrix: str
    n: int
    nnz: int
    threads: int
    schema: int = SCHEMA
    orderings: list = field(default_factory=list)
    chosen: str | None = None
    fill_nnz: int | None = None
    flops: int | None = None
    density: float | None = None
    times: dict = field(default_factory=dict)
    residual: float | None = None
    repivot: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def set_ordering(self, pre):
        self.orderings = [
            {"method": c.method, "fill_nnz": int(c.fill_nnz), "flops": int(c.flops),
             "seconds": round(c.seconds, 6)}
            for c in pre.candidates
        ]
        self.chosen = pre.chosen.method
        self.fill_nnz = int(pre.chosen.fill_nnz)
        self.flops = int(pre.chosen.flops)
        self.density = self.flops / self.fill_nnz if self.fill_nnz else 0.0


def load_matrix(args):
    if args.gen:
        return from_spec(args.gen, args.seed)
    if not args.matrix:
        raise SolverError("give a Matrix Market file or --gen SPEC")
    return Path(args.matrix).stem, to_csr(read_matrix_market(args.matrix))


def _rhs(n, seed):
    return np.random.default_rng(seed).standard_normal(n)


def _timed(fn, *a, **kw):
    t0 = time.perf_counter()
    out = fn(*a, **kw)
    return out, time.perf_counter() - t0


# -- commands -----------------------------------------------------------------------

def cmd_analyze(args) -> RunReport:
    name, A = load_matrix(args)
    rep = RunReport("analyze", name, A.n, A.nnz, args.threads)
    pre, t = _timed(run_portfolio, A, not args.no_scaling)
    rep.set_ordering(pre)
    rep.times["preprocess"] = t
    return rep


def cmd_factor(args) -> RunReport:
    name, A = load_matrix(args)
    rep = RunReport("factor", name, A.n, A.nnz, args.threads)
    s = Solver(A, args.threads, args.eps, not args.no_scaling, args.min_dense_nnz)
    try:
        s.analyze()
        rep.set_ordering(s.pre)
        rep.times.update(s.times)
        A_pre = s.pre.A_pre
        lu, t_full = _timed(factor_full, A_pre, args.eps, ctx=s.ctx)
        s.lu = lu
        first = lu.snapshot()
        t = _run_mode(args.mode, A_pre, s.ctx, lu, t_full)
        rep.times["factor_full"] = t_full
        rep.times["factor"] = t
        rep.extra["mode"] = args.mode
        rep.extra["bitwise_equal_to_full"] = bool(
            np.array_equal(first.l_vals, lu.l_vals) and np.array_equal(first.u_vals, lu.u_vals)
            and np.array_equal(first.l_diag, lu.l_diag))
        rep.extra["factor_fill_nnz"] = lu.fill_nnz
        rep.extra["factor_flops"] = lu.flops
        if args.threads > 1:
            with FactorContext(A_pre, 1, args.eps) as c1:
                lu1, t1_full = _timed(factor_full, A_pre, args.eps, ctx=c1)
                t1 = _run_mode(args.mode, A_pre, c1, lu1, t1_full)
            rep.times["factor_1thread"] = t1
            rep.extra["speedup"] = t1 / t if t > 0 else None
        b = _rhs(A.n, args.seed)
        x = s.solve(b)
        rep.residual = relative_residual(A, x, b)
    finally:
        s.close()
    return rep


def _run_mode(mode, A_pre, ctx, lu, t_full):
    if mode == "full":
        return t_full
    if mode == "refactor":
        return _timed(refactor, A_pre, lu, ctx=ctx)[1]
    (out, t) = _timed(fast_factor, A_pre, ctx, lu)
    if not out.completed:
        raise SolverError(f"pivot check failed on unchanged values at rows {out.failed_rows.tolist()}")
    return t


def cmd_solve(args) -> RunReport:
    name, A = load_matrix(args)
    rep = RunReport("solve", name, A.n, A.nnz, args.threads)
    s = Solver(A, args.threads, args.eps, not args.no_scaling, args.min_dense_nnz)
    try:
        s.analyze()
        rep.set_ordering(s.pre)
        s.factor()
        rep.times.update(s.times)
        s.build_plans()
        rep.times["plan"] = s.times["plan"]
        rng = np.random.default_rng(args.seed)
        t_seq = t_par = 0.0
        worst = diff = 0.0
        for _ in range(args.nrhs):
            b = rng.standard_normal(A.n)
            x_seq = s.solve(b)
            t_seq += s.times["solve"]
            x_par = s.solve(b, parallel=True)
            t_par += s.times["solve"]
            worst = max(worst, relative_residual(A, x_seq, b), relative_residual(A, x_par, b))
            scale = np.abs(x_seq).max(initial=0.0)
            if scale > 0:
                diff = max(diff, float(np.abs(x_par - x_seq).max() / scale))
        rep.times["solve_seq"] = t_seq / args.nrhs
        rep.times["solve_par"] = t_par / args.nrhs
        rep.times.pop("solve", None)
        rep.residual = worst
        lo, up = s.plans["lower"], s.plans["upper"]
        rep.extra.update({
            "nrhs": args.nrhs,
            "par_vs_seq_max_rel_diff": diff,
            "partitioned": lo.partitioned,
            "m": lo.m,
            "p0": lo.p0,
            "upper_partitioned": up.partitioned,
            "upper_m": up.m,
            "upper_p0": up.p0,
        })
    finally:
        s.close()
    return rep


def bench_steps(s: Solver, A, iters=100, repivot_rate=0.0, perturb=0.01, seed=0, baselines=True):
    """Yield one record per emulated Newton iteration on an analyzed, factored solver.

    The random draws do not depend on ``repivot_rate``, so for one seed a
    higher rate re-pivots in a superset of the iterations of a lower rate.
    """
    if not 0.0 <= repivot_rate <= 1.0:
        raise ValueError("repivot rate must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    base = A.values
    for it in range(iters):
        noise = rng.uniform(-1.0, 1.0, A.nnz)
        u = rng.random()
        row = int(rng.integers(A.n))
        b = rng.standard_normal(A.n)
        forced = u < repivot_rate
        Ak = A.with_values(base * (1.0 + perturb * noise))
        A_pre = s.preprocessed(Ak)
        t0 = time.perf_counter()
        _, out, restart = factor_driver(A_pre, s.ctx, s.lu, force_row=row if forced else -1)
        t_drv = time.perf_counter() - t0
        x = s.solve(b)
        t_seq = s.times["solve"]
        x_par = s.solve(b, parallel=True)
        t_par = s.times["solve"]
        rec = {
            "iter": it,
            "forced_row": row if forced else None,
            "interrupted": not out.completed,
            "restart_size": int(len(restart)),
            "driver": t_drv,
            "solve_seq": t_seq,
            "solve_par": t_par,
            "residual": max(relative_residual(Ak, x, b), relative_residual(Ak, x_par, b)),
        }
        if baselines:
            ref_lu = s.lu.snapshot()
            rec["refactor"] = _timed(refactor, A_pre, ref_lu, ctx=s.ctx)[1]
            rec["full"] = _timed(factor_full, A_pre, s.eps, ctx=s.ctx)[1]
        yield rec


def bench_aggregate(recs, repivot_rate, perturb, seed):
    """Counts, restart sizes, worst residual and mean/min/max of every timing."""
    def stats(key):
        vals = [r[key] for r in recs if key in r]
        if not vals:
            return {"mean": None, "min": None, "max": None}
        return {"mean": float(np.mean(vals)), "min": float(min(vals)), "max": float(max(vals))}

    return {
        "iters": len(recs),
        "repivot_rate": repivot_rate,
        "perturb": perturb,
        "seed": seed,
        "interrupted": sum(r["interrupted"] for r in recs),
        "restart_sizes": [r["restart_size"] for r in recs if r["interrupted"]],
        "restart_rows_forced": [r["forced_row"] for r in recs if r["forced_row"] is not None],
        "max_residual": max((r["residual"] for r in recs), default=0.0),
        "times": {k: stats(k) for k in ("driver", "refactor", "full", "solve_seq", "solve_par")},
    }


def run_bench(A, threads=1, iters=100, repivot_rate=0.0, perturb=0.01, seed=0, eps=DEFAULT_EPS,
              scaling=True, min_dense_nnz=DEFAULT_MIN_NNZ, baselines=True, solver=None):
    """Newton-loop emulation: perturb values, factor through the driver, solve.

    Returns a dict of per-iteration records and aggregates.
    """
    if not 0.0 <= repivot_rate <= 1.0:
        raise ValueError("repivot rate must lie in [0, 1]")
    own = solver is None
    s = solver or Solver(A, threads, eps, scaling, min_dense_nnz)
    try:
        if s.pre is None:
            s.analyze()
        if s.lu is None:
            s.factor()
        recs = list(bench_steps(s, A, iters, repivot_rate, perturb, seed, baselines))
    finally:
        if own:
            s.close()
    return {"aggregate": bench_aggregate(recs, repivot_rate, perturb, seed), "records": recs}


def cmd_bench(args) -> RunReport:
    name, A = load_matrix(args)
    rep = RunReport("bench", name, A.n, A.nnz, args.threads)
    s = Solver(A, args.threads, args.eps, not args.no_scaling, args.min_dense_nnz)
    try:
        s.analyze()
        rep.set_ordering(s.pre)
        s.factor()
        rep.times.update(s.times)
        out = run_bench(A, iters=args.iters, repivot_rate=args.repivot_rate, perturb=args.perturb,
                        seed=args.seed, solver=s)
    finally:
        s.close()
    agg = out["aggregate"]
    rep.times.update({f"{k}_mean": v["mean"] for k, v in agg["times"].items()})
    rep.residual = agg["max_residual"]
    rep.repivot = {
        "rate": args.repivot_rate,
        "interrupted_runs": agg["interrupted"],
        "restart_sizes": agg["restart_sizes"],
        "forced_rows": agg["restart_rows_forced"],
    }
    rep.extra = {"iters": args.iters, "perturb": args.perturb, "timings": agg["times"]}
    return rep


COMMANDS = {"analyze": cmd_analyze, "factor": cmd_factor, "solve": cmd_solve, "bench": cmd_bench}


# -- output -------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def print_table(rep: RunReport, out=None):
    out = out or sys.stderr
    rows = [("matrix", rep.matrix), ("n", rep.n), ("nnz", rep.nnz), ("threads", rep.threads)]
    for o in rep.orderings:
        rows.append((f"  {o['method']}", f"fill {o['fill_nnz']}  flops {o['flops']}"))
    if rep.chosen:
        rows += [("chosen", rep.chosen), ("density", rep.density)]
    rows += [(f"t_{k}", v) for k, v in rep.times.items() if v is not None]
    if rep.residual is not None:
        rows.append(("residual", rep.residual))
    rows += [(k, v) for k, v in rep.repivot.items() if not isinstance(v, list)]
    rows += [(k, v) for k, v in rep.extra.items() if not isinstance(v, (dict, list))]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {_fmt(v)}", file=out)


def build_parser():
    default_threads = int(os.environ.get(THREADS_ENV, "1"))
    p = argparse.ArgumentParser(prog="cktso-kit", description="Sparse LU for circuit matrices.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("matrix", nargs="?", help="Matrix Market file")
        c.add_argument("--gen", metavar="SPEC",
                       help="built-in generator: tridiag:N, grid:K, randckt:N,NNZ or identity:N")
        c.add_argument("--threads", type=int, default=default_threads)
        c.add_argument("--eps", type=float, default=DEFAULT_EPS, help="pivot threshold")
        c.add_argument("--seed", type=int, default=0)
        c.add_argument("--iters", type=int, default=100)
        c.add_argument("--repivot-rate", type=float, default=0.0)
        c.add_argument("--perturb", type=float, default=0.01, help="relative value perturbation")
        c.add_argument("--min-dense-nnz", type=int, default=DEFAULT_MIN_NNZ)
        c.add_argument("--no-scaling", action="store_true")
        c.add_argument("--out", help="write the JSON report here instead of stdout")
        c.add_argument("--json", action="store_true", help="JSON only, no table")
        if name == "factor":
            c.add_argument("--mode", choices=("full", "refactor", "fast"), default="full")
        if name == "solve":
            c.add_argument("--nrhs", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        rep = COMMANDS[args.command](args)
    except (SolverError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    doc = json.dumps(asdict(rep), indent=2, default=_json_default)
    if args.out:
        Path(args.out).write_text(doc + "\n")
    else:
        print(doc)
    if not args.json:
        print_table(rep)
    return 0


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


if __name__ == "__main__":
    sys.exit(main())
