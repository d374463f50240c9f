import json
import subprocess
import sys

import numpy as np
import pytest

from cktso_kit.cli import main, run_bench
from cktso_kit.generators import grid
from cktso_kit.mmio import write_matrix_market
from cktso_kit.sparse import SparseMatrix


def run(capsys, *argv):
    code = main(list(argv) + ["--json"])
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == 0 else None), out.err


def check_schema(rep, command):
    assert rep["schema"] == 1 and rep["command"] == command
    for key in ("matrix", "n", "nnz", "threads", "orderings", "chosen", "fill_nnz", "flops",
                "density", "times", "residual", "repivot", "extra"):
        assert key in rep
    assert rep["density"] == (rep["flops"] / rep["fill_nnz"] if rep["fill_nnz"] else 0.0)
    assert rep["fill_nnz"] == min(o["fill_nnz"] for o in rep["orderings"])


@pytest.fixture
def identity_file(tmp_path):
    p = tmp_path / "identity.mtx"
    write_matrix_market(p, SparseMatrix.identity(5))
    return str(p)


def test_analyze_identity(capsys, identity_file):
    code, rep, _ = run(capsys, "analyze", identity_file)
    assert code == 0
    check_schema(rep, "analyze")
    assert rep["matrix"] == "identity"
    assert all(o["fill_nnz"] == 5 for o in rep["orderings"]) and rep["density"] == 0.0


def test_analyze_tridiag(capsys):
    code, rep, _ = run(capsys, "analyze", "--gen", "tridiag:1000")
    assert code == 0 and rep["fill_nnz"] == 2998
    check_schema(rep, "analyze")


@pytest.mark.parametrize("mode", ["full", "refactor", "fast"])
def test_factor_modes(capsys, identity_file, mode):
    code, rep, _ = run(capsys, "factor", identity_file, "--mode", mode)
    assert code == 0 and rep["residual"] == 0.0
    check_schema(rep, "factor")
    code, rep, _ = run(capsys, "factor", "--gen", "randckt:300,1500", "--mode", mode)
    assert code == 0 and rep["extra"]["bitwise_equal_to_full"] is True
    assert rep["residual"] <= 1e-12


def test_factor_threads_reports_speedup(capsys):
    code, rep, _ = run(capsys, "factor", "--gen", "grid:10", "--mode", "fast", "--threads", "2")
    assert code == 0 and rep["extra"]["speedup"] is not None and rep["threads"] == 2


def test_solve_identity_and_random(capsys, identity_file):
    code, rep, _ = run(capsys, "solve", identity_file)
    assert code == 0 and rep["residual"] == 0.0
    code, rep, _ = run(capsys, "solve", "--gen", "randckt:40,200", "--nrhs", "3", "--threads", "4")
    assert code == 0 and rep["extra"]["par_vs_seq_max_rel_diff"] <= 1e-13
    check_schema(rep, "solve")


def test_solve_partitioned(capsys):
    code, rep, _ = run(capsys, "solve", "--gen", "grid:20", "--threads", "4",
                       "--min-dense-nnz", "500")
    assert code == 0
    assert rep["extra"]["partitioned"] is True and rep["extra"]["m"] == 8
    assert rep["extra"]["par_vs_seq_max_rel_diff"] <= 1e-13
    assert rep["residual"] <= 1e-12


def test_bench_rates(capsys):
    code, rep, _ = run(capsys, "bench", "--gen", "grid:8", "--iters", "20", "--repivot-rate", "0")
    assert code == 0 and rep["repivot"]["interrupted_runs"] == 0
    code, rep, _ = run(capsys, "bench", "--gen", "grid:8", "--iters", "10", "--repivot-rate", "1")
    assert code == 0 and rep["repivot"]["interrupted_runs"] == 10
    assert rep["residual"] <= 1e-10
    assert len(rep["repivot"]["forced_rows"]) == 10


def test_bench_reproducible_and_nested():
    A = grid(8)
    a = run_bench(A, iters=30, repivot_rate=0.2, seed=4, baselines=False)["aggregate"]
    b = run_bench(A, iters=30, repivot_rate=0.2, seed=4, baselines=False)["aggregate"]
    assert a["restart_rows_forced"] == b["restart_rows_forced"]
    assert a["restart_sizes"] == b["restart_sizes"]
    lo = run_bench(A, iters=30, repivot_rate=0.1, seed=4, baselines=False)["records"]
    hi = run_bench(A, iters=30, repivot_rate=0.2, seed=4, baselines=False)["records"]
    forced_lo = {r["iter"]: r["forced_row"] for r in lo if r["forced_row"] is not None}
    forced_hi = {r["iter"]: r["forced_row"] for r in hi if r["forced_row"] is not None}
    assert all(forced_hi.get(k) == v for k, v in forced_lo.items())


def test_bench_bad_rate():
    with pytest.raises(ValueError):
        run_bench(grid(4), iters=1, repivot_rate=1.5)


def test_errors_exit_nonzero(capsys, tmp_path):
    code, _, err = run(capsys, "analyze", str(tmp_path / "missing.mtx"))
    assert code == 1 and "error" in err
    bad = tmp_path / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1\n")
    code, _, err = run(capsys, "factor", str(bad))
    assert code == 1
    code, _, _ = run(capsys, "analyze")
    assert code == 1
    code, _, _ = run(capsys, "analyze", "--gen", "grid:4", "--threads", "0")
    assert code == 2


def test_out_file_and_table(capsys, tmp_path):
    out = tmp_path / "r.json"
    assert main(["analyze", "--gen", "grid:5", "--out", str(out)]) == 0
    cap = capsys.readouterr()
    assert cap.out == "" and "chosen" in cap.err
    assert json.loads(out.read_text())["n"] == 25


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cktso_kit.cli", "analyze", "--gen", "tridiag:50",
                           "--json"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["fill_nnz"] == 148


def test_bench_driver_between_refactor_and_full():
    agg = run_bench(grid(40), iters=100, repivot_rate=0.1, seed=2)["aggregate"]
    t = agg["times"]
    assert agg["interrupted"] > 0 and agg["max_residual"] <= 1e-10
    assert t["refactor"]["mean"] <= t["driver"]["mean"] <= t["full"]["mean"]
