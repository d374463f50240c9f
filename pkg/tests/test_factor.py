import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cktso_kit.errors import NumericallySingular, StaleSymbolic, ZeroPivot, ZeroRow
from cktso_kit.factor import (
    DEFAULT_EPS,
    FactorContext,
    factor_driver,
    factor_full,
    fast_factor,
    refactor,
    tail_factor,
)
from cktso_kit.generators import grid, randckt
from cktso_kit.sparse import SparseMatrix
from cktso_kit.symbolic import restart_rows

from conftest import random_general, random_matrix, rel_err
from oracles import is_ancestor, pivoting_lu

THREADS = [1, 2, 4, 8]


def same_values(a, b):
    return all(
        np.array_equal(x[0], y[0]) and np.array_equal(x[1], y[1]) and x[2] == y[2]
        and np.array_equal(x[3], y[3]) and np.array_equal(x[4], y[4])
        for x, y in zip(a.canonical(), b.canonical()))


def rule_holds(lu, eps=DEFAULT_EPS):
    """|pivot| >= eps * max candidate, read from U = candidates / pivot."""
    for i in range(lu.n):
        _, v = lu.row_U(i)
        if v[0] != 1.0 or (len(v) > 1 and np.abs(v[1:]).max() > (1 + 1e-12) / eps):
            return False
    return True


def residual(lu, A):
    return rel_err(lu.reconstruct(), A.to_dense())


def fixed_pivot_lu(a, colperm):
    """Pivot-free dense LU of a[:, colperm] in the row-scaled convention."""
    m = a[:, colperm].astype(float)
    n = len(m)
    L, U = np.zeros((n, n)), np.zeros((n, n))
    for i in range(n):
        x = m[i].copy()
        for j in range(i):
            L[i, j] = x[j]
            x[j + 1:] -= x[j] * U[j, j + 1:]
        L[i, i] = x[i]
        U[i, i] = 1.0
        U[i, i + 1:] = x[i + 1:] / x[i]
    return L, U


def perturb(A, rng, rel=0.01):
    return A.with_values(A.values * (1 + rel * rng.uniform(-1, 1, A.nnz)))


# -- full factorization ---------------------------------------------------
def test_full_identity():
    lu = factor_full(SparseMatrix.identity(5))
    assert np.array_equal(lu.dense_L(), np.eye(5)) and np.array_equal(lu.dense_U(), np.eye(5))
    assert lu.colperm.tolist() == list(range(5))


def test_full_two_by_two_exchange():
    lu = factor_full(SparseMatrix.from_dense(np.array([[1e-6, 1.0], [1.0, 1.0]])))
    assert lu.colperm.tolist() == [1, 0]
    assert residual(lu, SparseMatrix.from_dense(np.array([[1e-6, 1.0], [1.0, 1.0]]))) < 1e-15


@pytest.mark.parametrize("threads", THREADS)
def test_full_random_40(rng, threads):
    for _ in range(5):
        A = random_general(rng, 40, density=0.1)
        lu = factor_full(A, n_threads=threads)
        assert residual(lu, A) <= 1e-12
        assert rule_holds(lu)


def test_full_matches_dense_threshold_oracle(rng):
    for _ in range(20):
        A = random_general(rng, 15, density=0.3)
        lu = factor_full(A)
        _, _, colperm, lpat = pivoting_lu(A.to_dense(), eps=DEFAULT_EPS)
        assert lu.colperm.tolist() == colperm.tolist()
        Ld = lu.dense_L()
        assert np.all((Ld != 0) <= (lpat | np.eye(15, dtype=bool)))


def test_full_fill_and_flops_match_structure(rng):
    A = random_matrix(rng, 30, density=0.1)
    lu = factor_full(A)
    from cktso_kit.preprocess import symbolic_fill_count
    assert (lu.fill_nnz, lu.flops) == symbolic_fill_count(A)


def test_full_errors():
    with pytest.raises(ZeroRow):
        factor_full(SparseMatrix.from_dense(np.array([[1.0, 0.0], [0.0, 0.0]])))
    a = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(NumericallySingular):
        factor_full(SparseMatrix.from_dense(a))


def test_full_l_pattern_within_etree(rng):
    for threads in (1, 4):
        for _ in range(10):
            A = random_general(rng, 10, density=0.4)
            ctx = FactorContext(A, threads)
            lu = factor_full(A, ctx=ctx)
            for i in range(lu.n):
                for j in lu.row_L(i)[0]:
                    assert is_ancestor(ctx.etree.parent, i, j)


# -- refactor ---------------------------------------------------------------
@pytest.mark.parametrize("threads", THREADS)
def test_refactor_same_values_bitwise(rng, threads):
    A = random_general(rng, 40, density=0.1)
    lu = factor_full(A)
    ref = lu.snapshot()
    refactor(A, lu, n_threads=threads)
    assert same_values(lu, ref)


def test_refactor_diagonal_doubled():
    A = SparseMatrix.from_dense(np.diag([1.0, 2.0, 3.0]))
    lu = factor_full(A)
    refactor(A.with_values(2 * A.values), lu)
    assert lu.l_diag.tolist() == [2.0, 4.0, 6.0]


def test_refactor_perturbed_vs_fixed_pivot_oracle(rng):
    A = random_general(rng, 40, density=0.1)
    lu = factor_full(A)
    gen = lu.structure_generation
    B = perturb(A, rng)
    refactor(B, lu)
    L, U = fixed_pivot_lu(B.to_dense(), lu.colperm)
    assert rel_err(lu.dense_L(), L) <= 1e-12 and rel_err(lu.dense_U(), U) <= 1e-12
    assert residual(lu, B) <= 1e-12
    assert lu.structure_generation == gen


def test_refactor_zero_pivot():
    A = SparseMatrix.identity(3)
    lu = factor_full(A)
    with pytest.raises(ZeroPivot):
        refactor(A.with_values(np.array([1.0, 0.0, 1.0])), lu)


def test_refactor_pattern_mismatch(rng):
    lu = factor_full(SparseMatrix.identity(3))
    with pytest.raises(ValueError):
        refactor(random_matrix(rng, 3, density=1.0), lu)


# -- fast factor ------------------------------------------------------------
def test_fast_unchanged_completed_bitwise(rng):
    A = random_general(rng, 40, density=0.1)
    lu = factor_full(A)
    ref = lu.snapshot()
    refactor(A, ref)
    out = fast_factor(A, FactorContext(A), lu)
    assert out.completed and len(out.failed_rows) == 0
    assert same_values(lu, ref)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fast_thread_count_invariant(seed):
    rng = np.random.default_rng(seed)
    A = random_matrix(rng, int(rng.integers(10, 80)), density=0.08)
    B = perturb(A, rng)
    results = []
    for t in THREADS:
        lu = factor_full(A)
        with FactorContext(A, t) as ctx:
            assert fast_factor(B, ctx, lu).completed
        results.append(lu)
    assert all(same_values(results[0], r) for r in results[1:])


def test_fast_zero_diagonal_interrupted():
    A = SparseMatrix.identity(4)
    lu = factor_full(A)
    for t in (1, 3):
        with FactorContext(A, t) as ctx:
            out = fast_factor(A.with_values(np.array([1.0, 1.0, 0.0, 1.0])), ctx, lu)
        assert not out.completed and out.failed_rows.tolist() == [2]
        assert not out.finished[2]


@pytest.mark.parametrize("threads", [1, 2, 4])
def test_fast_then_tail_exchanges_columns(threads):
    # [[delta, 1], [1, 2]] going from delta = 1 to delta = 1e-6
    A = SparseMatrix.from_dense(np.ones((2, 2)))
    A = A.with_values(np.array([1.0, 1.0, 1.0, 2.0]))
    lu = factor_full(A)
    assert lu.colperm.tolist() == [0, 1]
    B = A.with_values(np.array([1e-6, 1.0, 1.0, 2.0]))
    with FactorContext(A, threads) as ctx:
        out = fast_factor(B, ctx, lu)
        assert not out.completed and out.failed_rows.tolist() == [0]
        gen = lu.structure_generation
        tail_factor(B, ctx, lu, restart_rows(ctx.etree, out.finished))
    assert lu.colperm.tolist() == [1, 0]
    assert lu.structure_generation == gen + 1
    assert residual(lu, B) <= 1e-12 and rule_holds(lu)


def test_fast_stale_symbolic(rng):
    A = random_general(rng, 12, density=0.3)
    lu = factor_full(A)
    ctx = FactorContext(A)
    ctx.refresh_egraph(lu)
    lu.structure_generation += 1
    with pytest.raises(StaleSymbolic):
        fast_factor(A, ctx, lu)


def test_eps_fixed_per_context(rng):
    A = random_general(rng, 8)
    lu = factor_full(A)
    ctx = FactorContext(A, eps=1e-3)
    with pytest.raises(ValueError):
        fast_factor(A, ctx, lu, eps=0.1)


@pytest.mark.parametrize("threads", [1, 2, 4, 8, 16])
def test_no_deadlock_any_forced_row(threads):
    A = grid(6)
    lu = factor_full(A)
    with FactorContext(A, threads) as ctx:
        for r in range(A.n):
            out = fast_factor(A, ctx, lu, force_row=r)
            assert not out.completed and r in out.failed_rows.tolist()


def test_interrupted_prefix_matches_sequential(rng):
    A = random_matrix(rng, 60, density=0.06)
    B = perturb(A, rng)
    ref = factor_full(A)
    refactor(B, ref)
    for t in (1, 4):
        lu = factor_full(A)
        with FactorContext(A, t) as ctx:
            out = fast_factor(B, ctx, lu, force_row=30)
        fin = np.flatnonzero(out.finished)
        assert 30 not in fin
        cl, cr = lu.canonical(), ref.canonical()
        for i in fin:
            assert all(np.array_equal(x, y) for x, y in zip(cl[i], cr[i]))


# -- tail factor and driver -----------------------------------------------
def test_tail_empty_restart(rng):
    A = random_general(rng, 20, density=0.2)
    lu = factor_full(A)
    ref = lu.snapshot()
    tail_factor(A, FactorContext(A), lu, [])
    assert same_values(lu, ref) and lu.structure_generation == ref.structure_generation


@pytest.mark.parametrize("threads", [1, 3])
def test_tail_all_rows_equals_full(rng, threads):
    A = random_general(rng, 30, density=0.15)
    full = factor_full(A)
    lu = factor_full(A)
    with FactorContext(A, threads) as ctx:
        tail_factor(A, ctx, lu, np.arange(30))
    assert lu.colperm.tolist() == full.colperm.tolist()
    assert residual(lu, A) <= 1e-12
    assert lu.structure_generation == full.structure_generation
    if threads == 1:
        assert same_values(lu, full)


@pytest.mark.parametrize("threads", [1, 2, 4])
def test_driver_unchanged_matches_refactor(rng, threads):
    A = random_matrix(rng, 50, density=0.08)
    lu = factor_full(A)
    ref = lu.snapshot()
    refactor(A, ref)
    with FactorContext(A, threads) as ctx:
        _, out, restart = factor_driver(A, ctx, lu)
    assert out.completed and len(restart) == 0 and same_values(lu, ref)


@pytest.mark.parametrize("threads", [1, 2, 4])
def test_driver_forced_failures(rng, threads):
    A = randckt(120, 600, seed=3)
    with FactorContext(A, threads) as ctx:
        lu = factor_full(A, ctx=ctx)
        for _ in range(10):
            B = perturb(A, rng, 0.3)
            r = int(rng.integers(A.n))
            _, out, restart = factor_driver(B, ctx, lu, force_row=r)
            assert not out.completed and r in restart.tolist()
            par = ctx.etree.parent
            assert all(par[x] == -1 or par[x] in set(restart.tolist()) for x in restart)
            assert residual(lu, B) <= 1e-10 and rule_holds(lu)


def test_driver_reuse_does_no_symbolic_work(rng):
    A = random_matrix(rng, 40, density=0.1)
    with FactorContext(A) as ctx:
        lu = factor_full(A, ctx=ctx)
        factor_driver(A, ctx, lu)
        before = ctx.symbolic_work
        factor_driver(perturb(A, rng), ctx, lu)
        factor_driver(perturb(A, rng), ctx, lu)
        assert ctx.symbolic_work == before


def test_driver_pattern_change_bumps_generation():
    A = SparseMatrix.from_dense(np.array([[1.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 3.0]]))
    with FactorContext(A) as ctx:
        lu = factor_full(A, ctx=ctx)
        gen = lu.structure_generation
        B = A.with_values(np.array([1e-9, 1.0, 1.0, 2.0, 1.0, 1.0, 3.0]))
        _, out, _ = factor_driver(B, ctx, lu)
        assert not out.completed and lu.structure_generation > gen
        assert residual(lu, B) <= 1e-12 and rule_holds(lu)
        assert ctx.egraph.generation == lu.structure_generation


def test_zero_diagonal_pivots_on_one_thread():
    # no structural diagonal: concurrent exchanges are unsafe, so pivoting stays sequential
    a = np.array([[0.0, 2.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 3.0]])
    A = SparseMatrix.from_dense(a)
    with FactorContext(A, 4) as ctx:
        assert not ctx.parallel_pivot
        lu = factor_full(A, ctx=ctx)
    assert residual(lu, A) <= 1e-15 and rule_holds(lu)
    assert FactorContext(SparseMatrix.identity(3), 4).parallel_pivot
    assert not FactorContext(SparseMatrix.identity(3), 1).parallel_pivot


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_multithread_pivoting_any_structure(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    A = random_general(rng, n, density=float(rng.uniform(0.02, 0.5)))
    for t in (2, 4):
        with FactorContext(A, t) as ctx:
            lu = factor_full(A, ctx=ctx)
            assert residual(lu, A) <= 1e-10 and rule_holds(lu)
            factor_driver(perturb(A, rng), ctx, lu, force_row=int(rng.integers(n)))
        assert rule_holds(lu)
