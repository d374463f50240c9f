import numpy as np
from hypothesis import given, settings, strategies as st

from cktso_kit.sparse import SparseMatrix
from cktso_kit.symbolic import (
    NONE,
    ETree,
    _group_levels,
    build_etree,
    dividing_level,
    levelize_egraph,
    levelize_etree,
    levelize_lower,
    postorder,
    restart_rows,
)

from conftest import random_general, random_matrix
from oracles import etree_oracle, is_ancestor, pivoting_lu


def tree(parent):
    parent = np.asarray(parent, np.int64)
    return ETree(parent, postorder(parent))


def test_etree_diagonal():
    assert np.all(build_etree(SparseMatrix.identity(6)).parent == NONE)


def test_etree_hessenberg_chain():
    n = 8
    a = np.tril(np.ones((n, n)), 1)
    assert build_etree(SparseMatrix.from_dense(a)).parent.tolist() == list(range(1, n)) + [NONE]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_etree_matches_explicit_product(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 13))
    A = random_matrix(rng, n, density=float(rng.uniform(0.05, 0.4)), full_diag=bool(rng.integers(2)))
    t = build_etree(A)
    assert np.array_equal(t.parent, etree_oracle(A.to_dense()))
    assert np.all((t.parent == NONE) | (t.parent > np.arange(n)))
    assert sorted(t.postorder.tolist()) == list(range(n))


def test_levelize_etree_simple():
    lv = levelize_etree(tree([NONE] * 5))
    assert lv.n_levels == 1 and np.all(lv.level_of == 0)
    lv = levelize_etree(tree(list(range(1, 10)) + [NONE]))
    assert lv.level_of.tolist() == list(range(10))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_levelize_etree_recursive_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    parent = np.array([int(rng.integers(i + 1, n + 1)) if i < n - 1 else n for i in range(n)])
    parent[parent == n] = NONE
    parent[rng.random(n) < 0.2] = NONE
    children = [[] for _ in range(n)]
    for i, p in enumerate(parent):
        if p != NONE:
            children[p].append(i)

    def height(v):
        return 1 + max(map(height, children[v])) if children[v] else 0

    lv = levelize_etree(tree(parent))
    assert lv.level_of.tolist() == [height(v) for v in range(n)]
    for k in range(lv.n_levels):
        nodes = lv.level(k)
        assert np.all(np.diff(nodes) > 0) and np.all(lv.level_of[nodes] == k)


def test_levelize_egraph_examples():
    assert np.all(levelize_lower(SparseMatrix.identity(5)).levels.level_of == 0)
    dense = SparseMatrix.from_dense(np.tril(np.ones((4, 4))))
    assert levelize_lower(dense).levels.level_of.tolist() == [0, 1, 2, 3]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_levelize_egraph_dp_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    low = np.tril(rng.random((n, n)) < 0.15, -1)
    lens = low.sum(axis=1)
    starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
    cols = np.concatenate([np.flatnonzero(r) for r in low] + [np.zeros(0, int)])
    view = levelize_egraph(starts, lens, cols.astype(np.int64), generation=3)
    memo = {}

    def depth(i):
        if i not in memo:
            preds = np.flatnonzero(low[i])
            memo[i] = 1 + max(depth(j) for j in preds) if len(preds) else 0
        return memo[i]

    assert view.levels.level_of.tolist() == [depth(i) for i in range(n)]
    assert view.generation == 3


def test_dividing_level_examples():
    lv = _group_levels(np.repeat(np.arange(4), [100, 50, 3, 1]))
    assert dividing_level(lv, 4, 2.0) == 2
    lv = _group_levels(np.repeat(np.arange(3), [20, 9, 8]))
    assert dividing_level(lv, 4, 2.0) == 3
    lv = _group_levels(np.repeat(np.arange(2), [5, 1]))
    assert dividing_level(lv, 1, 2.0) == 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 50), min_size=1, max_size=10))
def test_dividing_level_monotone(sizes):
    # a larger thread count raises the threshold, so the level can only move earlier
    lv = _group_levels(np.repeat(np.arange(len(sizes)), sizes))
    got = [dividing_level(lv, t) for t in range(1, 20)]
    assert got == sorted(got, reverse=True)


def test_restart_examples():
    chain = tree([1, 2, 3, NONE])
    assert restart_rows(chain, np.ones(4, bool)).tolist() == []
    fin = np.ones(4, bool)
    fin[1] = False
    assert restart_rows(chain, fin).tolist() == [1, 2, 3]


def test_restart_two_level_scenario():
    # search for a 10x10 pattern whose tree puts rows 7, 8, 9 above row 5
    rng = np.random.default_rng(7)
    while True:
        A = random_matrix(rng, 10, density=0.12)
        parent = etree_oracle(A.to_dense())
        anc, v = [], parent[5]
        while v != -1:
            anc.append(int(v))
            v = parent[v]
        if anc == [7, 8, 9]:
            break
    t = build_etree(A)
    assert np.array_equal(t.parent, parent)
    fin = np.ones(10, bool)
    fin[5] = False
    assert restart_rows(t, fin).tolist() == [5, 7, 8, 9]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_restart_parent_closed(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 30))
    t = build_etree(random_matrix(rng, n, density=0.15))
    fin = rng.random(n) < 0.8
    s = restart_rows(t, fin)
    members = set(s.tolist())
    assert np.all(np.diff(s) > 0)
    assert all(i in members for i in np.flatnonzero(~fin))
    assert all(t.parent[r] == NONE or t.parent[r] in members for r in s)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_etree_bounds_any_pivot_sequence(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 11))
    A = random_general(rng, n, density=float(rng.uniform(0.2, 0.6)))
    t = build_etree(A)
    egraph_heights = []
    for _ in range(5):
        _, _, _, lpat = pivoting_lu(A.to_dense(), rng=rng)
        for i, j in zip(*np.nonzero(lpat)):
            assert t.is_ancestor(i, j) and is_ancestor(t.parent, i, j)
        lens = lpat.sum(axis=1)
        starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
        cols = np.concatenate([np.flatnonzero(r) for r in lpat]).astype(np.int64)
        egraph_heights.append(levelize_egraph(starts, lens, cols).levels.n_levels)
    assert max(egraph_heights) <= levelize_etree(t).n_levels
