import numpy as np
import pytest

from cktso_kit.sparse import SparseMatrix


def random_matrix(rng, n, density=0.2, dominant=True, full_diag=True):
    """Random sparse matrix; diagonally dominant unless asked otherwise."""
    a = np.where(rng.random((n, n)) < density, rng.uniform(-1, 1, (n, n)), 0.0)
    if full_diag:
        d = np.abs(a).sum(axis=1) + 1.0 if dominant else rng.uniform(0.5, 2.0, n)
        a[np.arange(n), np.arange(n)] = d * rng.choice([-1.0, 1.0], n)
    return SparseMatrix.from_dense(a)


def random_general(rng, n, density=0.3):
    """Random nonsingular matrix without diagonal dominance (pivoting matters)."""
    while True:
        a = np.where(rng.random((n, n)) < density, rng.uniform(-1, 1, (n, n)), 0.0)
        a[np.arange(n), rng.permutation(n)] += rng.uniform(0.5, 2.0, n)
        if np.linalg.cond(a) < 1e6:
            return SparseMatrix.from_dense(a)


def rel_err(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
