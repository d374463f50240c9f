"""Built-in test matrices, selectable from the CLI with ``--gen SPEC``.

    tridiag:N        unsymmetric tridiagonal, diagonally dominant
    grid:K           5-point stencil on a K x K grid (nodal-analysis style)
    randckt:N,NNZ    random circuit-like matrix with about NNZ entries
"""

from __future__ import annotations

import numpy as np

from .sparse import SparseMatrix, Triplets, to_csr


def tridiag(n: int) -> SparseMatrix:
    i = np.arange(n)
    rows = np.concatenate([i, i[1:], i[:-1]])
    cols = np.concatenate([i, i[:-1], i[1:]])
    vals = np.concatenate([np.full(n, 4.0), np.full(n - 1, -1.0), np.full(n - 1, -1.5)])
    return to_csr(Triplets(n, n, rows, cols, vals))


def grid(k: int) -> SparseMatrix:
    n = k * k
    idx = np.arange(n).reshape(k, k)
    pairs = [(idx[:, :-1].ravel(), idx[:, 1:].ravel()), (idx[:-1, :].ravel(), idx[1:, :].ravel())]
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.full(n, 4.2)]
    for a, b in pairs:
        rows += [a, b]
        cols += [b, a]
        vals += [np.full(len(a), -1.0), np.full(len(a), -0.9)]
    return to_csr(Triplets(n, n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)))


def randckt(n: int, nnz: int, seed: int = 0) -> SparseMatrix:
    """Conductance stamps on a locality-biased random netlist.

    Most branches connect nearby nodes; a few nodes act as supply rails with
    many connections, and controlled sources add unsymmetric entries.
    """
    rng = np.random.default_rng(seed)
    n_branch = max((nnz - n) // 2, 0)
    n_rail = max(1, n // 500)
    rails = rng.choice(n, size=n_rail, replace=False)
    a = rng.integers(0, n, n_branch)
    near = (a + rng.geometric(0.05, n_branch) * rng.choice([-1, 1], n_branch)) % n
    to_rail = rng.random(n_branch) < 0.04
    b = np.where(to_rail, rails[rng.integers(0, n_rail, n_branch)], near)
    keep = a != b
    a, b = a[keep], b[keep]
    g = rng.uniform(0.1, 10.0, len(a))
    asym = np.where(rng.random(len(a)) < 0.15, rng.uniform(-2.0, 2.0, len(a)), 0.0)
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([b, a, a, b])
    vals = np.concatenate([-g + asym, -g, g, g])
    diag = np.arange(n)
    gmin = rng.uniform(1e-3, 1e-1, n)
    t = Triplets(n, n, np.concatenate([rows, diag]), np.concatenate([cols, diag]),
                 np.concatenate([vals, gmin]))
    return to_csr(t)


def from_spec(spec: str, seed: int = 0) -> tuple[str, SparseMatrix]:
    kind, _, args = spec.partition(":")
    try:
        nums = [int(v) for v in args.split(",")] if args else []
    except ValueError as exc:
        raise ValueError(f"bad generator arguments in {spec!r}") from exc
    if kind == "tridiag" and len(nums) == 1:
        return spec, tridiag(nums[0])
    if kind == "grid" and len(nums) == 1:
        return spec, grid(nums[0])
    if kind == "randckt" and len(nums) == 2:
        return spec, randckt(nums[0], nums[1], seed)
    if kind == "identity" and len(nums) == 1:
        return spec, SparseMatrix.identity(nums[0])
    raise ValueError(f"unknown generator spec {spec!r}")
