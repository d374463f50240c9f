"""Compressed-row sparse matrices, permutations and diagonal scalings.

Everything here is immutable after construction and purely numpy based.
Indices are 0-based; values are float64; explicit zeros are kept as
structural entries because circuit stampers rely on them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

INDEX = np.int64


@dataclass(frozen=True)
class Triplets:
    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    def __post_init__(self):
        for name in ("rows", "cols"):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=INDEX))
        object.__setattr__(self, "vals", np.ascontiguousarray(self.vals, dtype=np.float64))
        if not (len(self.rows) == len(self.cols) == len(self.vals)):
            raise DimensionError("triplet arrays differ in length")
        if len(self.rows):
            if self.rows.min() < 0 or self.rows.max() >= self.n_rows:
                raise DimensionError("row index out of range")
            if self.cols.min() < 0 or self.cols.max() >= self.n_cols:
                raise DimensionError("column index out of range")

    @property
    def entries(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist()))

    @classmethod
    def from_entries(cls, n_rows, n_cols, entries):
        if entries:
            r, c, v = zip(*entries)
        else:
            r, c, v = (), (), ()
        return cls(n_rows, n_cols, np.array(r, INDEX), np.array(c, INDEX), np.array(v, float))


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Square CSR matrix with strictly increasing column indices per row."""

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_ptr", np.ascontiguousarray(self.row_ptr, dtype=INDEX))
        object.__setattr__(self, "col_idx", np.ascontiguousarray(self.col_idx, dtype=INDEX))
        object.__setattr__(self, "values", np.ascontiguousarray(self.values, dtype=np.float64))
        for a in (self.row_ptr, self.col_idx, self.values):
            a.flags.writeable = False

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    def row(self, i):
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def row_indices(self) -> np.ndarray:
        return np.repeat(np.arange(self.n, dtype=INDEX), np.diff(self.row_ptr))

    def check(self):
        """Raise DimensionError if any CSR invariant is violated."""
        rp, ci = self.row_ptr, self.col_idx
        if len(rp) != self.n + 1 or rp[0] != 0 or rp[-1] != len(ci) or len(ci) != len(self.values):
            raise DimensionError("malformed row_ptr")
        if np.any(np.diff(rp) < 0):
            raise DimensionError("row_ptr decreases")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.n):
            raise DimensionError("column index out of range")
        if np.any((np.diff(ci) <= 0) & ~_row_break_mask(rp, len(ci))):
            raise DimensionError("column indices not strictly increasing within a row")
        return self

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.row_indices(), self.col_idx] = self.values
        return out

    def with_values(self, values) -> "SparseMatrix":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise DimensionError("value array does not match the pattern")
        return SparseMatrix(self.n, self.row_ptr, self.col_idx, values)

    def transpose(self) -> "SparseMatrix":
        return _from_sorted_coo(self.n, self.col_idx, self.row_indices(), self.values)

    def diagonal(self) -> np.ndarray:
        out = np.zeros(self.n)
        r = self.row_indices()
        on = r == self.col_idx
        out[r[on]] = self.values[on]
        return out

    def has_full_diagonal(self) -> bool:
        r = self.row_indices()
        return np.count_nonzero(r == self.col_idx) == self.n

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        prod = self.values * x[self.col_idx]
        out = np.zeros(self.n)
        np.add.at(out, self.row_indices(), prod)
        return out

    def norm_inf(self) -> float:
        if self.nnz == 0:
            return 0.0
        return float(np.max(np.add.reduceat(np.abs(self.values), self.row_ptr[:-1])[np.diff(self.row_ptr) > 0]))

    @classmethod
    def identity(cls, n):
        return cls(n, np.arange(n + 1), np.arange(n), np.ones(n))

    @classmethod
    def from_dense(cls, a, keep_zeros=False):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError("dense matrix must be square")
        mask = np.ones_like(a, bool) if keep_zeros else a != 0
        r, c = np.nonzero(mask)
        return _from_sorted_coo(a.shape[0], r, c, a[r, c])


def _row_break_mask(row_ptr, nnz):
    """Mask over consecutive column-index pairs marking row boundaries."""
    mask = np.zeros(max(nnz - 1, 0), bool)
    b = row_ptr[1:-1]
    b = b[(b > 0) & (b < nnz)]
    mask[b - 1] = True
    return mask


def _from_sorted_coo(n, rows, cols, vals):
    rows = np.asarray(rows, INDEX)
    cols = np.asarray(cols, INDEX)
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], np.asarray(vals, np.float64)[order]
    row_ptr = np.zeros(n + 1, INDEX)
    np.cumsum(np.bincount(rows, minlength=n), out=row_ptr[1:])
    return SparseMatrix(n, row_ptr, cols, vals)


@dataclass(frozen=True, eq=False)
class Permutation:
    """``perm[new] = old``; ``inverse[old] = new``."""

    perm: np.ndarray
    inverse: np.ndarray = field(default=None)

    def __post_init__(self):
        p = np.ascontiguousarray(self.perm, dtype=INDEX)
        n = len(p)
        seen = np.zeros(n, bool)
        if n and (p.min() < 0 or p.max() >= n):
            raise DimensionError("permutation entry out of range")
        seen[p] = True
        if not seen.all():
            raise DimensionError("permutation is not a bijection")
        inv = np.empty(n, INDEX)
        inv[p] = np.arange(n, dtype=INDEX)
        p.flags.writeable = False
        inv.flags.writeable = False
        object.__setattr__(self, "perm", p)
        object.__setattr__(self, "inverse", inv)

    def __len__(self):
        return len(self.perm)

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n))

    def compose(self, first: "Permutation") -> "Permutation":
        """Permutation equal to applying ``first`` and then ``self``."""
        return Permutation(first.perm[self.perm])

    def invert(self) -> "Permutation":
        return Permutation(self.inverse)

    def matrix(self) -> np.ndarray:
        n = len(self.perm)
        m = np.zeros((n, n))
        m[np.arange(n), self.perm] = 1.0
        return m


@dataclass(frozen=True, eq=False)
class ScalingPair:
    row_scale: np.ndarray
    col_scale: np.ndarray

    def __post_init__(self):
        for name in ("row_scale", "col_scale"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise ValueError(f"{name} must be finite and positive")
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @classmethod
    def ones(cls, n):
        return cls(np.ones(n), np.ones(n))


def to_csr(t: Triplets) -> SparseMatrix:
    """Sum duplicates, sort columns and return a square CSR matrix."""
    if t.n_rows != t.n_cols:
        raise DimensionError(f"matrix is {t.n_rows}x{t.n_cols}, expected square")
    n = t.n_rows
    if len(t.rows) == 0:
        return SparseMatrix(n, np.zeros(n + 1, INDEX), np.zeros(0, INDEX), np.zeros(0))
    key = t.rows * n + t.cols
    order = np.argsort(key, kind="stable")
    key = key[order]
    first = np.ones(len(key), bool)
    first[1:] = key[1:] != key[:-1]
    starts = np.flatnonzero(first)
    vals = np.add.reduceat(t.vals[order], starts)
    ukey = key[starts]
    return _from_sorted_coo(n, ukey // n, ukey % n, vals)


def permute(A: SparseMatrix, row_perm: Permutation, col_perm: Permutation) -> SparseMatrix:
    """Return B with ``B[i, j] = A[row_perm[i], col_perm[j]]``."""
    if len(row_perm) != A.n or len(col_perm) != A.n:
        raise DimensionError("permutation size does not match matrix")
    new_rows = row_perm.inverse[A.row_indices()]
    new_cols = col_perm.inverse[A.col_idx]
    return _from_sorted_coo(A.n, new_rows, new_cols, A.values)


def symmetric_permute(A: SparseMatrix, q: Permutation) -> SparseMatrix:
    return permute(A, q, q)


def apply_scaling(A: SparseMatrix, s: ScalingPair) -> SparseMatrix:
    if len(s.row_scale) != A.n or len(s.col_scale) != A.n:
        raise DimensionError("scaling size does not match matrix")
    vals = s.row_scale[A.row_indices()] * A.values * s.col_scale[A.col_idx]
    return SparseMatrix(A.n, A.row_ptr, A.col_idx, vals)


def symmetrized_pattern(A: SparseMatrix, with_diagonal=True) -> SparseMatrix:
    """Pattern of A + A^T (unit values), optionally forcing a full diagonal."""
    r = A.row_indices()
    rows = [r, A.col_idx]
    cols = [A.col_idx, r]
    if with_diagonal:
        d = np.arange(A.n, dtype=INDEX)
        rows.append(d)
        cols.append(d)
    t = Triplets(A.n, A.n, np.concatenate(rows), np.concatenate(cols),
                 np.ones(sum(len(x) for x in rows)))
    S = to_csr(t)
    return SparseMatrix(S.n, S.row_ptr, S.col_idx, np.ones(S.nnz))


def adjacency(A: SparseMatrix) -> list[np.ndarray]:
    """Per-vertex neighbour arrays of a symmetric pattern, diagonal removed."""
    out = []
    for i in range(A.n):
        c, _ = A.row(i)
        out.append(c[c != i])
    return out
