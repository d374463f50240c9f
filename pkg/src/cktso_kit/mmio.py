"""Matrix Market coordinate reader/writer (real and integer fields)."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParseError, UnsupportedFormat
from .sparse import SparseMatrix, Triplets

_SYMMETRIES = ("general", "symmetric", "skew-symmetric")


def read_header(path):
    """Return (field, symmetry, n_rows, n_cols, nnz_stored) without reading entries."""
    with open(path, "r", encoding="ascii", errors="replace") as f:
        return _parse_header(f)[:5]


def _parse_header(f):
    banner = f.readline()
    parts = banner.strip().split()
    if len(parts) != 5 or parts[0].lower() != "%%matrixmarket":
        raise ParseError(f"bad banner line: {banner.strip()!r}")
    obj, fmt, fld, sym = (p.lower() for p in parts[1:])
    if obj != "matrix":
        raise ParseError(f"unsupported object {obj!r}")
    if fmt != "coordinate":
        raise UnsupportedFormat(f"only coordinate format is supported, got {fmt!r}")
    if fld in ("complex", "pattern"):
        raise UnsupportedFormat(f"{fld} matrices are not supported")
    if fld not in ("real", "integer", "double"):
        raise ParseError(f"unknown field {fld!r}")
    if sym not in _SYMMETRIES:
        raise UnsupportedFormat(f"unsupported symmetry {sym!r}")
    line = f.readline()
    while line and (line.startswith("%") or not line.strip()):
        line = f.readline()
    try:
        m, n, nz = (int(v) for v in line.split())
    except ValueError as exc:
        raise ParseError(f"bad size line: {line.strip()!r}") from exc
    return fld, sym, m, n, nz, f


def read_matrix_market(path) -> Triplets:
    with open(path, "r", encoding="ascii", errors="replace") as f:
        fld, sym, m, n, nz, f = _parse_header(f)
        if m != n:
            raise DimensionError(f"matrix is {m}x{n}, expected square")
        body = [ln for ln in f if ln.strip() and not ln.startswith("%")]
    if len(body) != nz:
        raise ParseError(f"header declares {nz} entries, found {len(body)}")
    rows = np.empty(nz, np.int64)
    cols = np.empty(nz, np.int64)
    vals = np.empty(nz)
    for k, ln in enumerate(body):
        tok = ln.split()
        if len(tok) < 3:
            raise ParseError(f"entry {k + 1}: expected 'row col value', got {ln.strip()!r}")
        try:
            rows[k] = int(tok[0]) - 1
            cols[k] = int(tok[1]) - 1
            vals[k] = float(tok[2])
        except ValueError as exc:
            raise ParseError(f"entry {k + 1}: {ln.strip()!r}") from exc
    if nz and (rows.min() < 0 or cols.min() < 0 or rows.max() >= m or cols.max() >= n):
        raise ParseError("entry index outside declared dimensions")
    if sym != "general":
        off = rows != cols
        sign = -1.0 if sym == "skew-symmetric" else 1.0
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, sign * vals[off]]),
        )
    return Triplets(m, n, rows, cols, vals)


def write_matrix_market(path, A: SparseMatrix, comment=None):
    r = A.row_indices()
    with open(path, "w", encoding="ascii") as f:
        f.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for ln in comment.splitlines():
                f.write(f"% {ln}\n")
        f.write(f"{A.n} {A.n} {A.nnz}\n")
        for i, j, v in zip(r.tolist(), A.col_idx.tolist(), A.values.tolist()):
            f.write(f"{i + 1} {j + 1} {v!r}\n")
