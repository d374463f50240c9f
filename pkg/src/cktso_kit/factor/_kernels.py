"""Compiled row kernels for up-looking LU.

Storage conventions shared by every kernel:

* rows live in pools addressed by ``*_start[i]`` / ``*_len[i]``;
* ``l_cols`` holds row indices j < i in ascending order, ``l_vals`` the
  multipliers; the pivot value of row i sits in ``l_diag[i]``;
* ``u_cols`` holds *original* column ids, pivot column first with value 1.0,
  the rest divided by the pivot and in no particular order;
* ``colperm[k]`` is the original column at position k, ``pos_of`` its inverse.

``x`` is a per-thread dense accumulator indexed by original column; ``mark``
stamps which columns belong to the current row so resets cost only the row's
pattern. All kernels release the GIL.
"""

import numba as nb
import numpy as np

OK = 0
FAILED = 1


@nb.njit(cache=True, nogil=True)
def _zero_and_scatter_fixed(i, arp, aci, ax, colperm, l_start, l_len, l_cols, u_start, u_len, u_cols, x):
    for q in range(l_start[i], l_start[i] + l_len[i]):
        x[colperm[l_cols[q]]] = 0.0
    for q in range(u_start[i], u_start[i] + u_len[i]):
        x[u_cols[q]] = 0.0
    for p in range(arp[i], arp[i + 1]):
        x[aci[p]] += ax[p]


@nb.njit(cache=True, nogil=True)
def _update_fixed(i, q, colperm, l_cols, u_start, u_len, u_cols, u_vals, x):
    j = l_cols[q]
    xj = x[colperm[j]]
    for qq in range(u_start[j] + 1, u_start[j] + u_len[j]):
        x[u_cols[qq]] -= xj * u_vals[qq]


@nb.njit(cache=True, nogil=True)
def _finish_fixed(i, check, eps, force_row, colperm, l_start, l_len, l_cols, l_vals, l_diag,
                  u_start, u_len, u_cols, u_vals, x, finish):
    """Pivot check (optional) and store of row i. Returns OK, FAILED or -1 on zero pivot."""
    d = x[colperm[i]]
    if check:
        m = 0.0
        for q in range(u_start[i] + 1, u_start[i] + u_len[i]):
            a = abs(x[u_cols[q]])
            if a > m:
                m = a
        if d == 0.0 or abs(d) < eps * m or i == force_row:
            return FAILED
    elif d == 0.0:
        return -1
    for q in range(l_start[i], l_start[i] + l_len[i]):
        l_vals[q] = x[colperm[l_cols[q]]]
    l_diag[i] = d
    q0 = u_start[i]
    u_vals[q0] = 1.0
    for q in range(q0 + 1, q0 + u_len[i]):
        u_vals[q] = x[u_cols[q]] / d
    finish[i] = 1
    return OK


@nb.njit(cache=True, nogil=True)
def refactor_rows(rows, check, stop, eps, force_row, arp, aci, ax, colperm,
                  l_start, l_len, l_cols, l_vals, l_diag, u_start, u_len, u_cols, u_vals,
                  x, finish, failed):
    """Fixed-pattern update of ``rows`` in order.

    With ``check`` a failing row is flagged in ``failed`` and skipped; the
    remaining rows still complete unless ``stop`` is set. The return value is
    the number of failures. Without ``check`` an exact zero pivot is flagged
    and aborts with ``-(row+1)``.
    """
    n_failed = 0
    for t in range(len(rows)):
        i = rows[t]
        _zero_and_scatter_fixed(i, arp, aci, ax, colperm, l_start, l_len, l_cols, u_start, u_len, u_cols, x)
        for q in range(l_start[i], l_start[i] + l_len[i]):
            _update_fixed(i, q, colperm, l_cols, u_start, u_len, u_cols, u_vals, x)
        st = _finish_fixed(i, check, eps, force_row, colperm, l_start, l_len, l_cols, l_vals, l_diag,
                           u_start, u_len, u_cols, u_vals, x, finish)
        if st == FAILED:
            failed[i] = 1
            n_failed += 1
            if stop:
                return n_failed
        elif st < 0:
            failed[i] = 1
            return -(i + 1)
    return n_failed


@nb.njit(cache=True, nogil=True)
def pipeline_step(i, k0, check, eps, force_row, arp, aci, ax, colperm,
                  l_start, l_len, l_cols, l_vals, l_diag, u_start, u_len, u_cols, u_vals,
                  x, finish):
    """Advance row i from dependency ``k0``.

    Returns the index of the first unfinished dependency (call again with it),
    -1 when the row is stored, -2 when its pivot check failed and -3 on an
    exact zero pivot without checking.
    """
    if k0 == 0:
        _zero_and_scatter_fixed(i, arp, aci, ax, colperm, l_start, l_len, l_cols, u_start, u_len, u_cols, x)
    base = l_start[i]
    for k in range(k0, l_len[i]):
        if finish[l_cols[base + k]] == 0:
            return k
        _update_fixed(i, base + k, colperm, l_cols, u_start, u_len, u_cols, u_vals, x)
    st = _finish_fixed(i, check, eps, force_row, colperm, l_start, l_len, l_cols, l_vals, l_diag,
                       u_start, u_len, u_cols, u_vals, x, finish)
    if st == OK:
        return -1
    return -2 if st == FAILED else -3


# -- factorization with pivoting ------------------------------------------------

@nb.njit(cache=True, nogil=True)
def scatter_row(i, s, arp, aci, ax, x, mark, pat, st):
    npat = 0
    for p in range(arp[i], arp[i + 1]):
        c = aci[p]
        if mark[c] != s:
            mark[c] = s
            x[c] = 0.0
            pat[npat] = c
            npat += 1
        x[c] += ax[p]
    st[0] = npat


@nb.njit(cache=True, nogil=True)
def reach_rows(i, ds, skip_unfinished, arp, aci, u_start, u_len, u_cols, pos_of, finish,
               rmark, stack, reach):
    """Finished rows above i that row i depends on, sorted ascending.

    Returns -1 if an unfinished row is met and ``skip_unfinished`` is false.
    """
    top = 0
    nr = 0
    for p in range(arp[i], arp[i + 1]):
        k = pos_of[aci[p]]
        if k < i and rmark[k] != ds:
            if finish[k] == 0:
                if skip_unfinished:
                    continue
                return -1
            rmark[k] = ds
            stack[top] = k
            top += 1
    while top > 0:
        top -= 1
        k = stack[top]
        reach[nr] = k
        nr += 1
        for q in range(u_start[k] + 1, u_start[k] + u_len[k]):
            kk = pos_of[u_cols[q]]
            if kk < i and rmark[kk] != ds:
                if finish[kk] == 0:
                    if skip_unfinished:
                        continue
                    return -1
                rmark[kk] = ds
                stack[top] = kk
                top += 1
    reach[:nr].sort()
    return nr


@nb.njit(cache=True, nogil=True)
def apply_rows(s, reach, nr, colperm, u_start, u_len, u_cols, u_vals, x, mark, pat, st, used):
    """Apply every reached row not yet used by the current row; returns (count, flops)."""
    npat = st[0]
    applied = 0
    flops = 0
    for t in range(nr):
        j = reach[t]
        if used[j] == s:
            continue
        used[j] = s
        applied += 1
        xj = x[colperm[j]]
        for q in range(u_start[j] + 1, u_start[j] + u_len[j]):
            c = u_cols[q]
            if mark[c] != s:
                mark[c] = s
                x[c] = 0.0
                pat[npat] = c
                npat += 1
            x[c] -= xj * u_vals[q]
        flops += 2 * (u_len[j] - 1)
    st[0] = npat
    return applied, flops


@nb.njit(cache=True, nogil=True)
def choose_pivot(i, s, eps, colperm, pos_of, finish, x, mark, pat, st):
    """Threshold pivot choice for row i.

    Returns (pivot column, U length) with pivot column -1 when every
    candidate is zero and -2 when a candidate column belongs to a row that is
    already final (which the elimination tree rules out).
    """
    npat = st[0]
    d = colperm[i]
    diag = abs(x[d]) if mark[d] == s else 0.0
    best = -1
    bmax = 0.0
    nu = 0
    for t in range(npat):
        c = pat[t]
        k = pos_of[c]
        if k < i:
            continue
        nu += 1
        if k == i:
            continue
        if finish[k] != 0:
            return -2, 0
        a = abs(x[c])
        if a > bmax or (a == bmax and best >= 0 and c < best):
            bmax = a
            best = c
    if diag < eps * bmax:
        piv = best
    elif diag > 0.0:
        piv = d
    else:
        return -1, 0
    return piv, nu


@nb.njit(cache=True, nogil=True)
def commit_row(i, piv, reach, nr, l_off, u_off, colperm, pos_of, x, pat, st,
               l_start, l_len, l_cols, l_vals, l_diag, u_start, u_len, u_cols, u_vals, finish):
    d = colperm[i]
    if piv != d:
        k = pos_of[piv]
        colperm[k] = d
        pos_of[d] = k
        colperm[i] = piv
        pos_of[piv] = i
    pv = x[piv]
    for t in range(nr):
        j = reach[t]
        l_cols[l_off + t] = j
        l_vals[l_off + t] = x[colperm[j]]
    l_start[i] = l_off
    l_len[i] = nr
    l_diag[i] = pv
    u_cols[u_off] = piv
    u_vals[u_off] = 1.0
    m = 1
    for t in range(st[0]):
        c = pat[t]
        if c != piv and pos_of[c] > i:
            u_cols[u_off + m] = c
            u_vals[u_off + m] = x[c] / pv
            m += 1
    u_start[i] = u_off
    u_len[i] = m
    finish[i] = 1
    return m


@nb.njit(cache=True, nogil=True)
def factor_rows_seq(rows, t0, eps, arp, aci, ax, colperm, pos_of,
                    l_start, l_len, l_cols, l_vals, l_diag, u_start, u_len, u_cols, u_vals,
                    finish, tops, stamp0, x, mark, rmark, used, pat, stack, reach, st):
    """Sequential factorization with pivoting of ``rows[t0:]`` (ascending).

    Every dependency of a listed row must be finished or listed earlier.
    ``tops`` holds the used length of the L and U pools. Returns len(rows)
    when done, the list index to resume from when a pool is full, or
    ``-(row+1)`` / ``-(n+row+1)`` for a singular row / an internal error.
    """
    n = len(colperm)
    s = stamp0
    for t in range(t0, len(rows)):
        i = rows[t]
        s += 1
        scatter_row(i, s, arp, aci, ax, x, mark, pat, st)
        nr = reach_rows(i, s, False, arp, aci, u_start, u_len, u_cols, pos_of, finish, rmark, stack, reach)
        if nr < 0:
            return -(n + i + 1)
        apply_rows(s, reach, nr, colperm, u_start, u_len, u_cols, u_vals, x, mark, pat, st, used)
        piv, nu = choose_pivot(i, s, eps, colperm, pos_of, finish, x, mark, pat, st)
        if piv == -1:
            return -(i + 1)
        if piv < 0:
            return -(n + i + 1)
        if tops[0] + nr > len(l_cols) or tops[1] + nu > len(u_cols):
            return t
        m = commit_row(i, piv, reach, nr, tops[0], tops[1], colperm, pos_of, x, pat, st,
                       l_start, l_len, l_cols, l_vals, l_diag, u_start, u_len, u_cols, u_vals, finish)
        tops[0] += nr
        tops[1] += m
    return len(rows)


@nb.njit(cache=True)
def same_rows(rows, old_start, old_len, new_start, new_len, cols, mark):
    """True when every listed row holds the same column set in both layouts."""
    for t in range(len(rows)):
        i = rows[t]
        if old_len[i] != new_len[i]:
            return False
        for q in range(old_start[i], old_start[i] + old_len[i]):
            mark[cols[q]] = t + 1
        for q in range(new_start[i], new_start[i] + new_len[i]):
            if mark[cols[q]] != t + 1:
                return False
    return True
