"""Greedy fill-reducing orderings on a quotient graph.

One elimination engine serves three scores:

* ``degree``      approximate external degree (AMD bound),
* ``deficiency``  approximate fill produced by eliminating the vertex,
* ``degree`` with ``groups``  constrained minimum degree: a vertex may only be
  eliminated once every vertex of a lower group is gone.

The quotient graph keeps, for every uneliminated supervariable, its variable
neighbours ``A[i]`` and adjacent elements ``E[i]``; every eliminated pivot
becomes an element whose variable list ``Le[p]`` is the clique it created.
Elements covered by a newer one are absorbed, and variables with identical
quotient-graph neighbourhoods are merged into supervariables.
"""

from __future__ import annotations

import heapq

import numpy as np

from ..sparse import Permutation, SparseMatrix, adjacency


def order_amd(pattern: SparseMatrix) -> Permutation:
    return Permutation(_eliminate(adjacency(pattern), "degree"))


def order_amf(pattern: SparseMatrix) -> Permutation:
    return Permutation(_eliminate(adjacency(pattern), "deficiency"))


def order_cmd(pattern: SparseMatrix, groups) -> Permutation:
    """Minimum degree subject to eliminating groups in increasing order."""
    return Permutation(_eliminate(adjacency(pattern), "degree", np.asarray(groups)))


def _eliminate(adj, score="degree", groups=None):
    n = len(adj)
    if groups is None:
        groups = np.zeros(n, np.int64)
    A = [set(a.tolist()) for a in adj]
    E = [set() for _ in range(n)]
    Le = {}
    eW = {}
    nv = [1] * n
    members = [[i] for i in range(n)]
    alive = [True] * n
    deg0 = [len(a) for a in A]
    deg = list(deg0)
    key = [None] * n
    heap = []
    remaining = n

    def push(i, d, clique=0):
        if score == "deficiency":
            s = d * (d - 1) // 2 - clique * (clique - 1) // 2
        else:
            s = d
        k = (int(groups[i]), s, deg0[i], i)
        key[i] = k
        heapq.heappush(heap, k)

    for i in range(n):
        push(i, deg[i])

    order = []
    while heap:
        k = heapq.heappop(heap)
        p = k[3]
        if not alive[p] or key[p] != k:
            continue
        alive[p] = False
        order.extend(members[p])
        remaining -= nv[p]

        Lp = set(v for v in A[p] if alive[v])
        absorbed = E[p]
        for e in absorbed:
            Lp.update(v for v in Le[e] if alive[v])
        for e in absorbed:
            Le.pop(e, None)
            eW.pop(e, None)
        Lp.discard(p)
        A[p] = set()
        E[p] = set()
        if not Lp:
            continue
        wLp = sum(nv[v] for v in Lp)
        if len(Lp) > 1:
            Le[p] = Lp
            eW[p] = wLp

        # |Le \ Lp| for every element touching Lp (negative marks are unused)
        outside = {}
        for i in Lp:
            Ei = E[i]
            Ei.difference_update(absorbed)
            for e in Ei:
                if e not in outside:
                    outside[e] = eW[e]
                outside[e] -= nv[i]
            A[i].difference_update(Lp)
            A[i].discard(p)
            if len(Lp) > 1:
                Ei.add(p)

        # aggressive absorption: elements entirely inside the new clique
        dead = [e for e, w in outside.items() if w <= 0]
        for e in dead:
            for v in Le[e]:
                E[v].discard(e)
            del Le[e]
            del eW[e]
            del outside[e]

        # supervariable detection among the clique members
        buckets = {}
        for i in Lp:
            if not alive[i]:
                continue
            h = (int(groups[i]), frozenset(A[i]), frozenset(E[i]))
            buckets.setdefault(h, []).append(i)
        for same in buckets.values():
            if len(same) < 2:
                continue
            rep = min(same)
            for j in same:
                if j == rep:
                    continue
                nv[rep] += nv[j]
                members[rep].extend(members[j])
                alive[j] = False
                for v in A[j]:
                    A[v].discard(j)
                for e in E[j]:
                    Le[e].discard(j)
                A[j] = set()
                E[j] = set()
            # rep and the merged variables were mutual neighbours only if they
            # were adjacent through A; drop any self reference
            A[rep].discard(rep)

        for i in Lp:
            if not alive[i]:
                continue
            ext = sum(nv[v] for v in A[i]) + (wLp - nv[i])
            clique = wLp - nv[i]
            for e in E[i]:
                if e == p:
                    continue
                ext += outside.get(e, eW[e] - nv[i])
                clique = max(clique, eW[e] - nv[i])
            d = min(remaining - nv[i], ext)
            deg[i] = d
            push(i, d, clique)
    return np.array(order, np.int64)
