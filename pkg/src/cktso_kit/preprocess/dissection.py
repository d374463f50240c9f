"""Incomplete nested dissection followed by constrained minimum degree.

The graph is split recursively by a level-set bisection from a
pseudo-peripheral vertex, improved by one greedy boundary sweep, and the
vertex separator is taken from the smaller endpoint set of the cut. Every
leaf part and separator receives a group index in elimination order (both
halves before their separator); the final ordering is a minimum-degree pass
over the whole graph that respects those groups.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from ..sparse import Permutation, SparseMatrix, adjacency
from .ordering import order_cmd

LEAF_SIZE = 256


def order_nd_cmd(pattern: SparseMatrix, leaf_size: int = LEAF_SIZE) -> Permutation:
    groups = dissection_groups(pattern, leaf_size)
    return order_cmd(pattern, groups)


def dissection_groups(pattern: SparseMatrix, leaf_size: int = LEAF_SIZE) -> np.ndarray:
    adj = adjacency(pattern)
    groups = np.full(pattern.n, -1, np.int64)
    counter = [0]

    def assign(vs):
        groups[vs] = counter[0]
        counter[0] += 1

    # explicit stack: ("cut", vertices) or ("sep", vertices)
    stack = [("cut", np.arange(pattern.n))]
    while stack:
        kind, vs = stack.pop()
        if len(vs) == 0:
            continue
        if kind == "sep" or len(vs) <= leaf_size:
            assign(vs)
            continue
        part0, part1, sep = bisect(adj, vs)
        if len(part0) == 0 or len(part1) == 0:
            assign(vs)
            continue
        # processed LIFO: part0, then part1, then the separator
        stack.append(("sep", sep))
        stack.append(("cut", part1))
        stack.append(("cut", part0))
    return groups


def _bfs(adj, root, inside):
    level = {root: 0}
    q = deque([root])
    while q:
        v = q.popleft()
        for w in adj[v]:
            if w in inside and w not in level:
                level[w] = level[v] + 1
                q.append(w)
    return level


def _pseudo_peripheral(adj, start, inside):
    root = start
    level = _bfs(adj, root, inside)
    ecc = max(level.values())
    for _ in range(8):
        last = [v for v, lv in level.items() if lv == ecc]
        far = min(last, key=lambda v: (sum(1 for w in adj[v] if w in inside), v))
        far_level = _bfs(adj, far, inside)
        far_ecc = max(far_level.values())
        if far_ecc <= ecc:
            break
        root, level, ecc = far, far_level, far_ecc
    return root, level


def bisect(adj, vs):
    """Split ``vs`` into (part0, part1, separator) with no edges part0-part1."""
    inside = set(vs.tolist())
    n = len(vs)
    level = _bfs(adj, int(vs[0]), inside)
    if len(level) < n:
        # disconnected: pack components into two sides, no separator needed
        comps = []
        left = set(inside)
        while left:
            r = min(left)
            comp = set(_bfs(adj, r, inside))
            comps.append(sorted(comp))
            left -= comp
        comps.sort(key=len, reverse=True)
        sides = ([], [])
        for c in comps:
            (sides[0] if len(sides[0]) <= len(sides[1]) else sides[1]).extend(c)
        return np.array(sorted(sides[0]), np.int64), np.array(sorted(sides[1]), np.int64), np.zeros(0, np.int64)

    _, level = _pseudo_peripheral(adj, int(vs[0]), inside)
    max_level = max(level.values())
    counts = np.bincount(np.fromiter(level.values(), np.int64), minlength=max_level + 1)
    split = int(np.searchsorted(np.cumsum(counts), n / 2.0))
    if split >= max_level:
        split = max_level - 1
    side = {v: (0 if lv <= split else 1) for v, lv in level.items()}
    size = [sum(1 for s in side.values() if s == 0), 0]
    size[1] = n - size[0]

    # one greedy boundary sweep
    limit = max(int(0.55 * n), n // 2 + 1)
    for v in sorted(inside):
        s = side[v]
        own = other = 0
        for w in adj[v]:
            if w in inside:
                if side[w] == s:
                    own += 1
                else:
                    other += 1
        if other > own and size[1 - s] + 1 <= limit and size[s] > 1:
            side[v] = 1 - s
            size[s] -= 1
            size[1 - s] += 1

    ends = ([], [])
    for v in inside:
        s = side[v]
        if any(w in inside and side[w] != s for w in adj[v]):
            ends[s].append(v)
    if len(ends[0]) < len(ends[1]):
        take = 0
    elif len(ends[1]) < len(ends[0]):
        take = 1
    else:
        take = 0 if size[0] >= size[1] else 1
    sep = set(ends[take])
    part0 = sorted(v for v in inside if side[v] == 0 and v not in sep)
    part1 = sorted(v for v in inside if side[v] == 1 and v not in sep)
    return np.array(part0, np.int64), np.array(part1, np.int64), np.array(sorted(sep), np.int64)
