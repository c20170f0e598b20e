"""Maximum-weight bipartite matching (Hungarian method) and an exhaustive oracle.

Left vertices carry the weight (the AoI of a candidate packet's source ED);
right vertices are channels.  Among optimal matchings the result is unique:
the set of matched left vertices is the lexicographically smallest (lowest
indices preferred), then each matched left vertex takes the lowest channel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass
class WeightedBipartiteGraph:
    weights: Sequence[int]  # one per left vertex, >= 1
    n_right: int
    adj: Sequence[Sequence[bool]]  # adj[i][j]: edge between left i and right j

    @property
    def n_left(self) -> int:
        return len(self.weights)

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n_left) for j in range(self.n_right) if self.adj[i][j]]


def _hungarian_max(w: list[list[int]]) -> list[int]:
    """Maximize sum of w[i][col[i]] over injective assignments of rows to columns.

    Requires ``len(w) <= len(w[0])``.  Potentials-based shortest augmenting
    path, O(n^2 m), exact on Python integers.
    """
    n, m = len(w), len(w[0])
    INF = 1 << 512
    cost = [[-x for x in row] for row in w]
    u = [0] * (n + 1)
    v = [0] * (m + 1)
    p = [0] * (m + 1)  # p[j]: row (1-based) assigned to column j
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            ci = cost[i0 - 1]
            ui = u[i0]
            for j in range(1, m + 1):
                if not used[j]:
                    cur = ci[j - 1] - ui - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col = [-1] * n
    for j in range(1, m + 1):
        if p[j]:
            col[p[j] - 1] = j - 1
    return col


def max_weight_matching(g: WeightedBipartiteGraph) -> list[tuple[int, int]]:
    """Return matched ``(left, right)`` pairs, sorted by left index."""
    L, R = g.n_left, g.n_right
    if L == 0 or R == 0:
        return []
    # Layered integer weights: AoI sum dominates, then the matched-left set
    # (lowest indices first), then lowest channels in left-index order.
    chan_scale = R ** L
    set_scale = (1 << L) * chan_scale
    w = [[0] * R for _ in range(L)]
    for i in range(L):
        for j in range(R):
            if g.adj[i][j]:
                w[i][j] = (g.weights[i] * set_scale + (1 << (L - 1 - i)) * chan_scale
                           - j * R ** (L - 1 - i))
    if L <= R:
        col = _hungarian_max(w)
        pairs = [(i, col[i]) for i in range(L)]
    else:
        wt = [[w[i][j] for i in range(L)] for j in range(R)]
        row = _hungarian_max(wt)
        pairs = sorted((row[j], j) for j in range(R))
    return [(i, j) for i, j in pairs if j >= 0 and g.adj[i][j]]


def matching_weight(g: WeightedBipartiteGraph, pairs: Sequence[tuple[int, int]]) -> int:
    return sum(g.weights[i] for i, _ in pairs)


def brute_force_matching(g: WeightedBipartiteGraph) -> tuple[int, list[tuple[int, int]]]:
    """Exhaustive optimum over every matching; exponential, test use only."""
    best = (-1, [])

    def rec(i: int, used: int, acc: int, pairs: list[tuple[int, int]]):
        nonlocal best
        if i == g.n_left:
            if acc > best[0]:
                best = (acc, list(pairs))
            return
        rec(i + 1, used, acc, pairs)
        for j in range(g.n_right):
            if g.adj[i][j] and not used >> j & 1:
                pairs.append((i, j))
                rec(i + 1, used | 1 << j, acc + g.weights[i], pairs)
                pairs.pop()

    rec(0, 0, 0, [])
    return best
