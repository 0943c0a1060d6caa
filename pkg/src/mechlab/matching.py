"""Exact maximum-weight bipartite matching (partial) with VCG prices.

Weights are rationals. Edges of negative weight are never used. Among
maximum-weight matchings the one with the most edges is chosen, and among
those the lexicographically smallest sorted edge list.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError

ZERO = Fraction(0)


def _longest_path(nodes: int, adj, src: int, dst: int):
    """Bellman-Ford for the max-gain path; adj[u] = list of [v, cap, gain, rev_index]."""
    dist = [None] * nodes
    prev = [None] * nodes
    dist[src] = 0
    for _ in range(nodes):
        changed = False
        for u in range(nodes):
            du = dist[u]
            if du is None:
                continue
            for k, (v, cap, gain, _) in enumerate(adj[u]):
                if cap > 0 and (dist[v] is None or du + gain > dist[v]):
                    dist[v] = du + gain
                    prev[v] = (u, k)
                    changed = True
        if not changed:
            break
    return dist[dst], prev


def transport_max(w: Sequence[Sequence[Optional[int]]], L: Sequence[int], R: Sequence[int]):
    """Max total integer gain of a partial transportation plan.

    w[a][b] is the gain per unit on edge (a, b), or None if the edge is absent.
    Returns (gain, flow matrix). Successive longest augmenting paths keep the
    plan optimal for its size; augmentation stops once no path has positive gain.
    """
    A, B = len(L), len(R)
    N = A + B + 2
    s, t = A + B, A + B + 1
    adj: List[list] = [[] for _ in range(N)]

    def add(u, v, cap, gain):
        adj[u].append([v, cap, gain, len(adj[v])])
        adj[v].append([u, 0, -gain, len(adj[u]) - 1])

    big = sum(L) + 1
    for a in range(A):
        if L[a]:
            add(s, a, L[a], 0)
    for b in range(B):
        if R[b]:
            add(A + b, t, R[b], 0)
    edge_pos = {}
    for a in range(A):
        for b in range(B):
            if w[a][b] is not None and L[a] and R[b]:
                edge_pos[(a, b)] = len(adj[a])
                add(a, A + b, big, w[a][b])
    total = 0
    while True:
        gain, prev = _longest_path(N, adj, s, t)
        if gain is None or gain <= 0:
            break
        push = None
        v = t
        while v != s:
            u, k = prev[v]
            c = adj[u][k][1]
            push = c if push is None else min(push, c)
            v = u
        v = t
        while v != s:
            u, k = prev[v]
            e = adj[u][k]
            e[1] -= push
            adj[v][e[3]][1] += push
            v = u
        total += gain * push
    flow = [[0] * B for _ in range(A)]
    for (a, b), k in edge_pos.items():
        e = adj[a][k]
        flow[a][b] = adj[e[0]][e[3]][1]
    return total, flow


def scale_to_int(W: Sequence[Sequence[Fraction]]) -> Tuple[List[List[int]], int]:
    den = 1
    for row in W:
        for x in row:
            den = lcm(den, Fraction(x).denominator)
    return [[int(Fraction(x) * den) for x in row] for row in W], den


def max_weight(W: Sequence[Sequence[Fraction]]) -> Fraction:
    """Value of a maximum-weight partial matching."""
    r = len(W)
    if r == 0:
        return ZERO
    Wi, den = scale_to_int(W)
    w = [[x if x > 0 else None for x in row] for row in Wi]
    total, _ = transport_max(w, [1] * r, [1] * len(W[0]))
    return Fraction(total, den)


@dataclass
class MatchingResult:
    pairs: List[Tuple[int, int]]                    # VCG-matched (left, right)
    weight: Fraction
    prices: Dict[int, Fraction]                     # VCG price per matched left node
    completion: List[Tuple[int, int]] = field(default_factory=list)   # random pairs

    @property
    def partner(self) -> Dict[int, int]:
        return dict(self.pairs)


def vcg_matching(W: Sequence[Sequence], rng: Optional[np.random.Generator] = None) -> MatchingResult:
    """Maximum-weight matching with VCG prices and random completion of the rest."""
    r = len(W)
    if any(len(row) != r for row in W):
        raise ParameterError("weight matrix must be square")
    W = [[Fraction(x) for x in row] for row in W]
    if r == 0:
        return MatchingResult([], ZERO, {})
    Wi, den = scale_to_int(W)
    base = r + 1
    K = base ** r
    # composite gain: weight first, then cardinality, then lexicographic order
    comp = [[None if Wi[i][j] < 0 else
             (Wi[i][j] * (r + 1) + 1) * K + (r - j) * base ** (r - 1 - i)
             for j in range(r)] for i in range(r)]
    _, flow = transport_max(comp, [1] * r, [1] * r)
    pairs = [(i, j) for i in range(r) for j in range(r) if flow[i][j]]
    total = sum((W[i][j] for i, j in pairs), ZERO)
    prices = {}
    for i, j in pairs:
        without = [row if k != i else [Fraction(-1)] * r for k, row in enumerate(W)]
        prices[i] = max_weight(without) - (total - W[i][j])
    completion = []
    left = [i for i in range(r) if all(i != a for a, _ in pairs)]
    right = [j for j in range(r) if all(j != b for _, b in pairs)]
    if left:
        if rng is None:
            rng = np.random.default_rng(0)
        order = rng.permutation(len(right))
        completion = [(i, right[int(k)]) for i, k in zip(left, order)]
    return MatchingResult(pairs, total, prices, completion)
