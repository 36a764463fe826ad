"""Slow reference implementations used as test oracles. Deliberately naive."""
from __future__ import annotations

import math

import numpy as np

from semnetsim.graph import WeightedGraph


def random_graph(rng: np.random.Generator, n: int, density: float, w_low: float = 0.05) -> WeightedGraph:
    edges, weights = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                edges.append((i, j))
                # occasionally exact 1.0 to exercise zero-length steps
                weights.append(1.0 if rng.random() < 0.1 else float(rng.uniform(w_low, 1.0)))
    return WeightedGraph(n, edges, weights)


def dense(g: WeightedGraph) -> list[list[float]]:
    m = [[0.0] * g.n_nodes for _ in range(g.n_nodes)]
    for (i, j), w in g.edge_dict().items():
        m[i][j] = m[j][i] = w
    return m


def floyd_warshall_aspl(g: WeightedGraph) -> tuple[float, float]:
    n = g.n_nodes
    w = dense(g)
    d = [[0.0 if i == j else (1.0 - w[i][j] if w[i][j] > 0 else math.inf) for j in range(n)] for i in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    vals = [d[i][j] for i in range(n) for j in range(n) if i != j and d[i][j] < math.inf]
    if not vals:
        return math.nan, 0.0
    return sum(vals) / len(vals), len(vals) / (n * (n - 1))


def barrat_cc(g: WeightedGraph) -> list[float]:
    """cc_i = 1/(s_i (k_i - 1)) * sum over ordered (j, h), j != h, of (w_ij + w_ih)/2 a_ij a_ih a_jh."""
    w = dense(g)
    n = g.n_nodes
    out = []
    for i in range(n):
        nb = [j for j in range(n) if w[i][j] > 0]
        k = len(nb)
        s = sum(w[i][j] for j in nb)
        if k < 2:
            out.append(0.0)
            continue
        total = 0.0
        for j in nb:
            for h in nb:
                if j != h and w[j][h] > 0:
                    total += (w[i][j] + w[i][h]) / 2
        out.append(total / (s * (k - 1)))
    return out


def modularity_direct(g: WeightedGraph, part) -> float:
    w = dense(g)
    n = g.n_nodes
    s = [sum(row) for row in w]
    two_m = sum(s)
    q = 0.0
    for i in range(n):
        for j in range(n):
            if part[i] == part[j]:
                q += w[i][j] - s[i] * s[j] / two_m
    return q / two_m


def set_partitions(n: int):
    """All set partitions of range(n) as restricted growth strings."""
    def grow(prefix, mx):
        if len(prefix) == n:
            yield list(prefix)
            return
        for c in range(mx + 2):
            yield from grow(prefix + [c], max(mx, c))
    yield from grow([0], 0) if n else iter([[]])


def best_modularity(g: WeightedGraph) -> float:
    return max(modularity_direct(g, p) for p in set_partitions(g.n_nodes))


def two_cliques(a: int, b: int, bridge: float, inner: float = 1.0) -> WeightedGraph:
    edges, weights = [], []
    for block in (range(a), range(a, a + b)):
        block = list(block)
        for x in range(len(block)):
            for y in range(x + 1, len(block)):
                edges.append((block[x], block[y]))
                weights.append(inner)
    edges.append((a - 1, a))
    weights.append(bridge)
    return WeightedGraph(a + b, edges, weights)


def avg_ranks(x) -> list[float]:
    """Average ranks (1-based) by counting, O(n^2)."""
    out = []
    for v in x:
        less = sum(1 for u in x if u < v)
        equal = sum(1 for u in x if u == v)
        out.append(less + (equal + 1) / 2)
    return out


def spearman_brute(x, y) -> float:
    rx, ry = avg_ranks(list(x)), avg_ranks(list(y))
    n = len(rx)
    mx, my = sum(rx) / n, sum(ry) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sxx = sum((a - mx) ** 2 for a in rx)
    syy = sum((b - my) ** 2 for b in ry)
    if sxx == 0 or syy == 0:
        return math.nan
    return sxy / math.sqrt(sxx * syy)


def ppmi_cosine_brute(counts: list[list[float]]) -> list[list[float]]:
    total = sum(sum(r) for r in counts)
    rows = [sum(r) for r in counts]
    cols = [sum(r[c] for r in counts) for c in range(len(counts[0]))]
    pm = [
        [max(0.0, math.log((n / total) / ((rows[i] / total) * (cols[c] / total)))) if n > 0 else 0.0
         for c, n in enumerate(r)]
        for i, r in enumerate(counts)
    ]  # fmt: skip
    out = []
    for a in pm:
        line = []
        for b in pm:
            na = math.sqrt(sum(x * x for x in a))
            nb = math.sqrt(sum(x * x for x in b))
            line.append(sum(x * y for x, y in zip(a, b)) / (na * nb) if na > 0 and nb > 0 else 0.0)
        out.append(line)
    return out
