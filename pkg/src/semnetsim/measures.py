"""Structural measures of weighted semantic networks.

Within-network measures are the edge weights and node strengths themselves.
Between-network measures are average strength, average shortest path length
(edge length ``1 - w``), average Barrat clustering on the strongest half of
the edges, and Louvain modularity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .graph import GraphError, WeightedGraph

BETWEEN_MEASURES = ("average_strength", "aspl", "average_cc", "modularity")
WITHIN_MEASURES = ("edge_weight", "node_strength")

_MOVE_TOL = 1e-12


def node_strength(g: WeightedGraph, i: int) -> float:
    _, w = g.neighbor_weights(i)
    return float(w.sum())


def average_strength(g: WeightedGraph) -> float:
    if g.n_nodes == 0:
        raise GraphError("average strength of an empty graph")
    return float(g.strengths().sum() / g.n_nodes)


def aspl(g: WeightedGraph) -> tuple[float, float]:
    """Mean shortest-path distance over reachable ordered pairs.

    Returns ``(aspl, reachable_pair_fraction)``. Unreachable pairs are left
    out of the mean; with no reachable pair at all the ASPL is NaN.
    """
    n = g.n_nodes
    if n < 2:
        raise GraphError("ASPL needs at least 2 nodes")
    lengths = g.adjacency.copy()
    # explicit zeros (weight-1 edges) stay in the CSR structure and count as edges
    lengths.data = 1.0 - lengths.data
    dist = shortest_path(lengths, method="D", directed=False)
    off = ~np.eye(n, dtype=bool)
    d = dist[off]
    reach = np.isfinite(d)
    frac = float(reach.sum() / (n * (n - 1)))
    if not reach.any():
        return math.nan, 0.0
    return float(d[reach].mean()), frac


def clustering_coefficients(g: WeightedGraph) -> np.ndarray:
    """Barrat weighted local clustering per node; 0 where degree < 2.

    Summing ``(w_ij + w_ih)/2`` over ordered neighbor pairs that are
    themselves linked equals ``sum_j w_ij * (A^2)_ij`` by symmetry.
    """
    if g.n_nodes == 0:
        return np.zeros(0)
    w = g.adjacency
    a = w.copy()
    a.data = np.ones_like(a.data)
    paths2 = a @ a
    num = np.asarray(w.multiply(paths2).sum(axis=1)).ravel()
    k = g.degrees().astype(float)
    s = g.strengths()
    cc = np.zeros(g.n_nodes)
    ok = k >= 2
    cc[ok] = num[ok] / (s[ok] * (k[ok] - 1))
    return cc


def average_cc(g: WeightedGraph) -> float:
    if g.n_nodes == 0:
        raise GraphError("average clustering of an empty graph")
    return float(clustering_coefficients(g).mean())


def top_half_subgraph(g: WeightedGraph) -> WeightedGraph:
    """Keep the ``ceil(E/2)`` heaviest edges; ties go to the smaller ``(i, j)``."""
    if g.n_edges == 0:
        raise GraphError("top-half subgraph of an edgeless graph")
    e, w = g.edges, g.weights
    order = np.lexsort((e[:, 1], e[:, 0], -w))
    keep = np.zeros(g.n_edges, dtype=bool)
    keep[order[: math.ceil(g.n_edges / 2)]] = True
    return g.with_weights(w, keep)


def modularity(g: WeightedGraph, communities, weighted: bool = True) -> float:
    """Newman modularity of a partition.

    ``weighted=True`` uses edge weights and strengths. ``weighted=False`` is
    the binary form on the unweighted skeleton (degrees, edge count).
    """
    comm = np.asarray(communities)
    if len(comm) != g.n_nodes:
        raise GraphError("partition must assign every node")
    if g.n_edges == 0:
        raise GraphError("modularity of an edgeless graph")
    w = g.weights if weighted else np.ones(g.n_edges)
    e = g.edges
    two_m = 2.0 * w.sum()
    labels, comm = np.unique(comm, return_inverse=True)
    inside = comm[e[:, 0]] == comm[e[:, 1]]
    internal = np.bincount(comm[e[inside, 0]], weights=w[inside], minlength=len(labels))
    node_s = np.bincount(e[:, 0], weights=w, minlength=g.n_nodes) + np.bincount(
        e[:, 1], weights=w, minlength=g.n_nodes
    )
    tot = np.bincount(comm, weights=node_s, minlength=len(labels))
    return float(np.sum(2.0 * internal / two_m - (tot / two_m) ** 2))


def _one_level(nbrs: list[dict[int, float]], strength: list[float], two_m: float, rng) -> list[int]:
    """Local moving phase: each node moves to the neighbor community with best gain."""
    n = len(nbrs)
    comm = list(range(n))
    tot = list(strength)
    improved = True
    while improved:
        improved = False
        for u in rng.permutation(n).tolist():
            cu, su = comm[u], strength[u]
            links: dict[int, float] = {}
            for v, w in nbrs[u].items():
                c = comm[v]
                links[c] = links.get(c, 0.0) + w
            tot[cu] -= su
            best_c = cu
            best_gain = links.get(cu, 0.0) - su * tot[cu] / two_m
            for c in sorted(links):
                gain = links[c] - su * tot[c] / two_m
                if gain > best_gain + _MOVE_TOL:
                    best_c, best_gain = c, gain
            tot[best_c] += su
            if best_c != cu:
                comm[u] = best_c
                improved = True
    return comm


def louvain(g: WeightedGraph, seed: int = 0, weighted: bool = True) -> np.ndarray:
    """Louvain partition; node visit order is shuffled by ``seed``.

    Returns an int array of community ids numbered by first appearance.
    """
    if g.n_edges == 0:
        raise GraphError("Louvain on an edgeless graph")
    rng = np.random.default_rng(seed)
    w = g.weights if weighted else np.ones(g.n_edges)
    nbrs: list[dict[int, float]] = [dict() for _ in range(g.n_nodes)]
    for (a, b), x in zip(g.edges.tolist(), w.tolist()):
        nbrs[a][b] = x
        nbrs[b][a] = x
    strength = [sum(d.values()) for d in nbrs]
    two_m = float(sum(strength))
    membership = np.arange(g.n_nodes)
    while True:
        comm = _one_level(nbrs, strength, two_m, rng)
        uniq = {c: k for k, c in enumerate(dict.fromkeys(comm))}
        if len(uniq) == len(nbrs):
            break
        comm = [uniq[c] for c in comm]
        membership = np.asarray(comm)[membership]
        agg: list[dict[int, float]] = [dict() for _ in range(len(uniq))]
        agg_s = [0.0] * len(uniq)
        for u, d in enumerate(nbrs):
            cu = comm[u]
            agg_s[cu] += strength[u]
            for v, x in d.items():
                cv = comm[v]
                if cu != cv:
                    agg[cu][cv] = agg[cu].get(cv, 0.0) + x
        nbrs, strength = agg, agg_s
    _, first = np.unique(membership, return_index=True)
    order = {c: k for k, c in enumerate(membership[np.sort(first)])}
    return np.array([order[c] for c in membership], dtype=np.int64)


def modularity_louvain(g: WeightedGraph, seed: int = 0, weighted: bool = True) -> tuple[float, np.ndarray]:
    part = louvain(g, seed, weighted)
    return modularity(g, part, weighted), part


@dataclass
class MeasureRecord:
    average_strength: float
    aspl: float
    average_cc: float
    modularity: float
    reachable_pair_fraction: float
    node_strengths: np.ndarray = field(repr=False)
    edge_weights: np.ndarray = field(repr=False)  # (E, 3): i, j, w

    def between(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in BETWEEN_MEASURES}


def measure_network(g: WeightedGraph, seed: int = 0) -> MeasureRecord:
    """All six measures; undefined values (edgeless graphs etc.) come back as NaN."""
    if g.n_nodes == 0:
        raise GraphError("cannot measure an empty graph")
    strengths = g.strengths()
    if g.n_nodes >= 2:
        path, frac = aspl(g)
    else:
        path, frac = math.nan, 0.0
    if g.n_edges:
        cc = average_cc(top_half_subgraph(g))
        q, _ = modularity_louvain(g, seed)
    else:
        cc = q = math.nan
    edge_weights = np.column_stack([g.edges.astype(float), g.weights]) if g.n_edges else np.zeros((0, 3))
    return MeasureRecord(
        average_strength=float(strengths.mean()),
        aspl=path,
        average_cc=cc,
        modularity=q,
        reachable_pair_fraction=frac,
        node_strengths=strengths,
        edge_weights=edge_weights,
    )
