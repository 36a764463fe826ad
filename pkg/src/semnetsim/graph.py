"""Immutable weighted undirected graph and its edge-list text format."""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Invalid graph input (unknown node, bad weight, empty graph, ...)."""


class WeightedGraph:
    """Undirected graph over nodes ``0..n-1`` with weights in (0, 1].

    Edges are stored once, canonically with ``i < j``, sorted
    lexicographically. Instances are treated as immutable; derived
    structures (adjacency matrix, neighbor lists) are cached.
    """

    def __init__(
        self,
        n_nodes: int,
        edges: Iterable[tuple[int, int]] | np.ndarray = (),
        weights: Iterable[float] | np.ndarray = (),
        labels: Sequence[str] | None = None,
    ):
        n_nodes = int(n_nodes)
        if n_nodes < 0:
            raise GraphError("node count must be nonnegative")
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        w = np.asarray(list(weights) if not isinstance(weights, np.ndarray) else weights, dtype=float)
        e = e.reshape(-1, 2)
        if len(e) != len(w):
            raise GraphError(f"{len(e)} edges but {len(w)} weights")
        if len(e):
            if e.min() < 0 or e.max() >= n_nodes:
                raise GraphError("edge endpoint outside node range")
            if np.any(e[:, 0] == e[:, 1]):
                raise GraphError("self-loops are not allowed")
            if np.any(~np.isfinite(w)) or np.any(w <= 0) or np.any(w > 1):
                raise GraphError("edge weights must lie in (0, 1]")
            lo = np.minimum(e[:, 0], e[:, 1])
            hi = np.maximum(e[:, 0], e[:, 1])
            order = np.lexsort((hi, lo))
            lo, hi, w = lo[order], hi[order], w[order]
            dup = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
            if np.any(dup):
                k = int(np.flatnonzero(dup)[0])
                raise GraphError(f"duplicate edge ({lo[k]}, {hi[k]})")
            e = np.column_stack([lo, hi])
        if labels is not None:
            labels = tuple(str(x) for x in labels)
            if len(labels) != n_nodes:
                raise GraphError(f"{len(labels)} labels for {n_nodes} nodes")
            if len(set(labels)) != n_nodes:
                raise GraphError("node labels must be unique")
        self._n = n_nodes
        self._edges = e
        self._weights = w
        self._edges.setflags(write=False)
        self._weights.setflags(write=False)
        self._labels = labels

    # -- construction helpers ------------------------------------------------

    @classmethod
    def from_dense(cls, matrix: np.ndarray, labels: Sequence[str] | None = None) -> "WeightedGraph":
        """Build from a symmetric matrix; nonzero upper-triangle entries become edges."""
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise GraphError("adjacency matrix must be square")
        i, j = np.nonzero(np.triu(m, k=1))
        return cls(m.shape[0], np.column_stack([i, j]), m[i, j], labels)

    @classmethod
    def from_edge_dict(
        cls, n_nodes: int, weights: Mapping[tuple[int, int], float], labels: Sequence[str] | None = None
    ) -> "WeightedGraph":
        items = sorted(weights.items())
        return cls(n_nodes, [k for k, _ in items], [v for _, v in items], labels)

    def with_weights(self, weights: np.ndarray, keep: np.ndarray | None = None) -> "WeightedGraph":
        """Same node set and edge ids with new weights, optionally dropping edges."""
        weights = np.asarray(weights, dtype=float)
        edges = self._edges
        if keep is not None:
            edges, weights = edges[keep], weights[keep]
        return WeightedGraph(self._n, edges.copy(), weights.copy(), self._labels)

    # -- basic accessors -----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self._n

    @property
    def n_edges(self) -> int:
        return len(self._weights)

    @property
    def edges(self) -> np.ndarray:
        """``(E, 2)`` int array of canonical ``(i, j)`` pairs with ``i < j``."""
        return self._edges

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def labels(self) -> tuple[str, ...]:
        if self._labels is None:
            return tuple(str(i) for i in range(self._n))
        return self._labels

    @property
    def has_labels(self) -> bool:
        return self._labels is not None

    @cached_property
    def _index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def index_of(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise GraphError(f"unknown node label {label!r}") from None

    def check_node(self, i: int) -> int:
        if not (0 <= int(i) < self._n) or int(i) != i:
            raise GraphError(f"unknown node {i!r} (graph has {self._n} nodes)")
        return int(i)

    def total_weight(self) -> float:
        return float(self._weights.sum())

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric CSR weight matrix (read-only use)."""
        i, j = self._edges[:, 0], self._edges[:, 1]
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        data = np.concatenate([self._weights, self._weights])
        return sp.csr_matrix((data, (rows, cols)), shape=(self._n, self._n))

    def dense(self) -> np.ndarray:
        m = np.zeros((self._n, self._n))
        i, j = self._edges[:, 0], self._edges[:, 1]
        m[i, j] = self._weights
        m[j, i] = self._weights
        return m

    def neighbors(self, i: int) -> np.ndarray:
        i = self.check_node(i)
        a = self.adjacency
        return a.indices[a.indptr[i] : a.indptr[i + 1]]

    def neighbor_weights(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        i = self.check_node(i)
        a = self.adjacency
        sl = slice(a.indptr[i], a.indptr[i + 1])
        return a.indices[sl], a.data[sl]

    def weight(self, i: int, j: int) -> float:
        """Weight of edge ``(i, j)``; 0.0 when absent."""
        i, j = self.check_node(i), self.check_node(j)
        idx, w = self.neighbor_weights(i)
        hit = np.flatnonzero(idx == j)
        return float(w[hit[0]]) if len(hit) else 0.0

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def strengths(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def edge_dict(self) -> dict[tuple[int, int], float]:
        return {(int(a), int(b)): float(w) for (a, b), w in zip(self._edges, self._weights)}

    # -- derived graphs ------------------------------------------------------

    def subgraph(self, nodes: Iterable[int]) -> "WeightedGraph":
        """Induced subgraph; node ``k`` of the result is ``nodes[k]`` of this graph."""
        nodes = [self.check_node(i) for i in nodes]
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate nodes in subgraph selection")
        remap = np.full(self._n, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        a, b = remap[self._edges[:, 0]], remap[self._edges[:, 1]]
        keep = (a >= 0) & (b >= 0)
        labels = [self.labels[i] for i in nodes]
        return WeightedGraph(len(nodes), np.column_stack([a[keep], b[keep]]), self._weights[keep], labels)

    def relabel(self, perm: Sequence[int]) -> "WeightedGraph":
        """Graph with node ``i`` renamed to ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self._n)):
            raise GraphError("relabeling must be a permutation")
        labels = None
        if self._labels is not None:
            labels = [""] * self._n
            for old, new in enumerate(perm):
                labels[new] = self._labels[old]
        return WeightedGraph(self._n, perm[self._edges], self._weights, labels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (
            self._n == other._n
            and self.labels == other.labels
            and np.array_equal(self._edges, other._edges)
            and np.array_equal(self._weights, other._weights)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"WeightedGraph(n_nodes={self._n}, n_edges={self.n_edges})"


# -- edge-list serialization --------------------------------------------------
#
# #nodes N
# #label<TAB>i<TAB>word          (optional, one per node)
# #meta<TAB>key<TAB>value        (optional provenance)
# i<TAB>j<TAB>w                  (one per edge, w with 9 significant digits)


def write_edgelist(g: WeightedGraph, path: str | Path, meta: Mapping[str, object] | None = None) -> None:
    lines = [f"#nodes {g.n_nodes}"]
    for key, value in (meta or {}).items():
        lines.append(f"#meta\t{key}\t{value}")
    if g.has_labels:
        lines.extend(f"#label\t{i}\t{lab}" for i, lab in enumerate(g.labels))
    lines.extend(f"{a}\t{b}\t{w:.9g}" for (a, b), w in zip(g.edges.tolist(), g.weights.tolist()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_edgelist(path: str | Path) -> tuple[WeightedGraph, dict[str, str]]:
    """Read a graph written by :func:`write_edgelist`; returns ``(graph, meta)``."""
    n = None
    meta: dict[str, str] = {}
    labels: dict[int, str] = {}
    edges, weights = [], []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        try:
            if line.startswith("#nodes"):
                n = int(line.split()[1])
            elif line.startswith("#meta"):
                _, key, value = raw.split("\t", 2)
                meta[key] = value
            elif line.startswith("#label"):
                _, idx, lab = raw.split("\t", 2)
                labels[int(idx)] = lab
            elif line.startswith("#"):
                continue
            else:
                a, b, w = line.split("\t")
                edges.append((int(a), int(b)))
                weights.append(float(w))
        except (ValueError, IndexError):
            raise GraphError(f"{path}:{lineno}: malformed line {raw!r}") from None
    if n is None:
        raise GraphError(f"{path}: missing '#nodes N' header")
    lab = None
    if labels:
        if sorted(labels) != list(range(n)):
            raise GraphError(f"{path}: label lines must cover every node")
        lab = [labels[i] for i in range(n)]
    return WeightedGraph(n, edges, weights, lab), meta
