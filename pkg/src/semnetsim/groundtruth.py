"""Common and individualized ground-truth networks, and cue set sampling."""
from __future__ import annotations

import json
import math
import struct
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import GraphError, WeightedGraph

DEFAULT_WEIGHT_FLOOR = 0.2

# (p, r) combinations that keep average strength and clustering largely independent.
TABLE_S1: tuple[tuple[float, float], ...] = (
    (0.0, 1.0), (0.0, 0.875), (0.0, 0.75), (0.0, 0.625), (0.045, 0.5),
    (0.125, 0.875), (0.125, 0.75), (0.125, 0.625), (0.175, 0.5), (0.225, 0.375),
    (0.25, 0.8), (0.25, 0.7), (0.3, 0.55), (0.3, 0.45), (0.375, 0.3),
    (0.375, 0.7), (0.375, 0.625), (0.45, 0.45), (0.5, 0.325), (0.55, 0.2),
    (0.5, 0.625), (0.55, 0.5), (0.625, 0.325), (0.7, 0.15), (0.75, 0.0),
)  # fmt: skip


# -- embeddings ---------------------------------------------------------------


class EmbeddingTable(Mapping[str, np.ndarray]):
    """Word -> vector map with a fixed dimensionality."""

    def __init__(self, words: Sequence[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim != 2 or len(words) != len(vectors):
            raise ValueError("need one row vector per word")
        if len(set(words)) != len(words):
            raise ValueError("duplicate words in embedding table")
        if np.any(np.linalg.norm(vectors, axis=1) == 0):
            raise ValueError("embedding vectors must be non-zero")
        self.words = list(words)
        self.vectors = vectors
        self._row = {w: i for i, w in enumerate(self.words)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __getitem__(self, word: str) -> np.ndarray:
        return self.vectors[self._row[word]]

    def __iter__(self):
        return iter(self.words)

    def __len__(self) -> int:
        return len(self.words)


_BIN_MAGIC = b"SNEMB1\x00\x00"


def read_embeddings(path: str | Path, vocab: Iterable[str] | None = None) -> EmbeddingTable:
    """Read a text (``word v1 ... vd``) or binary embedding file.

    Binary layout, all little-endian: 8-byte magic ``SNEMB1\\0\\0``, uint32
    word count, uint32 dimension, then per word a uint16 byte length, the
    UTF-8 word, and ``dim`` float32 values.
    """
    keep = set(vocab) if vocab is not None else None
    path = Path(path)
    words, rows = [], []
    with path.open("rb") as fh:
        head = fh.read(len(_BIN_MAGIC))
        if head == _BIN_MAGIC:
            n, dim = struct.unpack("<II", fh.read(8))
            for _ in range(n):
                (nb,) = struct.unpack("<H", fh.read(2))
                word = fh.read(nb).decode("utf-8")
                vec = np.frombuffer(fh.read(4 * dim), dtype="<f4").astype(float)
                if keep is None or word in keep:
                    words.append(word)
                    rows.append(vec)
            return EmbeddingTable(words, np.array(rows).reshape(len(rows), dim))
    dim = None
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            continue  # word2vec-style "count dim" header
        word, vals = parts[0], parts[1:]
        if dim is None:
            dim = len(vals)
        elif len(vals) != dim:
            raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(vals)}")
        if keep is None or word in keep:
            words.append(word)
            rows.append([float(v) for v in vals])
    return EmbeddingTable(words, np.array(rows).reshape(len(rows), dim or 0))


def write_embeddings(emb: EmbeddingTable, path: str | Path, binary: bool = False) -> None:
    path = Path(path)
    if not binary:
        lines = [w + " " + " ".join(f"{x:.9g}" for x in emb[w]) for w in emb.words]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return
    with path.open("wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<II", len(emb), emb.dim))
        for w in emb.words:
            raw = w.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(np.asarray(emb[w], dtype="<f4").tobytes())


def read_word_list(path: str | Path) -> list[str]:
    return [w.strip() for w in Path(path).read_text(encoding="utf-8").splitlines() if w.strip()]


def synthetic_embeddings(
    n_words: int = 500, dim: int = 50, n_topics: int = 20, spread: float = 1.0, seed: int = 0
) -> EmbeddingTable:
    """Topic-clustered random vectors standing in for a pre-trained embedding.

    Each word is a mixture of a shared general direction, its topic centroid
    and isotropic noise, which yields a skewed, clustered cosine distribution.
    """
    rng = np.random.default_rng(seed)
    general = rng.normal(size=dim)
    general /= np.linalg.norm(general)
    topics = rng.normal(size=(n_topics, dim))
    topics /= np.linalg.norm(topics, axis=1, keepdims=True)
    assign = rng.integers(n_topics, size=n_words)
    loading = rng.uniform(0.4, 1.2, size=(n_words, 1))
    noise = rng.normal(scale=spread / math.sqrt(dim), size=(n_words, dim))
    vecs = 0.45 * general + loading * topics[assign] + noise
    words = [f"w{i:04d}" for i in range(n_words)]
    return EmbeddingTable(words, vecs)


# -- common ground truth --------------------------------------------------------


def cosine_matrix(vectors: np.ndarray) -> np.ndarray:
    unit = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    sim = unit @ unit.T
    return np.clip(sim, -1.0, 1.0)


def build_similarity_network(
    emb: EmbeddingTable, vocab: Sequence[str] | None = None, weight_floor: float = DEFAULT_WEIGHT_FLOOR
) -> WeightedGraph:
    """Cosine-similarity graph over ``vocab``; only similarities above the floor become edges."""
    if not 0.0 <= weight_floor < 1.0:
        raise ValueError("weight_floor must lie in [0, 1)")
    vocab = list(emb.words if vocab is None else vocab)
    missing = [w for w in vocab if w not in emb]
    if missing:
        raise KeyError(f"words missing from embedding table: {missing[:20]}" + (" ..." if len(missing) > 20 else ""))
    vecs = np.array([emb[w] for w in vocab])
    sim = cosine_matrix(vecs)
    i, j = np.triu_indices(len(vocab), k=1)
    s = sim[i, j]
    keep = s > weight_floor
    return WeightedGraph(len(vocab), np.column_stack([i[keep], j[keep]]), s[keep], vocab)


# -- individualization ----------------------------------------------------------


def triangle_scores(g: WeightedGraph) -> np.ndarray:
    """Per-edge sum, over triangles containing the edge, of the product of the three weights.

    Aligned with ``g.edges``; equals ``w_ij * (W @ W)_ij``.
    """
    if g.n_edges == 0:
        return np.zeros(0)
    w = g.adjacency
    ww = w @ w
    i, j = g.edges[:, 0], g.edges[:, 1]
    return g.weights * np.asarray(ww[i, j]).ravel()


@dataclass(frozen=True)
class PerturbationParams:
    p: float
    r: float
    weight_floor: float = DEFAULT_WEIGHT_FLOOR
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 0.75:
            raise ValueError(f"p={self.p} outside [0, 0.75]")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r={self.r} outside [0, 1]")
        if not 0.0 < self.weight_floor < 1.0:
            raise ValueError("weight_floor must lie in (0, 1)")


class _WeightSampler:
    """Fenwick tree for repeated weight-proportional draws with point updates."""

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=float).copy()
        n = len(self.values)
        tree = [0.0] * (n + 1)
        for i, v in enumerate(self.values.tolist(), 1):
            tree[i] += v
            parent = i + (i & -i)
            if parent <= n:
                tree[parent] += tree[i]
        self._tree = tree
        self._top = 1 << (n.bit_length() - 1) if n else 0

    @property
    def total(self) -> float:
        n = len(self.values)
        s, i = 0.0, n
        while i > 0:
            s += self._tree[i]
            i -= i & -i
        return s

    def set(self, idx: int, value: float) -> None:
        delta = value - self.values[idx]
        self.values[idx] = value
        i, n, tree = idx + 1, len(self.values), self._tree
        while i <= n:
            tree[i] += delta
            i += i & -i

    def draw(self, u: float) -> int:
        """Index of the first element whose cumulative weight exceeds ``u``."""
        pos, step, tree, n = 0, self._top, self._tree, len(self.values)
        while step:
            nxt = pos + step
            if nxt <= n and tree[nxt] <= u:
                pos = nxt
                u -= tree[nxt]
            step >>= 1
        return min(pos, n - 1)


def perturb(g: WeightedGraph, params: PerturbationParams, rng: np.random.Generator | None = None) -> WeightedGraph:
    """One individualized copy of ``g`` via triangle-score guided weight removal/relocation.

    Half of the edges (floor) become sources: a share ``p`` drawn from the
    upper half of the triangle-score ordering, the rest from the lower half.
    Each source draws ``k ~ U(0, 1)``. A share ``1 - r`` of sources lose the
    fraction ``k`` of their weight; the remaining sources hand that fraction
    to a non-source edge drawn proportionally to its current weight (capped
    at 1). Edges below the weight floor are removed at the end.

    ``rng`` overrides the generator seeded from ``params.seed``.
    """
    n_edges = g.n_edges
    n_src = n_edges // 2
    if n_src < 1 or n_edges - n_src < 1:
        raise GraphError(f"need at least 2 edges to perturb, got {n_edges}")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    w = g.weights.astype(float).copy()

    # strict ordering by (score, edge index); upper pool holds the top n_src edges
    order = np.lexsort((np.arange(n_edges), triangle_scores(g)))
    upper, lower = order[n_edges - n_src :], order[: n_edges - n_src]
    n_up = int(round(params.p * n_src))
    sources = np.concatenate(
        [
            rng.choice(upper, size=n_up, replace=False),
            rng.choice(lower, size=n_src - n_up, replace=False),
        ]
    ).astype(np.int64)
    k = rng.uniform(0.0, 1.0, size=n_src)

    n_reloc = int(round(params.r * n_src))
    shuffled = rng.permutation(n_src)
    reloc, reduce_ = shuffled[:n_reloc], shuffled[n_reloc:]
    w[sources[reduce_]] *= 1.0 - k[reduce_]

    if n_reloc:
        is_src = np.zeros(n_edges, dtype=bool)
        is_src[sources] = True
        targets = np.flatnonzero(~is_src)
        sampler = _WeightSampler(w[targets])
        for idx in reloc.tolist():
            e = sources[idx]
            amount = k[idx] * w[e]
            w[e] -= amount
            t = sampler.draw(rng.uniform(0.0, sampler.total))
            sampler.set(t, min(1.0, sampler.values[t] + amount))
        w[targets] = sampler.values

    keep = w >= params.weight_floor
    return g.with_weights(w, keep)


def _perturb_task(args):
    g, p, r, floor, seed = args
    return perturb(g, PerturbationParams(p, r, floor, seed))


def individual_seed(seed: int, grid_index: int, replicate: int) -> int:
    ss = np.random.SeedSequence([int(seed), int(grid_index), int(replicate)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def generate_individual_networks(
    g: WeightedGraph,
    grid: Sequence[tuple[float, float]] = TABLE_S1,
    replicates: int = 10,
    seed: int = 0,
    weight_floor: float = DEFAULT_WEIGHT_FLOOR,
    workers: int = 1,
) -> list[WeightedGraph]:
    """``len(grid) * replicates`` perturbed copies, grid-major order."""
    if not grid:
        raise ValueError("perturbation grid is empty")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    tasks = [
        (g, float(p), float(r), weight_floor, individual_seed(seed, gi, rep))
        for gi, (p, r) in enumerate(grid)
        for rep in range(replicates)
    ]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_perturb_task, tasks))
    return [_perturb_task(t) for t in tasks]


# -- cue sets -----------------------------------------------------------------------

CUE_SET_TYPES = ("narrow", "broad", "mixed")


class CueSetError(GraphError):
    def __init__(self, message: str, achieved: int):
        super().__init__(message)
        self.achieved = achieved

    def __reduce__(self):
        return type(self), (str(self), self.achieved)


@dataclass(frozen=True)
class CueSet:
    type: str
    cues: tuple[int, ...]
    source_graph_id: str = ""

    def labels(self, g: WeightedGraph) -> list[str]:
        return [g.labels[i] for i in self.cues]

    def __len__(self) -> int:
        return len(self.cues)


def _check_size(g: WeightedGraph, size: int) -> None:
    if size < 1:
        raise ValueError("cue set size must be >= 1")
    if size > g.n_nodes:
        raise CueSetError(f"cue set size {size} exceeds {g.n_nodes} nodes", 0)


class _NarrowGrower:
    """Greedy growth: add the frontier node with the highest mean weight to the group.

    Mean weight counts absent edges as 0, so ties are compared on summed
    weight; equal sums go to the smallest node index.
    """

    def __init__(self, g: WeightedGraph, start: int, taken: np.ndarray):
        self.g = g
        self.taken = taken
        self.score = np.zeros(g.n_nodes)
        self.frontier = np.zeros(g.n_nodes, dtype=bool)
        self.size = 0
        self.add(start)

    def add(self, node: int) -> None:
        idx, w = self.g.neighbor_weights(node)
        self.score[idx] += w
        self.frontier[idx] = True
        self.taken[node] = True
        self.size += 1

    def next(self) -> int | None:
        cand = np.flatnonzero(self.frontier & ~self.taken)
        if len(cand) == 0:
            return None
        return int(cand[np.argmax(self.score[cand])])


def narrow_cues(g: WeightedGraph, size: int, seed: int, graph_id: str = "") -> CueSet:
    _check_size(g, size)
    rng = np.random.default_rng(seed)
    taken = np.zeros(g.n_nodes, dtype=bool)
    start = int(rng.integers(g.n_nodes))
    grower = _NarrowGrower(g, start, taken)
    cues = [start]
    while len(cues) < size:
        nxt = grower.next()
        if nxt is None:
            raise CueSetError(f"narrow growth stalled at {len(cues)} of {size} cues", len(cues))
        grower.add(nxt)
        cues.append(nxt)
    return CueSet("narrow", tuple(cues), graph_id)


def _broad_walk(g: WeightedGraph, size: int, rng: np.random.Generator, taken: np.ndarray) -> list[int]:
    start = int(rng.choice(np.flatnonzero(~taken)))
    taken[start] = True
    cues, stack = [start], [start]
    while len(cues) < size:
        while stack:
            unused = [v for v in g.neighbors(stack[-1]).tolist() if not taken[v]]
            if unused:
                break
            stack.pop()  # dead end: back up to the previous node with unused neighbors
        if not stack:
            raise CueSetError(f"broad walk exhausted at {len(cues)} of {size} cues", len(cues))
        nxt = unused[int(rng.integers(len(unused)))]
        taken[nxt] = True
        cues.append(nxt)
        stack.append(nxt)
    return cues


def broad_cues(g: WeightedGraph, size: int, seed: int, graph_id: str = "") -> CueSet:
    _check_size(g, size)
    rng = np.random.default_rng(seed)
    taken = np.zeros(g.n_nodes, dtype=bool)
    return CueSet("broad", tuple(_broad_walk(g, size, rng, taken)), graph_id)


def mixed_cues(g: WeightedGraph, size: int, seed: int, graph_id: str = "") -> CueSet:
    """``floor(sqrt(size))`` broad seeds, then narrow growth around each seed in turn."""
    _check_size(g, size)
    rng = np.random.default_rng(seed)
    taken = np.zeros(g.n_nodes, dtype=bool)
    n_b = math.isqrt(size)
    seeds = _broad_walk(g, n_b, rng, taken)
    cues = list(seeds)
    # growers share `taken`, so no node is added twice
    growers = [_NarrowGrower(g, s, taken) for s in seeds]
    active = list(range(len(growers)))
    turn = 0
    while len(cues) < size:
        if not active:
            raise CueSetError(f"mixed growth stalled at {len(cues)} of {size} cues", len(cues))
        slot = active[turn % len(active)]
        nxt = growers[slot].next()
        if nxt is None:
            active.remove(slot)
            continue
        growers[slot].add(nxt)
        cues.append(nxt)
        turn += 1
    return CueSet("mixed", tuple(cues), graph_id)


_CUE_BUILDERS = {"narrow": narrow_cues, "broad": broad_cues, "mixed": mixed_cues}


def make_cues(g: WeightedGraph, kind: str, size: int, seed: int, graph_id: str = "") -> CueSet:
    try:
        builder = _CUE_BUILDERS[kind]
    except KeyError:
        raise ValueError(f"unknown cue set type {kind!r}; expected one of {CUE_SET_TYPES}") from None
    return builder(g, size, seed, graph_id)


def write_cues(cues: CueSet, g: WeightedGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cues.labels(g)) + "\n", encoding="utf-8")


def read_cues(path: str | Path, g: WeightedGraph, kind: str = "custom") -> CueSet:
    labels = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(labels, list):
        raise ValueError(f"{path}: cue file must hold a JSON array of labels")
    idx = tuple(g.index_of(str(x)) for x in labels)
    if len(set(idx)) != len(idx):
        raise ValueError(f"{path}: duplicate cues")
    return CueSet(kind, idx)
