"""Network inference from simulated behavior."""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .behavior import FA, RJ, ResponseData
from .graph import GraphError, WeightedGraph
from .groundtruth import CueSet


def count_matrix(data: ResponseData, cues: Sequence[str]) -> tuple[np.ndarray, list[str]]:
    """Cue x response count matrix; columns are the observed responses, sorted."""
    if data.variant != FA:
        raise ValueError("count matrix needs free-association data")
    vocab = sorted({r for c in cues for r in data.counts.get(c, {})})
    col = {r: k for k, r in enumerate(vocab)}
    m = np.zeros((len(cues), len(vocab)))
    for i, c in enumerate(cues):
        for r, n in data.counts.get(c, {}).items():
            m[i, col[r]] = n
    return m, vocab


def ppmi(counts: np.ndarray) -> np.ndarray:
    """Positive pointwise mutual information (natural log); zero counts map to 0."""
    m = np.asarray(counts, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("PPMI needs a non-empty 2-D count matrix")
    total = m.sum()
    if total <= 0:
        raise ValueError("PPMI needs a positive total count")
    row = m.sum(axis=1, keepdims=True)
    col = m.sum(axis=0, keepdims=True)
    out = np.zeros_like(m)
    nz = m > 0
    # p(c,r) / (p(c) p(r)) = n_cr * N / (n_c n_r)
    ratio = (m * total) / (row * col)
    out[nz] = np.maximum(0.0, np.log(ratio[nz]))
    return out


def cosine_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1)
    unit = np.zeros_like(x)
    ok = norms > 0
    unit[ok] = x[ok] / norms[ok, None]
    return np.clip(unit @ unit.T, 0.0, 1.0)


def _cue_labels(data: ResponseData, cues: CueSet | Sequence[str] | None, g: WeightedGraph | None) -> list[str]:
    if cues is None:
        return list(data.cues)
    if isinstance(cues, CueSet):
        if g is None:
            raise ValueError("resolving a CueSet to labels needs the graph it was drawn from")
        return cues.labels(g)
    return [str(c) for c in cues]


def infer_fa_network(
    data: ResponseData, cues: CueSet | Sequence[str] | None = None, graph: WeightedGraph | None = None
) -> WeightedGraph:
    """Cue graph weighted by cosine similarity of PPMI response profiles."""
    labels = _cue_labels(data, cues, graph)
    missing = [c for c in labels if c not in data.cues]
    if missing:
        raise GraphError(f"cues absent from response data: {missing[:10]}")
    m, _ = count_matrix(data, labels)
    if m.size == 0 or m.sum() == 0:
        return WeightedGraph(len(labels), labels=labels)
    sim = cosine_rows(ppmi(m))
    # rounding can push identical profiles a hair above 1
    sim = np.minimum(sim, 1.0)
    np.fill_diagonal(sim, 0.0)
    return WeightedGraph.from_dense(sim, labels)


def infer_rj_network(
    data: ResponseData, cues: CueSet | Sequence[str] | None = None, graph: WeightedGraph | None = None,
    scale_min: float = 1.0, scale_max: float = 20.0,
) -> WeightedGraph:
    """Cue graph weighted by mean judgment rescaled to [0, 1]; unjudged pairs get no edge."""
    if data.variant != RJ:
        raise ValueError("relatedness inference needs judgment data")
    if not data.judgments:
        raise ValueError("no judgments to infer from")
    labels = _cue_labels(data, cues, graph)
    index = {c: i for i, c in enumerate(labels)}
    edges, weights = [], []
    for (a, b), values in data.judgments.items():
        if a not in index or b not in index:
            raise GraphError(f"judged pair ({a}, {b}) not in cue set")
        w = (float(np.mean(values)) - scale_min) / (scale_max - scale_min)
        w = min(max(w, 0.0), 1.0)
        if w > 0:
            edges.append((index[a], index[b]))
            weights.append(w)
    return WeightedGraph(len(labels), edges, weights, labels)
