import math

import numpy as np
import pytest

from semnetsim.graph import GraphError, WeightedGraph
from semnetsim.groundtruth import (
    TABLE_S1,
    CueSetError,
    EmbeddingTable,
    PerturbationParams,
    _WeightSampler,
    broad_cues,
    build_similarity_network,
    generate_individual_networks,
    individual_seed,
    make_cues,
    mixed_cues,
    narrow_cues,
    perturb,
    read_cues,
    read_embeddings,
    synthetic_embeddings,
    triangle_scores,
    write_cues,
    write_embeddings,
)


class StubRNG:
    """Deterministic stand-in for the perturbation generator."""

    def __init__(self, k: float, u: float = 0.0):
        self.k, self.u = k, u

    def choice(self, a, size, replace=False):
        return np.asarray(a)[:size]

    def uniform(self, low=0.0, high=1.0, size=None):
        if size is None:
            return low + self.u * (high - low)
        return np.full(size, self.k)

    def permutation(self, n):
        return np.arange(n)


@pytest.fixture(scope="module")
def base():
    emb = synthetic_embeddings(n_words=120, dim=30, n_topics=8, seed=5)
    return build_similarity_network(emb, emb.words, 0.2)


def test_similarity_examples():
    emb = EmbeddingTable(["a", "b", "c", "d"], np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
    g = build_similarity_network(emb, ["a", "b", "c", "d"], 0.2)
    assert g.weight(0, 1) == pytest.approx(1.0)
    assert g.weight(0, 2) == 0.0
    assert g.weight(0, 3) == pytest.approx(1 / math.sqrt(2))
    assert g.labels == ("a", "b", "c", "d")


def test_similarity_missing_words():
    emb = EmbeddingTable(["a", "b"], np.eye(2))
    with pytest.raises(KeyError, match="zzz"):
        build_similarity_network(emb, ["a", "zzz"], 0.2)


def test_embedding_table_validation():
    with pytest.raises(ValueError):
        EmbeddingTable(["a", "a"], np.eye(2))
    with pytest.raises(ValueError):
        EmbeddingTable(["a", "b"], np.array([[1.0, 0.0], [0.0, 0.0]]))


@pytest.mark.parametrize("binary", [False, True])
def test_embedding_roundtrip(tmp_path, binary):
    emb = synthetic_embeddings(n_words=20, dim=7, n_topics=3, seed=1)
    path = tmp_path / ("e.bin" if binary else "e.txt")
    write_embeddings(emb, path, binary=binary)
    back = read_embeddings(path)
    assert back.words == emb.words
    for w in emb.words:
        assert back[w] == pytest.approx(emb[w], rel=1e-6)
    sub = read_embeddings(path, vocab=["w0003", "w0001"])
    assert set(sub.words) == {"w0001", "w0003"}


def test_triangle_score_examples():
    tri = WeightedGraph(3, [(0, 1), (0, 2), (1, 2)], [0.5] * 3)
    assert triangle_scores(tri) == pytest.approx([0.125] * 3)
    path = WeightedGraph(3, [(0, 1), (1, 2)], [0.5, 0.5])
    assert triangle_scores(path).tolist() == [0.0, 0.0]
    # edge (0,1) in triangles with node 2 (product 0.125) and node 3 (0.4^3 = 0.064)
    g = WeightedGraph(4, [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3)], [0.5, 0.5, 0.5, 0.4, 0.4])
    scores = dict(zip(map(tuple, g.edges.tolist()), triangle_scores(g)))
    assert scores[(0, 1)] == pytest.approx(0.5 * 0.5 * 0.5 + 0.5 * 0.4 * 0.4)
    g2 = WeightedGraph(4, [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3)], [1.0, 0.5, 0.25, 0.4, 0.16])
    s2 = dict(zip(map(tuple, g2.edges.tolist()), triangle_scores(g2)))
    assert s2[(0, 1)] == pytest.approx(0.125 + 0.064)


def test_triangle_scores_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = 9
        dense = np.triu(rng.uniform(0.1, 1, (n, n)) * (rng.random((n, n)) < 0.5), 1)
        dense = dense + dense.T
        g = WeightedGraph.from_dense(dense)
        got = triangle_scores(g)
        for (i, j), s in zip(g.edges.tolist(), got):
            want = sum(dense[i, j] * dense[i, h] * dense[j, h] for h in range(n))
            assert s == pytest.approx(want, abs=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        PerturbationParams(0.8, 0.5)
    with pytest.raises(ValueError):
        PerturbationParams(0.5, 1.5)
    with pytest.raises(ValueError):
        PerturbationParams(0.5, 0.5, weight_floor=0.0)


def test_perturb_zero_k_only_floor_removal():
    g = WeightedGraph(4, [(0, 1), (1, 2), (2, 3), (0, 3)], [0.9, 0.15, 0.5, 0.3])
    out = perturb(g, PerturbationParams(0.5, 0.0), rng=StubRNG(k=0.0))
    assert out.edge_dict() == {(0, 1): 0.9, (0, 3): 0.3, (2, 3): 0.5}


def test_perturb_single_relocation():
    g = WeightedGraph(3, [(0, 1), (1, 2)], [0.8, 0.3])
    out = perturb(g, PerturbationParams(0.0, 1.0), rng=StubRNG(k=0.5))
    assert out.weight(0, 1) == pytest.approx(0.4)
    assert out.weight(1, 2) == pytest.approx(0.7)
    capped = perturb(WeightedGraph(3, [(0, 1), (1, 2)], [0.8, 0.9]), PerturbationParams(0.0, 1.0), rng=StubRNG(0.5))
    assert capped.weight(1, 2) == 1.0


def test_perturb_conservation(base):
    # a floor below every weight keeps all edges, so totals compare directly
    floor = 1e-9
    g = base.with_weights(base.weights * 0.5)  # headroom: no capping
    out = perturb(g, PerturbationParams(0.3, 1.0, floor, seed=4))
    assert out.n_edges == g.n_edges
    assert out.total_weight() == pytest.approx(g.total_weight(), abs=1e-9)
    red = perturb(g, PerturbationParams(0.3, 0.0, floor, seed=4))
    assert red.total_weight() < g.total_weight()


def test_perturb_weights_in_domain(base):
    for p, r in TABLE_S1[::4]:
        out = perturb(base, PerturbationParams(p, r, seed=1))
        assert out.weights.min() >= 0.2
        assert out.weights.max() <= 1.0
        assert out.n_nodes == base.n_nodes


def test_perturb_source_pools():
    # p = 0.75 on a triangle-heavy graph removes more weight from high-score edges than p = 0
    emb = synthetic_embeddings(n_words=150, dim=30, n_topics=6, seed=9)
    g = build_similarity_network(emb, emb.words, 0.2)
    ts = triangle_scores(g)
    hi = ts >= np.median(ts)
    losses = {}
    for p in (0.0, 0.75):
        out = perturb(g, PerturbationParams(p, 0.0, 1e-9, seed=2))
        lost = g.weights - out.weights
        losses[p] = lost[hi].sum() / lost.sum()
    assert losses[0.75] > losses[0.0] + 0.3


def test_perturb_too_small():
    with pytest.raises(GraphError):
        perturb(WeightedGraph(2, [(0, 1)], [0.5]), PerturbationParams(0.5, 0.5))


def test_weight_sampler_matches_cumsum():
    rng = np.random.default_rng(0)
    vals = rng.uniform(0, 1, 37)
    s = _WeightSampler(vals)
    for _ in range(200):
        i = int(rng.integers(37))
        vals[i] = rng.uniform(0, 1)
        s.set(i, vals[i])
        u = rng.uniform(0, vals.sum())
        assert s.draw(u) == int(np.searchsorted(np.cumsum(vals), u, side="right"))
    assert s.total == pytest.approx(vals.sum())


def test_generate_population(base):
    small = base.subgraph(range(60))
    nets = generate_individual_networks(small, TABLE_S1, replicates=10, seed=3)
    assert len(nets) == 250
    again = generate_individual_networks(small, TABLE_S1[:2], replicates=10, seed=3)
    assert all(a == b for a, b in zip(nets[:20], again))
    single = generate_individual_networks(small, [(0.3, 0.45)], replicates=1, seed=8)
    assert single[0] == perturb(small, PerturbationParams(0.3, 0.45, seed=individual_seed(8, 0, 0)))


def test_generate_population_parallel_identical(base):
    a = generate_individual_networks(base, TABLE_S1[:3], replicates=2, seed=1, workers=1)
    b = generate_individual_networks(base, TABLE_S1[:3], replicates=2, seed=1, workers=2)
    assert all(x == y for x, y in zip(a, b))


# -- cue sets ---------------------------------------------------------------------------


def test_narrow_examples():
    clique = WeightedGraph(5, [(i, j) for i in range(5) for j in range(i + 1, 5)], [0.5] * 10)
    assert len(narrow_cues(clique, 1, seed=0).cues) == 1
    c = narrow_cues(clique, 4, seed=7)
    rest = sorted(set(range(5)) - {c.cues[0]})
    assert list(c.cues[1:]) == rest[:3]
    assert narrow_cues(clique, 4, seed=7) == c


def test_narrow_picks_highest_mean():
    # start forced by a single node graph component: start at 0 via the seed search
    g = WeightedGraph(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)], [0.9, 0.6, 0.5, 0.6, 0.5])
    for seed in range(50):
        if narrow_cues(g, 1, seed).cues == (0,):
            break
    c = narrow_cues(g, 3, seed)
    # after {0, 1}: node 2 mean (0.6+0.6)/2 = 0.6 beats node 3 mean 0.5
    assert c.cues == (0, 1, 2)


def test_broad_examples():
    path = WeightedGraph(6, [(i, i + 1) for i in range(5)], [0.5] * 5)
    for seed in range(40):
        c = broad_cues(path, 4, seed)
        if c.cues[0] == 0:
            assert c.cues == (0, 1, 2, 3)
        if c.cues[0] == 5:
            assert c.cues == (5, 4, 3, 2)
    star = WeightedGraph(5, [(0, i) for i in range(1, 5)], [0.5] * 4)
    assert sorted(broad_cues(star, 5, seed=3).cues) == [0, 1, 2, 3, 4]
    assert broad_cues(star, 5, seed=3) == broad_cues(star, 5, seed=3)


def test_broad_backtracks():
    # from a leaf the walk must return through the hub
    star = WeightedGraph(5, [(0, i) for i in range(1, 5)], [0.5] * 4)
    for seed in range(10):
        assert len(set(broad_cues(star, 5, seed).cues)) == 5


def test_cue_errors():
    g = WeightedGraph(4, [(0, 1), (2, 3)], [0.5, 0.5])
    with pytest.raises(CueSetError) as err:
        narrow_cues(g, 3, 0)
    assert err.value.achieved == 2
    with pytest.raises(CueSetError):
        broad_cues(g, 3, 0)
    with pytest.raises(CueSetError):
        narrow_cues(g, 9, 0)
    with pytest.raises(ValueError):
        make_cues(g, "wide", 2, 0)


def test_mixed_counts(base):
    c = mixed_cues(base, 10, seed=2)
    assert len(c.cues) == 10 and len(set(c.cues)) == 10
    c = mixed_cues(base, 100, seed=2)
    assert len(c.cues) == 100 and len(set(c.cues)) == 100
    assert math.isqrt(100) == 10
    # the first floor(sqrt(N)) cues are the broad seeds: a broad walk of that length
    assert c.cues[:10] == broad_cues(base, 10, seed=2).cues


def _mean_weight(g, cues):
    sub = g.subgraph(cues.cues)
    n = sub.n_nodes
    return sub.total_weight() / (n * (n - 1) / 2)


def test_narrow_denser_than_broad(base):
    wins = sum(_mean_weight(base, narrow_cues(base, 10, s)) >= _mean_weight(base, broad_cues(base, 10, s))
               for s in range(25))  # fmt: skip
    assert wins > 12


def test_cue_determinism(base):
    for kind in ("narrow", "broad", "mixed"):
        assert make_cues(base, kind, 15, 4) == make_cues(base, kind, 15, 4)


def test_cue_io(tmp_path, base):
    c = mixed_cues(base, 10, 1)
    write_cues(c, base, tmp_path / "c.json")
    back = read_cues(tmp_path / "c.json", base)
    assert back.cues == c.cues
    (tmp_path / "bad.json").write_text('["w0001", "nope"]')
    with pytest.raises(GraphError):
        read_cues(tmp_path / "bad.json", base)
