"""Simulated free associations and relatedness judgments, plus parameter tuning."""
from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import pearsonr, spearmanr

from .graph import GraphError, WeightedGraph
from .groundtruth import CueSet

FA, RJ = "FA", "RJ"


class FrequencyTable(Mapping[str, float]):
    """Word -> relative frequency. Unknown words raise ``KeyError``."""

    def __init__(self, freqs: Mapping[str, float]):
        bad = [w for w, f in freqs.items() if not f > 0]
        if bad:
            raise ValueError(f"frequencies must be positive: {bad[:10]}")
        self._f = dict(freqs)

    def __getitem__(self, word: str) -> float:
        try:
            return self._f[word]
        except KeyError:
            raise KeyError(f"no frequency for word {word!r}") from None

    def __iter__(self):
        return iter(self._f)

    def __len__(self) -> int:
        return len(self._f)

    def vector(self, words: Sequence[str]) -> np.ndarray:
        missing = [w for w in words if w not in self._f]
        if missing:
            raise KeyError(f"no frequency for {len(missing)} words, e.g. {missing[:10]}")
        return np.array([self._f[w] for w in words], dtype=float)

    def scaled(self, factor: float) -> "FrequencyTable":
        return FrequencyTable({w: f * factor for w, f in self._f.items()})

    @classmethod
    def read(cls, path: str | Path) -> "FrequencyTable":
        out = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                word, f = line.rstrip("\n").split("\t")
                out[word] = float(f)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'word<TAB>frequency'") from None
        return cls(out)

    def write(self, path: str | Path) -> None:
        Path(path).write_text("".join(f"{w}\t{f:.9g}\n" for w, f in self._f.items()), encoding="utf-8")

    @classmethod
    def synthetic(cls, words: Sequence[str], seed: int = 0, exponent: float = 1.0) -> "FrequencyTable":
        """Zipf-distributed relative frequencies over a random ordering of ``words``."""
        rng = np.random.default_rng(seed)
        ranks = rng.permutation(len(words)) + 1
        f = ranks.astype(float) ** -exponent
        f /= f.sum()
        return cls(dict(zip(words, f.tolist())))


@dataclass(frozen=True)
class FAParams:
    gamma_w: float = 10.0
    gamma_f: float = 1.0
    block_size: int | None = None  # None: i.i.d. draws; b: b distinct responses per block

    def __post_init__(self):
        if self.gamma_w < 0 or self.gamma_f < 0:
            raise ValueError("sensitivity parameters must be >= 0")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block_size must be >= 1")


@dataclass(frozen=True)
class RJParams:
    gamma: float = 1.0
    sigma: float = 3.85
    scale_min: float = 1.0
    scale_max: float = 20.0

    def __post_init__(self):
        if self.gamma < 0 or self.sigma < 0:
            raise ValueError("gamma and sigma must be >= 0")
        if not self.scale_min < self.scale_max:
            raise ValueError("scale_min must be below scale_max")

    def location(self, w):
        return self.scale_min + (self.scale_max - self.scale_min) * np.power(w, self.gamma)


@dataclass
class ResponseData:
    """Simulated behavior for one participant and cue set, keyed by node labels."""

    variant: str
    cues: list[str]
    counts: dict[str, dict[str, int]] = field(default_factory=dict)  # FA
    judgments: dict[tuple[str, str], list[float]] = field(default_factory=dict)  # RJ
    skipped: list[str] = field(default_factory=list)

    def n_responses(self) -> int:
        if self.variant == FA:
            return sum(sum(c.values()) for c in self.counts.values())
        return sum(len(v) for v in self.judgments.values())

    def to_json(self) -> str:
        doc: dict = {"variant": self.variant, "cues": self.cues, "skipped": self.skipped}
        if self.variant == FA:
            doc["counts"] = self.counts
        else:
            doc["judgments"] = [[a, b, v] for (a, b), v in self.judgments.items()]
        return json.dumps(doc, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "ResponseData":
        doc = json.loads(text)
        variant = doc.get("variant")
        if variant not in (FA, RJ):
            raise ValueError(f"unknown response data variant {variant!r}")
        data = cls(variant, list(doc["cues"]), skipped=list(doc.get("skipped", [])))
        if variant == FA:
            data.counts = {c: {r: int(n) for r, n in resp.items()} for c, resp in doc["counts"].items()}
        else:
            data.judgments = {(a, b): [float(x) for x in v] for a, b, v in doc["judgments"]}
        return data


# -- free association -------------------------------------------------------------


def _fa_probs(weights: np.ndarray, freqs: np.ndarray, params: FAParams) -> np.ndarray:
    # log domain: w**10 and small frequencies underflow quickly
    logit = params.gamma_w * np.log(weights) + params.gamma_f * np.log(freqs)
    logit -= logit.max()
    p = np.exp(logit)
    return p / p.sum()


def fa_distribution(
    g: WeightedGraph, freq: FrequencyTable | np.ndarray, cue: int, params: FAParams = FAParams()
) -> dict[int, float]:
    """Response probabilities for ``cue``: neighbors weighted by ``w**gamma_w * f**gamma_f``.

    ``freq`` is a table keyed by node label or a vector aligned with node ids.
    """
    idx, w = g.neighbor_weights(cue)
    if len(idx) == 0:
        raise GraphError(f"cue {cue} has no neighbors to respond with")
    f = freq[idx] if isinstance(freq, np.ndarray) else freq.vector([g.labels[i] for i in idx])
    return dict(zip(idx.tolist(), _fa_probs(w, f, params).tolist()))


def _draw_fa(support: np.ndarray, probs: np.ndarray, n: int, params: FAParams, rng) -> np.ndarray:
    if params.block_size is None:
        return rng.choice(support, size=n, p=probs)
    block = min(params.block_size, len(support))
    out = []
    while len(out) < n:
        out.extend(rng.choice(support, size=min(block, n - len(out)), replace=False, p=probs).tolist())
    return np.asarray(out)


def simulate_fa(
    g: WeightedGraph,
    freq: FrequencyTable | np.ndarray,
    cues: CueSet | Sequence[int],
    n_responses: int,
    params: FAParams = FAParams(),
    seed: int = 0,
) -> ResponseData:
    """``n_responses`` draws per cue. Cues without neighbors are skipped and listed."""
    if n_responses < 1:
        raise ValueError("n_responses must be >= 1")
    cue_ids = list(cues.cues if isinstance(cues, CueSet) else cues)
    fvec = freq if isinstance(freq, np.ndarray) else freq.vector(g.labels)
    rng = np.random.default_rng(seed)
    labels = g.labels
    data = ResponseData(FA, [labels[c] for c in cue_ids])
    for c in cue_ids:
        idx, w = g.neighbor_weights(c)
        if len(idx) == 0:
            data.skipped.append(labels[c])
            continue
        draws = _draw_fa(idx, _fa_probs(w, fvec[idx], params), n_responses, params, rng)
        resp, cnt = np.unique(draws, return_counts=True)
        data.counts[labels[c]] = {labels[r]: int(k) for r, k in zip(resp.tolist(), cnt.tolist())}
    return data


# -- relatedness judgments ---------------------------------------------------------


def truncnorm_inverse_cdf(u, loc, sd, lo: float, hi: float):
    """Map uniforms ``u`` in [0, 1] through the inverse CDF of N(loc, sd) truncated to [lo, hi]."""
    u, loc = np.asarray(u, dtype=float), np.asarray(loc, dtype=float)
    if sd == 0:
        return np.clip(np.broadcast_to(loc, np.broadcast(u, loc).shape).astype(float), lo, hi)
    a = ndtr((lo - loc) / sd)
    b = ndtr((hi - loc) / sd)
    x = loc + sd * ndtri(a + u * (b - a))
    return np.clip(x, lo, hi)


def truncnorm_mean(loc: float, sd: float, lo: float, hi: float) -> float:
    """Analytic mean of the truncated normal."""
    if sd == 0:
        return float(np.clip(loc, lo, hi))
    al, be = (lo - loc) / sd, (hi - loc) / sd
    phi = lambda z: math.exp(-z * z / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    return loc + sd * (phi(al) - phi(be)) / (ndtr(be) - ndtr(al))


def _rj_draws(w: np.ndarray, params: RJParams, rng) -> np.ndarray:
    u = rng.uniform(size=np.shape(w))
    return truncnorm_inverse_cdf(u, params.location(w), params.sigma, params.scale_min, params.scale_max)


def rj_value(g: WeightedGraph, i: int, j: int, params: RJParams = RJParams(), seed: int = 0) -> float:
    """One relatedness judgment for the pair; a missing edge counts as weight 0."""
    if g.check_node(i) == g.check_node(j):
        raise ValueError("a judgment needs two distinct words")
    rng = np.random.default_rng(seed)
    return float(_rj_draws(np.array(g.weight(i, j)), params, rng))


def allocate_pairs(n_cues: int, budget: int, rng) -> np.ndarray:
    """Pair indices judged in order: full passes over one random pair order, last pass cut short."""
    n_pairs = n_cues * (n_cues - 1) // 2
    order = rng.permutation(n_pairs)
    passes, extra = divmod(budget, n_pairs)
    return np.concatenate([np.tile(order, passes), order[:extra]])


def simulate_rj(
    g: WeightedGraph,
    cues: CueSet | Sequence[int],
    n_responses_per_cue: int,
    params: RJParams = RJParams(),
    seed: int = 0,
) -> ResponseData:
    """``n_responses_per_cue * len(cues)`` judgments spread evenly over all cue pairs."""
    cue_ids = list(cues.cues if isinstance(cues, CueSet) else cues)
    if len(cue_ids) < 2:
        raise ValueError("relatedness judgments need at least 2 cues")
    budget = n_responses_per_cue * len(cue_ids)
    if budget < 1:
        raise ValueError("judgment budget must be >= 1")
    rng = np.random.default_rng(seed)
    ia, ib = np.triu_indices(len(cue_ids), k=1)
    sub = g.subgraph(cue_ids).dense()
    pair_w = sub[ia, ib]
    picks = allocate_pairs(len(cue_ids), budget, rng)
    values = _rj_draws(pair_w[picks], params, rng)
    labels = [g.labels[c] for c in cue_ids]
    data = ResponseData(RJ, labels)
    judged: dict[int, list[float]] = {}
    for pk, v in zip(picks.tolist(), values.tolist()):
        judged.setdefault(pk, []).append(v)
    for pk in sorted(judged):
        data.judgments[(labels[ia[pk]], labels[ib[pk]])] = judged[pk]
    return data


# -- norms and tuning ----------------------------------------------------------------


def read_fa_norms(path: str | Path) -> dict[str, dict[str, float]]:
    """``cue<TAB>response<TAB>count`` lines -> nested counts."""
    out: dict[str, dict[str, float]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            cue, resp, n = line.split("\t")
            out.setdefault(cue, {})[resp] = out.get(cue, {}).get(resp, 0.0) + float(n)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected 'cue<TAB>response<TAB>count'") from None
    return out


def read_rj_norms(path: str | Path) -> list[tuple[str, str, float]]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            a, b, r = line.split("\t")
            out.append((a, b, float(r)))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected 'word1<TAB>word2<TAB>rating'") from None
    return out


@dataclass
class FAFit:
    pearson: float
    spearman: float
    median_ranks: tuple[float, float, float]
    n_pairs: int


def _rank_in(order: list[str], word: str) -> int | None:
    try:
        return order.index(word) + 1
    except ValueError:
        return None


def tune_fa(
    g: WeightedGraph,
    freq: FrequencyTable,
    norms: Mapping[str, Mapping[str, float]],
    grid: Iterable[tuple[float, float]],
    seed: int = 0,
    n_draws: int | None = None,
) -> dict[tuple[float, float], FAFit]:
    """Fit of model first-response distributions to norm distributions per ``(gamma_w, gamma_f)``.

    Correlations run over every norm (cue, response) pair whose words are
    both graph nodes; a response outside the cue's neighborhood has model
    probability 0. ``n_draws`` switches from exact model probabilities to
    simulated response proportions. Median ranks give, for the model's
    1st/2nd/3rd most likely response, its rank among the norm responses.
    """
    index = {lab: i for i, lab in enumerate(g.labels)}
    cues = [c for c in norms if c in index and len(g.neighbors(index[c]))]
    if not cues:
        raise ValueError("no norm cue is a node with neighbors in the graph")
    fvec = freq.vector(g.labels)
    out = {}
    for gw, gf in grid:
        params = FAParams(gw, gf)
        rng = np.random.default_rng(seed)
        model_all, norm_all = [], []
        ranks: list[list[int]] = [[], [], []]
        for c in cues:
            ci = index[c]
            idx, w = g.neighbor_weights(ci)
            probs = _fa_probs(w, fvec[idx], params)
            if n_draws is not None:
                draws = rng.choice(len(idx), size=n_draws, p=probs)
                probs = np.bincount(draws, minlength=len(idx)) / n_draws
            model = dict(zip((g.labels[i] for i in idx), probs.tolist()))
            resp = {r: n for r, n in norms[c].items() if r in index}
            total = sum(norms[c].values())
            for r, n in resp.items():
                model_all.append(model.get(r, 0.0))
                norm_all.append(n / total)
            norm_order = [r for r, _ in sorted(norms[c].items(), key=lambda kv: (-kv[1], kv[0]))]
            model_order = [r for r, _ in sorted(model.items(), key=lambda kv: (-kv[1], kv[0]))]
            for k in range(3):
                if k < len(model_order):
                    rk = _rank_in(norm_order, model_order[k])
                    if rk is not None:
                        ranks[k].append(rk)
        if len(model_all) < 3:
            raise ValueError("too few shared cue-response pairs to correlate")
        med = tuple(float(np.median(r)) if r else math.nan for r in ranks)
        out[(gw, gf)] = FAFit(
            float(pearsonr(model_all, norm_all)[0]), float(spearmanr(model_all, norm_all)[0]), med, len(model_all)
        )
    return out


def sample_pairs(g: WeightedGraph, n_pairs: int, seed: int) -> np.ndarray:
    """Random edges of ``g`` (as node-id pairs) for rater simulations."""
    rng = np.random.default_rng(seed)
    pick = rng.choice(g.n_edges, size=min(n_pairs, g.n_edges), replace=False)
    return g.edges[np.sort(pick)]


def tune_rj(
    g: WeightedGraph,
    grid: Iterable[tuple[float, float]],
    target_interrater: float,
    seed: int = 0,
    pairs: np.ndarray | None = None,
    n_pairs: int = 1000,
) -> tuple[dict[tuple[float, float], float], tuple[float, float]]:
    """Inter-rater Spearman correlation of two simulated raters per ``(gamma, sigma)``.

    Returns the per-cell correlations and the cell closest to the target.
    """
    if pairs is None:
        pairs = sample_pairs(g, n_pairs, seed)
    pairs = np.asarray(pairs)
    w = np.array([g.weight(a, b) for a, b in pairs.tolist()])
    out = {}
    for gamma, sigma in grid:
        params = RJParams(gamma, sigma)
        # common random numbers across cells keep the sigma trend free of sampling noise
        rng = np.random.default_rng(seed)
        rater_a = _rj_draws(w, params, rng)
        rater_b = _rj_draws(w, params, rng)
        if np.ptp(rater_a) == 0 or np.ptp(rater_b) == 0:
            rho = 1.0 if np.array_equal(rater_a, rater_b) else math.nan
        else:
            rho = float(spearmanr(rater_a, rater_b)[0])
        out[(gamma, sigma)] = rho
    if not out:
        raise ValueError("empty tuning grid")
    best = min(out, key=lambda cell: (abs(out[cell] - target_interrater) if not math.isnan(out[cell]) else math.inf))
    return out, best
