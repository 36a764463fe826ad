"""Recovery criteria: bias, resolution, generalizability, and power simulations."""
from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .graph import GraphError, WeightedGraph
from .groundtruth import CueSet
from .measures import BETWEEN_MEASURES, WITHIN_MEASURES, MeasureRecord, measure_network

RATIO_FLOOR = 1e-6
BIAS_ACCEPTABLE = 0.3
RESOLUTION_ACCEPTABLE = 0.5
LEVELS = ("local", "global")


@dataclass
class BiasResult:
    value: float
    n_floored: int = 0


def bias(inferred: Sequence[float], truth: Sequence[float], with_flags: bool = False):
    """Geometric mean of inferred/true ratios minus one.

    Evaluated in the log domain. Zero inferred values are floored at
    ``RATIO_FLOOR`` times the truth and counted in the flags.
    """
    x = np.asarray(inferred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if x.shape != t.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {t.shape}")
    if len(x) == 0:
        raise ValueError("bias needs at least one pair")
    if np.any(~(t > 0)):
        raise ValueError("true measure values must be positive")
    if np.any(~(x >= 0)):
        raise ValueError("inferred measure values must be nonnegative")
    ratio = x / t
    floored = ratio < RATIO_FLOOR
    ratio = np.where(floored, RATIO_FLOOR, ratio)
    value = float(math.exp(np.mean(np.log(ratio))) - 1.0)
    if with_flags:
        return BiasResult(value, int(floored.sum()))
    return value


def resolution(inferred: Sequence[float], truth: Sequence[float]) -> float:
    """Spearman correlation (average ranks for ties); NaN when either side is constant."""
    x = np.asarray(inferred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if x.shape != t.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {t.shape}")
    if len(x) < 3:
        raise ValueError("resolution needs at least 3 pairs")
    rx, rt = stats.rankdata(x), stats.rankdata(t)
    if np.ptp(rx) == 0 or np.ptp(rt) == 0:
        return math.nan
    rx -= rx.mean()
    rt -= rt.mean()
    return float(np.clip(np.dot(rx, rt) / math.sqrt(np.dot(rx, rx) * np.dot(rt, rt)), -1.0, 1.0))


# -- design-level evaluation --------------------------------------------------------


@dataclass
class Comparison:
    """One inferred network set against its truth references.

    ``local`` holds the truth subgraph's between-network measures (same cue
    set), ``global_`` the full truth network's. ``within`` holds this
    participant's within-network resolutions (Spearman across nodes/edges).
    """

    inferred: dict[str, float]
    local: dict[str, float]
    global_: dict[str, float] | None = None
    within: dict[str, float] = field(default_factory=dict)


@dataclass
class EvaluationResult:
    design_id: str
    measure: str
    level: str
    bias: float
    resolution: float
    n_points: int
    n_excluded: int = 0
    n_floored: int = 0
    n_resolution_missing: int = 0
    flags: list[str] = field(default_factory=list)

    CSV_COLUMNS = (
        "design_id", "measure", "level", "bias", "resolution", "n_points",
        "n_excluded", "n_floored", "n_resolution_missing", "flags",
    )  # fmt: skip

    def row(self) -> list[str]:
        return [
            self.design_id, self.measure, self.level, fmt_float(self.bias), fmt_float(self.resolution),
            str(self.n_points), str(self.n_excluded), str(self.n_floored), str(self.n_resolution_missing),
            ";".join(self.flags),
        ]  # fmt: skip


def fmt_float(x: float | None) -> str:
    """Round-trippable text for CSV cells; NaN and None become empty cells."""
    if x is None or math.isnan(x):
        return ""
    return repr(float(x))


def pair_weights(record: MeasureRecord, n_nodes: int) -> np.ndarray:
    """Weights of all unordered node pairs (0 for absent edges), in ``triu`` order."""
    dense = np.zeros((n_nodes, n_nodes))
    if len(record.edge_weights):
        i = record.edge_weights[:, 0].astype(int)
        j = record.edge_weights[:, 1].astype(int)
        dense[i, j] = record.edge_weights[:, 2]
        dense[j, i] = record.edge_weights[:, 2]
    a, b = np.triu_indices(n_nodes, k=1)
    return dense[a, b]


def within_resolutions(inferred: MeasureRecord, local: MeasureRecord) -> dict[str, float]:
    """Node-by-node and edge-by-edge Spearman between an inferred network and its truth subgraph."""
    n = len(inferred.node_strengths)
    if len(local.node_strengths) != n:
        raise GraphError("within-network comparison needs identical node sets")
    out = {}
    for m in WITHIN_MEASURES:
        if m == "node_strength":
            x, t = inferred.node_strengths, local.node_strengths
        else:
            x, t = pair_weights(inferred, n), pair_weights(local, n)
        out[m] = resolution(x, t) if len(x) >= 3 else math.nan
    return out


def compare(inferred: MeasureRecord, local: MeasureRecord, global_: MeasureRecord | None = None) -> Comparison:
    return Comparison(
        inferred.between(), local.between(), global_.between() if global_ is not None else None,
        within_resolutions(inferred, local),
    )


def _between(design_id: str, measure: str, level: str, inferred: list[float], truth: list[float]) -> EvaluationResult:
    x = np.asarray(inferred, dtype=float)
    t = np.asarray(truth, dtype=float)
    flags = []
    usable = np.isfinite(x) & np.isfinite(t)
    n_excl = int((~usable).sum())
    if n_excl:
        flags.append("undefined_measure")
    x, t = x[usable], t[usable]
    pos = t > 0
    if np.any(~pos):
        flags.append("nonpositive_truth")
    if np.any(x[pos] < 0):
        flags.append("negative_inferred")
    xb = np.maximum(x[pos], 0.0)
    b = math.nan
    n_floored = 0
    if len(xb):
        res = bias(xb, t[pos], with_flags=True)
        b, n_floored = res.value, res.n_floored
        if n_floored:
            flags.append("ratio_floored")
    r = resolution(x, t) if len(x) >= 3 else math.nan
    if math.isnan(r):
        flags.append("resolution_undefined")
    return EvaluationResult(
        design_id, measure, level, b, r, len(x), n_excl + int((~pos).sum()), n_floored, int(math.isnan(r)), flags
    )


def _within(design_id: str, measure: str, comparisons: Sequence[Comparison]) -> EvaluationResult:
    values = np.array([c.within.get(measure, math.nan) for c in comparisons], dtype=float)
    ok = np.isfinite(values)
    missing = int((~ok).sum())
    value = float(values[ok].mean()) if ok.any() else math.nan
    flags = ["resolution_undefined"] if missing else []
    return EvaluationResult(design_id, measure, "local", math.nan, value, int(ok.sum()), 0, 0, missing, flags)


def evaluate_comparisons(
    comparisons: Sequence[Comparison], level: str, design_id: str = ""
) -> list[EvaluationResult]:
    """Bias and resolution per measure for one design cell.

    Local: four between-network measures against the cue-set truth subgraph,
    plus within-network resolution (Spearman per participant, then averaged).
    Global: the four between-network measures against the full truth network.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    out = []
    for m in BETWEEN_MEASURES:
        inferred = [c.inferred[m] for c in comparisons]
        if level == "local":
            ref = [c.local[m] for c in comparisons]
        else:
            if any(c.global_ is None for c in comparisons):
                raise ValueError("global evaluation needs full-network truth measures")
            ref = [c.global_[m] for c in comparisons]
        out.append(_between(design_id, m, level, inferred, ref))
    if level == "local":
        out.extend(_within(design_id, m, comparisons) for m in WITHIN_MEASURES)
    return out


def evaluate_design(
    truth_networks: Sequence[WeightedGraph],
    inferred_networks: Sequence[WeightedGraph],
    cue_sets: Sequence[CueSet],
    level: str,
    design_id: str = "",
    seed: int = 0,
) -> list[EvaluationResult]:
    """Measure every (truth, inferred, cue set) triple and evaluate the design cell."""
    if not len(truth_networks) == len(inferred_networks) == len(cue_sets):
        raise ValueError("need one truth network and one cue set per inferred network")
    comparisons = []
    global_cache: dict[int, MeasureRecord] = {}
    for truth, inferred, cues in zip(truth_networks, inferred_networks, cue_sets):
        if inferred.n_nodes != len(cues):
            raise GraphError("inferred network and cue set differ in size")
        local = measure_network(truth.subgraph(cues.cues), seed)
        glob = None
        if level == "global":
            if id(truth) not in global_cache:
                global_cache[id(truth)] = measure_network(truth, seed)
            glob = global_cache[id(truth)]
        comparisons.append(compare(measure_network(inferred, seed), local, glob))
    return evaluate_comparisons(comparisons, level, design_id)


def write_evaluation_csv(results: Iterable[EvaluationResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EvaluationResult.CSV_COLUMNS)
        for r in results:
            w.writerow(r.row())


def read_evaluation_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        missing = set(EvaluationResult.CSV_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return list(reader)


# -- power ------------------------------------------------------------------------------


def power_simulation(
    d: float,
    resolution_r: float,
    n_per_group: int,
    alpha: float = 0.05,
    reps: int = 100_000,
    seed: int = 0,
    chunk: int = 2_000,
) -> float:
    """Monte Carlo power of a one-sided two-sample t-test on imperfect measurements.

    True scores are N(0, 1) and N(d, 1); observed scores are
    ``r * true + sqrt(1 - r**2) * noise``, so they correlate with the true
    scores at ``r``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0.0 <= resolution_r <= 1.0:
        raise ValueError("resolution_r must lie in [0, 1]")
    if n_per_group < 2:
        raise ValueError("need at least 2 observations per group")
    n = n_per_group
    df = 2 * n - 2
    crit = stats.t.ppf(1.0 - alpha, df)
    noise_sd = math.sqrt(max(0.0, 1.0 - resolution_r**2))
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        true = rng.standard_normal((m, 2, n))
        true[:, 1, :] += d
        obs = resolution_r * true + noise_sd * rng.standard_normal((m, 2, n))
        mean = obs.mean(axis=2)
        var = obs.var(axis=2, ddof=1)
        pooled = (var[:, 0] + var[:, 1]) / 2.0
        t = (mean[:, 1] - mean[:, 0]) / np.sqrt(pooled * 2.0 / n)
        hits += int(np.count_nonzero(t > crit))
        done += m
    return hits / reps


def analytic_power(d: float, resolution_r: float, n_per_group: int, alpha: float = 0.05) -> float:
    """Noncentral-t power for the same design (observed effect size ``r * d``)."""
    df = 2 * n_per_group - 2
    nc = resolution_r * d * math.sqrt(n_per_group / 2.0)
    return float(stats.nct.sf(stats.t.ppf(1.0 - alpha, df), df, nc))
