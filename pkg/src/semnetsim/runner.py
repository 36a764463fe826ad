"""Factorial recovery experiments: configuration, seeding, execution, outputs.

Config files are TOML. Tables and keys::

    preset = "desk"                 # optional: start from a bundled preset

    [run]
    master_seed = 1
    participants = 25               # synthetic participants per design cell
    n_cue_replicates = 5            # cue set instantiations per design cell
    assignment = "partitioned"      # or "crossed" (every participant x every replicate)
    levels = ["local", "global"]
    workers = 1
    save_networks = false

    [base]                          # common ground-truth network
    source = "synthetic"            # or "embeddings"
    embeddings = "vectors.txt"      # source = "embeddings": text or binary table
    vocab = "words.txt"             # optional vocabulary filter
    frequencies = "freq.tsv"        # optional; Zipf frequencies otherwise
    n_words = 500                   # synthetic only
    dim = 50
    n_topics = 20
    seed = 0
    weight_floor = 0.2

    [individuals]
    grid = "table_s1"               # or a list of [p, r] pairs
    replicates = 1
    seed = 0

    [design]                        # factor levels, expanded in declaration order
    response_type = ["FA", "RJ"]
    cue_set_type = ["narrow", "broad", "mixed"]
    cue_set_size = [10, 100, 1000]
    n_responses = [3, 30, 300]

    [fa]
    gamma_w = 10.0
    gamma_f = 1.0
    block_size = 0                  # 0: independent draws

    [rj]
    gamma = 1.0
    sigma = 3.85

Grid expansion is the Cartesian product of the ``[design]`` lists,
lexicographic in the order the factors are declared (last factor varies
fastest). Participant ``k`` is assigned individual network ``k mod M``.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import itertools
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .behavior import FA, RJ, FAParams, FrequencyTable, RJParams, simulate_fa, simulate_rj
from .evaluation import (
    Comparison,
    EvaluationResult,
    compare,
    evaluate_comparisons,
    fmt_float,
    write_evaluation_csv,
)
from .graph import GraphError, WeightedGraph, write_edgelist
from .groundtruth import (
    CUE_SET_TYPES,
    TABLE_S1,
    CueSet,
    build_similarity_network,
    generate_individual_networks,
    make_cues,
    read_embeddings,
    read_word_list,
    synthetic_embeddings,
)
from .inference import infer_fa_network, infer_rj_network
from .measures import BETWEEN_MEASURES, WITHIN_MEASURES, MeasureRecord, measure_network

log = logging.getLogger(__name__)

FACTORS = ("response_type", "cue_set_type", "cue_set_size", "n_responses")


class ConfigError(ValueError):
    pass


# -- configuration ------------------------------------------------------------------

_SCHEMA: dict[str, dict[str, type | tuple[type, ...]]] = {
    "run": {
        "master_seed": int, "participants": int, "n_cue_replicates": int, "assignment": str,
        "levels": list, "workers": int, "save_networks": bool,
    },
    "base": {
        "source": str, "embeddings": str, "vocab": str, "frequencies": str, "n_words": int, "dim": int,
        "n_topics": int, "seed": int, "weight_floor": (int, float),
    },
    "individuals": {"grid": (str, list), "replicates": int, "seed": int},
    "design": {f: list for f in FACTORS},
    "fa": {"gamma_w": (int, float), "gamma_f": (int, float), "block_size": int},
    "rj": {"gamma": (int, float), "sigma": (int, float)},
}  # fmt: skip

DEFAULTS = {
    "run": {
        "master_seed": 0, "participants": 250, "n_cue_replicates": 10, "assignment": "partitioned",
        "levels": ["local", "global"], "workers": 1, "save_networks": False,
    },
    "base": {"source": "synthetic", "n_words": 500, "dim": 50, "n_topics": 20, "seed": 0, "weight_floor": 0.2},
    "individuals": {"grid": "table_s1", "replicates": 10, "seed": 0},
    "design": {
        "response_type": ["FA", "RJ"], "cue_set_type": list(CUE_SET_TYPES),
        "cue_set_size": [10, 100, 1000], "n_responses": [3, 30, 300],
    },
    "fa": {"gamma_w": 10.0, "gamma_f": 1.0, "block_size": 0},
    "rj": {"gamma": 1.0, "sigma": 3.85},
}  # fmt: skip

PRESETS = ("paper", "desk", "smoke")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for section, values in override.items():
        if section == "design" and values:
            out["design"] = dict(values)  # factor order comes from the override
        else:
            out.setdefault(section, {}).update(values)
    return out


def _validate(doc: dict, origin: str) -> dict:
    out = {}
    for section, values in doc.items():
        if section == "preset":
            continue
        if section not in _SCHEMA:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"{origin}: [{section}] must be a table")
        for key, value in values.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{origin}: unknown key {section}.{key}")
            expected = _SCHEMA[section][key]
            if isinstance(value, bool) and expected is not bool:
                raise ConfigError(f"{origin}: {section}.{key} has the wrong type")
            if not isinstance(value, expected):
                raise ConfigError(f"{origin}: {section}.{key} has the wrong type ({type(value).__name__})")
        out[section] = dict(values)
    return out


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("semnetsim").joinpath("presets", f"{name}.toml").read_text(encoding="utf-8")
    return parse_config(text, origin=f"preset:{name}")


def parse_config(text: str, origin: str = "<config>", base_dir: Path | None = None) -> dict:
    """Parse TOML config text into a fully defaulted, validated config dict."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    preset = doc.get("preset")
    if preset is not None and not isinstance(preset, str):
        raise ConfigError(f"{origin}: preset must be a string")
    start = load_preset(preset) if preset else copy.deepcopy(DEFAULTS)
    cfg = _merge(start, _validate(doc, origin))
    _check_levels(cfg, origin)
    if base_dir is not None:
        for key in ("embeddings", "vocab", "frequencies"):
            if key in doc.get("base", {}):
                cfg["base"][key] = str((base_dir / cfg["base"][key]).resolve())
    return cfg


def load_config(path: str | Path) -> dict:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), origin=str(path), base_dir=path.parent)


def _check_levels(cfg: dict, origin: str) -> None:
    design = cfg["design"]
    for f in design:
        if f not in FACTORS:
            raise ConfigError(f"{origin}: unknown factor design.{f}")
        if not design[f]:
            raise ConfigError(f"{origin}: design.{f} needs at least one level")
    for f in FACTORS:
        if f not in design:
            raise ConfigError(f"{origin}: missing factor design.{f}")
    for v in design["response_type"]:
        if v not in (FA, RJ):
            raise ConfigError(f"{origin}: design.response_type level {v!r} is not FA or RJ")
    for v in design["cue_set_type"]:
        if v not in CUE_SET_TYPES:
            raise ConfigError(f"{origin}: design.cue_set_type level {v!r} not in {CUE_SET_TYPES}")
    for f in ("cue_set_size", "n_responses"):
        for v in design[f]:
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{origin}: design.{f} level {v!r} must be a positive integer")
    run = cfg["run"]
    if run["assignment"] not in ("partitioned", "crossed"):
        raise ConfigError(f"{origin}: run.assignment must be 'partitioned' or 'crossed'")
    for lv in run["levels"]:
        if lv not in ("local", "global"):
            raise ConfigError(f"{origin}: run.levels entry {lv!r} must be 'local' or 'global'")
    for key in ("participants", "n_cue_replicates", "workers"):
        if run[key] < 1:
            raise ConfigError(f"{origin}: run.{key} must be >= 1")
    if cfg["base"]["source"] not in ("synthetic", "embeddings"):
        raise ConfigError(f"{origin}: base.source must be 'synthetic' or 'embeddings'")
    if cfg["base"]["source"] == "embeddings" and "embeddings" not in cfg["base"]:
        raise ConfigError(f"{origin}: base.embeddings is required when base.source = 'embeddings'")
    grid = cfg["individuals"]["grid"]
    if isinstance(grid, str) and grid != "table_s1":
        raise ConfigError(f"{origin}: individuals.grid must be 'table_s1' or a list of [p, r] pairs")
    if isinstance(grid, list) and not all(isinstance(x, list) and len(x) == 2 for x in grid):
        raise ConfigError(f"{origin}: individuals.grid entries must be [p, r] pairs")


@dataclass(frozen=True)
class DesignConfig:
    response_type: str
    cue_set_type: str
    cue_set_size: int
    n_responses: int
    fa: FAParams = FAParams()
    rj: RJParams = RJParams()
    n_cue_replicates: int = 10
    participants: int = 250
    master_seed: int = 0

    @property
    def design_id(self) -> str:
        return f"{self.response_type}-{self.cue_set_type}-{self.cue_set_size}-{self.n_responses}"

    @property
    def model_params(self) -> FAParams | RJParams:
        return self.fa if self.response_type == FA else self.rj

    def config_hash(self) -> str:
        return _digest(asdict(self))

    def cue_key(self) -> str:
        """Identifies the cue sets; shared by designs that differ only in response type/count."""
        return _digest([self.cue_set_type, self.cue_set_size, self.master_seed])


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def derive_seed(master_seed: int, key: str, *indices: int) -> int:
    """Seed from ``(master_seed, key, indices)``; independent of scheduling."""
    words = [int(master_seed) & 0xFFFFFFFF, int(key[:8], 16), *(int(i) for i in indices)]
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def expand_grid(cfg: dict | str | Path) -> list[DesignConfig]:
    """Full factorial expansion of ``cfg['design']`` in declaration order."""
    if not isinstance(cfg, dict):
        cfg = load_config(cfg)
    design = cfg["design"]
    names = list(design)
    fa_cfg, rj_cfg, run = cfg["fa"], cfg["rj"], cfg["run"]
    fa = FAParams(float(fa_cfg["gamma_w"]), float(fa_cfg["gamma_f"]), fa_cfg.get("block_size") or None)
    rj = RJParams(float(rj_cfg["gamma"]), float(rj_cfg["sigma"]))
    out = []
    for combo in itertools.product(*(design[n] for n in names)):
        levels = dict(zip(names, combo))
        out.append(
            DesignConfig(
                levels["response_type"], levels["cue_set_type"], int(levels["cue_set_size"]),
                int(levels["n_responses"]), fa, rj, run["n_cue_replicates"], run["participants"],
                run["master_seed"],
            )
        )  # fmt: skip
    return out


# -- inputs ---------------------------------------------------------------------------


@dataclass
class Inputs:
    base: WeightedGraph
    individuals: list[WeightedGraph]
    frequencies: np.ndarray  # aligned with base node ids
    description: dict = field(default_factory=dict)


def build_inputs(cfg: dict, workers: int = 1) -> Inputs:
    """Common ground truth, individualized networks and frequencies from a config."""
    b, ind = cfg["base"], cfg["individuals"]
    if b["source"] == "synthetic":
        emb = synthetic_embeddings(b["n_words"], b["dim"], b["n_topics"], seed=b["seed"])
        vocab = emb.words
    else:
        vocab_filter = read_word_list(b["vocab"]) if "vocab" in b else None
        emb = read_embeddings(b["embeddings"], vocab_filter)
        vocab = vocab_filter if vocab_filter is not None else emb.words
    base = build_similarity_network(emb, vocab, float(b["weight_floor"]))
    if "frequencies" in b:
        freq = FrequencyTable.read(b["frequencies"])
    else:
        freq = FrequencyTable.synthetic(base.labels, seed=b["seed"])
    grid = TABLE_S1 if ind["grid"] == "table_s1" else [tuple(map(float, x)) for x in ind["grid"]]
    individuals = generate_individual_networks(
        base, grid, ind["replicates"], ind["seed"], float(b["weight_floor"]), workers
    )
    return Inputs(base, individuals, freq.vector(base.labels), {"base": b, "individuals": ind})


# -- tasks ------------------------------------------------------------------------------


def assignments(design: DesignConfig, assignment: str) -> list[tuple[int, int]]:
    """(cue replicate, participant) pairs for one design cell."""
    reps, parts = design.n_cue_replicates, design.participants
    if assignment == "crossed":
        return [(r, p) for r in range(reps) for p in range(parts)]
    return [(p * reps // parts, p) for p in range(parts)]


@dataclass(frozen=True)
class Task:
    design: DesignConfig
    replicate: int
    participant: int

    @property
    def task_id(self) -> str:
        return f"{self.design.design_id}__r{self.replicate:03d}__p{self.participant:04d}"

    @property
    def seed(self) -> int:
        return derive_seed(self.design.master_seed, self.design.config_hash(), self.replicate, self.participant)

    def cue_seed(self) -> int:
        return derive_seed(self.design.master_seed, self.design.cue_key(), self.replicate)


MEASURE_COLUMNS = (
    "task_id", "design_id", "response_type", "cue_set_type", "cue_set_size", "n_responses", "replicate",
    "participant", "individual", "seed", "n_judgments", "n_skipped_cues",
    *(f"inferred_{m}" for m in BETWEEN_MEASURES), *(f"local_{m}" for m in BETWEEN_MEASURES),
    *(f"global_{m}" for m in BETWEEN_MEASURES), "inferred_reachable_pair_fraction",
    *(f"within_{m}_resolution" for m in WITHIN_MEASURES), "status", "error",
)  # fmt: skip

_WORKER: dict = {}


def _init_worker(inputs: Inputs, cue_sets: dict, out_dir: str | None) -> None:
    _WORKER["inputs"] = inputs
    _WORKER["cues"] = cue_sets
    _WORKER["out_dir"] = out_dir


def simulate_and_infer(
    truth: WeightedGraph, freq: np.ndarray, cues: CueSet, design: DesignConfig, seed: int
) -> tuple[WeightedGraph, int, int]:
    """Behavior from ``truth`` on ``cues`` and the network inferred from it."""
    if design.response_type == FA:
        data = simulate_fa(truth, freq, cues, design.n_responses, design.fa, seed)
        net = infer_fa_network(data, cues, truth)
    else:
        data = simulate_rj(truth, cues, design.n_responses, design.rj, seed)
        net = infer_rj_network(data, cues, truth, design.rj.scale_min, design.rj.scale_max)
    return net, data.n_responses(), len(data.skipped)


def _run_task(task: Task) -> dict:
    inputs: Inputs = _WORKER["inputs"]
    d = task.design
    individual = task.participant % len(inputs.individuals)
    row: dict = {
        "task_id": task.task_id, "design_id": d.design_id, "response_type": d.response_type,
        "cue_set_type": d.cue_set_type, "cue_set_size": d.cue_set_size, "n_responses": d.n_responses,
        "replicate": task.replicate, "participant": task.participant, "individual": individual,
        "seed": task.seed,
    }  # fmt: skip
    try:
        cues: CueSet = _WORKER["cues"][(d.cue_key(), task.replicate)]
        if isinstance(cues, Exception):
            raise cues
        truth = inputs.individuals[individual]
        net, n_resp, n_skip = simulate_and_infer(truth, inputs.frequencies, cues, d, task.seed)
        inferred = measure_network(net, task.seed)
        local = measure_network(truth.subgraph(cues.cues), task.seed)
        cmp_ = compare(inferred, local)
        row.update(n_judgments=n_resp, n_skipped_cues=n_skip)
        for m in BETWEEN_MEASURES:
            row[f"inferred_{m}"] = cmp_.inferred[m]
            row[f"local_{m}"] = cmp_.local[m]
        row["inferred_reachable_pair_fraction"] = inferred.reachable_pair_fraction
        for m in WITHIN_MEASURES:
            row[f"within_{m}_resolution"] = cmp_.within[m]
        if _WORKER.get("out_dir"):
            write_edgelist(
                net, Path(_WORKER["out_dir"]) / "networks" / f"{task.task_id}.tsv",
                {"design": d.design_id, "participant": task.participant, "seed": task.seed},
            )  # fmt: skip
        row["status"] = "ok"
    except Exception as exc:  # isolate task failures; reported in the manifest
        row["status"] = "failed"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _global_measure(args) -> MeasureRecord:
    g, seed = args
    return measure_network(g, seed)


@dataclass
class RunManifest:
    config_hash: str
    manifest_hash: str
    tasks: list[dict]
    artifacts: dict[str, str]
    timing: dict[str, float]
    failures: list[dict]

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")

    @property
    def ok(self) -> bool:
        return not self.failures


def _cell(v) -> str:
    if isinstance(v, float):
        return fmt_float(v)
    return "" if v is None else str(v)


def _task_cache_path(out: Path, task: Task) -> Path:
    return out / "tasks" / f"{task.task_id}.json"


def run(
    cfg: dict,
    out_dir: str | Path,
    workers: int | None = None,
    resume: bool = True,
    inputs: Inputs | None = None,
) -> RunManifest:
    """Run every (design, cue replicate, participant) task and write the outputs.

    Writes ``measures.csv`` (one row per inferred network), ``evaluation.csv``
    (one row per design x measure x level) and ``manifest.json``. Finished
    tasks are cached under ``tasks/`` so an interrupted run resumes where it
    stopped. Outputs depend only on the config, never on ``workers``.
    """
    out = Path(out_dir)
    (out / "tasks").mkdir(parents=True, exist_ok=True)
    if cfg["run"]["save_networks"]:
        (out / "networks").mkdir(exist_ok=True)
    workers = workers or cfg["run"]["workers"]
    t0 = time.perf_counter()
    designs = expand_grid(cfg)
    if inputs is None:
        inputs = build_inputs(cfg, workers)
    t_inputs = time.perf_counter()

    tasks = [Task(d, r, p) for d in designs for r, p in assignments(d, cfg["run"]["assignment"])]
    cue_sets: dict = {}
    for t in tasks:
        key = (t.design.cue_key(), t.replicate)
        if key not in cue_sets:
            try:
                cue_sets[key] = make_cues(
                    inputs.base, t.design.cue_set_type, t.design.cue_set_size, t.cue_seed(), graph_id="base"
                )
            except GraphError as exc:  # fails the tasks that need this cue set, not the run
                cue_sets[key] = exc

    cached: dict[str, dict] = {}
    if resume:
        for t in tasks:
            p = _task_cache_path(out, t)
            if p.exists():
                row = json.loads(p.read_text(encoding="utf-8"))
                if row.get("status") == "ok" and row.get("seed") == t.seed:
                    cached[t.task_id] = row
    todo = [t for t in tasks if t.task_id not in cached]
    net_dir = str(out) if cfg["run"]["save_networks"] else None
    log.info("%d tasks (%d cached), %d workers", len(tasks), len(cached), workers)
    if workers > 1 and todo:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(inputs, cue_sets, net_dir)) as pool:
            fresh = list(pool.map(_run_task, todo, chunksize=max(1, len(todo) // (8 * workers))))
    else:
        _init_worker(inputs, cue_sets, net_dir)
        fresh = [_run_task(t) for t in todo]
    for row in fresh:
        (out / "tasks" / f"{row['task_id']}.json").write_text(json.dumps(row, sort_keys=True), encoding="utf-8")
        cached[row["task_id"]] = row
    rows = [cached[t.task_id] for t in tasks]
    t_tasks = time.perf_counter()

    if "global" in cfg["run"]["levels"]:
        jobs = [(g, derive_seed(cfg["run"]["master_seed"], _digest("global"), k)) for k, g in enumerate(inputs.individuals)]
        used = sorted({r["individual"] for r in rows})
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                recs = dict(zip(used, pool.map(_global_measure, [jobs[k] for k in used])))
        else:
            recs = {k: _global_measure(jobs[k]) for k in used}
        for r in rows:
            for m in BETWEEN_MEASURES:
                r[f"global_{m}"] = getattr(recs[r["individual"]], m)

    with open(out / "measures.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEASURE_COLUMNS)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in MEASURE_COLUMNS])

    results = evaluate_rows(rows, cfg["run"]["levels"])
    write_evaluation_csv(results, out / "evaluation.csv")
    t_end = time.perf_counter()

    failures = [{"task_id": r["task_id"], "error": r.get("error", "")} for r in rows if r["status"] != "ok"]
    task_entries = [
        {"task_id": t.task_id, "design_id": t.design.design_id, "config_hash": t.design.config_hash(),
         "replicate": t.replicate, "participant": t.participant, "seed": t.seed, "cue_seed": t.cue_seed(),
         "status": r["status"]}
        for t, r in zip(tasks, rows)
    ]  # fmt: skip
    cfg_hash = _digest(cfg)
    manifest = RunManifest(
        config_hash=cfg_hash,
        manifest_hash=_digest([cfg_hash, [(e["task_id"], e["seed"], e["cue_seed"]) for e in task_entries]]),
        tasks=task_entries,
        artifacts={"measures": "measures.csv", "evaluation": "evaluation.csv", "tasks": "tasks/"},
        timing={
            "inputs_s": round(t_inputs - t0, 3), "tasks_s": round(t_tasks - t_inputs, 3),
            "total_s": round(t_end - t0, 3), "workers": workers, "cpu_count": os.cpu_count() or 1,
        },  # fmt: skip
        failures=failures,
    )
    manifest.write(out / "manifest.json")
    return manifest


def _float(v) -> float:
    if v is None or v == "":
        return math.nan
    return float(v)


def evaluate_rows(rows: list[dict], levels=("local", "global")) -> list[EvaluationResult]:
    """Evaluation per design cell from measure rows (dicts or parsed ``measures.csv``)."""
    by_design: dict[str, list[Comparison]] = {}
    for r in rows:
        if r.get("status", "ok") != "ok":
            continue
        glob = None
        if all(r.get(f"global_{m}") not in (None, "") for m in BETWEEN_MEASURES):
            glob = {m: _float(r[f"global_{m}"]) for m in BETWEEN_MEASURES}
        by_design.setdefault(r["design_id"], []).append(
            Comparison(
                {m: _float(r[f"inferred_{m}"]) for m in BETWEEN_MEASURES},
                {m: _float(r[f"local_{m}"]) for m in BETWEEN_MEASURES},
                glob,
                {m: _float(r[f"within_{m}_resolution"]) for m in WITHIN_MEASURES},
            )
        )
    out = []
    for design_id, comps in by_design.items():
        for level in levels:
            out.extend(evaluate_comparisons(comps, level, design_id))
    return out


def read_measures_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(MEASURE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return list(reader)
