"""Command-line interface. Exit codes: 0 success, 1 task failure, 2 usage/input error."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import behavior, evaluation, groundtruth, inference, measures, report, runner
from .graph import GraphError, read_edgelist, write_edgelist


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _grid(text: str) -> list[tuple[float, float]]:
    if text == "table_s1":
        return list(groundtruth.TABLE_S1)
    pairs = []
    for chunk in text.split(";"):
        p, r = chunk.split(",")
        pairs.append((float(p), float(r)))
    return pairs


def _frequencies(path: str | None, g) -> behavior.FrequencyTable:
    if path:
        return behavior.FrequencyTable.read(path)
    return behavior.FrequencyTable.synthetic(g.labels, seed=0)


def cmd_gen_truth(a) -> int:
    if a.embeddings:
        vocab = groundtruth.read_word_list(a.vocab) if a.vocab else None
        emb = groundtruth.read_embeddings(a.embeddings, vocab)
        words = vocab if vocab is not None else emb.words
    else:
        emb = groundtruth.synthetic_embeddings(a.synthetic, a.dim, a.topics, seed=a.seed)
        words = emb.words
    g = groundtruth.build_similarity_network(emb, words, a.weight_floor)
    write_edgelist(g, a.output, {"source": a.embeddings or "synthetic", "weight_floor": a.weight_floor})
    print(f"{g.n_nodes} nodes, {g.n_edges} edges -> {a.output}")
    return 0


def cmd_perturb(a) -> int:
    g, _ = read_edgelist(a.graph)
    grid = [(a.p, a.r)] if a.p is not None else _grid(a.grid)
    nets = groundtruth.generate_individual_networks(g, grid, a.replicates, a.seed, a.weight_floor, a.workers)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, h in enumerate(nets):
        gi, rep = divmod(k, a.replicates)
        p, r = grid[gi]
        write_edgelist(h, out / f"individual_{k:04d}.tsv", {"p": p, "r": r, "replicate": rep, "seed": a.seed})
    print(f"{len(nets)} networks -> {out}")
    return 0


def cmd_cues(a) -> int:
    g, _ = read_edgelist(a.graph)
    cues = groundtruth.make_cues(g, a.type, a.size, a.seed)
    groundtruth.write_cues(cues, g, a.output)
    return 0


def cmd_simulate(a) -> int:
    g, _ = read_edgelist(a.graph)
    cues = groundtruth.read_cues(a.cues, g)
    if a.response_type == behavior.FA:
        params = behavior.FAParams(a.gamma_w, a.gamma_f, a.block_size or None)
        data = behavior.simulate_fa(g, _frequencies(a.frequencies, g), cues, a.n_responses, params, a.seed)
    else:
        params = behavior.RJParams(a.gamma, a.sigma)
        data = behavior.simulate_rj(g, cues, a.n_responses, params, a.seed)
    Path(a.output).write_text(data.to_json() + "\n", encoding="utf-8")
    if data.skipped:
        print(f"skipped {len(data.skipped)} cues without neighbors: {data.skipped[:10]}", file=sys.stderr)
    return 0


def cmd_infer(a) -> int:
    data = behavior.ResponseData.from_json(Path(a.data).read_text(encoding="utf-8"))
    if data.variant == behavior.FA:
        g = inference.infer_fa_network(data)
    else:
        g = inference.infer_rj_network(data)
    meta = dict(kv.split("=", 1) for kv in a.meta)
    write_edgelist(g, a.output, meta)
    return 0


def cmd_measure(a) -> int:
    g, _ = read_edgelist(a.graph)
    rec = measures.measure_network(g, a.seed)
    doc = {
        "average_strength": rec.average_strength,
        "aspl": rec.aspl,
        "reachable_pair_fraction": rec.reachable_pair_fraction,
        "average_cc": rec.average_cc,
        "modularity": rec.modularity,
        "node_strengths": dict(zip(g.labels, rec.node_strengths.tolist())),
    }
    text = json.dumps(doc, indent=2)
    if a.output:
        Path(a.output).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_evaluate(a) -> int:
    rows = runner.read_measures_csv(a.measures)
    levels = a.levels.split(",")
    if "global" in levels and any(r["global_average_strength"] == "" for r in rows if r["status"] == "ok"):
        levels = [lv for lv in levels if lv != "global"]
        print("no global truth measures in input; evaluating local level only", file=sys.stderr)
    evaluation.write_evaluation_csv(runner.evaluate_rows(rows, levels), a.output)
    return 0


def cmd_run(a) -> int:
    cfg = runner.load_config(a.config) if a.config else runner.load_preset(a.preset)
    if a.seed is not None:
        cfg["run"]["master_seed"] = a.seed
    manifest = runner.run(cfg, a.out_dir, workers=a.workers, resume=not a.no_resume)
    print(f"{len(manifest.tasks)} tasks, {len(manifest.failures)} failed, {manifest.timing['total_s']:.1f}s -> {a.out_dir}")
    for f in manifest.failures[:10]:
        print(f"  {f['task_id']}: {f['error']}", file=sys.stderr)
    return 0 if manifest.ok else 1


def cmd_report(a) -> int:
    table = report.report(a.evaluation, a.out_dir, a.bias_threshold, a.resolution_threshold)
    print(f"{len(table)} rows -> {a.out_dir}")
    return 0


def cmd_tune_fa(a) -> int:
    g, _ = read_edgelist(a.graph)
    norms = behavior.read_fa_norms(a.norms)
    grid = [(gw, gf) for gw in _floats(a.gamma_w) for gf in _floats(a.gamma_f)]
    fits = behavior.tune_fa(g, _frequencies(a.frequencies, g), norms, grid, a.seed)
    print("gamma_w\tgamma_f\tpearson\tspearman\tmed_r1\tmed_r2\tmed_r3\tn_pairs")
    for (gw, gf), f in fits.items():
        m1, m2, m3 = f.median_ranks
        print(f"{gw:g}\t{gf:g}\t{f.pearson:.4f}\t{f.spearman:.4f}\t{m1:g}\t{m2:g}\t{m3:g}\t{f.n_pairs}")
    best = max(fits, key=lambda c: fits[c].pearson)
    print(f"best (pearson): gamma_w={best[0]:g} gamma_f={best[1]:g}")
    return 0


def cmd_tune_rj(a) -> int:
    g, _ = read_edgelist(a.graph)
    pairs = None
    if a.norms:
        index = {lab: i for i, lab in enumerate(g.labels)}
        pairs = [(index[x], index[y]) for x, y, _ in behavior.read_rj_norms(a.norms) if x in index and y in index]
        if not pairs:
            raise ValueError("no norm pair has both words in the graph")
    grid = [(gm, s) for gm in _floats(a.gamma) for s in _floats(a.sigma)]
    corr, best = behavior.tune_rj(g, grid, a.target, a.seed, pairs, a.n_pairs)
    print("gamma\tsigma\tinterrater")
    for (gm, s), r in corr.items():
        print(f"{gm:g}\t{s:g}\t{r:.4f}")
    print(f"best: gamma={best[0]:g} sigma={best[1]:g} (target {a.target:g})")
    return 0


def cmd_power(a) -> int:
    p = evaluation.power_simulation(a.d, a.r, a.n, a.alpha, a.reps, a.seed)
    print(f"power={p:.4f} (d={a.d:g}, r={a.r:g}, n={a.n} per group, alpha={a.alpha:g}, reps={a.reps})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semnetsim", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-truth", help="build the common ground-truth network")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--embeddings", help="text or binary embedding table")
    src.add_argument("--synthetic", type=int, metavar="N_WORDS", help="use topic-clustered random vectors")
    s.add_argument("--vocab", help="word list restricting the vocabulary")
    s.add_argument("--dim", type=int, default=50)
    s.add_argument("--topics", type=int, default=20)
    s.add_argument("--weight-floor", type=float, default=groundtruth.DEFAULT_WEIGHT_FLOOR)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_gen_truth)

    s = sub.add_parser("perturb", help="generate individualized networks")
    s.add_argument("graph")
    s.add_argument("--grid", default="table_s1", help="'table_s1' or 'p,r;p,r;...'")
    s.add_argument("--p", type=float)
    s.add_argument("--r", type=float)
    s.add_argument("--replicates", type=int, default=10)
    s.add_argument("--weight-floor", type=float, default=groundtruth.DEFAULT_WEIGHT_FLOOR)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_perturb)

    s = sub.add_parser("cues", help="sample a cue set")
    s.add_argument("graph")
    s.add_argument("--type", choices=groundtruth.CUE_SET_TYPES, required=True)
    s.add_argument("--size", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_cues)

    s = sub.add_parser("simulate", help="simulate behavioral responses")
    s.add_argument("graph")
    s.add_argument("cues")
    s.add_argument("--response-type", choices=(behavior.FA, behavior.RJ), required=True)
    s.add_argument("--n-responses", type=int, required=True)
    s.add_argument("--frequencies")
    s.add_argument("--gamma-w", type=float, default=10.0)
    s.add_argument("--gamma-f", type=float, default=1.0)
    s.add_argument("--block-size", type=int, default=0)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--sigma", type=float, default=3.85)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("infer", help="infer a network from response data")
    s.add_argument("data")
    s.add_argument("--meta", action="append", default=[], metavar="KEY=VALUE")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("measure", help="network measures as JSON")
    s.add_argument("graph")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_measure)

    s = sub.add_parser("evaluate", help="bias/resolution from a measures CSV")
    s.add_argument("measures")
    s.add_argument("--levels", default="local,global")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("run", help="end-to-end factorial experiment")
    cfg = s.add_mutually_exclusive_group(required=True)
    cfg.add_argument("--config")
    cfg.add_argument("--preset", choices=runner.PRESETS)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--workers", type=int)
    s.add_argument("--seed", type=int, help="override run.master_seed")
    s.add_argument("--no-resume", action="store_true", help="recompute cached tasks")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("report", help="classification table and SVG heatmap")
    s.add_argument("evaluation")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--bias-threshold", type=float, default=evaluation.BIAS_ACCEPTABLE)
    s.add_argument("--resolution-threshold", type=float, default=evaluation.RESOLUTION_ACCEPTABLE)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("tune-fa", help="fit free-association sensitivities to norms")
    s.add_argument("graph")
    s.add_argument("--norms", required=True, help="cue<TAB>response<TAB>count")
    s.add_argument("--frequencies")
    s.add_argument("--gamma-w", default="5,7.5,10,12.5,15,17.5")
    s.add_argument("--gamma-f", default="0.25,0.5,0.75,1,1.25,1.5")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_tune_fa)

    s = sub.add_parser("tune-rj", help="fit judgment noise to an inter-rater correlation")
    s.add_argument("graph")
    s.add_argument("--gamma", default="1")
    s.add_argument("--sigma", default="0,0.85,1.7,2.55,3.4,3.85,4.25,5.1,5.95,6.8,7.65")
    s.add_argument("--target", type=float, default=0.68)
    s.add_argument("--norms", help="word1<TAB>word2<TAB>rating; pairs to simulate")
    s.add_argument("--n-pairs", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_tune_rj)

    s = sub.add_parser("power", help="Monte Carlo power for a given resolution")
    s.add_argument("--d", type=float, default=0.5)
    s.add_argument("--r", type=float, default=0.5)
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--reps", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_power)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (runner.ConfigError, GraphError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"semnetsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
