"""Command-line entry point: generate | audit | debias | split | eval."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import debias, metrics, plotting
from .evaluation import DEFAULT_THRESHOLDS, RC_KEYS, PredictionSet, evaluate, rc
from .pipeline import OUTPUT_ENV, SEED_ENV, PipelineConfig, PipelineError, generate, write_outputs
from .records import load_jsonl, write_jsonl


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _tsv(*cols):
    print("\t".join(f"{c:.6f}" if isinstance(c, float) else str(c) for c in cols))


def cmd_generate(args):
    overrides = {}
    seed = args.seed if args.seed is not None else os.environ.get(SEED_ENV)
    if seed is not None:
        overrides["seed"] = int(seed)
    if args.chains is not None:
        overrides["chains"] = args.chains
    try:
        if args.config:
            config = PipelineConfig.from_file(args.config, **overrides)
        else:
            config = PipelineConfig(**overrides)
    except (OSError, ValueError, TypeError) as exc:
        raise PipelineError("config", str(exc)) from exc
    out = args.out or os.environ.get(OUTPUT_ENV) or "out"
    result = generate(config)
    files = write_outputs(config, result, out)
    _tsv("videos", len(result.traces))
    _tsv("records_generated", len(result.unfiltered))
    _tsv("records_kept", len(result.dataset))
    _tsv("files", len(files) + 1)
    _tsv("output", out)


def cmd_audit(args):
    levels = [x for x in args.levels.split(",") if x]
    if not levels:
        raise PipelineError("audit", "empty level list")
    unknown = [x for x in levels if x not in metrics.LEVELS]
    if unknown:
        raise PipelineError("audit", f"unknown levels {unknown}; expected {metrics.LEVELS}")
    dataset = load_jsonl(args.dataset)
    os.makedirs(args.out, exist_ok=True)
    _tsv("level", "groups", "excluded", "aggregate_tjsd")
    for level in levels:
        report = metrics.multilevel_tjsd(dataset, level, args.n, args.min_group_size, args.weighting)
        _write_json(os.path.join(args.out, f"audit_{level}.json"), report.to_dict())
        _tsv(level, len(report.per_group), len(report.excluded_groups), report.aggregate)
    mat = metrics.heatmap_matrix(dataset, args.resolution)
    np.savetxt(os.path.join(args.out, "heatmap.csv"), mat, delimiter=",", fmt="%.8f")
    plotting.save_heatmap(mat, os.path.join(args.out, "heatmap.png"), os.path.basename(args.dataset))
    prof = metrics.boundary_profiles(dataset)
    _write_profile_csv(os.path.join(args.out, "boundary_curves.csv"), {"dataset": prof})
    plotting.save_boundary_curves({"dataset": prof}, os.path.join(args.out, "boundary_curves.png"))


def _write_profile_csv(path, profiles):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("label,bin_lo,bin_hi,start,end\n")
        for label, prof in profiles.items():
            e = prof["edges"]
            for k in range(len(e) - 1):
                fh.write(f"{label},{e[k]:.4f},{e[k + 1]:.4f},{prof['start'][k]:.6f},{prof['end'][k]:.6f}\n")


def cmd_debias(args):
    if not 0 <= args.rho < 1:
        raise PipelineError("debias", f"rho must be in [0, 1), got {args.rho}")
    dataset = load_jsonl(args.dataset)
    fn = debias.icgf if args.method == "icgf" else debias.adversarial_filter
    grouping = args.grouping or ("per_action" if args.method == "icgf" else "global")
    result = fn(dataset, args.n, args.rho, grouping, args.seed)
    kept = debias.apply_filter(dataset, result)
    write_jsonl(kept, args.out)
    _write_json(args.result or args.out + ".filter.json", result.to_dict())
    before = metrics.tjsd(metrics.TemporalHistogram.from_records(dataset, args.n))
    after = metrics.tjsd(metrics.TemporalHistogram.from_records(kept, args.n)) if kept.records else float("nan")
    _tsv("method", "grouping", "kept", "removed", "objective_before", "objective_after", "tjsd_before", "tjsd_after")
    _tsv(args.method, grouping, len(result.kept_ids), len(result.removed_ids),
         result.objective_before, result.objective_after, before, after)


def cmd_split(args):
    dataset = load_jsonl(args.dataset)
    labelled = debias.longtail_split(dataset, args.skew, _floats(args.ratios), args.seed, args.rho, args.n)
    write_jsonl(labelled, args.out)
    summary = debias.split_summary(labelled, args.n)
    _tsv("split", "records", "tjsd")
    for name, (count, value) in summary.items():
        _tsv(name, count, value)
    if args.figures:
        os.makedirs(args.figures, exist_ok=True)
        profiles = {
            name: metrics.boundary_profiles(labelled.by_split(name))
            for name in ("test_high", "test_low") if name in summary
        }
        _write_profile_csv(os.path.join(args.figures, "split_curves.csv"), profiles)
        plotting.save_boundary_curves(profiles, os.path.join(args.figures, "split_curves.png"))


def cmd_eval(args):
    dataset = load_jsonl(args.dataset)
    thresholds = _floats(args.thresholds)
    out = {}
    if args.pred:
        out["report"] = evaluate(PredictionSet.from_files(args.pred, dataset), thresholds).to_dict()
    if args.high or args.low:
        if not (args.high and args.low):
            raise PipelineError("eval", "--high and --low must be given together")
        has_splits = any(r.split != "unassigned" for r in dataset.records)
        high = evaluate(PredictionSet.from_files(args.high, dataset, "test_high" if has_splits else None), thresholds)
        low = evaluate(PredictionSet.from_files(args.low, dataset, "test_low" if has_splits else None), thresholds)
        out["high"] = high.to_dict()
        out["low"] = low.to_dict()
        out["rc"] = rc(high, low, RC_KEYS)
    if not out:
        raise PipelineError("eval", "give --pred or --high/--low")
    if args.out:
        _write_json(args.out, out)
    for name in ("report", "high", "low"):
        if name in out:
            for key, value in out[name].items():
                _tsv(name, key, float(value))
    if "rc" in out:
        _tsv("rc", "rc", out["rc"])


def build_parser():
    p = argparse.ArgumentParser(prog="tempalign", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a balanced annotation set")
    g.add_argument("--config", help="JSON config file")
    g.add_argument("--out", help=f"output directory (env {OUTPUT_ENV}, default ./out)")
    g.add_argument("--seed", type=int, help=f"master seed (env {SEED_ENV})")
    g.add_argument("--chains", type=int, help="override the number of sampled chains")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("audit", help="multi-level TJSD report and heatmaps")
    a.add_argument("dataset")
    a.add_argument("--n", type=int, default=10)
    a.add_argument("--levels", default=",".join(metrics.LEVELS))
    a.add_argument("--min-group-size", type=int, default=10)
    a.add_argument("--weighting", choices=("weighted", "unweighted"), default="weighted")
    a.add_argument("--resolution", type=int, default=20)
    a.add_argument("--out", default="audit")
    a.set_defaults(func=cmd_audit)

    d = sub.add_parser("debias", help="filter with ICGF or AF")
    d.add_argument("dataset")
    d.add_argument("--method", choices=("icgf", "af"), default="icgf")
    d.add_argument("--rho", type=float, default=0.3)
    d.add_argument("--n", type=int, default=10)
    d.add_argument("--grouping", choices=debias.GROUPINGS)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True, help="filtered JSONL")
    d.add_argument("--result", help="FilterResult JSON (default <out>.filter.json)")
    d.set_defaults(func=cmd_debias)

    s = sub.add_parser("split", help="long-tailed high-bias / ICGF low-bias splits")
    s.add_argument("dataset")
    s.add_argument("--skew", type=float, default=1.5)
    s.add_argument("--ratios", default="0.6,0.1,0.1", help="train,val,test_high fractions of the accepted pool")
    s.add_argument("--rho", type=float, default=0.3)
    s.add_argument("--n", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--figures", help="directory for split start/end curves")
    s.set_defaults(func=cmd_split)

    e = sub.add_parser("eval", help="R@1/mIoU and RC for prediction files")
    e.add_argument("--dataset", required=True)
    e.add_argument("--pred")
    e.add_argument("--high")
    e.add_argument("--low")
    e.add_argument("--thresholds", default=",".join(str(t) for t in DEFAULT_THRESHOLDS))
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except PipelineError as exc:
        print(f"tempalign {args.command}: error {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"tempalign {args.command}: error [{args.command}] {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
