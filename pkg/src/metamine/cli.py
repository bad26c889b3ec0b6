"""Command-line front door: synth, ingest, train, evaluate, predict.

Every subcommand writes the fully resolved configuration (defaults <
config file < flags) next to its outputs, so runs are reproducible from
the artifacts alone. Exit codes: 0 success, 1 validation error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .data_model import (HyperParams, InitScheme, TableKind, standardize,
                         validate_tables)
from .evaluation import (MetaMiningData, Protocol, run_lodo, run_lodwo,
                         run_lowo)
from .metric_learning import ObjectiveKind, train
from .preference import (build_preference_from_significance,
                         build_preference_matrix)
from .recommend import (Strategy, Task, knn_predict_dataset_prefs,
                        knn_predict_workflow_prefs, predict_pair,
                        predict_dataset_prefs_direct,
                        predict_workflow_prefs_direct)
from .synth import SynthConfig, SynthMode, generate

# Hyperparameter presets mirroring the published experiment settings,
# keyed by (preset name, objective). Shipped as named presets, not
# defaults: several of the scales are extreme on purpose.
PRESETS = {
    ("paper-task1", "f1"): {"mu1": 0.5, "n_neighbors": 5},
    ("paper-task1", "f3"): {"mu1": 0.5, "mu2": 0.5},
    ("paper-task1", "f4"): {"alpha": 1e-10, "beta": 1e-3, "gamma": 1e-3,
                            "mu1": 10.0, "mu2": 0.0},
    ("paper-task2", "f2"): {"mu2": 10.0, "n_neighbors": 5},
    ("paper-task2", "f3"): {"mu1": 10.0, "mu2": 10.0},
    ("paper-task2", "f4"): {"alpha": 1e-10, "beta": 1e-3, "gamma": 1e-3,
                            "mu1": 0.5, "mu2": 0.0},
    ("paper-task3", "f3"): {"mu1": 10.0, "mu2": 10.0},
    ("paper-task3", "f4"): {"alpha": 1e-10, "beta": 1e-3, "gamma": 1e-3,
                            "mu1": 10.0, "mu2": 0.0},
}

HYPER_FLAGS = ("mu1", "mu2", "alpha", "beta", "gamma", "neighbors",
               "max_iters", "rel_tol", "seed", "t", "init")

_STRATEGY_ALIASES = {
    "def": Strategy.DEFAULT,
    "ec": Strategy.EUCLIDEAN,
    "f1": Strategy.F1_KNN,
    "f2": Strategy.F2_KNN,
    "f3": Strategy.F3_DIRECT,
    "f4": Strategy.F4_DIRECT,
    "f4-knn": Strategy.F4_KNN,
}


class CliError(Exception):
    def __init__(self, message, exit_code=2):
        super().__init__(message)
        self.exit_code = exit_code


def _resolve_config(args, names):
    """defaults (argparse) < config file < explicit flags."""
    resolved = {name: getattr(args, name) for name in names
                if hasattr(args, name)}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        argv = getattr(args, "_argv", ())
        for key, value in file_cfg.items():
            if key in resolved and f"--{key.replace('_', '-')}" not in argv \
                    and f"--{key}" not in argv:
                resolved[key] = value
    return resolved


def _hyper_from(resolved, objective=None, preset=None):
    values = {
        "mu1": resolved.get("mu1", 0.5),
        "mu2": resolved.get("mu2", 0.5),
        "alpha": resolved.get("alpha", 1.0),
        "beta": resolved.get("beta", 1.0),
        "gamma": resolved.get("gamma", 1.0),
        "n_neighbors": resolved.get("neighbors", 5),
        "max_iters": resolved.get("max_iters", 5000),
        "rel_tol": resolved.get("rel_tol", 1e-8),
        "seed": resolved.get("seed", 0),
        "t": resolved.get("t"),
        "init": InitScheme(resolved.get("init", "seeded_gaussian")),
    }
    if preset:
        key = (preset, objective)
        if key not in PRESETS:
            known = sorted({p for p, _ in PRESETS})
            raise CliError(f"no preset {preset!r} for objective {objective!r} "
                           f"(known presets: {known})", exit_code=1)
        for name, value in PRESETS[key].items():
            values[name] = value
    return HyperParams(**values)


def _write_resolved_config(out_path, subcommand, resolved):
    doc = {"subcommand": subcommand, **{k: (v.value if hasattr(v, "value") else v)
                                        for k, v in resolved.items()}}
    path = Path(out_path)
    target = path / "resolved_config.json" if path.is_dir() \
        else path.with_suffix(path.suffix + ".config.json")
    with open(target, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _load_bundle(bundle_dir) -> MetaMiningData:
    bundle = Path(bundle_dir)
    manifest = bundle / "manifest.json"
    if not manifest.exists():
        raise CliError(f"{bundle}: not a bundle (missing manifest.json)", exit_code=1)
    x = io.read_descriptor_csv(bundle / "X.csv", TableKind.DATASET)
    a = io.read_descriptor_csv(bundle / "A.csv", TableKind.WORKFLOW)
    perf = io.read_performance_csv(bundle / "performance.csv")
    r = io.read_preference_csv(bundle / "R.csv")
    return MetaMiningData(x=x, a=a, r=r, performance=perf)


def cmd_synth(args):
    resolved = _resolve_config(args, ("n", "m", "d", "l", "latent_t",
                                      "noise_sigma", "seed", "mode",
                                      "instances", "out"))
    config = SynthConfig(n=resolved["n"], m=resolved["m"], d=resolved["d"],
                         l=resolved["l"], latent_t=resolved["latent_t"],
                         noise_sigma=resolved["noise_sigma"],
                         seed=resolved["seed"],
                         mode=SynthMode(resolved["mode"]),
                         instances_per_dataset=resolved["instances"])
    result = generate(config)
    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    io.write_descriptor_csv(out / "X.csv", result.x)
    io.write_descriptor_csv(out / "A.csv", result.a)
    io.write_performance_csv(out / "performance.csv", result.performance)
    io.write_preference_csv(out / "R.csv", result.preferences)
    if result.cube is not None:
        io.write_outcome_dir(out / "outcomes", result.cube)
    _write_resolved_config(out, "synth", resolved)
    print(f"wrote synthetic problem ({config.n} datasets x {config.m} workflows) to {out}")
    return 0


def cmd_ingest(args):
    resolved = _resolve_config(args, ("x", "a", "performance", "preferences",
                                      "outcomes_dir", "significance", "out"))
    x = io.read_descriptor_csv(resolved["x"], TableKind.DATASET)
    a = io.read_descriptor_csv(resolved["a"], TableKind.WORKFLOW)
    perf = io.read_performance_csv(resolved["performance"])
    report = validate_tables(x, a, perf)
    if not report.passed:
        print(report, file=sys.stderr)
        raise CliError("validation failed", exit_code=1)

    sources = [s for s in ("preferences", "outcomes_dir", "significance")
               if resolved.get(s)]
    if len(sources) != 1:
        raise CliError("exactly one of --preferences, --outcomes-dir, "
                       "--significance is required", exit_code=1)
    if resolved.get("preferences"):
        r = io.read_preference_csv(resolved["preferences"])
    elif resolved.get("outcomes_dir"):
        cube = io.read_outcome_dir(resolved["outcomes_dir"])
        r = build_preference_matrix(cube)
    else:
        ds_ids, wf_ids, tables = io.read_significance_csv(resolved["significance"])
        r = build_preference_from_significance(ds_ids, wf_ids, tables)
    try:
        r.check_invariants()
    except ValueError as exc:
        print(f"R: {exc}", file=sys.stderr)
        raise CliError("preference-matrix validation failed", exit_code=1)
    if tuple(r.dataset_ids) != tuple(x.entity_ids) \
            or tuple(r.workflow_ids) != tuple(a.entity_ids):
        orphans = sorted((set(r.dataset_ids) ^ set(x.entity_ids))
                         | (set(r.workflow_ids) ^ set(a.entity_ids)))
        raise CliError(f"preference ids do not match descriptor ids: {orphans}",
                       exit_code=1)

    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    io.write_descriptor_csv(out / "X.csv", x)
    io.write_descriptor_csv(out / "A.csv", a)
    io.write_performance_csv(out / "performance.csv", perf)
    io.write_preference_csv(out / "R.csv", r)
    manifest = {
        "n_datasets": x.n_entities, "n_workflows": a.n_entities,
        "d": x.n_features, "l": a.n_features,
        "validated": True,
        "preference_source": sources[0],
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    _write_resolved_config(out, "ingest", resolved)
    print(f"bundle written to {out}")
    return 0


def cmd_train(args):
    resolved = _resolve_config(args, ("bundle", "objective", "preset", "out",
                                      *HYPER_FLAGS))
    data = _load_bundle(resolved["bundle"])
    kind = ObjectiveKind(resolved["objective"])
    hyper = _hyper_from(resolved, objective=kind.value,
                        preset=resolved.get("preset"))
    params, trace = train(kind, data.x, data.a, data.r, hyper)
    summary = {
        "iterations": trace.iterations,
        "initial_objective": trace.objective_values[0],
        "final_objective": trace.objective_values[-1],
        "reason": trace.reason.value,
    }
    io.save_model(resolved["out"], params, trace_summary=summary)
    _write_resolved_config(resolved["out"], "train", resolved)
    print(f"objective {kind.value}: final value {summary['final_objective']:.6g} "
          f"after {summary['iterations']} iterations ({summary['reason']})")
    return 0


def cmd_evaluate(args):
    resolved = _resolve_config(args, ("bundle", "protocol", "strategies",
                                      "preset", "jobs", "format", "out",
                                      *HYPER_FLAGS))
    data = _load_bundle(resolved["bundle"])
    protocol = Protocol(resolved["protocol"])
    try:
        strategies = [_STRATEGY_ALIASES[s.strip()]
                      for s in resolved["strategies"].split(",") if s.strip()]
    except KeyError as exc:
        raise CliError(f"unknown strategy {exc.args[0]!r} "
                       f"(known: {sorted(_STRATEGY_ALIASES)})", exit_code=1)
    objective = {"lodo": "f4", "lowo": "f4", "lodwo": "f4"}[protocol.value]
    hyper = _hyper_from(resolved, objective=objective,
                        preset=resolved.get("preset"))
    runner = {Protocol.LODO: run_lodo, Protocol.LOWO: run_lowo,
              Protocol.LODWO: run_lodwo}[protocol]
    report = runner(data, strategies, hyper, jobs=resolved["jobs"])
    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")
    table = report.render_table()
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    _write_resolved_config(out, "evaluate", resolved)
    if resolved.get("format") == "table":
        print(table)
    else:
        print(f"report written to {out}")
    all_failed = report.folds and all(f.failed and not any(f.metrics.values())
                                      for f in report.folds)
    return 2 if all_failed else 0


def cmd_predict(args):
    resolved = _resolve_config(args, ("model", "bundle", "task", "x", "a",
                                      "neighbors", "out"))
    params = io.load_model(resolved["model"])
    task = Task(resolved["task"])
    data = _load_bundle(resolved["bundle"])
    n = resolved.get("neighbors") or params.hyper.n_neighbors

    def check_names(table, expected, label):
        if expected is not None and tuple(table.feature_names) != tuple(expected):
            raise CliError(f"{label} feature names do not match the model", exit_code=1)

    rows = []
    if task is Task.WORKFLOW_PREFS:
        queries = io.read_descriptor_csv(resolved["x"], TableKind.DATASET)
        check_names(queries, params.x_feature_names, "dataset")
        for eid, feats in zip(queries.entity_ids, queries.features):
            q = params.transform_dataset(feats)
            if params.heterogeneous:
                a_std = params.transform_workflow(data.a.features)
                pred = predict_workflow_prefs_direct(q, a_std, params,
                                                     strategy=_direct_tag(params))
            else:
                if params.objective != "f1":
                    raise CliError("model cannot rank workflows for a dataset",
                                   exit_code=1)
                train_std = params.transform_dataset(data.x.features)
                pred = knn_predict_workflow_prefs(q, train_std, data.r, params, n)
            for wid, score in zip(data.a.entity_ids, pred.values):
                rows.append([eid, wid, repr(float(score)), pred.strategy.value,
                             ";".join(pred.flags)])
    elif task is Task.DATASET_PREFS:
        queries = io.read_descriptor_csv(resolved["a"], TableKind.WORKFLOW)
        check_names(queries, params.a_feature_names, "workflow")
        for eid, feats in zip(queries.entity_ids, queries.features):
            q = params.transform_workflow(feats)
            if params.heterogeneous:
                x_std = params.transform_dataset(data.x.features)
                pred = predict_dataset_prefs_direct(q, x_std, params,
                                                    strategy=_direct_tag(params))
            else:
                if params.objective != "f2":
                    raise CliError("model cannot rank datasets for a workflow",
                                   exit_code=1)
                train_std = params.transform_workflow(data.a.features)
                pred = knn_predict_dataset_prefs(q, train_std, data.r, params, n)
            for did, score in zip(data.x.entity_ids, pred.values):
                rows.append([eid, did, repr(float(score)), pred.strategy.value,
                             ";".join(pred.flags)])
    else:  # pair scores
        if not params.heterogeneous:
            raise CliError("homogeneous model cannot score dataset-workflow pairs",
                           exit_code=1)
        qx = io.read_descriptor_csv(resolved["x"], TableKind.DATASET)
        qa = io.read_descriptor_csv(resolved["a"], TableKind.WORKFLOW)
        check_names(qx, params.x_feature_names, "dataset")
        check_names(qa, params.a_feature_names, "workflow")
        for xid, xf in zip(qx.entity_ids, qx.features):
            for aid, af in zip(qa.entity_ids, qa.features):
                score = predict_pair(params.transform_dataset(xf),
                                     params.transform_workflow(af), params)
                rows.append([xid, aid, repr(score), _direct_tag(params).value, ""])

    out = Path(resolved["out"])
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["query_id", "target_id", "score", "strategy", "flags"])
        w.writerows(rows)
    _write_resolved_config(out, "predict", resolved)
    print(f"predictions written to {out}")
    return 0


def _direct_tag(params):
    return Strategy.F4_DIRECT if params.objective == "f4" else Strategy.F3_DIRECT


def _add_hyper_flags(p):
    p.add_argument("--mu1", type=float, default=0.5)
    p.add_argument("--mu2", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--neighbors", type=int, default=5)
    p.add_argument("--max-iters", type=int, default=5000, dest="max_iters")
    p.add_argument("--rel-tol", type=float, default=1e-8, dest="rel_tol")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--init", choices=["seeded_gaussian", "svd_warm_start"],
                   default="seeded_gaussian")
    p.add_argument("--preset", default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="metamine",
        description="Metric-learning hybrid recommendations over "
                    "dataset x workflow preference matrices.")
    parser.add_argument("--config", default=None,
                        help="JSON file of flag defaults (flags still win)")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a synthetic problem")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--m", type=int, default=12)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--l", type=int, default=8)
    p.add_argument("--latent-t", type=int, default=3, dest="latent_t")
    p.add_argument("--noise-sigma", type=float, default=0.0, dest="noise_sigma")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=[m.value for m in SynthMode], default="exact")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate inputs and write a bundle")
    p.add_argument("--x", required=True, help="dataset descriptor CSV")
    p.add_argument("--a", required=True, help="workflow descriptor CSV")
    p.add_argument("--performance", required=True, help="long-format performance CSV")
    p.add_argument("--preferences", default=None, help="wide-format R CSV")
    p.add_argument("--outcomes-dir", default=None, dest="outcomes_dir",
                   help="directory of per-dataset correctness CSVs")
    p.add_argument("--significance", default=None,
                   help="long-format pairwise-significance CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train an objective on a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--objective", choices=["f1", "f2", "f3", "f4"], required=True)
    _add_hyper_flags(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run a leave-one-out protocol")
    p.add_argument("--bundle", required=True)
    p.add_argument("--protocol", choices=["lodo", "lowo", "lodwo"], required=True)
    p.add_argument("--strategies", default="def,ec,f4",
                   help="comma list from: " + ",".join(sorted(_STRATEGY_ALIASES)))
    _add_hyper_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="cold-start predictions for unseen entities")
    p.add_argument("--model", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--task", choices=[t.value for t in Task], required=True)
    p.add_argument("--x", default=None, help="query dataset descriptor CSV")
    p.add_argument("--a", default=None, help="query workflow descriptor CSV")
    p.add_argument("--neighbors", type=int, default=None)
    p.add_argument("--out", required=True, help="prediction CSV path")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = tuple(sys.argv[1:] if argv is None else argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (io.IngestError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
