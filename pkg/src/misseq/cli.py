"""Command-line entry points.

Subcommands: ``synth`` (write a synthetic episode file), ``featurize``
(emit feature matrices as CSV), ``train`` (fit one model/input combination),
``evaluate`` (score a saved checkpoint), ``gradcheck`` (finite-difference
gradient verification), and ``matrix`` (run a grid of experiments and emit a
comparison table).

Every subcommand accepts ``--config FILE`` pointing at a JSON object whose
keys mirror the long flag names (underscored); explicit flags override the
file.  Exit codes: 0 success, 2 configuration/input error, 3 numeric
failure.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from misseq.errors import ConfigError, MisseqError, NumericError, ParseError, SchemaError
from misseq.experiment import (
    ExperimentSpec,
    build_feature_matrix,
    compare,
    comparison_table,
    matrix_specs,
    prepare_grids,
    run_experiment,
    split_episodes,
    write_comparison_csv,
)
from misseq.impute import compute_medians
from misseq.ingest import load_episodes, load_variable_specs
from misseq.metrics import build_report
from misseq.nn import (
    LstmModel,
    TrainConfig,
    load_checkpoint,
    lstm_backward,
    lstm_objective,
    max_relative_error,
    numeric_gradients,
)
from misseq.nn.gradcheck import relative_errors_by_param
from misseq.synth import (
    SynthConfig,
    generate,
    summarize_missingness,
    variable_specs_for,
    write_episodes,
    write_variable_specs,
)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = _build_parser()
    try:
        _apply_config_file(argv, subparsers)
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            parser.print_help()
            return 2
        return args.func(args) or 0
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ParseError, SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MisseqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="misseq",
        description="Missingness-aware clinical time-series classification.",
    )
    subparsers = parser.add_subparsers(dest="command")
    registry = {}

    sp = subparsers.add_parser("synth", help="generate a synthetic episode file")
    sp.add_argument("--config", help="JSON file of default option values")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--episodes", type=int, default=1000)
    sp.add_argument("--variables", type=int, default=13)
    sp.add_argument("--labels", type=int, default=20)
    sp.add_argument("--min-hours", type=int, default=12)
    sp.add_argument("--max-hours", type=int, default=96)
    sp.add_argument("--beta", type=float, default=0.0,
                    help="label/missingness coupling strength (>= 0)")
    sp.add_argument("--value-coupling", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=_cmd_synth)
    registry["synth"] = sp

    sp = subparsers.add_parser("featurize", help="emit feature matrices as CSV")
    sp.add_argument("--config")
    sp.add_argument("--data", help="episode JSONL file")
    sp.add_argument("--vars", help="variable-spec CSV")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--mode", choices=["raw", "he"], default="raw")
    sp.add_argument("--impute", choices=["zero", "ffill"], default="zero")
    sp.add_argument("--indicators", choices=["on", "off", "only"], default="on")
    sp.add_argument("--he-blocks",
                    choices=["measurement", "missingness", "both"],
                    default="both")
    sp.add_argument("--max-steps", type=int, default=None)
    sp.set_defaults(func=_cmd_featurize)
    registry["featurize"] = sp

    sp = subparsers.add_parser("train", help="train one model/input combination")
    sp.add_argument("--config")
    sp.add_argument("--data")
    sp.add_argument("--vars")
    sp.add_argument("--out")
    sp.add_argument("--model", choices=["lstm", "mlp", "logreg"], default="lstm")
    sp.add_argument("--input", dest="input_variant", default="raw_zeros_indicators")
    _add_train_flags(sp)
    sp.set_defaults(func=_cmd_train)
    registry["train"] = sp

    sp = subparsers.add_parser("evaluate", help="score a saved checkpoint")
    sp.add_argument("--config")
    sp.add_argument("--checkpoint")
    sp.add_argument("--data")
    sp.add_argument("--vars")
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_evaluate)
    registry["evaluate"] = sp

    sp = subparsers.add_parser("gradcheck",
                               help="verify gradients by finite differences")
    sp.add_argument("--config")
    sp.add_argument("--input-size", type=int, default=3)
    sp.add_argument("--hidden", default="4,4")
    sp.add_argument("--labels", type=int, default=2)
    sp.add_argument("--steps", type=int, default=5)
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--weight-decay", type=float, default=1e-6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--step-size", type=float, default=1e-5)
    sp.add_argument("--tolerance", type=float, default=1e-4)
    sp.set_defaults(func=_cmd_gradcheck)
    registry["gradcheck"] = sp

    sp = subparsers.add_parser("matrix",
                               help="run an experiment grid and compare results")
    sp.add_argument("--config")
    sp.add_argument("--data")
    sp.add_argument("--vars")
    sp.add_argument("--out")
    sp.add_argument("--models", default="lstm,logreg",
                    help="comma-separated subset of lstm,mlp,logreg")
    sp.add_argument("--jobs", type=int, default=1,
                    help="run this many experiments in parallel")
    _add_train_flags(sp)
    sp.set_defaults(func=_cmd_matrix)
    registry["matrix"] = sp

    return parser, registry


def _add_train_flags(sp):
    sp.add_argument("--epochs", type=int, default=100)
    sp.add_argument("--lr", type=float, default=0.1)
    sp.add_argument("--momentum", type=float, default=0.9)
    sp.add_argument("--dropout", type=float, default=0.5)
    sp.add_argument("--weight-decay", type=float, default=1e-6)
    sp.add_argument("--batch-size", type=int, default=16)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--alpha", type=float, default=0.5,
                    help="per-step loss weight for the replicated targets")
    sp.add_argument("--lstm-hidden", default="128,128")
    sp.add_argument("--mlp-hidden", default="500,500,500")
    sp.add_argument("--l2", type=float, default=1e-4,
                    help="logistic-regression penalty coefficient")
    sp.add_argument("--max-steps", type=int, default=None,
                    help="optionally truncate sequences to this many steps")


def _apply_config_file(argv, subparsers):
    path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if path is None:
        return
    command = next((t for t in argv if not t.startswith("-")), None)
    sp = subparsers.get(command)
    if sp is None:
        return
    with open(path) as fh:
        try:
            overrides = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad config file {path}: {exc}") from exc
    if not isinstance(overrides, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    known = {action.dest for action in sp._actions}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(
            f"config file {path} has unknown keys: {sorted(unknown)}"
        )
    sp.set_defaults(**overrides)


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required")


def _cmd_synth(args):
    _require(args, "out")
    cfg = SynthConfig(
        num_episodes=args.episodes,
        num_variables=args.variables,
        num_labels=args.labels,
        min_hours=args.min_hours,
        max_hours=args.max_hours,
        beta=args.beta,
        value_coupling=args.value_coupling,
        seed=args.seed,
    )
    episodes = generate(cfg)
    os.makedirs(args.out, exist_ok=True)
    episodes_path = os.path.join(args.out, "episodes.jsonl")
    specs_path = os.path.join(args.out, "variables.csv")
    write_episodes(episodes_path, episodes)
    write_variable_specs(specs_path, variable_specs_for(cfg))
    print(f"wrote {len(episodes)} episodes to {episodes_path}")
    for row in summarize_missingness(episodes):
        print(
            f"  {row['variable']:<22} {row['measurements_per_hour']:.3f}/h  "
            f"missing entirely {row['missing_entirely']:.3f}  "
            f"fraction missing {row['fraction_missing']:.3f}"
        )
    return 0


def _variant_from_flags(args):
    if args.mode == "he":
        return {
            "measurement": "he_measurement",
            "missingness": "he_indicators",
            "both": "he_both",
        }[args.he_blocks]
    if args.indicators == "only":
        return "indicators_only"
    fill = "zeros" if args.impute == "zero" else "impute"
    suffix = "_indicators" if args.indicators == "on" else ""
    return f"raw_{fill}{suffix}"


def _cmd_featurize(args):
    _require(args, "data", "vars", "out")
    var_specs = load_variable_specs(args.vars)
    episodes = load_episodes(args.data, len(var_specs))
    grids = prepare_grids(episodes, var_specs, args.max_steps)
    medians = compute_medians(episodes, var_specs)
    variant = _variant_from_flags(args)
    features, names = build_feature_matrix(grids, variant, medians)

    os.makedirs(args.out, exist_ok=True)
    features_path = os.path.join(args.out, "features.csv")
    with open(features_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode_id", *names])
        for episode, row in zip(episodes, features):
            writer.writerow([episode.episode_id, *row])
    labels_path = os.path.join(args.out, "labels.csv")
    num_labels = episodes[0].labels.size
    with open(labels_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["episode_id"] + [f"label_{k:03d}" for k in range(num_labels)]
        )
        for episode in episodes:
            writer.writerow([episode.episode_id] + [int(y) for y in episode.labels])
    print(
        f"wrote {features.shape[0]} x {features.shape[1]} feature matrix "
        f"({variant}) to {features_path}"
    )
    return 0


def _train_config_from(args):
    return TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        momentum=args.momentum,
        dropout=args.dropout,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        seed=args.seed,
        alpha=args.alpha,
    )


def _spec_from_args(args, model, variant):
    return ExperimentSpec(
        model=model,
        input_variant=variant,
        train=_train_config_from(args),
        lstm_hidden=_int_tuple(args.lstm_hidden),
        mlp_hidden=_int_tuple(args.mlp_hidden),
        l2_penalty=args.l2,
        max_steps=args.max_steps,
    )


def _cmd_train(args):
    _require(args, "data", "vars", "out")
    var_specs = load_variable_specs(args.vars)
    episodes = load_episodes(args.data, len(var_specs))
    spec = _spec_from_args(args, args.model, args.input_variant)
    report, result, _ = run_experiment(spec, episodes, var_specs, out_dir=args.out)
    print(
        f"{spec.name}: best epoch {result.best_epoch} "
        f"(val loss {result.best_val_loss:.4f}); "
        f"micro AUC {_fmt(report.micro_auc)}, macro AUC {_fmt(report.macro_auc)}"
    )
    return 0


def _cmd_evaluate(args):
    _require(args, "checkpoint", "data", "vars", "out")
    model, extra = load_checkpoint(args.checkpoint)
    if not extra or "input_variant" not in extra:
        raise ConfigError(
            "checkpoint is missing its experiment metadata; re-train with "
            "the current version"
        )
    var_specs = load_variable_specs(args.vars)
    episodes = load_episodes(args.data, len(var_specs))
    by_id = {ep.episode_id: ep for ep in episodes}
    _, val_ids, test_ids = split_episodes(by_id.keys(), extra["seed"])
    medians = np.asarray(extra["medians"], dtype=np.float64)
    variant = extra["input_variant"]
    max_steps = extra.get("max_steps")

    scores, labels = {}, {}
    for part, ids in (("val", val_ids), ("test", test_ids)):
        grids = prepare_grids([by_id[i] for i in ids], var_specs, max_steps)
        labels[part] = np.stack([g.labels for g in grids])
        if model.kind == "lstm":
            from misseq.experiment import build_sequences

            scores[part] = model.predict(build_sequences(grids, variant, medians))
        else:
            x, _ = build_feature_matrix(grids, variant, medians)
            scores[part] = model.predict(x)
    report = build_report(scores["val"], labels["val"], scores["test"],
                          labels["test"])
    os.makedirs(args.out, exist_ok=True)
    report.write(
        os.path.join(args.out, "report.json"),
        os.path.join(args.out, "per_label.csv"),
    )
    print(
        f"evaluated {len(test_ids)} test episodes: "
        f"micro AUC {_fmt(report.micro_auc)}, macro AUC {_fmt(report.macro_auc)}, "
        f"micro F1 {_fmt(report.micro_f1)}"
    )
    return 0


def _cmd_gradcheck(args):
    hidden = _int_tuple(args.hidden)
    rng = np.random.default_rng(args.seed)
    model = LstmModel(
        input_size=args.input_size,
        hidden_sizes=hidden,
        num_labels=args.labels,
        alpha=args.alpha,
        seed=args.seed,
    )
    inputs = rng.random((args.steps, args.input_size))
    labels = (rng.random(args.labels) < 0.5).astype(np.float64)
    _, analytic = lstm_backward(model, inputs, labels,
                                weight_decay=args.weight_decay)
    numeric = numeric_gradients(
        lambda: lstm_objective(model, inputs, labels,
                               weight_decay=args.weight_decay),
        model.params(),
        step=args.step_size,
    )
    per_param = relative_errors_by_param(analytic, numeric)
    for name in sorted(per_param):
        print(f"  {name:<18} max rel err {per_param[name]:.3e}")
    worst = max_relative_error(analytic, numeric)
    print(f"max relative error: {worst:.3e} (tolerance {args.tolerance:.1e})")
    if worst > args.tolerance:
        raise NumericError(
            f"analytic gradients disagree with finite differences "
            f"({worst:.3e} > {args.tolerance:.1e})"
        )
    return 0


def _run_matrix_entry(payload):
    spec, data_path, vars_path, out_dir = payload
    var_specs = load_variable_specs(vars_path)
    episodes = load_episodes(data_path, len(var_specs))
    report, _, _ = run_experiment(spec, episodes, var_specs, out_dir=out_dir)
    return spec.name, report


def _cmd_matrix(args):
    _require(args, "data", "vars", "out")
    models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    for model in models:
        if model not in ("lstm", "mlp", "logreg"):
            raise ConfigError(f"unknown model {model!r} in --models")
    specs = matrix_specs(
        models=models,
        train_cfg=_train_config_from(args),
        lstm_hidden=_int_tuple(args.lstm_hidden),
        mlp_hidden=_int_tuple(args.mlp_hidden),
        l2_penalty=args.l2,
        max_steps=args.max_steps,
    )
    os.makedirs(args.out, exist_ok=True)
    payloads = [
        (spec, args.data, args.vars, os.path.join(args.out, spec.name))
        for spec in specs
    ]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_matrix_entry, payloads))
    else:
        results = []
        for payload in payloads:
            name, report = _run_matrix_entry(payload)
            print(f"finished {name}: micro AUC {_fmt(report.micro_auc)}")
            results.append((name, report))
    rows = compare([r for _, r in results], [n for n, _ in results])
    table = comparison_table(rows)
    write_comparison_csv(os.path.join(args.out, "comparison.csv"), rows)
    with open(os.path.join(args.out, "comparison.txt"), "w") as fh:
        fh.write(table)
    print(table, end="")
    return 0


def _int_tuple(text):
    try:
        return tuple(int(part) for part in str(text).split(",") if part != "")
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _fmt(value):
    import math

    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    return f"{value:.4f}"


if __name__ == "__main__":
    sys.exit(main())
