"""End-to-end experiment assembly: splits, input variants, training, reports.

An experiment pairs a model family with one input construction:

* sequence variants (LSTM, and windowed into flat vectors for the
  baselines): zero-filled values, forward-filled values, either one plus
  missing-data indicators, or indicators alone (value block zeroed);
* hand-engineered variants (baselines only): windowed measurement
  statistics, windowed missingness statistics, or both.

All experiments with the same seed share one 80/10/10 split, computed from
the sorted episode ids alone so input file order cannot change membership.
"""

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from misseq.errors import ConfigError
from misseq.features import RAW3, he_feature_vector, make_windows, raw_concat_features
from misseq.impute import (
    FORWARD_FILL,
    ZERO,
    ImputePolicy,
    augment_with_indicators,
    compute_medians,
    impute,
)
from misseq.ingest import discretize, scale_grid, truncate_grid
from misseq.metrics import build_report
from misseq.nn import LinearModel, LstmModel, MlpModel, TrainConfig, train

SEQUENCE_INPUTS = (
    "raw_zeros",
    "raw_impute",
    "raw_zeros_indicators",
    "raw_impute_indicators",
    "indicators_only",
)
HE_INPUTS = ("he_measurement", "he_indicators", "he_both")
INPUT_VARIANTS = SEQUENCE_INPUTS + HE_INPUTS
MODEL_KINDS = ("lstm", "mlp", "logreg")

TRAIN_FRACTION, VAL_FRACTION = 0.8, 0.1


@dataclass
class ExperimentSpec:
    """One row of the experiment matrix."""

    model: str
    input_variant: str
    train: TrainConfig = field(default_factory=TrainConfig)
    lstm_hidden: tuple = (128, 128)
    mlp_hidden: tuple = (500, 500, 500)
    l2_penalty: float = 1e-4
    max_steps: int | None = None

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.input_variant not in INPUT_VARIANTS:
            raise ConfigError(f"unknown input variant {self.input_variant!r}")
        if self.model == "lstm" and self.input_variant in HE_INPUTS:
            raise ConfigError(
                "the LSTM consumes sequences; hand-engineered vectors are "
                "for the mlp/logreg baselines"
            )

    @property
    def name(self):
        return f"{self.model}-{self.input_variant}"


def split_episodes(episode_ids, seed):
    """Deterministic 80/10/10 split of episode ids.

    The split is a pure function of the sorted id set and the seed, so every
    spec sharing a seed sees the same train/validation/test membership.
    """
    ordered = sorted(episode_ids)
    if len(ordered) != len(set(ordered)):
        raise ConfigError("episode ids must be unique")
    order = np.random.default_rng(seed).permutation(len(ordered))
    shuffled = [ordered[i] for i in order]
    n = len(shuffled)
    n_train = int(n * TRAIN_FRACTION)
    n_val = int(n * VAL_FRACTION)
    if n_train == 0 or n_val == 0 or n_train + n_val >= n:
        raise ConfigError(f"{n} episodes are too few for an 80/10/10 split")
    return (
        shuffled[:n_train],
        shuffled[n_train:n_train + n_val],
        shuffled[n_train + n_val:],
    )


def prepare_grids(episodes, specs, max_steps=None, bin_width=1.0):
    """Discretize, scale, and optionally truncate every episode."""
    grids = []
    for episode in episodes:
        grid = scale_grid(discretize(episode, bin_width), specs)
        grids.append(truncate_grid(grid, max_steps))
    return grids


def build_sequences(grids, variant, medians):
    """Imputed (and possibly indicator-augmented) sequences for one variant."""
    if variant not in SEQUENCE_INPUTS:
        raise ConfigError(f"{variant!r} is not a sequence input variant")
    fill = FORWARD_FILL if "impute" in variant else ZERO
    policy = ImputePolicy(fill, medians if fill == FORWARD_FILL else None)
    with_indicators = "indicators" in variant
    sequences = []
    for grid in grids:
        seq = augment_with_indicators(impute(grid, policy), with_indicators)
        if variant == "indicators_only":
            seq.inputs[:, :seq.num_variables] = 0.0
        sequences.append(seq)
    return sequences


def build_feature_matrix(grids, variant, medians):
    """Flat per-episode feature rows for the baselines; returns (X, names)."""
    rows = []
    names = None
    if variant in SEQUENCE_INPUTS:
        for seq in build_sequences(grids, variant, medians):
            vec = raw_concat_features(seq, make_windows(seq.num_steps, RAW3))
            rows.append(vec.values)
            names = vec.names
    elif variant in HE_INPUTS:
        include_measurement = variant in ("he_measurement", "he_both")
        include_missingness = variant in ("he_indicators", "he_both")
        for grid in grids:
            vec = he_feature_vector(grid, include_measurement, include_missingness)
            rows.append(vec.values)
            names = vec.names
    else:
        raise ConfigError(f"unknown input variant {variant!r}")
    return np.stack(rows), names


def run_experiment(spec, episodes, var_specs, out_dir=None):
    """Train one spec and evaluate it on the shared test split.

    Returns (EvalReport, TrainResult, model).  When ``out_dir`` is given,
    writes checkpoint.json, losses.csv, report.json, per_label.csv, and
    split.json there.
    """
    by_id = {ep.episode_id: ep for ep in episodes}
    train_ids, val_ids, test_ids = split_episodes(by_id.keys(), spec.train.seed)
    split = {
        name: [by_id[i] for i in ids]
        for name, ids in (("train", train_ids), ("val", val_ids), ("test", test_ids))
    }

    medians = compute_medians(split["train"], var_specs)
    grids = {
        name: prepare_grids(part, var_specs, spec.max_steps)
        for name, part in split.items()
    }
    labels = {
        name: np.stack([g.labels for g in part]) for name, part in grids.items()
    }

    cfg = spec.train
    num_labels = labels["train"].shape[1]
    if spec.model == "lstm":
        data = {
            name: build_sequences(part, spec.input_variant, medians)
            for name, part in grids.items()
        }
        model = LstmModel(
            input_size=data["train"][0].inputs.shape[1],
            hidden_sizes=spec.lstm_hidden,
            num_labels=num_labels,
            alpha=cfg.alpha,
            seed=cfg.seed,
        )
    else:
        matrices = {}
        for name, part in grids.items():
            x, _ = build_feature_matrix(part, spec.input_variant, medians)
            matrices[name] = x
        data = {name: (matrices[name], labels[name]) for name in matrices}
        if spec.model == "mlp":
            model = MlpModel(
                input_size=data["train"][0].shape[1],
                hidden_sizes=spec.mlp_hidden,
                num_labels=num_labels,
                seed=cfg.seed,
            )
        else:
            model = LinearModel(
                input_size=data["train"][0].shape[1],
                num_labels=num_labels,
                l2_penalty=spec.l2_penalty,
                seed=cfg.seed,
            )
            cfg = replace(cfg, dropout=0.0, weight_decay=0.0)

    result = train(model, data["train"], data["val"], cfg)
    report = build_report(
        model.predict(data["val"]),
        labels["val"],
        model.predict(data["test"]),
        labels["test"],
    )

    if out_dir is not None:
        _write_artifacts(out_dir, spec, model, result, report, medians,
                         train_ids, val_ids, test_ids)
    return report, result, model


def compare(reports, names):
    """Aligned comparison rows over the five aggregate metrics.

    Rows are sorted by micro AUC, best first; undefined metrics render as
    "n/a" and sort below every defined value.
    """
    if len(reports) < 2:
        raise ConfigError("comparison needs at least two reports")
    rows = []
    for name, report in zip(names, reports):
        rows.append(
            {
                "name": name,
                "micro_auc": report.micro_auc,
                "macro_auc": report.macro_auc,
                "micro_f1": report.micro_f1,
                "macro_f1": report.macro_f1,
                "precision_at_10": report.precision_at_10,
            }
        )
    rows.sort(key=lambda r: _sort_key(r["micro_auc"]), reverse=True)
    return rows


def comparison_table(rows):
    """Render comparison rows as a fixed-width text table."""
    headers = ["model", "micro_auc", "macro_auc", "micro_f1", "macro_f1", "p@10"]
    keys = ["name", "micro_auc", "macro_auc", "micro_f1", "macro_f1",
            "precision_at_10"]
    cells = [headers]
    for row in rows:
        cells.append([row["name"]] + [_format_metric(row[k]) for k in keys[1:]])
    widths = [max(len(line[i]) for line in cells) for i in range(len(headers))]
    lines = []
    for line in cells:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)))
    return "\n".join(lines) + "\n"


def write_comparison_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["model", "micro_auc", "macro_auc", "micro_f1", "macro_f1",
             "precision_at_10"]
        )
        for row in rows:
            writer.writerow(
                [row["name"]]
                + [
                    _format_metric(row[k])
                    for k in ("micro_auc", "macro_auc", "micro_f1", "macro_f1",
                              "precision_at_10")
                ]
            )


def matrix_specs(models=("lstm", "logreg"), train_cfg=None, **overrides):
    """Every valid (model, input) pair for the requested model families."""
    specs = []
    for model in models:
        variants = SEQUENCE_INPUTS if model == "lstm" else INPUT_VARIANTS
        for variant in variants:
            specs.append(
                ExperimentSpec(
                    model=model,
                    input_variant=variant,
                    train=train_cfg if train_cfg is not None else TrainConfig(),
                    **overrides,
                )
            )
    return specs


def _write_artifacts(out_dir, spec, model, result, report, medians, train_ids,
                     val_ids, test_ids):
    import json
    import os

    from misseq.nn import save_checkpoint

    os.makedirs(out_dir, exist_ok=True)
    save_checkpoint(
        os.path.join(out_dir, "checkpoint.json"),
        model,
        extra={
            "experiment": spec.name,
            "model": spec.model,
            "input_variant": spec.input_variant,
            "seed": spec.train.seed,
            "max_steps": spec.max_steps,
            "medians": [float(m) for m in medians],
            "best_epoch": result.best_epoch,
            "best_val_loss": result.best_val_loss,
        },
    )
    with open(os.path.join(out_dir, "losses.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        writer.writerows(result.history)
    report.write(
        os.path.join(out_dir, "report.json"),
        os.path.join(out_dir, "per_label.csv"),
    )
    with open(os.path.join(out_dir, "split.json"), "w") as fh:
        json.dump(
            {"train": train_ids, "val": val_ids, "test": test_ids},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")


def _sort_key(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return -math.inf
    return value


def _format_metric(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    return f"{value:.4f}"
