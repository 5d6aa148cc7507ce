"""Evaluation suite: ranking AUC, thresholded F1, and precision at 10.

AUC is the probability that a random positive outranks a random negative
(rank-sum formulation, ties counted half).  Micro averages pool every
(episode, label) prediction into one ranking; macro averages per-label
scores, skipping labels whose test split contains a single class.  F1
thresholds are chosen per label on the validation split.
"""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from misseq.errors import ConfigError

TOP_N = 10


@dataclass
class EvalReport:
    """Aggregate metrics plus the per-label breakdown."""

    micro_auc: float
    macro_auc: float
    micro_f1: float
    macro_f1: float
    precision_at_10: float | None
    per_label: list  # dicts: label, base_rate, auc, f1, threshold

    def to_dict(self):
        return {
            "micro_auc": _none_if_nan(self.micro_auc),
            "macro_auc": _none_if_nan(self.macro_auc),
            "micro_f1": _none_if_nan(self.micro_f1),
            "macro_f1": _none_if_nan(self.macro_f1),
            "precision_at_10": _none_if_nan(self.precision_at_10),
            "per_label": [
                {key: _none_if_nan(value) for key, value in row.items()}
                for row in self.per_label
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, json_path, per_label_csv_path=None):
        with open(json_path, "w") as fh:
            fh.write(self.to_json())
        if per_label_csv_path is not None:
            with open(per_label_csv_path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["condition", "base_rate", "auc", "f1", "threshold"])
                for row in self.per_label:
                    writer.writerow(
                        [
                            row["label"],
                            _csv_cell(row["base_rate"]),
                            _csv_cell(row["auc"]),
                            _csv_cell(row["f1"]),
                            _csv_cell(row["threshold"]),
                        ]
                    )


def roc_auc(scores, labels):
    """Rank-based AUC with average ranks for ties; NaN if one class only."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    positive = labels == 1
    num_pos = int(positive.sum())
    num_neg = labels.size - num_pos
    if num_pos == 0 or num_neg == 0:
        return math.nan
    ranks = _average_ranks(scores)
    u = ranks[positive].sum() - num_pos * (num_pos + 1) / 2.0
    return float(u / (num_pos * num_neg))


def micro_macro_auc(scores, labels):
    """(micro, macro) AUC for N x K score and label matrices.

    Micro ranks all N*K predictions together; macro averages the defined
    per-label AUCs.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    micro = roc_auc(scores.ravel(), labels.ravel())
    per_label = [roc_auc(scores[:, k], labels[:, k]) for k in range(scores.shape[1])]
    defined = [a for a in per_label if not math.isnan(a)]
    macro = float(np.mean(defined)) if defined else math.nan
    return micro, macro


def select_thresholds(val_scores, val_labels):
    """Per-label decision thresholds maximizing validation F1.

    A prediction is positive when score >= threshold.  Candidates are the
    lowest observed score (so the all-positive rule stays reachable) plus
    the midpoints between consecutive sorted unique scores; ties in F1 go
    to the lower threshold.  Labels without validation positives fall back
    to 0.5.
    """
    val_scores = np.asarray(val_scores, dtype=np.float64)
    val_labels = np.asarray(val_labels)
    if val_scores.size == 0:
        raise ConfigError("threshold selection needs a nonempty validation set")
    thresholds = np.empty(val_scores.shape[1])
    for k in range(val_scores.shape[1]):
        scores = val_scores[:, k]
        labels = val_labels[:, k]
        if labels.sum() == 0:
            thresholds[k] = 0.5
            continue
        best_threshold, best_f1 = 0.5, -1.0
        for cand in _threshold_candidates(scores):
            f1 = _binary_f1(scores >= cand, labels)
            if f1 > best_f1:
                best_f1, best_threshold = f1, cand
        thresholds[k] = best_threshold
    return thresholds


def f1_scores(scores, labels, thresholds):
    """(micro_f1, macro_f1, per-label f1) at fixed per-label thresholds.

    Micro pools true/false positives and false negatives across labels;
    macro averages per-label F1, scoring 0 where precision + recall is 0.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    predicted = scores >= np.asarray(thresholds)[None, :]
    actual = labels == 1
    tp = (predicted & actual).sum(axis=0).astype(np.float64)
    fp = (predicted & ~actual).sum(axis=0).astype(np.float64)
    fn = (~predicted & actual).sum(axis=0).astype(np.float64)

    micro_denom = 2.0 * tp.sum() + fp.sum() + fn.sum()
    micro = float(2.0 * tp.sum() / micro_denom) if micro_denom > 0 else 0.0
    denom = 2.0 * tp + fp + fn
    per_label = np.divide(2.0 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    return micro, float(per_label.mean()), per_label


def precision_at_10(scores, labels):
    """Fraction of each episode's ten top-scored labels that are true.

    Ties are broken toward the lower label index; the result is averaged
    over episodes.  Needs at least 10 labels.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape[1] < TOP_N:
        raise ConfigError(
            f"precision at {TOP_N} needs >= {TOP_N} labels, got {scores.shape[1]}"
        )
    hits = 0.0
    for row_scores, row_labels in zip(scores, labels):
        top = np.argsort(-row_scores, kind="stable")[:TOP_N]
        hits += row_labels[top].sum() / TOP_N
    return float(hits / scores.shape[0])


def build_report(val_scores, val_labels, test_scores, test_labels,
                 label_names=None):
    """Assemble the full evaluation report from validation and test scores."""
    test_scores = np.asarray(test_scores, dtype=np.float64)
    test_labels = np.asarray(test_labels)
    num_labels = test_scores.shape[1]
    if label_names is None:
        label_names = [f"label_{k:03d}" for k in range(num_labels)]
    thresholds = select_thresholds(val_scores, val_labels)
    micro_auc, macro_auc = micro_macro_auc(test_scores, test_labels)
    micro_f1, macro_f1, per_label_f1 = f1_scores(test_scores, test_labels, thresholds)
    p10 = (
        precision_at_10(test_scores, test_labels)
        if num_labels >= TOP_N
        else None
    )
    per_label = []
    for k in range(num_labels):
        per_label.append(
            {
                "label": label_names[k],
                "base_rate": float(test_labels[:, k].mean()),
                "auc": roc_auc(test_scores[:, k], test_labels[:, k]),
                "f1": float(per_label_f1[k]),
                "threshold": float(thresholds[k]),
            }
        )
    return EvalReport(micro_auc, macro_auc, micro_f1, macro_f1, p10, per_label)


def _average_ranks(values):
    # 1-based ranks; tied values share the mean of their rank block
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    boundaries = np.concatenate(([0], np.cumsum(counts)))
    block_mean = boundaries[:-1] + (counts + 1) / 2.0
    return block_mean[inverse]


def _threshold_candidates(scores):
    unique = np.unique(scores)
    if unique.size == 1:
        return unique
    return np.concatenate(([unique[0]], (unique[:-1] + unique[1:]) / 2.0))


def _binary_f1(predicted, labels):
    actual = labels == 1
    tp = float((predicted & actual).sum())
    fp = float((predicted & ~actual).sum())
    fn = float((~predicted & actual).sum())
    denom = 2.0 * tp + fp + fn
    return 2.0 * tp / denom if denom > 0 else 0.0


def _none_if_nan(value):
    if value is None:
        return None
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _csv_cell(value):
    cleaned = _none_if_nan(value)
    return "n/a" if cleaned is None else cleaned
