import json
import math

import numpy as np
import numpy.testing as npt
import pytest

from misseq.errors import ConfigError
from misseq.metrics import (
    EvalReport,
    build_report,
    f1_scores,
    micro_macro_auc,
    precision_at_10,
    roc_auc,
    select_thresholds,
)


def _pairwise_auc(scores, labels):
    """O(n^2) oracle: count positive/negative pairs, ties worth half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    if not pos or not neg:
        return math.nan
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def _exhaustive_best_f1(scores, labels):
    """Oracle: best F1 over every achievable thresholding of the scores."""
    best = 0.0
    for threshold in np.unique(scores):
        predicted = scores >= threshold
        tp = float((predicted & (labels == 1)).sum())
        fp = float((predicted & (labels == 0)).sum())
        fn = float((~predicted & (labels == 1)).sum())
        denom = 2 * tp + fp + fn
        if denom > 0:
            best = max(best, 2 * tp / denom)
    return best


class TestRocAuc:
    def test_perfect_ranking(self):
        assert roc_auc([0.9, 0.1], [1, 0]) == 1.0

    def test_constant_scores_give_half(self):
        assert roc_auc([0.3, 0.3, 0.3, 0.3], [1, 0, 1, 0]) == 0.5

    def test_three_point_example_matches_oracle(self):
        scores, labels = [0.8, 0.5, 0.3], [1, 0, 1]
        assert roc_auc(scores, labels) == _pairwise_auc(scores, labels)
        assert roc_auc(scores, labels) == 0.5

    def test_single_class_undefined(self):
        assert math.isnan(roc_auc([0.1, 0.9], [1, 1]))
        assert math.isnan(roc_auc([0.1, 0.9], [0, 0]))

    def test_matches_pairwise_oracle_on_random_instances(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(2, 201))
            # quantized scores force plenty of ties
            scores = np.round(rng.random(n), 2)
            labels = (rng.random(n) < 0.4).astype(int)
            if labels.sum() in (0, n):
                labels[0] = 1 - labels[0]
            fast = roc_auc(scores, labels)
            slow = _pairwise_auc(scores, labels)
            assert fast == pytest.approx(slow, abs=1e-12)

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(23)
        scores = rng.random(50)
        labels = (rng.random(50) < 0.5).astype(int)
        base = roc_auc(scores, labels)
        assert roc_auc(np.exp(3 * scores), labels) == pytest.approx(base)
        assert roc_auc(scores ** 3 + 7, labels) == pytest.approx(base)

    def test_negated_scores_complement_without_ties(self):
        rng = np.random.default_rng(29)
        scores = rng.permutation(60) / 60.0  # distinct
        labels = (rng.random(60) < 0.5).astype(int)
        a = roc_auc(scores, labels)
        b = roc_auc(-scores, labels)
        assert a + b == pytest.approx(1.0, abs=1e-12)


class TestMicroMacro:
    def test_single_label_degenerate(self):
        scores = np.array([[0.9], [0.2], [0.7]])
        labels = np.array([[1], [0], [1]])
        micro, macro = micro_macro_auc(scores, labels)
        assert micro == macro == roc_auc(scores[:, 0], labels[:, 0])

    def test_constant_scorer_macro_half(self):
        rng = np.random.default_rng(31)
        labels = (rng.random((40, 6)) < 0.3).astype(int)
        labels[0] = 1  # ensure every label has a positive
        labels[1] = 0
        scores = np.full((40, 6), 0.25)
        _, macro = micro_macro_auc(scores, labels)
        assert macro == 0.5

    def test_matches_bruteforce_on_random_matrix(self):
        rng = np.random.default_rng(37)
        scores = np.round(rng.random((6, 2)), 1)
        labels = np.array([[1, 0], [0, 1], [1, 1], [0, 0], [1, 0], [0, 1]])
        micro, macro = micro_macro_auc(scores, labels)
        assert micro == pytest.approx(
            _pairwise_auc(scores.ravel(), labels.ravel()), abs=1e-12
        )
        expected_macro = np.mean(
            [_pairwise_auc(scores[:, k], labels[:, k]) for k in range(2)]
        )
        assert macro == pytest.approx(expected_macro, abs=1e-12)

    def test_undefined_labels_excluded_from_macro(self):
        scores = np.array([[0.9, 0.4], [0.2, 0.6]])
        labels = np.array([[1, 1], [0, 1]])  # second label single-class
        _, macro = micro_macro_auc(scores, labels)
        assert macro == roc_auc(scores[:, 0], labels[:, 0])


class TestThresholds:
    def test_separable_pair_picks_midpoint(self):
        thresholds = select_thresholds(np.array([[0.2], [0.8]]),
                                       np.array([[0], [1]]))
        assert thresholds[0] == 0.5
        micro, _, _ = f1_scores(np.array([[0.2], [0.8]]),
                                np.array([[0], [1]]), thresholds)
        assert micro == 1.0

    def test_no_positives_falls_back(self):
        thresholds = select_thresholds(np.array([[0.2], [0.8]]),
                                       np.array([[0], [0]]))
        assert thresholds[0] == 0.5

    def test_all_positive_rule_reachable(self):
        scores = np.array([[0.2], [0.8]])
        labels = np.array([[1], [1]])
        thresholds = select_thresholds(scores, labels)
        _, _, per_label = f1_scores(scores, labels, thresholds)
        assert per_label[0] == 1.0

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            scores = np.round(rng.random((20, 1)), 2)
            labels = (rng.random((20, 1)) < 0.4).astype(int)
            if labels.sum() == 0:
                labels[0, 0] = 1
            thresholds = select_thresholds(scores, labels)
            _, _, per_label = f1_scores(scores, labels, thresholds)
            oracle = _exhaustive_best_f1(scores[:, 0], labels[:, 0])
            assert per_label[0] == pytest.approx(oracle, abs=1e-12)

    def test_ties_resolve_to_lower_threshold(self):
        # both candidate thresholds achieve F1 = 1 on this degenerate input
        scores = np.array([[0.4], [0.4]])
        labels = np.array([[1], [1]])
        assert select_thresholds(scores, labels)[0] == 0.4

    def test_empty_validation_rejected(self):
        with pytest.raises(ConfigError):
            select_thresholds(np.empty((0, 1)), np.empty((0, 1)))


class TestF1:
    def test_perfect_predictions(self):
        scores = np.array([[0.9, 0.1], [0.2, 0.8]])
        labels = np.array([[1, 0], [0, 1]])
        micro, macro, _ = f1_scores(scores, labels, np.array([0.5, 0.5]))
        assert micro == macro == 1.0

    def test_no_predicted_positives(self):
        scores = np.zeros((3, 2))
        labels = np.array([[1, 0], [0, 1], [1, 1]])
        micro, macro, _ = f1_scores(scores, labels, np.array([0.5, 0.5]))
        assert micro == macro == 0.0

    def test_pooled_counts_hand_example(self):
        # per-label confusion: TPs (1, 2, 0), FPs (1, 0, 1), FNs (0, 1, 1)
        # micro F1 = 2 * 3 / (2 * 3 + 2 + 2) = 0.6
        scores = np.array([
            [0.9, 0.9, 0.9],
            [0.9, 0.9, 0.1],
            [0.1, 0.1, 0.1],
        ])
        labels = np.array([
            [1, 1, 0],
            [0, 1, 1],
            [0, 1, 0],
        ])
        thresholds = np.array([0.5, 0.5, 0.5])
        micro, macro, per_label = f1_scores(scores, labels, thresholds)
        assert micro == pytest.approx(0.6)
        assert per_label[0] == pytest.approx(2 / 3)
        assert per_label[1] == pytest.approx(0.8)
        assert per_label[2] == 0.0


class TestPrecisionAtTen:
    def test_two_true_labels_in_top_ten(self):
        scores = np.linspace(1.0, 0.0, 12)[None, :]
        labels = np.zeros((1, 12))
        labels[0, [0, 3]] = 1
        assert precision_at_10(scores, labels) == pytest.approx(0.2)

    def test_no_true_labels_in_top_ten(self):
        scores = np.linspace(1.0, 0.0, 12)[None, :]
        labels = np.zeros((1, 12))
        labels[0, 11] = 1
        assert precision_at_10(scores, labels) == 0.0

    def test_needs_ten_labels(self):
        with pytest.raises(ConfigError):
            precision_at_10(np.zeros((1, 4)), np.zeros((1, 4)))

    def test_ties_break_by_label_index(self):
        scores = np.zeros((1, 12))
        labels = np.zeros((1, 12))
        labels[0, 10] = 1  # tied score but index outside the first ten
        assert precision_at_10(scores, labels) == 0.0
        labels = np.zeros((1, 12))
        labels[0, 3] = 1
        assert precision_at_10(scores, labels) == pytest.approx(0.1)

    def test_oracle_scorer_attains_maximum(self):
        rng = np.random.default_rng(43)
        labels = (rng.random((30, 15)) < 0.4).astype(float)
        scores = labels.copy()  # oracle scorer ranks true labels first
        expected = np.mean([min(10.0, row.sum()) / 10.0 for row in labels])
        assert precision_at_10(scores, labels) == pytest.approx(expected)


class TestReport:
    def _toy_report(self):
        rng = np.random.default_rng(47)
        val_scores = rng.random((30, 12))
        val_labels = (rng.random((30, 12)) < 0.3).astype(int)
        test_scores = rng.random((20, 12))
        test_labels = (rng.random((20, 12)) < 0.3).astype(int)
        return build_report(val_scores, val_labels, test_scores, test_labels)

    def test_aggregates_in_unit_interval(self):
        report = self._toy_report()
        for value in (report.micro_auc, report.macro_auc, report.micro_f1,
                      report.macro_f1, report.precision_at_10):
            assert 0.0 <= value <= 1.0
        assert len(report.per_label) == 12

    def test_json_is_deterministic_and_nan_free(self):
        report = self._toy_report()
        text = report.to_json()
        assert text == self._toy_report().to_json()
        parsed = json.loads(text)  # would fail on bare NaN tokens
        assert set(parsed) == {
            "micro_auc", "macro_auc", "micro_f1", "macro_f1",
            "precision_at_10", "per_label",
        }

    def test_undefined_per_label_auc_serializes_as_null(self):
        report = EvalReport(0.5, math.nan, 0.1, 0.1, None, [
            {"label": "l", "base_rate": 0.0, "auc": math.nan, "f1": 0.0,
             "threshold": 0.5},
        ])
        parsed = json.loads(report.to_json())
        assert parsed["macro_auc"] is None
        assert parsed["per_label"][0]["auc"] is None

    def test_csv_renders_undefined_as_na(self, tmp_path):
        report = EvalReport(0.5, math.nan, 0.1, 0.1, None, [
            {"label": "l", "base_rate": 0.0, "auc": math.nan, "f1": 0.0,
             "threshold": 0.5},
        ])
        json_path = tmp_path / "r.json"
        csv_path = tmp_path / "r.csv"
        report.write(json_path, csv_path)
        text = csv_path.read_text()
        assert "n/a" in text
        assert text.splitlines()[0] == "condition,base_rate,auc,f1,threshold"

    def test_small_label_count_skips_precision(self):
        rng = np.random.default_rng(53)
        val = rng.random((20, 3))
        vl = (rng.random((20, 3)) < 0.5).astype(int)
        report = build_report(val, vl, rng.random((10, 3)),
                              (rng.random((10, 3)) < 0.5).astype(int))
        assert report.precision_at_10 is None
