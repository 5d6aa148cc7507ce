import csv
import json

import pytest

from misseq.cli import main


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    code = main([
        "synth", "--out", str(out), "--episodes", "60", "--labels", "12",
        "--beta", "2.0", "--min-hours", "6", "--max-hours", "20",
        "--seed", "3",
    ])
    assert code == 0
    return out


def _data_args(synth_dir):
    return [
        "--data", str(synth_dir / "episodes.jsonl"),
        "--vars", str(synth_dir / "variables.csv"),
    ]


class TestSynthCommand:
    def test_outputs_exist(self, synth_dir):
        assert (synth_dir / "episodes.jsonl").exists()
        assert (synth_dir / "variables.csv").exists()
        lines = (synth_dir / "episodes.jsonl").read_text().splitlines()
        assert len(lines) == 60
        record = json.loads(lines[0])
        assert set(record) == {"id", "obs", "labels"}

    def test_same_seed_identical_bytes(self, synth_dir, tmp_path):
        code = main([
            "synth", "--out", str(tmp_path), "--episodes", "60",
            "--labels", "12", "--beta", "2.0", "--min-hours", "6",
            "--max-hours", "20", "--seed", "3",
        ])
        assert code == 0
        assert (
            (tmp_path / "episodes.jsonl").read_bytes()
            == (synth_dir / "episodes.jsonl").read_bytes()
        )

    def test_bad_beta_is_config_error(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path), "--beta", "-1"]) == 2


class TestFeaturizeCommand:
    def test_raw_with_indicators_width(self, synth_dir, tmp_path):
        code = main([
            "featurize", *_data_args(synth_dir), "--out", str(tmp_path),
            "--mode", "raw", "--impute", "zero", "--indicators", "on",
        ])
        assert code == 0
        with open(tmp_path / "features.csv") as fh:
            header = next(csv.reader(fh))
        assert len(header) == 1 + 936
        assert header[0] == "episode_id"

    def test_he_missingness_width(self, synth_dir, tmp_path):
        code = main([
            "featurize", *_data_args(synth_dir), "--out", str(tmp_path),
            "--mode", "he", "--he-blocks", "missingness",
        ])
        assert code == 0
        with open(tmp_path / "features.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows[0]) == 1 + 416
        assert len(rows) == 1 + 60
        labels = (tmp_path / "labels.csv").read_text().splitlines()
        assert labels[0].startswith("episode_id,label_000")

    def test_indicators_only_flag(self, synth_dir, tmp_path):
        code = main([
            "featurize", *_data_args(synth_dir), "--out", str(tmp_path),
            "--mode", "raw", "--indicators", "only",
        ])
        assert code == 0
        with open(tmp_path / "features.csv") as fh:
            header = next(csv.reader(fh))
            first = next(csv.reader(fh))
        value_columns = [
            i for i, name in enumerate(header) if "/x" in name
        ]
        assert all(float(first[i]) == 0.0 for i in value_columns)

    def test_missing_required_flag(self, synth_dir, tmp_path):
        assert main(["featurize", "--out", str(tmp_path)]) == 2


@pytest.fixture(scope="module")
def trained(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main([
        "train", *_data_args(synth_dir), "--out", str(out),
        "--model", "logreg", "--input", "he_indicators",
        "--epochs", "5", "--lr", "0.5", "--dropout", "0.0",
        "--seed", "3",
    ])
    assert code == 0
    return out


class TestTrainEvaluateCommands:
    def test_artifacts(self, trained):
        for name in ("checkpoint.json", "losses.csv", "report.json",
                     "per_label.csv", "split.json"):
            assert (trained / name).exists()
        report = json.loads((trained / "report.json").read_text())
        assert 0.0 <= report["micro_auc"] <= 1.0

    def test_evaluate_reproduces_training_report(self, synth_dir, trained,
                                                 tmp_path):
        code = main([
            "evaluate", "--checkpoint", str(trained / "checkpoint.json"),
            *_data_args(synth_dir), "--out", str(tmp_path),
        ])
        assert code == 0
        trained_report = (trained / "report.json").read_text()
        fresh_report = (tmp_path / "report.json").read_text()
        assert trained_report == fresh_report

    def test_inconsistent_spec_fails_before_work(self, synth_dir, tmp_path):
        code = main([
            "train", *_data_args(synth_dir), "--out", str(tmp_path),
            "--model", "lstm", "--input", "he_both", "--epochs", "1",
        ])
        assert code == 2
        assert not (tmp_path / "checkpoint.json").exists()

    def test_config_file_supplies_defaults(self, synth_dir, tmp_path):
        config = tmp_path / "train.json"
        config.write_text(json.dumps({
            "model": "logreg",
            "input_variant": "he_measurement",
            "epochs": 2,
            "dropout": 0.0,
            "out": str(tmp_path / "run"),
        }))
        code = main([
            "train", "--config", str(config), *_data_args(synth_dir),
            "--epochs", "3",
        ])
        assert code == 0
        losses = (tmp_path / "run" / "losses.csv").read_text().splitlines()
        assert len(losses) == 1 + 3 + 1  # header + epochs 0..3

    def test_unknown_config_key_rejected(self, synth_dir, tmp_path):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"learning_rate": 0.1}))
        code = main([
            "train", "--config", str(config), *_data_args(synth_dir),
            "--out", str(tmp_path / "x"),
        ])
        assert code == 2


class TestGradcheckCommand:
    def test_passes_on_default_model(self, capsys):
        assert main(["gradcheck", "--hidden", "3,3", "--steps", "4"]) == 0
        out = capsys.readouterr().out
        assert "max relative error" in out

    def test_tight_tolerance_fails_numerically(self):
        assert main(["gradcheck", "--hidden", "2", "--steps", "2",
                     "--tolerance", "1e-18"]) == 3


class TestMatrixCommand:
    def test_logreg_matrix(self, synth_dir, tmp_path):
        code = main([
            "matrix", *_data_args(synth_dir), "--out", str(tmp_path),
            "--models", "logreg", "--epochs", "2", "--dropout", "0.0",
            "--seed", "3",
        ])
        assert code == 0
        with open(tmp_path / "comparison.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 8  # five raw variants + three hand-engineered
        assert (tmp_path / "comparison.txt").exists()
        assert (tmp_path / "logreg-he_both" / "report.json").exists()

    def test_unknown_model_rejected(self, synth_dir, tmp_path):
        code = main([
            "matrix", *_data_args(synth_dir), "--out", str(tmp_path),
            "--models", "tree",
        ])
        assert code == 2
