"""
Tests for the hunet command line.
"""

from __future__ import annotations

import json

import cv2
import numpy as np
import pytest
import torch

from cli.main import build_overrides, build_parser, main


@pytest.fixture(autouse=True)
def restore_nondeterministic_kernels():
    yield
    torch.use_deterministic_algorithms(False)


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    """A two-epoch run on 24 synthetic 32x32 slices."""
    out = tmp_path_factory.mktemp("run")
    code = main([
        "train", "--data", "synth://24x32", "--epochs", "2", "--batch-size", "8",
        "--base-channels", "8", "--seed", "1", "--out", str(out),
    ])
    assert code == 0
    return out


class TestOverrides:

    def parse(self, *argv):
        return build_overrides(build_parser().parse_args(["train", *argv]))

    def test_alpha_implies_beta(self):
        assert self.parse("--alpha", "0.3")["train"]["loss"] == {"alpha": 0.3, "beta": pytest.approx(0.7)}

    def test_beta_implies_alpha(self):
        assert self.parse("--beta", "0.25")["train"]["loss"] == {"beta": 0.25, "alpha": 0.75}

    def test_nested_sections(self):
        overrides = self.parse("--data", "synth://8x32", "--no-attention", "--threshold", "0.3", "--out", "x")
        assert overrides == {
            "output_dir": "x",
            "model": {"attention": False},
            "data": {"source": "synth://8x32"},
            "train": {"eval_threshold": 0.3},
        }

    def test_unset_flags_are_left_out(self):
        assert self.parse() == {}


class TestUsageErrors:

    def test_alpha_beta_must_sum_to_one(self, tmp_path, capsys):
        code = main(["train", "--alpha", "0.7", "--beta", "0.4", "--out", str(tmp_path)])
        assert code == 1
        assert "alpha + beta" in capsys.readouterr().err

    def test_threshold_out_of_range(self, tmp_path):
        assert main(["eval", "--checkpoint", str(tmp_path / "c.bin"), "--threshold", "1.5"]) == 1

    def test_missing_checkpoint(self, tmp_path, capsys):
        code = main(["eval", "--checkpoint", str(tmp_path / "missing.bin"), "--data", "synth://8x32", "--out", str(tmp_path)])
        assert code == 1
        assert "checkpoint not found" in capsys.readouterr().err

    def test_unknown_command(self):
        assert main(["fly"]) == 1

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_missing_config_file(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path)]) == 1

    def test_indivisible_image_size(self, tmp_path, png_dataset):
        config = tmp_path / "run.toml"
        config.write_text('[data]\nimage_size = 40\n', encoding="utf-8")
        assert main(["train", "--config", str(config), "--data", str(png_dataset), "--out", str(tmp_path)]) == 1


class TestSynth:

    def test_writes_pairs(self, tmp_path):
        assert main(["synth", "--count", "50", "--size", "64", "--seed", "7", "--out", str(tmp_path)]) == 0
        assert len(list(tmp_path.rglob("*.png"))) == 100

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            main(["synth", "--count", "3", "--size", "32", "--out", str(tmp_path / name)])
        for path in sorted((tmp_path / "a").rglob("*.png")):
            twin = tmp_path / "b" / path.relative_to(tmp_path / "a")
            assert path.read_bytes() == twin.read_bytes()

    def test_too_small(self, tmp_path):
        assert main(["synth", "--count", "3", "--size", "8", "--out", str(tmp_path)]) == 1


class TestTrainEvalPredict:

    def test_train_artifacts(self, trained_run):
        assert (trained_run / "config.resolved.toml").is_file()
        assert "epochs = 2" in (trained_run / "config.resolved.toml").read_text()
        history = json.loads((trained_run / "history.json").read_text())
        assert len(history["epochs"]) == 2
        metrics = json.loads((trained_run / "metrics.json").read_text())
        assert 0.0 <= metrics["aggregate"]["dice"] <= 1.0
        assert "Dice | Sensitivity | Specificity" in (trained_run / "metrics.txt").read_text()
        split = json.loads((trained_run / "split.json").read_text())
        assert split["test_samples"] == 5

    def test_eval_matches_train_test_subset(self, trained_run, tmp_path):
        final = trained_run / "ckpt_epoch2.bin"
        code = main([
            "eval", "--checkpoint", str(final), "--data", "synth://24x32", "--base-channels", "8",
            "--seed", "1", "--out", str(tmp_path),
        ])
        assert code == 0
        evaluated = json.loads((tmp_path / "metrics.json").read_text())
        trained = json.loads((trained_run / "metrics.json").read_text())
        assert evaluated["counts"] == trained["counts"]
        assert evaluated["epoch"] == 2

    def test_eval_rejects_a_model_that_differs_from_the_checkpoint(self, trained_run, tmp_path, capsys):
        code = main([
            "eval", "--checkpoint", str(trained_run / "ckpt_best.bin"), "--data", "synth://24x32",
            "--base-channels", "16", "--out", str(tmp_path),
        ])
        assert code == 1
        assert "base_channels" in capsys.readouterr().err

    def test_eval_snapshot_records_the_checkpoint_model(self, trained_run, tmp_path):
        code = main([
            "eval", "--checkpoint", str(trained_run / "ckpt_best.bin"), "--data", "synth://24x32",
            "--seed", "1", "--out", str(tmp_path),
        ])
        assert code == 0
        assert "base_channels = 8" in (tmp_path / "config.resolved.toml").read_text()

    def test_predict_writes_masks_and_probabilities(self, trained_run, tmp_path):
        slices = tmp_path / "slices"
        main(["synth", "--count", "4", "--size", "32", "--seed", "3", "--out", str(slices)])
        out = tmp_path / "pred"
        code = main([
            "predict", "--checkpoint", str(trained_run / "ckpt_best.bin"),
            "--images", str(slices / "images"), "--out", str(out),
        ])
        assert code == 0
        masks = sorted((out / "masks").glob("*.png"))
        probs = sorted((out / "probs").glob("*.png"))
        assert len(masks) + len(probs) == 8
        for path in masks:
            assert set(np.unique(cv2.imread(str(path), cv2.IMREAD_UNCHANGED))) <= {0, 255}
        assert cv2.imread(str(probs[0]), cv2.IMREAD_UNCHANGED).dtype == np.uint16

        again = tmp_path / "pred_again"
        main([
            "predict", "--checkpoint", str(trained_run / "ckpt_best.bin"),
            "--images", str(slices / "images"), "--out", str(again),
        ])
        for path in masks + probs:
            assert (again / path.parent.name / path.name).read_bytes() == path.read_bytes()

    def test_predict_unreadable_image(self, trained_run, tmp_path, capsys):
        bad = tmp_path / "bad.png"
        bad.write_text("not an image")
        code = main([
            "predict", "--checkpoint", str(trained_run / "ckpt_best.bin"),
            "--images", str(bad), "--out", str(tmp_path / "pred"),
        ])
        assert code == 1
        assert "bad.png" in capsys.readouterr().err


class TestCheck:

    def test_metrics_scope(self, tmp_path, capsys):
        report = tmp_path / "checks.json"
        assert main(["check", "metrics", "--report", str(report)]) == 0
        assert "✅" in capsys.readouterr().out
        assert json.loads(report.read_text())["all_passed"] is True

    def test_losses_scope(self):
        assert main(["check", "losses"]) == 0
