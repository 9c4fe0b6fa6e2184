"""
Tests for the training loop, the plateau scheduler and checkpoints.
"""

from __future__ import annotations

import json

import pandas as pd
import pytest
import torch

from src.config import LossConfig, LossPreset, ModelConfig, TrainConfig
from src.data import make_split, synth_blobs
from src.data.types import DataError, DatasetSplit
from src.losses import LossBreakdown
from src.models import build_model
from src.training import (
    BEST_CHECKPOINT,
    CheckpointError,
    PlateauScheduler,
    PlateauState,
    TrainingDivergedError,
    load_checkpoint,
    save_checkpoint,
    scheduler_step,
    train,
)
from src.training.checkpoint import epoch_checkpoint_name


def tiny_train_config(**overrides) -> TrainConfig:
    defaults = dict(epochs=2, batch_size=4, seed=0, checkpoint_every=1)
    defaults.update(overrides)
    return TrainConfig(**defaults)


@pytest.fixture
def split(synth_samples) -> DatasetSplit:
    return make_split(synth_samples, 0.25, seed=0)


class TestScheduler:

    def test_five_stagnant_epochs_halve_lr(self):
        state = PlateauState(lr=1e-3)
        lrs = [scheduler_step(state, 0.5) for _ in range(6)]
        assert lrs[:5] == [1e-3] * 5
        assert lrs[5] == pytest.approx(5e-4)

    def test_improving_metric_keeps_lr(self):
        state = PlateauState(lr=1e-3)
        for i in range(20):
            assert scheduler_step(state, 0.1 + 0.01 * i) == 1e-3

    def test_sub_threshold_improvement_is_stagnation(self):
        state = PlateauState(lr=1e-3, patience=2)
        scheduler_step(state, 0.5)
        scheduler_step(state, 0.50005)
        assert scheduler_step(state, 0.50009) == pytest.approx(5e-4)

    def test_min_lr_floor(self):
        state = PlateauState(lr=2e-6, patience=1, min_lr=1e-6)
        scheduler_step(state, 0.5)
        for _ in range(5):
            scheduler_step(state, 0.1)
        assert state.lr == 1e-6

    def test_applies_to_param_groups(self):
        optimizer = torch.optim.Adam([torch.nn.Parameter(torch.zeros(1))], lr=1e-3)
        scheduler = PlateauScheduler(optimizer, PlateauState(lr=1e-3, patience=1))
        scheduler.step(0.5)
        scheduler.step(0.4)
        assert optimizer.param_groups[0]["lr"] == pytest.approx(5e-4) == scheduler.lr


class TestCheckpoint:

    def test_round_trip(self, tmp_path, tiny_model_config):
        model = build_model(tiny_model_config, seed=0).eval()
        path = save_checkpoint(tmp_path / "ckpt.bin", model, None, LossConfig(alpha=0.3, beta=0.7), 7, {"val_dice": 0.8})
        restored = load_checkpoint(path)
        assert restored.epoch == 7
        assert restored.metrics == {"val_dice": pytest.approx(0.8)}
        assert restored.loss_config.alpha == 0.3
        assert restored.model_config == tiny_model_config
        x = torch.rand(1, 32, 32, 1)
        with torch.no_grad():
            assert torch.equal(model(x), restored.model.eval()(x))

    def test_missing(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            load_checkpoint(tmp_path / "nope.bin")

    def test_corrupt(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"definitely not a checkpoint")
        with pytest.raises(CheckpointError, match="corrupt"):
            load_checkpoint(path)

    def test_version_mismatch(self, tmp_path, tiny_model_config):
        path = save_checkpoint(tmp_path / "c.bin", build_model(tiny_model_config, seed=0), None, LossConfig(), 1)
        payload = torch.load(path, weights_only=True)
        payload["format_version"] = 99
        torch.save(payload, path)
        with pytest.raises(CheckpointError, match="format version 99"):
            load_checkpoint(path)

    def test_config_mismatch_names_version_and_field(self, tmp_path, tiny_model_config):
        path = save_checkpoint(tmp_path / "c.bin", build_model(tiny_model_config, seed=0), None, LossConfig(), 1)
        with pytest.raises(CheckpointError, match="format version 1.*base_channels"):
            load_checkpoint(path, model_config=ModelConfig(base_channels=16))

    def test_epoch_names(self):
        assert epoch_checkpoint_name(10) == "ckpt_epoch10.bin"


class TestTrain:

    def test_history_and_artifacts(self, tmp_path, split, tiny_model_config):
        model = build_model(tiny_model_config, seed=0)
        _, history = train(model, split, tiny_train_config(), out_dir=tmp_path)
        assert [r.epoch for r in history.records] == [1, 2]
        assert all(r.val_dice is not None for r in history.records)
        assert history.best_epoch in (1, 2)

        frame = pd.read_csv(tmp_path / "history.csv")
        assert list(frame.columns[:6]) == ["epoch", "loss", "wbce", "dice", "hinge", "boundary"]
        assert len(frame) == 2
        assert len(json.loads((tmp_path / "history.json").read_text())["epochs"]) == 2
        assert (tmp_path / epoch_checkpoint_name(1)).is_file()
        assert (tmp_path / epoch_checkpoint_name(2)).is_file()
        assert load_checkpoint(tmp_path / BEST_CHECKPOINT).epoch == history.best_epoch

    def test_record_total_matches_bi_h_breakdown(self, split, tiny_model_config):
        config = tiny_train_config(epochs=1, loss=LossConfig(alpha=0.25, beta=0.75))
        _, history = train(build_model(tiny_model_config, seed=0), split, config)
        r = history.records[0]
        assert r.loss == pytest.approx(0.25 * (r.wbce + r.dice) + 0.75 * (r.hinge + r.boundary), rel=1e-5)

    def test_same_seed_same_first_epoch(self, split):
        config = ModelConfig(base_channels=8, norm="none")
        losses = []
        for _ in range(2):
            _, history = train(build_model(config, seed=0), split, tiny_train_config(epochs=1))
            losses.append(history.records[0].loss)
        assert losses[0] == losses[1]

    def test_learning_rate_non_increasing(self, split, tiny_model_config):
        config = tiny_train_config(epochs=4, scheduler_patience=1)
        _, history = train(build_model(tiny_model_config, seed=0), split, config)
        lrs = history.learning_rates
        assert all(b <= a for a, b in zip(lrs, lrs[1:]))

    @pytest.mark.slow
    def test_loss_decreases_over_ten_epochs(self, tiny_model_config):
        split = make_split(synth_blobs(40, 32, seed=7), 0.2, seed=0)
        config = tiny_train_config(epochs=10, batch_size=8, checkpoint_every=10)
        _, history = train(build_model(tiny_model_config, seed=0), split, config)
        assert history.records[9].loss < history.records[0].loss

    @pytest.mark.parametrize("preset", list(LossPreset))
    def test_every_preset_trains(self, split, tiny_model_config, preset):
        _, history = train(
            build_model(tiny_model_config, seed=0), split, tiny_train_config(epochs=1, loss_preset=preset)
        )
        assert len(history.records) == 1

    def test_sgd_optimizer(self, split, tiny_model_config):
        _, history = train(build_model(tiny_model_config, seed=0), split, tiny_train_config(epochs=1, optimizer="sgd"))
        assert history.records[0].lr == 1e-3

    def test_empty_train_set(self, synth_samples, tiny_model_config):
        empty = DatasetSplit(train=[], test=synth_samples[:2], seed=0)
        with pytest.raises(DataError):
            train(build_model(tiny_model_config, seed=0), empty, tiny_train_config())

    def test_divergence_reports_batch(self, monkeypatch, split, tiny_model_config):
        def exploding(pred, target, sdm, preset, config):
            nan = (pred.sum() * float("nan"))
            return nan, LossBreakdown(0.0, 0.0, 0.0, 0.0, float("nan"))

        monkeypatch.setattr("src.training.trainer.composite_loss", exploding)
        with pytest.raises(TrainingDivergedError) as exc:
            train(build_model(tiny_model_config, seed=0), split, tiny_train_config())
        assert exc.value.epoch == 1
        assert exc.value.batch_index == 0
        assert "batch index 0" in str(exc.value)
