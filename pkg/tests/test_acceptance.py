"""
End-to-end training runs on synthetic data.

Slow: run with `pytest -m slow`.
"""

from __future__ import annotations

import json

import pytest

from evals.ablation import PRESET_LABELS, run_ablation
from src.config import DataConfig, LossConfig, ModelConfig, RunConfig, TrainConfig
from src.data import prepare_split, synth_blobs
from src.data.types import DatasetSplit
from src.metrics import evaluate
from src.models import build_model
from src.training import train
from src.training.trainer import with_distance_maps

pytestmark = pytest.mark.slow


def test_single_sample_overfit():
    sample = with_distance_maps(synth_blobs(1, 64, seed=0))
    split = DatasetSplit(train=sample, test=sample, seed=0)
    config = TrainConfig(epochs=200, batch_size=1, augment_hflip=False, scheduler="none", seed=0)
    model, _ = train(build_model(ModelConfig(base_channels=16), seed=0), split, config)
    assert evaluate(model, sample).aggregate.dice > 0.95


def test_synthetic_desk_run():
    split = prepare_split(DataConfig(source="synth://200x64", synth_seed=7), seed=0)
    assert (len(split.train), len(split.test)) == (160, 40)
    config = TrainConfig(epochs=20, batch_size=8, seed=0, loss=LossConfig(alpha=0.5, beta=0.5))
    model, history = train(build_model(ModelConfig(base_channels=32), seed=0), split, config)
    assert len(history.records) == 20
    report = evaluate(model, split.test)
    assert report.aggregate.dice >= 0.90
    assert report.aggregate.specificity >= 0.99


def test_ablation_table_structure(tmp_path):
    config = RunConfig(
        model=ModelConfig(base_channels=8),
        data=DataConfig(source="synth://20x32"),
        train=TrainConfig(epochs=2, batch_size=8),
    )
    result = run_ablation(config, output_dir=tmp_path)
    assert [e.label for e in result.entries] == list(PRESET_LABELS.values())
    for entry in result.entries:
        for value in entry.test.to_dict().values():
            assert 0.0 <= value <= 1.0

    result.save(tmp_path)
    table = (tmp_path / "ablation.txt").read_text().splitlines()
    assert "Dice | Sensitivity | Specificity" in table[0]
    assert len(table) == 2 + 2 * len(PRESET_LABELS)
    payload = json.loads((tmp_path / "ablation.json").read_text())
    assert payload["best_preset"] in {p.value for p in PRESET_LABELS}
    assert (tmp_path / "bi_h" / "history.csv").is_file()
