"""
Loss Ablation.

Trains one fresh network per loss preset on the same split and seed, then
tabulates test-set Dice / Sensitivity / Specificity per preset next to the
published ablation figures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import structlog

from evals.datasets import reference_for_preset
from evals.report import ReportRow, format_table
from src.config import LossPreset, RunConfig
from src.data.pipeline import prepare_split
from src.data.types import DatasetSplit
from src.metrics import MetricSummary, evaluate
from src.models.attention_unet import build_model
from src.training.trainer import train


logger = structlog.get_logger(__name__)

PRESET_LABELS = {
    LossPreset.BCE: "BCE",
    LossPreset.DICE_BOUNDARY: "Dice+Boundary",
    LossPreset.BCE_DICE: "BCE+Dice",
    LossPreset.BI_H: "Bi-H",
}


@dataclass
class AblationEntry:
    preset: LossPreset
    test: MetricSummary
    final_loss: float
    best_val_dice: Optional[float] = None

    @property
    def label(self) -> str:
        return PRESET_LABELS[self.preset]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "preset": self.preset.value,
            "label": self.label,
            "test": self.test.to_dict(),
            "final_loss": self.final_loss,
            "best_val_dice": self.best_val_dice,
            "reference": reference_for_preset(self.preset.value),
        }


@dataclass
class AblationResult:
    seed: int
    entries: List[AblationEntry] = field(default_factory=list)

    def best_preset(self) -> Optional[LossPreset]:
        if not self.entries:
            return None
        return max(self.entries, key=lambda e: e.test.dice).preset

    def table(self, include_reference: bool = True) -> str:
        rows = [ReportRow.from_summary(e.label, e.test) for e in self.entries]
        if include_reference:
            rows.extend(ReportRow.from_reference(reference_for_preset(e.preset.value)) for e in self.entries)
        return format_table(rows)

    def to_dict(self) -> Dict[str, Any]:
        best = self.best_preset()
        return {
            "seed": self.seed,
            "best_preset": best.value if best else None,
            "entries": [e.to_dict() for e in self.entries],
        }

    def save(self, output_dir: Path) -> List[Path]:
        output_dir.mkdir(parents=True, exist_ok=True)
        json_path = output_dir / "ablation.json"
        with open(json_path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        txt_path = output_dir / "ablation.txt"
        txt_path.write_text(self.table() + "\n", encoding="utf-8")
        logger.info("report_saved", files=[str(json_path), str(txt_path)])
        return [json_path, txt_path]


def run_ablation(
    config: RunConfig,
    presets: Sequence[LossPreset] = tuple(LossPreset),
    split: Optional[DatasetSplit] = None,
    output_dir: Optional[Path] = None,
) -> AblationResult:
    """Train and evaluate one model per preset.

    Args:
        config: Resolved run; only `train.loss_preset` varies between runs.
        presets: Presets to compare, in table order.
        split: Pre-built split; loaded from `config.data` when omitted.
        output_dir: When set, each preset's run lands in `<output_dir>/<preset>/`.

    Returns:
        AblationResult with one entry per preset.
    """
    split = split or prepare_split(config.data, config.train.seed)
    result = AblationResult(seed=config.train.seed)
    for preset in presets:
        preset = LossPreset(preset)
        train_config = config.train.model_copy(update={"loss_preset": preset})
        logger.info("ablation_run_started", preset=preset.value)
        model = build_model(config.model, seed=config.train.seed)
        run_dir = output_dir / preset.value if output_dir is not None else None
        model, history = train(model, split, train_config, out_dir=run_dir)
        report = evaluate(model, split.test, threshold=train_config.eval_threshold)
        result.entries.append(
            AblationEntry(
                preset=preset,
                test=report.aggregate,
                final_loss=history.records[-1].loss,
                best_val_dice=history.best_val_dice,
            )
        )
        logger.info("ablation_run_complete", preset=preset.value, dice=round(report.aggregate.dice, 4))
    return result
