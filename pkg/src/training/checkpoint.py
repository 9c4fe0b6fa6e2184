"""
Single-file checkpoints.

A checkpoint is a torch-serialized dict holding the format version, the
ModelConfig and LossConfig used for training, the epoch, a metric snapshot,
the model parameters and the optimizer state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import torch

from src.config import LossConfig, ModelConfig
from src.models.attention_unet import AttentionUNet
from src.utils import logger

CHECKPOINT_FORMAT_VERSION = 1
BEST_CHECKPOINT = "ckpt_best.bin"


class CheckpointError(RuntimeError):
    """Raised for unreadable, version-mismatched or incompatible checkpoints."""


def epoch_checkpoint_name(epoch: int) -> str:
    return f"ckpt_epoch{epoch}.bin"


@dataclass
class Checkpoint:
    model: AttentionUNet
    optimizer_state: Optional[Dict[str, Any]]
    model_config: ModelConfig
    loss_config: LossConfig
    epoch: int
    metrics: Dict[str, float] = field(default_factory=dict)


def save_checkpoint(
    path: Union[str, Path],
    model: AttentionUNet,
    optimizer_state: Optional[Dict[str, Any]],
    loss_config: LossConfig,
    epoch: int,
    metrics: Optional[Dict[str, float]] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_config": model.config.model_dump(mode="json"),
        "loss_config": loss_config.model_dump(mode="json"),
        "epoch": int(epoch),
        "metrics": {k: float(v) for k, v in (metrics or {}).items()},
        "model_state": {k: v.detach().cpu() for k, v in model.state_dict().items()},
        "optimizer_state": optimizer_state,
    }
    torch.save(payload, path)
    logger.info("checkpoint_saved", path=str(path), epoch=epoch)
    return path


def load_checkpoint(
    path: Union[str, Path],
    model_config: Optional[ModelConfig] = None,
    map_location: Union[str, torch.device] = "cpu",
) -> Checkpoint:
    """
    Rebuild the model stored at `path`.

    When `model_config` is given it must match the embedded config exactly.
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location=map_location, weights_only=True)
    except Exception as e:
        raise CheckpointError(f"corrupt checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CheckpointError(f"corrupt checkpoint {path}: missing format_version")

    version = payload["format_version"]
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has format version {version}, expected {CHECKPOINT_FORMAT_VERSION}"
        )

    stored = ModelConfig(**payload["model_config"])
    if model_config is not None and model_config != stored:
        diff = {
            k: (v, getattr(model_config, k))
            for k, v in stored.model_dump().items()
            if getattr(model_config, k) != v
        }
        raise CheckpointError(f"checkpoint {path} (format version {version}) config mismatch (stored, requested): {diff}")

    model = AttentionUNet(stored)
    try:
        model.load_state_dict(payload["model_state"])
    except RuntimeError as e:
        raise CheckpointError(f"checkpoint {path}: parameters do not fit the embedded config: {e}") from e

    return Checkpoint(
        model=model,
        optimizer_state=payload.get("optimizer_state"),
        model_config=stored,
        loss_config=LossConfig(**payload["loss_config"]),
        epoch=int(payload["epoch"]),
        metrics=dict(payload.get("metrics") or {}),
    )
