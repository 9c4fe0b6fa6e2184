"""
Training loop.

Adam (or SGD) over the selected loss preset, seeded shuffling and flips,
per-epoch validation Dice driving the reduce-on-plateau schedule, and
periodic / best / final checkpoints.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd
import torch

from src.config import TrainConfig, get_settings
from src.data.distance import signed_distance_map
from src.data.loader import make_loader, random_hflip
from src.data.types import DataError, DatasetSplit, SamplePair
from src.losses import composite_loss
from src.metrics import evaluate
from src.models.attention_unet import AttentionUNet
from src.training.checkpoint import BEST_CHECKPOINT, epoch_checkpoint_name, save_checkpoint
from src.training.scheduler import PlateauScheduler, PlateauState
from src.utils import logger, resolve_device, safe_json_dumps, seed_everything

LOSS_PARTS = ("wbce", "dice", "hinge", "boundary")


class TrainingDivergedError(RuntimeError):
    """Raised when the total loss of a batch is NaN or infinite."""

    def __init__(self, epoch: int, batch_index: int, loss: float):
        self.epoch = epoch
        self.batch_index = batch_index
        self.loss = loss
        super().__init__(f"training diverged: loss={loss} at epoch {epoch}, batch index {batch_index}")


@dataclass
class EpochRecord:
    """Mean training losses of one epoch plus the validation signal."""
    epoch: int
    loss: float
    wbce: float
    dice: float
    hinge: float
    boundary: float
    val_dice: Optional[float]
    lr: float
    wall_time: float


@dataclass
class TrainHistory:
    seed: int
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None
    best_val_dice: Optional[float] = None

    @property
    def learning_rates(self) -> List[float]:
        return [r.lr for r in self.records]

    def to_dict(self) -> Dict[str, object]:
        return {
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "best_val_dice": self.best_val_dice,
            "epochs": [asdict(r) for r in self.records],
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=list(EpochRecord.__dataclass_fields__))

    def to_csv(self, path: Path) -> Path:
        self.to_frame().to_csv(path, index=False)
        return path

    def to_json(self, path: Path) -> Path:
        path.write_text(safe_json_dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path


def with_distance_maps(samples: List[SamplePair]) -> List[SamplePair]:
    """Attach a signed distance map to every sample that lacks one."""
    return [s if s.sdm is not None else s.with_sdm(signed_distance_map(s.mask)) for s in samples]


def make_optimizer(model: torch.nn.Module, config: TrainConfig) -> torch.optim.Optimizer:
    if config.optimizer == "sgd":
        return torch.optim.SGD(model.parameters(), lr=config.lr, momentum=config.momentum)
    return torch.optim.Adam(model.parameters(), lr=config.lr)


def train(
    model: AttentionUNet,
    split: DatasetSplit,
    config: TrainConfig,
    out_dir: Optional[Path] = None,
    device: Optional[torch.device] = None,
) -> Tuple[AttentionUNet, TrainHistory]:
    """
    Train `model` on `split.train`.

    Args:
        model: Freshly built (or resumed) network.
        split: Scan-disjoint subsets; validation Dice is measured on `split.validation`.
        config: Optimisation schedule and loss.
        out_dir: When set, checkpoints and history.{csv,json} are written here.
        device: Defaults to the configured device.

    Returns:
        The trained model and its per-epoch history.

    Raises:
        TrainingDivergedError: a batch produced a non-finite total loss.
    """
    if not split.train:
        raise DataError("training set is empty")
    settings = get_settings()
    seed_everything(config.seed, settings.deterministic)
    if settings.num_threads:
        torch.set_num_threads(settings.num_threads)
    device = device or resolve_device()
    model.to(device)

    train_samples = with_distance_maps(split.train)
    validation = split.validation
    loader = make_loader(
        train_samples, config.batch_size, seed=config.seed, shuffle=True, num_workers=config.num_workers
    )
    flip_generator = torch.Generator().manual_seed(config.seed + 1)
    optimizer = make_optimizer(model, config)
    scheduler: Optional[PlateauScheduler] = None
    if config.scheduler == "reduce-on-plateau":
        scheduler = PlateauScheduler(
            optimizer,
            PlateauState(
                lr=config.lr,
                factor=config.scheduler_factor,
                patience=config.scheduler_patience,
                min_lr=config.min_lr,
            ),
        )

    history = TrainHistory(seed=config.seed)
    logger.info(
        "training_started",
        train_samples=len(train_samples),
        val_samples=len(validation),
        epochs=config.epochs,
        batch_size=config.batch_size,
        steps_per_epoch=len(loader),
        loss_preset=config.loss_preset.value,
        device=str(device),
    )

    for epoch in range(1, config.epochs + 1):
        model.train()
        started = time.perf_counter()
        lr = optimizer.param_groups[0]["lr"]
        totals = {name: 0.0 for name in ("loss",) + LOSS_PARTS}
        n_batches = 0

        for batch_index, batch in enumerate(loader):
            if config.augment_hflip:
                batch = random_hflip(batch, flip_generator)
            image, mask, sdm = (t.to(device) for t in batch)

            optimizer.zero_grad(set_to_none=True)
            pred = model(image)
            loss, parts = composite_loss(pred, mask, sdm, config.loss_preset, config.loss)
            if not torch.isfinite(loss):
                logger.error("training_diverged", epoch=epoch, batch_index=batch_index)
                raise TrainingDivergedError(epoch, batch_index, float(loss.detach()))
            loss.backward()
            optimizer.step()

            components = parts.to_dict()
            totals["loss"] += components.pop("total")
            for name, value in components.items():
                totals[name] += value
            n_batches += 1

        val_dice: Optional[float] = None
        if validation:
            val_dice = evaluate(model, validation, threshold=config.eval_threshold, device=device).aggregate.dice
            if scheduler is not None:
                scheduler.step(val_dice)

        record = EpochRecord(
            epoch=epoch,
            val_dice=val_dice,
            lr=lr,
            wall_time=time.perf_counter() - started,
            **{name: totals[name] / n_batches for name in totals},
        )
        history.records.append(record)
        logger.info(
            "epoch_complete",
            epoch=epoch,
            loss=round(record.loss, 6),
            val_dice=None if val_dice is None else round(val_dice, 4),
            lr=lr,
            wall_time=round(record.wall_time, 2),
        )

        improved = val_dice is not None and (history.best_val_dice is None or val_dice > history.best_val_dice)
        if improved:
            history.best_epoch, history.best_val_dice = epoch, val_dice
        if out_dir is not None:
            snapshot = {"loss": record.loss}
            if val_dice is not None:
                snapshot["val_dice"] = val_dice
            if epoch % config.checkpoint_every == 0 or epoch == config.epochs:
                save_checkpoint(out_dir / epoch_checkpoint_name(epoch), model, optimizer.state_dict(), config.loss, epoch, snapshot)
            if improved:
                save_checkpoint(out_dir / BEST_CHECKPOINT, model, optimizer.state_dict(), config.loss, epoch, snapshot)

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        history.to_csv(out_dir / "history.csv")
        history.to_json(out_dir / "history.json")

    logger.info(
        "training_complete",
        epochs=len(history.records),
        final_loss=round(history.records[-1].loss, 6),
        best_epoch=history.best_epoch,
        best_val_dice=history.best_val_dice,
    )
    return model, history
