"""Optimisation: training loop, learning-rate schedule and checkpoints."""

from src.training.checkpoint import (
    BEST_CHECKPOINT,
    CHECKPOINT_FORMAT_VERSION,
    Checkpoint,
    CheckpointError,
    epoch_checkpoint_name,
    load_checkpoint,
    save_checkpoint,
)
from src.training.scheduler import PlateauScheduler, PlateauState, scheduler_step
from src.training.trainer import EpochRecord, TrainHistory, TrainingDivergedError, train

__all__ = [
    "BEST_CHECKPOINT",
    "CHECKPOINT_FORMAT_VERSION",
    "Checkpoint",
    "CheckpointError",
    "EpochRecord",
    "PlateauScheduler",
    "PlateauState",
    "TrainHistory",
    "TrainingDivergedError",
    "epoch_checkpoint_name",
    "load_checkpoint",
    "save_checkpoint",
    "scheduler_step",
    "train",
]
