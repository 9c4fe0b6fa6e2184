"""
Reduce-on-plateau learning-rate schedule driven by validation Dice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch

from src.utils import logger

IMPROVEMENT_THRESHOLD = 1e-4


@dataclass
class PlateauState:
    lr: float
    factor: float = 0.5
    patience: int = 5
    min_lr: float = 1e-6
    best: Optional[float] = None
    bad_epochs: int = 0


def scheduler_step(state: PlateauState, val_metric: float) -> float:
    """
    Record one epoch's validation metric (higher is better) and return the new lr.

    The first observation only sets `best`. After `patience` consecutive epochs
    without an improvement of at least 1e-4, lr <- max(lr * factor, min_lr).
    """
    if state.best is None or val_metric >= state.best + IMPROVEMENT_THRESHOLD:
        state.best = val_metric
        state.bad_epochs = 0
        return state.lr

    state.bad_epochs += 1
    if state.bad_epochs >= state.patience:
        new_lr = max(state.lr * state.factor, state.min_lr)
        if new_lr < state.lr:
            logger.info("lr_reduced", old_lr=state.lr, new_lr=new_lr, best=state.best)
        state.lr = new_lr
        state.bad_epochs = 0
    return state.lr


class PlateauScheduler:
    """Applies scheduler_step to every param group of an optimizer."""

    def __init__(self, optimizer: torch.optim.Optimizer, state: PlateauState):
        self.optimizer = optimizer
        self.state = state
        self._apply()

    def _apply(self) -> None:
        for group in self.optimizer.param_groups:
            group["lr"] = self.state.lr

    @property
    def lr(self) -> float:
        return self.state.lr

    def step(self, val_metric: float) -> float:
        lr = scheduler_step(self.state, val_metric)
        self._apply()
        return lr
