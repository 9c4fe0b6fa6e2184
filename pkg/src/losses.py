"""
Segmentation losses and the Bi-category Hybrid composite.

    Bi-H = alpha * (weighted BCE + Dice) + beta * (squared hinge + boundary),  alpha + beta = 1

All components take probability maps (not logits) of any matching shape,
typically (batch, H, W, 1). The boundary term may be negative.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, Tuple

import torch

from src.config import LossConfig, LossPreset


class LossInputError(ValueError):
    """Raised when loss inputs disagree in shape."""


@dataclass
class LossBreakdown:
    """Unweighted components plus the weighted total."""
    wbce: float
    dice: float
    hinge: float
    boundary: float
    total: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def _check_shapes(pred: torch.Tensor, other: torch.Tensor, what: str) -> None:
    if pred.shape != other.shape:
        raise LossInputError(f"pred shape {tuple(pred.shape)} != {what} shape {tuple(other.shape)}")


def _per_sample(x: torch.Tensor) -> torch.Tensor:
    # 1-D / 2-D inputs are a single sample; otherwise dim 0 is the batch
    return x.reshape(1, -1) if x.ndim <= 2 else x.flatten(start_dim=1)


def class_balance_weights(target: torch.Tensor) -> Tuple[float, float]:
    """HED weights (w_pos, w_neg) = (N-/N, N+/N); uniform for single-class targets."""
    n = target.numel()
    n_pos = float(target.sum().item())
    if n_pos == 0.0 or n_pos == n:
        return 1.0, 1.0
    return (n - n_pos) / n, n_pos / n


def weighted_bce(
    pred: torch.Tensor,
    target: torch.Tensor,
    mode: str = "hed",
    eps: float = 1e-7,
) -> torch.Tensor:
    """Class-balanced binary cross entropy, pixel mean over the whole batch."""
    _check_shapes(pred, target, "target")
    p = pred.clamp(eps, 1.0 - eps)
    y = target.to(p.dtype)
    if mode == "hed":
        w_pos, w_neg = class_balance_weights(y)
    elif mode == "uniform":
        w_pos = w_neg = 1.0
    else:
        raise ValueError(f"unknown bce weighting: {mode}")
    return -(w_pos * y * torch.log(p) + w_neg * (1.0 - y) * torch.log(1.0 - p)).mean()


def dice_loss(pred: torch.Tensor, target: torch.Tensor, smooth: float = 1.0) -> torch.Tensor:
    """1 - (2 sum(p*y) + s) / (sum(p) + sum(y) + s), per sample then batch mean."""
    _check_shapes(pred, target, "target")
    if smooth <= 0:
        raise ValueError("smooth must be > 0")
    p, y = _per_sample(pred), _per_sample(target.to(pred.dtype))
    overlap = (p * y).sum(dim=1)
    total = p.sum(dim=1) + y.sum(dim=1)
    return (1.0 - (2.0 * overlap + smooth) / (total + smooth)).mean()


def squared_hinge(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """mean(max(0, 1 - t * (2p - 1))^2) with t = 2y - 1."""
    _check_shapes(pred, target, "target")
    score = 2.0 * pred - 1.0
    sign = 2.0 * target.to(pred.dtype) - 1.0
    return torch.clamp(1.0 - sign * score, min=0.0).pow(2).mean()


def boundary_loss(pred: torch.Tensor, sdm: torch.Tensor) -> torch.Tensor:
    """mean(p * phi); phi is negative inside the ground truth."""
    _check_shapes(pred, sdm, "distance map")
    return (pred * sdm.to(pred.dtype)).mean()


def _components(
    pred: torch.Tensor, target: torch.Tensor, sdm: torch.Tensor, config: LossConfig
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    _check_shapes(pred, target, "target")
    _check_shapes(pred, sdm, "distance map")
    return (
        weighted_bce(pred, target, config.bce_weighting, config.eps),
        dice_loss(pred, target, config.dice_smooth),
        squared_hinge(pred, target),
        boundary_loss(pred, sdm),
    )


def _breakdown(parts: Tuple[torch.Tensor, ...], total: torch.Tensor) -> LossBreakdown:
    wbce, dice, hinge, boundary = (float(t.detach()) for t in parts)
    return LossBreakdown(wbce=wbce, dice=dice, hinge=hinge, boundary=boundary, total=float(total.detach()))


def bi_h_loss(
    pred: torch.Tensor,
    target: torch.Tensor,
    sdm: torch.Tensor,
    config: LossConfig,
) -> Tuple[torch.Tensor, LossBreakdown]:
    """Bi-category Hybrid loss and its unweighted components."""
    parts = _components(pred, target, sdm, config)
    wbce, dice, hinge, boundary = parts
    total = config.alpha * (wbce + dice) + config.beta * (hinge + boundary)
    return total, _breakdown(parts, total)


def composite_loss(
    pred: torch.Tensor,
    target: torch.Tensor,
    sdm: torch.Tensor,
    preset: LossPreset,
    config: LossConfig,
) -> Tuple[torch.Tensor, LossBreakdown]:
    """Training objective for an ablation preset; the breakdown always has all four parts."""
    preset = LossPreset(preset)
    if preset is LossPreset.BI_H:
        return bi_h_loss(pred, target, sdm, config)
    parts = _components(pred, target, sdm, config)
    wbce, dice, hinge, boundary = parts
    if preset is LossPreset.BCE:
        total = wbce
    elif preset is LossPreset.DICE_BOUNDARY:
        total = dice + boundary
    else:
        total = wbce + dice
    return total, _breakdown(parts, total)
