"""
Independent brute-force references.

Everything here is written with explicit loops and scalar arithmetic so it
shares no code path with src.losses / src.metrics / src.data.distance. The
`check` command and the test suite compare the vectorized implementations
against these.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from src import losses
from src.config import LossConfig

DEFAULT_STEP = 1e-5
REL_ERROR_FLOOR = 1e-8
MAX_ORACLE_PIXELS = 64  # 8 x 8 per sample

COMPONENTS = ("wbce", "dice", "hinge", "boundary", "bi_h")


class OracleError(ValueError):
    """Raised for invalid oracle input or a non-finite evaluation."""


# ── Finite differences ───────────────────────────────────────────

def finite_diff_grad(
    loss_fn: Callable[[np.ndarray], float],
    pred: np.ndarray,
    step: float = DEFAULT_STEP,
) -> np.ndarray:
    """Central-difference gradient of a scalar function, one pixel at a time, in float64."""
    if step <= 0:
        raise OracleError(f"step must be > 0, got {step}")
    p = np.array(pred, dtype=np.float64)
    grad = np.zeros_like(p)
    for idx in np.ndindex(*p.shape):
        original = p[idx]
        p[idx] = original + step
        f_plus = float(loss_fn(p.copy()))
        p[idx] = original - step
        f_minus = float(loss_fn(p.copy()))
        p[idx] = original
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise OracleError(f"non-finite loss when perturbing pixel {idx}")
        grad[idx] = (f_plus - f_minus) / (2.0 * step)
    return grad


# ── Metrics ──────────────────────────────────────────────────────

def _flat(x: Union[np.ndarray, Sequence]) -> List[float]:
    return np.asarray(x, dtype=np.float64).ravel().tolist()


def brute_force_metrics(pred: np.ndarray, gt: np.ndarray) -> Tuple[float, float, float]:
    """(dice, sensitivity, specificity) by counting pixels in a loop; 0/0 -> 1.0."""
    if np.shape(pred) != np.shape(gt):
        raise OracleError(f"shape mismatch: {np.shape(pred)} vs {np.shape(gt)}")
    tp = fp = tn = fn = 0
    for p, g in zip(_flat(pred), _flat(gt)):
        if p not in (0.0, 1.0) or g not in (0.0, 1.0):
            raise OracleError("masks must be binary")
        if p == 1.0 and g == 1.0:
            tp += 1
        elif p == 1.0:
            fp += 1
        elif g == 1.0:
            fn += 1
        else:
            tn += 1
    dice = 1.0 if 2 * tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)
    sens = 1.0 if tp + fn == 0 else tp / (tp + fn)
    specificity = 1.0 if tn + fp == 0 else tn / (tn + fp)
    return dice, sens, specificity


# ── Distance maps ────────────────────────────────────────────────

def brute_force_signed_distance(mask: np.ndarray) -> np.ndarray:
    """Nearest opposite-class pixel by exhaustive search; negative inside the mask."""
    m = np.asarray(mask)
    coords = list(np.ndindex(*m.shape))
    inside = [c for c in coords if m[c] == 1]
    outside = [c for c in coords if m[c] == 0]
    phi = np.zeros(m.shape, dtype=np.float64)
    if not inside or not outside:
        return phi
    for c in coords:
        targets, sign = (outside, -1.0) if m[c] == 1 else (inside, 1.0)
        best = math.inf
        for t in targets:
            d2 = 0
            for a, b in zip(c, t):
                d2 += (a - b) * (a - b)
            if d2 < best:
                best = d2
        phi[c] = sign * math.sqrt(best)
    return phi


# ── Loss components ──────────────────────────────────────────────

def _samples(x: np.ndarray) -> List[List[float]]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim <= 2:
        return [arr.ravel().tolist()]
    return [a.ravel().tolist() for a in arr]


def _oracle_wbce(pred: np.ndarray, target: np.ndarray, mode: str, eps: float) -> float:
    p_all, y_all = _flat(pred), _flat(target)
    n = len(y_all)
    n_pos = 0.0
    for y in y_all:
        n_pos += y
    if mode == "hed" and 0.0 < n_pos < n:
        w_pos, w_neg = (n - n_pos) / n, n_pos / n
    else:
        w_pos = w_neg = 1.0
    total = 0.0
    for p, y in zip(p_all, y_all):
        p = min(max(p, eps), 1.0 - eps)
        total += w_pos * y * math.log(p) + w_neg * (1.0 - y) * math.log(1.0 - p)
    return -total / n


def _oracle_dice(pred: np.ndarray, target: np.ndarray, smooth: float) -> float:
    losses_per_sample = []
    for ps, ys in zip(_samples(pred), _samples(target)):
        inter = sum_p = sum_y = 0.0
        for p, y in zip(ps, ys):
            inter += p * y
            sum_p += p
            sum_y += y
        losses_per_sample.append(1.0 - (2.0 * inter + smooth) / (sum_p + sum_y + smooth))
    return sum(losses_per_sample) / len(losses_per_sample)


def _oracle_hinge(pred: np.ndarray, target: np.ndarray) -> float:
    p_all, y_all = _flat(pred), _flat(target)
    total = 0.0
    for p, y in zip(p_all, y_all):
        margin = 1.0 - (2.0 * y - 1.0) * (2.0 * p - 1.0)
        if margin > 0.0:
            total += margin * margin
    return total / len(p_all)


def _oracle_boundary(pred: np.ndarray, sdm: np.ndarray) -> float:
    p_all, phi_all = _flat(pred), _flat(sdm)
    total = 0.0
    for p, phi in zip(p_all, phi_all):
        total += p * phi
    return total / len(p_all)


def tiny_loss_oracle(
    component: str,
    pred: np.ndarray,
    target_or_sdm: Union[np.ndarray, Tuple[np.ndarray, np.ndarray]],
    params: Optional[LossConfig] = None,
) -> float:
    """
    Evaluate one loss component from its closed form with scalar arithmetic.

    `target_or_sdm` is the target mask for wbce/dice/hinge, the distance map for
    boundary and a (target, sdm) pair for bi_h. 2-D inputs are one sample,
    otherwise axis 0 is the batch.
    """
    if component not in COMPONENTS:
        raise OracleError(f"unknown loss component: {component!r} (expected one of {', '.join(COMPONENTS)})")
    params = params or LossConfig()
    pred = np.asarray(pred, dtype=np.float64)
    if any(len(s) > MAX_ORACLE_PIXELS for s in _samples(pred)):
        raise OracleError(f"oracle grids are limited to 8x8 per sample, got shape {pred.shape}")

    if component == "wbce":
        return _oracle_wbce(pred, target_or_sdm, params.bce_weighting, params.eps)
    if component == "dice":
        return _oracle_dice(pred, target_or_sdm, params.dice_smooth)
    if component == "hinge":
        return _oracle_hinge(pred, target_or_sdm)
    if component == "boundary":
        return _oracle_boundary(pred, target_or_sdm)

    target, sdm = target_or_sdm
    first = _oracle_wbce(pred, target, params.bce_weighting, params.eps) + _oracle_dice(pred, target, params.dice_smooth)
    second = _oracle_hinge(pred, target) + _oracle_boundary(pred, sdm)
    return params.alpha * first + params.beta * second


# ── Gradient checks ──────────────────────────────────────────────

@dataclass
class GradCheckReport:
    component: str
    max_abs_error: float
    max_rel_error: float
    grid_shape: Tuple[int, ...]
    step: float
    tolerance: float = 1e-4

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def to_dict(self) -> Dict[str, object]:
        d = asdict(self)
        d["grid_shape"] = list(self.grid_shape)
        d["passed"] = self.passed
        return d


def implementation_loss(
    component: str,
    pred: torch.Tensor,
    target: torch.Tensor,
    sdm: torch.Tensor,
    config: LossConfig,
) -> torch.Tensor:
    """The src.losses function for `component`, resolved at call time."""
    if component == "wbce":
        return losses.weighted_bce(pred, target, config.bce_weighting, config.eps)
    if component == "dice":
        return losses.dice_loss(pred, target, config.dice_smooth)
    if component == "hinge":
        return losses.squared_hinge(pred, target)
    if component == "boundary":
        return losses.boundary_loss(pred, sdm)
    if component == "bi_h":
        return losses.bi_h_loss(pred, target, sdm, config)[0]
    raise OracleError(f"unknown loss component: {component!r}")


def _oracle_argument(component: str, target: np.ndarray, sdm: np.ndarray):
    if component == "boundary":
        return sdm
    if component == "bi_h":
        return target, sdm
    return target


def grad_check(
    component: str,
    pred: np.ndarray,
    target: np.ndarray,
    sdm: np.ndarray,
    config: Optional[LossConfig] = None,
    step: float = DEFAULT_STEP,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Autograd gradient of the implementation vs finite differences of the oracle."""
    config = config or LossConfig()
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    sdm = np.asarray(sdm, dtype=np.float64)

    p = torch.tensor(pred, dtype=torch.float64, requires_grad=True)
    loss = implementation_loss(
        component, p, torch.from_numpy(target), torch.from_numpy(sdm), config
    )
    loss.backward()
    analytic = p.grad.detach().numpy()

    arg = _oracle_argument(component, target, sdm)
    numeric = finite_diff_grad(lambda q: tiny_loss_oracle(component, q, arg, config), pred, step)

    abs_err = np.abs(analytic - numeric)
    rel_err = abs_err / np.maximum(np.abs(numeric), REL_ERROR_FLOOR)
    return GradCheckReport(
        component=component,
        max_abs_error=float(abs_err.max()),
        max_rel_error=float(rel_err.max()),
        grid_shape=tuple(pred.shape),
        step=step,
        tolerance=tolerance,
    )
