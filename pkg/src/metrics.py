"""
Pixel-level segmentation metrics: confusion counts, Dice, sensitivity and
specificity, plus whole-set evaluation of a model.

Degenerate 0/0 ratios are defined as 1.0 (both masks agree on "nothing") and
flagged per sample so reports can exclude them.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import torch

from src.data.types import SamplePair
from src.utils import logger, resolve_device

ArrayLike = Union[np.ndarray, torch.Tensor]


class MetricInputError(ValueError):
    """Raised for mismatched or non-binary metric inputs."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


def _as_numpy(x: ArrayLike) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        return x.detach().cpu().numpy()
    return np.asarray(x)


def confusion(pred_mask: ArrayLike, gt_mask: ArrayLike) -> ConfusionCounts:
    """Pixelwise tp/fp/tn/fn between two binary maps of the same shape."""
    pred, gt = _as_numpy(pred_mask), _as_numpy(gt_mask)
    if pred.shape != gt.shape:
        raise MetricInputError(f"pred shape {pred.shape} != gt shape {gt.shape}")
    for name, arr in (("pred", pred), ("gt", gt)):
        if not np.isin(arr, (0, 1)).all():
            raise MetricInputError(f"{name} mask must be binary")
    p, g = pred.astype(bool), gt.astype(bool)
    return ConfusionCounts(
        tp=int(np.count_nonzero(p & g)),
        fp=int(np.count_nonzero(p & ~g)),
        tn=int(np.count_nonzero(~p & ~g)),
        fn=int(np.count_nonzero(~p & g)),
    )


def _ratio(num: float, den: float) -> float:
    return 1.0 if den == 0 else num / den


def dice_coefficient(c: ConfusionCounts) -> float:
    """2tp / (2tp + fp + fn)."""
    return _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)


def sensitivity(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fn)


def specificity(c: ConfusionCounts) -> float:
    return _ratio(c.tn, c.tn + c.fp)


def is_degenerate(c: ConfusionCounts) -> bool:
    """True when any of the three ratios hit 0/0."""
    return (2 * c.tp + c.fp + c.fn) == 0 or (c.tp + c.fn) == 0 or (c.tn + c.fp) == 0


@dataclass
class MetricSummary:
    dice: float
    sensitivity: float
    specificity: float

    @classmethod
    def from_counts(cls, c: ConfusionCounts) -> "MetricSummary":
        return cls(dice_coefficient(c), sensitivity(c), specificity(c))

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class SampleMetrics:
    sample_id: str
    scan_id: str
    dice: float
    sensitivity: float
    specificity: float
    counts: ConfusionCounts
    degenerate: bool = False

    def to_dict(self) -> Dict[str, object]:
        d = asdict(self)
        d["counts"] = self.counts.to_dict()
        return d


@dataclass
class MetricsReport:
    """
    Per-sample metrics plus three aggregates:
    micro (summed counts), macro (mean of per-sample values) and per-scan micro.
    """
    per_sample: List[SampleMetrics]
    aggregate: MetricSummary
    macro: MetricSummary
    per_scan: Dict[str, MetricSummary]
    threshold: float
    counts: ConfusionCounts = field(default_factory=ConfusionCounts)

    @classmethod
    def from_samples(cls, per_sample: List[SampleMetrics], threshold: float) -> "MetricsReport":
        if not per_sample:
            raise MetricInputError("cannot build a report from zero samples")
        total = ConfusionCounts()
        by_scan: "OrderedDict[str, ConfusionCounts]" = OrderedDict()
        for s in per_sample:
            total = total + s.counts
            by_scan[s.scan_id] = by_scan.get(s.scan_id, ConfusionCounts()) + s.counts
        macro = MetricSummary(
            dice=float(np.mean([s.dice for s in per_sample])),
            sensitivity=float(np.mean([s.sensitivity for s in per_sample])),
            specificity=float(np.mean([s.specificity for s in per_sample])),
        )
        return cls(
            per_sample=per_sample,
            aggregate=MetricSummary.from_counts(total),
            macro=macro,
            per_scan={scan: MetricSummary.from_counts(c) for scan, c in by_scan.items()},
            threshold=threshold,
            counts=total,
        )

    @property
    def degenerate_samples(self) -> int:
        return sum(s.degenerate for s in self.per_sample)

    def to_dict(self) -> Dict[str, object]:
        return {
            "threshold": self.threshold,
            "aggregate": self.aggregate.to_dict(),
            "macro": self.macro.to_dict(),
            "counts": self.counts.to_dict(),
            "degenerate_samples": self.degenerate_samples,
            "per_scan": {k: v.to_dict() for k, v in self.per_scan.items()},
            "per_sample": [s.to_dict() for s in self.per_sample],
        }


def sample_metrics(sample_id: str, scan_id: str, pred_mask: ArrayLike, gt_mask: ArrayLike) -> SampleMetrics:
    c = confusion(pred_mask, gt_mask)
    return SampleMetrics(
        sample_id=sample_id,
        scan_id=scan_id,
        dice=dice_coefficient(c),
        sensitivity=sensitivity(c),
        specificity=specificity(c),
        counts=c,
        degenerate=is_degenerate(c),
    )


ModelFn = Callable[[torch.Tensor], torch.Tensor]


def evaluate(
    model: ModelFn,
    samples: Sequence[SamplePair],
    threshold: float = 0.5,
    batch_size: int = 8,
    device: Optional[torch.device] = None,
) -> MetricsReport:
    """
    Binarize model probabilities at `prob > threshold` and score every sample.

    `model` is any callable mapping a (batch, H, W, 1) tensor to probabilities
    of the same shape; nn.Modules are switched to eval mode.
    """
    if not 0.0 < threshold < 1.0:
        raise MetricInputError(f"threshold must be in (0, 1), got {threshold}")
    if not samples:
        raise MetricInputError("evaluate needs at least one sample")
    device = device or resolve_device()
    if isinstance(model, torch.nn.Module):
        model.eval()
        model.to(device)

    results: List[SampleMetrics] = []
    with torch.no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples[start:start + batch_size]
            batch = torch.from_numpy(
                np.stack([np.asarray(s.image.pixels, dtype=np.float32) for s in chunk])[..., None]
            ).to(device)
            probs = model(batch).detach().cpu().numpy()[..., 0]
            for s, prob in zip(chunk, probs):
                pred = (prob > threshold).astype(np.uint8)
                results.append(sample_metrics(s.sample_id, s.scan_id, pred, s.mask.pixels))

    report = MetricsReport.from_samples(results, threshold)
    logger.info(
        "evaluation_complete",
        samples=len(results),
        threshold=threshold,
        dice=round(report.aggregate.dice, 4),
        sensitivity=round(report.aggregate.sensitivity, 4),
        specificity=round(report.aggregate.specificity, 4),
        degenerate=report.degenerate_samples,
    )
    return report
