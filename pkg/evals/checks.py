"""
Oracle Check Suites.

Property and oracle-equivalence checks run by `check` and by the test suite.
Each check draws its own seeded random instances and compares the vectorized
implementation against an independent reference from src.oracles.
"""

from __future__ import annotations

import math
import time
from abc import ABC, abstractmethod
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import torch

from evals.schema import CheckResult, CheckScope, CheckSuiteSummary
from src import losses
from src.config import LossConfig, ModelConfig
from src.data.distance import signed_distance_map
from src.metrics import confusion, dice_coefficient, sensitivity, specificity
from src.models.attention_unet import (
    AttentionGate,
    AttentionUNet,
    attention_coefficients,
    attention_gate,
    count_attention_gates,
    trace_levels,
)
from src.oracles import (
    brute_force_metrics,
    brute_force_signed_distance,
    grad_check,
    tiny_loss_oracle,
)
from src.utils import logger, seed_everything

GRAD_TOLERANCE = 1e-4
ORACLE_TOLERANCE = 1e-10
AFFINITY_TOLERANCE = 1e-9
GATE_ZERO_TOLERANCE = 1e-6

LossInstance = Tuple[np.ndarray, np.ndarray, np.ndarray]


def _binary(rng: np.random.Generator, shape: Tuple[int, ...], density: float) -> np.ndarray:
    return (rng.random(shape) < density).astype(np.float64)


def _two_class(rng: np.random.Generator, shape: Tuple[int, int]) -> np.ndarray:
    """Random binary map holding at least one pixel of each class (needs >= 2 pixels)."""
    mask = _binary(rng, shape, rng.uniform(0.2, 0.6))
    flat = mask.reshape(-1)
    if flat.min() == flat.max():
        i, j = rng.choice(flat.size, size=2, replace=False)
        flat[i], flat[j] = 1.0, 0.0
    return mask


def loss_instance(rng: np.random.Generator, batch: int, height: int, width: int) -> LossInstance:
    """(pred, target, sdm), each (batch, H, W, 1) float64, preds kept away from the clamp."""
    pred = rng.uniform(0.05, 0.95, size=(batch, height, width, 1))
    targets = [_two_class(rng, (height, width)) for _ in range(batch)]
    target = np.stack(targets)[..., None]
    sdm = np.stack([signed_distance_map(t.astype(np.uint8)).phi for t in targets])[..., None]
    return pred, target, sdm


def _as_tensors(*arrays: np.ndarray) -> List[torch.Tensor]:
    return [torch.from_numpy(np.asarray(a, dtype=np.float64)) for a in arrays]


class BaseCheck(ABC):
    """Base class for all checks."""

    name: str = "base_check"
    suite: CheckScope = CheckScope.ALL
    tolerance: float = 0.0

    @abstractmethod
    def run(self, seed: int = 0) -> CheckResult:
        """Run the check.

        Args:
            seed: Base seed for the random instances.

        Returns:
            CheckResult with the worst observed error and pass/fail.
        """

    def _result(self, passed: bool, observed: float, details: str, instances: int, **metadata) -> CheckResult:
        return CheckResult(
            check_name=self.name,
            suite=self.suite,
            passed=passed,
            observed=observed,
            tolerance=self.tolerance,
            details=details,
            instances=instances,
            metadata=metadata,
        )


# ── Losses suite ─────────────────────────────────────────────────

class GradientCheck(BaseCheck):
    """Autograd vs central finite differences of the scalar oracle on random 8x8 grids."""

    suite = CheckScope.LOSSES
    tolerance = GRAD_TOLERANCE

    def __init__(self, component: str, config: LossConfig, label: Optional[str] = None, instances: int = 20):
        self.component = component
        self.config = config
        self.instances = instances
        self.name = f"grad_{label or component}"

    def run(self, seed: int = 0) -> CheckResult:
        rng = np.random.default_rng(seed)
        worst_rel, worst_abs = 0.0, 0.0
        for _ in range(self.instances):
            pred, target, sdm = loss_instance(rng, 1, 8, 8)
            report = grad_check(self.component, pred, target, sdm, self.config, tolerance=self.tolerance)
            worst_rel = max(worst_rel, report.max_rel_error)
            worst_abs = max(worst_abs, report.max_abs_error)
        return self._result(
            worst_rel < self.tolerance,
            worst_rel,
            f"max rel error {worst_rel:.2e} (abs {worst_abs:.2e})",
            self.instances,
            max_abs_error=worst_abs,
        )


def _implementation_value(component: str, pred, target, sdm, config: LossConfig) -> float:
    p, y, phi = _as_tensors(pred, target, sdm)
    if component == "wbce":
        value = losses.weighted_bce(p, y, config.bce_weighting, config.eps)
    elif component == "dice":
        value = losses.dice_loss(p, y, config.dice_smooth)
    elif component == "hinge":
        value = losses.squared_hinge(p, y)
    elif component == "boundary":
        value = losses.boundary_loss(p, phi)
    else:
        value = losses.bi_h_loss(p, y, phi, config)[0]
    return float(value)


def _oracle_value(component: str, pred, target, sdm, config: LossConfig) -> float:
    arg = sdm if component == "boundary" else (target, sdm) if component == "bi_h" else target
    return tiny_loss_oracle(component, pred, arg, config)


class LossOracleEquivalence(BaseCheck):
    """Every loss component equals the scalar oracle on random grids up to 8x8."""

    name = "loss_oracle_equivalence"
    suite = CheckScope.LOSSES
    tolerance = ORACLE_TOLERANCE
    components = ("wbce", "dice", "hinge", "boundary", "bi_h")

    def __init__(self, instances: int = 50):
        self.instances = instances

    def run(self, seed: int = 0) -> CheckResult:
        rng = np.random.default_rng(seed)
        worst, worst_case = 0.0, ""
        for i in range(self.instances):
            height, width = int(rng.integers(1, 9)), int(rng.integers(2, 9))
            pred, target, sdm = loss_instance(rng, int(rng.integers(1, 4)), height, width)
            if i % 5 == 0:
                # exercise the clamp
                pred[0, 0, 0, 0] = float(rng.integers(0, 2))
            alpha = float(rng.uniform(0.0, 1.0))
            config = LossConfig(
                alpha=alpha,
                beta=1.0 - alpha,
                dice_smooth=float(rng.uniform(0.5, 2.0)),
                bce_weighting="hed" if i % 2 == 0 else "uniform",
            )
            for component in self.components:
                err = abs(
                    _implementation_value(component, pred, target, sdm, config)
                    - _oracle_value(component, pred, target, sdm, config)
                )
                if err > worst:
                    worst, worst_case = err, f"{component} on instance {i}"
        passed = worst <= self.tolerance
        details = f"max abs diff {worst:.2e}" + (f" ({worst_case})" if worst_case else "")
        return self._result(passed, worst, details, self.instances)


def worked_examples() -> List[Tuple[str, str, np.ndarray, object, LossConfig, float]]:
    """Hand-evaluated cases: (label, component, pred, target_or_sdm, config, expected)."""
    half = np.array([[0.0, 0.0, 1.0, 1.0]])
    sdm_121 = np.array([[1.0, -1.0, 1.0]])
    hed, uniform = LossConfig(), LossConfig(bce_weighting="uniform")
    bi_h_expected = 0.5 * (0.5 * math.log(2.0) + 0.4) + 0.5 * (1.0 + 0.125)
    return [
        ("wbce half-positive hed", "wbce", np.full((1, 4), 0.5), half, hed, 0.5 * math.log(2.0)),
        ("wbce uniform", "wbce", np.full((1, 4), 0.5), half, uniform, math.log(2.0)),
        ("dice all-wrong 16px", "dice", np.ones((4, 4)), np.zeros((4, 4)), hed, 1.0 - 1.0 / 17.0),
        ("dice half-confident 4px", "dice", np.full((2, 2), 0.5), np.ones((2, 2)), hed, 1.0 - 5.0 / 7.0),
        ("dice perfect", "dice", half, half, hed, 0.0),
        ("hinge undecided", "hinge", np.full((3, 3), 0.5), _checker(3), hed, 1.0),
        ("hinge confident wrong", "hinge", np.zeros((2, 2)), np.ones((2, 2)), hed, 4.0),
        ("hinge confident right", "hinge", np.ones((2, 2)), np.ones((2, 2)), hed, 0.0),
        ("boundary full mass", "boundary", np.ones((1, 3)), sdm_121, hed, 1.0 / 3.0),
        ("boundary mask mass", "boundary", np.array([[0.0, 1.0, 0.0]]), sdm_121, hed, -1.0 / 3.0),
        ("boundary zero mass", "boundary", np.zeros((1, 3)), sdm_121, hed, 0.0),
        (
            "bi_h composed",
            "bi_h",
            np.full((1, 4), 0.5),
            (half, np.array([[2.0, 1.0, -1.0, -1.0]])),
            hed,
            bi_h_expected,
        ),
    ]


def _checker(n: int) -> np.ndarray:
    return (np.indices((n, n)).sum(axis=0) % 2).astype(np.float64)


class WorkedExamplesCheck(BaseCheck):
    """Implementation and oracle both reproduce the hand-evaluated loss values."""

    name = "loss_worked_examples"
    suite = CheckScope.LOSSES
    tolerance = ORACLE_TOLERANCE

    def run(self, seed: int = 0) -> CheckResult:
        worst, failures = 0.0, []
        cases = worked_examples()
        for label, component, pred, arg, config, expected in cases:
            if component == "bi_h":
                target, sdm = arg
            elif component == "boundary":
                target, sdm = np.zeros_like(pred), arg
            else:
                target, sdm = arg, np.zeros_like(pred)
            impl = _implementation_value(component, pred, target, sdm, config)
            oracle = tiny_loss_oracle(component, pred, arg, config)
            err = max(abs(impl - expected), abs(oracle - expected))
            worst = max(worst, err)
            if err > self.tolerance:
                failures.append(label)
        details = "all match" if not failures else "mismatch: " + ", ".join(failures)
        return self._result(not failures, worst, details, len(cases))


class CompositeReductionCheck(BaseCheck):
    """bi_h at (1, 0) and (0, 1) reduces exactly; three-point affinity in alpha."""

    name = "bi_h_reductions"
    suite = CheckScope.LOSSES
    tolerance = AFFINITY_TOLERANCE

    def __init__(self, instances: int = 20):
        self.instances = instances

    def run(self, seed: int = 0) -> CheckResult:
        rng = np.random.default_rng(seed)
        exact_failures, worst_affinity = 0, 0.0
        for _ in range(self.instances):
            p, y, phi = _as_tensors(*loss_instance(rng, 2, 8, 8))
            first, _ = losses.bi_h_loss(p, y, phi, LossConfig(alpha=1.0, beta=0.0))
            second, _ = losses.bi_h_loss(p, y, phi, LossConfig(alpha=0.0, beta=1.0))
            mid, _ = losses.bi_h_loss(p, y, phi, LossConfig(alpha=0.5, beta=0.5))
            wbce_dice = losses.weighted_bce(p, y) + losses.dice_loss(p, y)
            hinge_boundary = losses.squared_hinge(p, y) + losses.boundary_loss(p, phi)
            if float(first) != float(wbce_dice) or float(second) != float(hinge_boundary):
                exact_failures += 1
            worst_affinity = max(worst_affinity, abs(float(mid) - 0.5 * (float(first) + float(second))))
        passed = exact_failures == 0 and worst_affinity <= self.tolerance
        return self._result(
            passed,
            worst_affinity,
            f"{exact_failures} inexact reductions, affinity residual {worst_affinity:.2e}",
            self.instances,
            inexact_reductions=exact_failures,
        )


class DistanceMapOracle(BaseCheck):
    """signed_distance_map equals the exhaustive nearest-opposite-pixel search."""

    name = "distance_map_oracle"
    suite = CheckScope.LOSSES
    tolerance = 0.0
    hand_cases = (
        ([[0, 1, 0]], [[1.0, -1.0, 1.0]]),
        ([[0, 0, 1, 1, 0]], [[2.0, 1.0, -1.0, -1.0, 1.0]]),
    )

    def __init__(self, instances: int = 100):
        self.instances = instances

    def run(self, seed: int = 0) -> CheckResult:
        rng = np.random.default_rng(seed)
        mismatches: List[str] = []
        for mask, expected in self.hand_cases:
            got = signed_distance_map(np.array(mask, dtype=np.uint8)).phi
            if not np.array_equal(got, np.array(expected)):
                mismatches.append(f"hand case {mask}")
        for i in range(self.instances):
            shape = (int(rng.integers(1, 17)), int(rng.integers(1, 17)))
            mask = _binary(rng, shape, rng.uniform(0.0, 1.0)).astype(np.uint8)
            if not np.array_equal(signed_distance_map(mask).phi, brute_force_signed_distance(mask)):
                mismatches.append(f"random mask {i} {shape}")
        details = "exact match" if not mismatches else "mismatch: " + ", ".join(mismatches[:5])
        return self._result(not mismatches, float(len(mismatches)), details, self.instances + len(self.hand_cases))


# ── Metrics suite ────────────────────────────────────────────────

def metric_pairs(rng: np.random.Generator, count: int = 200, size: int = 16) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Random binary pairs, including all-empty, all-full and one-empty cases."""
    pairs = []
    for i in range(count):
        if i % 25 == 0:
            pairs.append((np.zeros((size, size), np.uint8), np.zeros((size, size), np.uint8)))
        elif i % 25 == 1:
            pairs.append((np.ones((size, size), np.uint8), np.ones((size, size), np.uint8)))
        elif i % 25 == 2:
            pairs.append((np.ones((size, size), np.uint8), np.zeros((size, size), np.uint8)))
        else:
            pred = _binary(rng, (size, size), rng.uniform(0.0, 1.0)).astype(np.uint8)
            gt = _binary(rng, (size, size), rng.uniform(0.0, 1.0)).astype(np.uint8)
            pairs.append((pred, gt))
    return pairs


class MetricOracleEquivalence(BaseCheck):
    """Dice, sensitivity and specificity equal the pixel-loop counts exactly."""

    name = "metric_oracle_equivalence"
    suite = CheckScope.METRICS
    tolerance = 0.0

    def __init__(self, instances: int = 200):
        self.instances = instances

    def run(self, seed: int = 0) -> CheckResult:
        rng = np.random.default_rng(seed)
        mismatches = 0
        for pred, gt in metric_pairs(rng, self.instances):
            c = confusion(pred, gt)
            if (dice_coefficient(c), sensitivity(c), specificity(c)) != brute_force_metrics(pred, gt):
                mismatches += 1
        return self._result(mismatches == 0, float(mismatches), f"{mismatches} mismatching pairs", self.instances)


class MetricSymmetryCheck(BaseCheck):
    """Dice is symmetric; sensitivity(pred, gt) equals specificity of the complements."""

    name = "metric_symmetry"
    suite = CheckScope.METRICS
    tolerance = 0.0

    def __init__(self, instances: int = 200):
        self.instances = instances

    def run(self, seed: int = 0) -> CheckResult:
        rng = np.random.default_rng(seed)
        violations = 0
        for pred, gt in metric_pairs(rng, self.instances):
            if dice_coefficient(confusion(pred, gt)) != dice_coefficient(confusion(gt, pred)):
                violations += 1
            if sensitivity(confusion(pred, gt)) != specificity(confusion(1 - pred, 1 - gt)):
                violations += 1
        return self._result(violations == 0, float(violations), f"{violations} violations", self.instances)


class ThresholdMonotonicityCheck(BaseCheck):
    """Raising the threshold never increases tp and never decreases tn."""

    name = "threshold_monotonicity"
    suite = CheckScope.METRICS
    tolerance = 0.0

    def __init__(self, instances: int = 50):
        self.instances = instances

    def run(self, seed: int = 0) -> CheckResult:
        rng = np.random.default_rng(seed)
        thresholds = np.linspace(0.05, 0.95, 19)
        violations = 0
        for _ in range(self.instances):
            probs = rng.random((16, 16))
            gt = _binary(rng, (16, 16), 0.3).astype(np.uint8)
            counts = [confusion((probs > t).astype(np.uint8), gt) for t in thresholds]
            for prev, cur in zip(counts, counts[1:]):
                violations += int(cur.tp > prev.tp) + int(cur.tn < prev.tn)
        return self._result(violations == 0, float(violations), f"{violations} violations", self.instances)


# ── Gates suite ──────────────────────────────────────────────────

def _random_gate(rng: np.random.Generator, index: int) -> Tuple[AttentionGate, torch.Tensor, torch.Tensor]:
    torch.manual_seed(index)
    skip_ch, gate_ch = int(rng.integers(1, 33)), int(rng.integers(1, 33))
    size = int(rng.integers(1, 17))
    batch = int(rng.integers(1, 4))
    norm = "batch" if index % 2 == 0 else "none"
    gate = AttentionGate(skip_ch, gate_ch, norm=norm).double().eval()
    generator = torch.Generator().manual_seed(index)
    skip = torch.randn(batch, size, size, skip_ch, generator=generator, dtype=torch.float64)
    signal = torch.randn(batch, size, size, gate_ch, generator=generator, dtype=torch.float64)
    return gate, skip, signal


class GateCoefficientRange(BaseCheck):
    """Gate coefficients stay strictly inside (0, 1) for random parameters and inputs."""

    name = "gate_coefficient_range"
    suite = CheckScope.GATES

    def __init__(self, instances: int = 100):
        self.instances = instances

    def run(self, seed: int = 0) -> CheckResult:
        rng = np.random.default_rng(seed)
        out_of_range, lo, hi = 0, 1.0, 0.0
        with torch.no_grad():
            for i in range(self.instances):
                gate, skip, signal = _random_gate(rng, seed + i)
                a = attention_coefficients(skip, signal, gate)
                lo, hi = min(lo, float(a.min())), max(hi, float(a.max()))
                out_of_range += int(bool((a <= 0).any() or (a >= 1).any()))
        return self._result(
            out_of_range == 0,
            float(out_of_range),
            f"coefficients in [{lo:.4f}, {hi:.4f}]",
            self.instances,
        )


class GateOutputShape(BaseCheck):
    """Gated output always has the skip connection's shape."""

    name = "gate_output_shape"
    suite = CheckScope.GATES

    def __init__(self, instances: int = 100):
        self.instances = instances

    def run(self, seed: int = 0) -> CheckResult:
        rng = np.random.default_rng(seed)
        wrong = 0
        with torch.no_grad():
            for i in range(self.instances):
                gate, skip, signal = _random_gate(rng, seed + i)
                wrong += int(attention_gate(skip, signal, gate).shape != skip.shape)
        return self._result(wrong == 0, float(wrong), f"{wrong} shape mismatches", self.instances)


class ZeroParameterGate(BaseCheck):
    """With every gate parameter zero the gate halves the skip connection."""

    name = "gate_zero_parameters"
    suite = CheckScope.GATES
    tolerance = GATE_ZERO_TOLERANCE

    def run(self, seed: int = 0) -> CheckResult:
        generator = torch.Generator().manual_seed(seed)
        worst = 0.0
        with torch.no_grad():
            for norm in ("none", "batch"):
                gate = AttentionGate(8, 16, norm=norm).eval()
                for p in gate.parameters():
                    p.zero_()
                skip = torch.randn(2, 8, 8, 8, generator=generator)
                signal = torch.randn(2, 8, 8, 16, generator=generator)
                out = attention_gate(skip, signal, gate)
                worst = max(worst, float((out - 0.5 * skip).abs().max()))
        return self._result(worst <= self.tolerance, worst, f"max |out - skip/2| = {worst:.2e}", 2)


class GateCountCheck(BaseCheck):
    """Default network carries exactly four gates; the plain variant none."""

    name = "gate_count"
    suite = CheckScope.GATES

    def run(self, seed: int = 0) -> CheckResult:
        default = count_attention_gates(AttentionUNet(ModelConfig()))
        plain = count_attention_gates(AttentionUNet(ModelConfig(base_channels=8, attention=False)))
        passed = default == 4 and plain == 0
        return self._result(passed, float(default), f"default={default}, plain={plain}", 2)


class LevelShapeTrace(BaseCheck):
    """At every decoder level the skip and the upsampled gate share spatial dims."""

    name = "gate_level_shapes"
    suite = CheckScope.GATES

    def run(self, seed: int = 0) -> CheckResult:
        torch.manual_seed(seed)
        model = AttentionUNet(ModelConfig(base_channels=8)).eval()
        traces = trace_levels(model, torch.rand(1, 32, 32, 1))
        bad = [t.level for t in traces if t.skip_shape[0] != t.gate_shape[0] or t.skip_shape[2:] != t.gate_shape[2:]]
        expected_sizes = [4, 8, 16, 32]
        sizes = [t.skip_shape[-1] for t in traces]
        passed = not bad and sizes == expected_sizes
        return self._result(passed, float(len(bad)), f"levels traced: {sizes}", len(traces))


# ── Registry ─────────────────────────────────────────────────────

def build_checks(scope: CheckScope) -> List[BaseCheck]:
    registry: Dict[CheckScope, Callable[[], List[BaseCheck]]] = {
        CheckScope.LOSSES: lambda: [
            GradientCheck("wbce", LossConfig(bce_weighting="hed"), label="wbce_hed"),
            GradientCheck("wbce", LossConfig(bce_weighting="uniform"), label="wbce_uniform"),
            GradientCheck("dice", LossConfig()),
            GradientCheck("hinge", LossConfig()),
            GradientCheck("boundary", LossConfig()),
            GradientCheck("bi_h", LossConfig(alpha=0.5, beta=0.5)),
            LossOracleEquivalence(),
            WorkedExamplesCheck(),
            CompositeReductionCheck(),
            DistanceMapOracle(),
        ],
        CheckScope.METRICS: lambda: [
            MetricOracleEquivalence(),
            MetricSymmetryCheck(),
            ThresholdMonotonicityCheck(),
        ],
        CheckScope.GATES: lambda: [
            GateCoefficientRange(),
            GateOutputShape(),
            ZeroParameterGate(),
            GateCountCheck(),
            LevelShapeTrace(),
        ],
    }
    return [check for suite in scope.suites() for check in registry[suite]()]


def run_checks(scope: CheckScope = CheckScope.ALL, seed: int = 0) -> CheckSuiteSummary:
    """Run every check in `scope` with deterministic kernels."""
    scope = CheckScope(scope)
    seed_everything(seed, deterministic=True)
    started = time.perf_counter()
    results: List[CheckResult] = []
    for check in build_checks(scope):
        try:
            result = check.run(seed)
        except Exception as e:
            logger.error("check_errored", check=check.name, error=str(e))
            result = check._result(False, float("nan"), f"error: {e}", 0)
        logger.info("check_complete", check=result.check_name, passed=result.passed, observed=result.observed)
        results.append(result)
    summary = CheckSuiteSummary(scope=scope, results=results, elapsed_s=time.perf_counter() - started)
    logger.info("checks_complete", scope=scope.value, passed=summary.passed, failed=summary.failed)
    return summary
