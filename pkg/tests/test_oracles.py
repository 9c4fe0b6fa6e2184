"""
Tests for the brute-force references and the gradient checker.
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from src.config import LossConfig
from src.oracles import (
    GradCheckReport,
    OracleError,
    brute_force_metrics,
    brute_force_signed_distance,
    finite_diff_grad,
    grad_check,
    tiny_loss_oracle,
)


class TestFiniteDifferences:

    def test_mean_of_two_by_two(self):
        grad = finite_diff_grad(lambda p: float(p.mean()), np.zeros((2, 2)))
        np.testing.assert_allclose(grad, np.full((2, 2), 0.25), atol=1e-9)

    def test_boundary_gradient_is_phi_over_n(self, rng):
        phi = rng.normal(size=(4, 4))
        pred = rng.uniform(0.1, 0.9, size=(4, 4))
        grad = finite_diff_grad(lambda p: tiny_loss_oracle("boundary", p, phi), pred)
        np.testing.assert_allclose(grad, phi / 16, atol=1e-8)

    def test_dice_matches_analytic(self, rng):
        pred = rng.uniform(0.1, 0.9, size=(3, 3))
        y = (rng.random((3, 3)) < 0.5).astype(float)
        inter, total = float((pred * y).sum()), float(pred.sum() + y.sum())
        analytic = -(2 * y * (total + 1) - (2 * inter + 1)) / (total + 1) ** 2
        grad = finite_diff_grad(lambda p: tiny_loss_oracle("dice", p, y), pred)
        np.testing.assert_allclose(grad, analytic, atol=1e-8)

    def test_non_finite_names_the_pixel(self):
        def loss(p):
            return math.inf if p[1, 0] > 0.5 else float(p.sum())
        with pytest.raises(OracleError, match=r"\(1, 0\)"):
            finite_diff_grad(loss, np.array([[0.0, 0.0], [0.5, 0.0]]))

    def test_rejects_bad_step(self):
        with pytest.raises(OracleError):
            finite_diff_grad(lambda p: 0.0, np.zeros(2), step=0.0)


class TestBruteForceMetrics:

    def test_mixed(self):
        assert brute_force_metrics(np.array([1, 1, 0, 0]), np.array([1, 0, 1, 0])) == (0.5, 0.5, 0.5)

    def test_both_empty(self):
        assert brute_force_metrics(np.zeros(4), np.zeros(4)) == (1.0, 1.0, 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(OracleError):
            brute_force_metrics(np.zeros(3), np.zeros(4))


class TestBruteForceDistance:

    def test_hand_case(self):
        assert brute_force_signed_distance(np.array([[0, 1, 0]])).tolist() == [[1.0, -1.0, 1.0]]

    def test_diagonal(self):
        phi = brute_force_signed_distance(np.array([[1, 0], [0, 0]]))
        assert phi[1, 1] == pytest.approx(math.sqrt(2))

    def test_single_class(self):
        assert not brute_force_signed_distance(np.ones((3, 3))).any()


class TestTinyLossOracle:

    def test_wbce_half(self):
        value = tiny_loss_oracle("wbce", np.full((1, 4), 0.5), np.array([[0, 0, 1, 1]]))
        assert value == pytest.approx(0.5 * math.log(2), abs=1e-9)

    def test_hinge_half(self):
        assert tiny_loss_oracle("hinge", np.full((2, 2), 0.5), np.ones((2, 2))) == pytest.approx(1.0)

    def test_dice_perfect(self):
        y = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert tiny_loss_oracle("dice", y, y) == pytest.approx(0.0)

    def test_bi_h_worked_example(self):
        value = tiny_loss_oracle(
            "bi_h",
            np.full((1, 4), 0.5),
            (np.array([[0, 0, 1, 1]]), np.array([[2.0, 1.0, -1.0, -1.0]])),
            LossConfig(alpha=0.5, beta=0.5),
        )
        assert value == pytest.approx(0.93579, abs=1e-5)

    def test_unknown_component(self):
        with pytest.raises(OracleError, match="unknown loss component"):
            tiny_loss_oracle("tversky", np.zeros((2, 2)), np.zeros((2, 2)))

    def test_grid_limit(self):
        with pytest.raises(OracleError, match="8x8"):
            tiny_loss_oracle("hinge", np.zeros((9, 9)), np.zeros((9, 9)))

    def test_batched_grids_allowed(self):
        assert tiny_loss_oracle("hinge", np.full((3, 8, 8), 0.5), np.zeros((3, 8, 8))) == pytest.approx(1.0)


class TestGradCheck:

    @pytest.mark.parametrize("component", ["wbce", "dice", "hinge", "boundary", "bi_h"])
    def test_components_pass(self, rng, component):
        pred = rng.uniform(0.05, 0.95, size=(2, 8, 8))
        target = (rng.random((2, 8, 8)) < 0.4).astype(float)
        target[:, 0, 0], target[:, 0, 1] = 1.0, 0.0
        sdm = rng.normal(0.0, 3.0, size=(2, 8, 8))
        report = grad_check(component, pred, target, sdm)
        assert report.passed, report.to_dict()

    def test_report_serializes(self):
        report = GradCheckReport("dice", 1e-9, 2e-8, (8, 8), 1e-5)
        payload = json.loads(json.dumps(report.to_dict()))
        assert payload["grid_shape"] == [8, 8]
        assert payload["passed"] is True
