"""
Tests for the oracle check suites and report rendering.
"""

from __future__ import annotations

import pytest
import torch

from evals.checks import GradientCheck, build_checks, run_checks, worked_examples
from evals.datasets import load_reference_table, reference_for_preset
from evals.report import ReportRow, format_check_summary, format_table, metrics_table
from evals.schema import CheckScope
from src.config import LossConfig
from src.metrics import MetricsReport, sample_metrics


@pytest.fixture(autouse=True)
def restore_nondeterministic_kernels():
    yield
    torch.use_deterministic_algorithms(False)


class TestSuites:

    @pytest.mark.parametrize("scope", [CheckScope.LOSSES, CheckScope.METRICS, CheckScope.GATES])
    def test_suite_passes(self, scope):
        summary = run_checks(scope, seed=0)
        failing = [r.to_dict() for r in summary.results if not r.passed]
        assert summary.all_passed, failing
        assert set(summary.by_suite()) == {scope.value}

    def test_all_scope_covers_every_suite(self):
        names = [c.name for c in build_checks(CheckScope.ALL)]
        assert len(names) == len(set(names))
        assert {"grad_bi_h", "metric_oracle_equivalence", "gate_count"} <= set(names)

    def test_worked_examples_cover_every_component(self):
        assert {example[1] for example in worked_examples()} >= {"wbce", "dice", "hinge", "boundary", "bi_h"}

    def test_package_exports_resolve_lazily(self):
        import evals
        from evals.ablation import run_ablation
        from evals.report import write_metrics_report

        assert evals.run_checks is run_checks
        assert evals.run_ablation is run_ablation
        assert evals.write_metrics_report is write_metrics_report
        with pytest.raises(AttributeError):
            evals.not_exported


class TestMutations:

    def test_sign_flipped_boundary_fails_gradient_check(self, monkeypatch):
        import src.losses as losses
        original = losses.boundary_loss
        monkeypatch.setattr(losses, "boundary_loss", lambda pred, sdm: -original(pred, sdm))

        assert not GradientCheck("boundary", LossConfig(), instances=3).run(0).passed
        assert not GradientCheck("bi_h", LossConfig(), instances=3).run(0).passed
        assert GradientCheck("dice", LossConfig(), instances=3).run(0).passed

    def test_check_exception_becomes_failure(self, monkeypatch):
        monkeypatch.setattr(GradientCheck, "run", lambda self, seed=0: 1 / 0)
        summary = run_checks(CheckScope.LOSSES)
        errored = [r for r in summary.results if r.check_name.startswith("grad_")]
        assert errored and all(not r.passed and r.details.startswith("error:") for r in errored)
        assert not summary.all_passed


class TestReports:

    def test_table_header_and_alignment(self):
        table = format_table([ReportRow("Attention U-Net", 0.89471, 0.7377, 0.99971)])
        header, rule, row = table.splitlines()
        assert "Dice | Sensitivity | Specificity" in header
        assert set(rule) <= {"-", "+"}
        assert row.endswith("0.9997")
        assert "0.8947" in row
        assert len(header) == len(row)

    def test_metrics_table_with_reference(self):
        report = MetricsReport.from_samples(
            [sample_metrics("a", "a", [[1, 0]], [[1, 0]])], threshold=0.5
        )
        lines = metrics_table(report, "U-Net", include_reference=True).splitlines()
        assert lines[2].startswith("U-Net ")
        assert lines[3].startswith("U-Net (macro)")
        assert any("(reference)" in line and "0.8947" in line for line in lines)

    def test_reference_tables(self):
        assert len(load_reference_table("loss_ablation")) == 4
        assert reference_for_preset("bi_h")["dice"] == pytest.approx(0.8947)
        with pytest.raises(KeyError):
            load_reference_table("nope")

    def test_check_summary_text(self):
        summary = run_checks(CheckScope.METRICS)
        text = format_check_summary(summary)
        assert "PASS" in text
        assert text.splitlines()[-1].startswith(f"{summary.passed}/{len(summary.results)} checks passed")
