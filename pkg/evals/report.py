"""
Report Generation.

Aligned text tables in the published column layout
(Model | Dice | Sensitivity | Specificity), JSON emission, and rendering of
check-suite summaries.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import structlog

from evals.datasets import load_reference_table
from evals.schema import CheckSuiteSummary
from src.metrics import MetricsReport, MetricSummary


logger = structlog.get_logger(__name__)

METRIC_COLUMNS = ("Dice", "Sensitivity", "Specificity")
REFERENCE_SUFFIX = " (reference)"


@dataclass
class ReportRow:
    """One table row."""
    model: str
    dice: float
    sensitivity: float
    specificity: float

    @classmethod
    def from_summary(cls, model: str, summary: MetricSummary) -> "ReportRow":
        return cls(model, summary.dice, summary.sensitivity, summary.specificity)

    @classmethod
    def from_reference(cls, row: Dict[str, Any]) -> "ReportRow":
        return cls(
            row["model"] + REFERENCE_SUFFIX,
            float(row["dice"]),
            float(row["sensitivity"]),
            float(row["specificity"]),
        )

    def values(self) -> List[float]:
        return [self.dice, self.sensitivity, self.specificity]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def format_table(rows: Sequence[ReportRow]) -> str:
    """Render rows as an aligned table; metric headers are right-aligned over 4-decimal values.

    Args:
        rows: Table rows, in display order.

    Returns:
        The table text, one line per row after a header and a rule.
    """
    model_width = max([len("Model")] + [len(r.model) for r in rows])
    widths = [max(len(name), len("0.0000")) for name in METRIC_COLUMNS]

    def line(cells: Iterable[str], first: str) -> str:
        return " | ".join([first.ljust(model_width)] + [c.rjust(w) for c, w in zip(cells, widths)])

    lines = [line(METRIC_COLUMNS, "Model")]
    lines.append("-+-".join(["-" * model_width] + ["-" * w for w in widths]))
    for row in rows:
        lines.append(line((f"{v:.4f}" for v in row.values()), row.model))
    return "\n".join(lines)


def reference_rows(table: str) -> List[ReportRow]:
    return [ReportRow.from_reference(r) for r in load_reference_table(table)]


def metrics_table(report: MetricsReport, model_name: str, include_reference: bool = False) -> str:
    """Table-1 style text for one evaluated model (micro aggregate, then macro)."""
    rows = [
        ReportRow.from_summary(model_name, report.aggregate),
        ReportRow.from_summary(f"{model_name} (macro)", report.macro),
    ]
    if include_reference:
        rows.extend(reference_rows("comparison"))
    return format_table(rows)


def write_metrics_report(
    report: MetricsReport,
    output_dir: Path,
    model_name: str,
    include_reference: bool = False,
    extra: Optional[Dict[str, Any]] = None,
) -> List[Path]:
    """Save `metrics.json` and `metrics.txt`.

    Args:
        report: Evaluation result.
        output_dir: Destination directory (created if missing).
        model_name: Label for the table's Model column.
        include_reference: Append the published comparison rows to the text table.
        extra: Additional top-level JSON fields (e.g. checkpoint path).

    Returns:
        The saved file paths.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    payload = {"model": model_name, **(extra or {}), **report.to_dict()}
    json_path = output_dir / "metrics.json"
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)

    txt_path = output_dir / "metrics.txt"
    txt_path.write_text(metrics_table(report, model_name, include_reference) + "\n", encoding="utf-8")

    logger.info("report_saved", files=[str(json_path), str(txt_path)])
    return [json_path, txt_path]


def format_check_summary(summary: CheckSuiteSummary) -> str:
    """Per-check PASS/FAIL lines with observed value and tolerance."""
    name_width = max([len(r.check_name) for r in summary.results] + [len("check")])
    lines = [f"{'check'.ljust(name_width)}  status  {'observed':>10}  {'tolerance':>9}  details"]
    for r in summary.results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(
            f"{r.check_name.ljust(name_width)}  {status:<6}  {r.observed:>10.3g}  {r.tolerance:>9.1g}  {r.details}"
        )
    lines.append("")
    lines.append(
        f"{summary.passed}/{len(summary.results)} checks passed ({summary.scope.value}) in {summary.elapsed_s:.1f}s"
    )
    return "\n".join(lines)
