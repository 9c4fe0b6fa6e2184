"""
Verification and Reporting Suite.

- Oracle check suites (losses, metrics, attention gates) comparing the
  vectorized implementation with independent brute-force references
- Table-style metric reports with the published reference figures alongside
- Loss-preset ablation runner

Usage:
    python -m cli check all
    python -m cli ablate --data synth://200x64 --epochs 20
"""

# Lazy imports to avoid loading torch on package import
def __getattr__(name):
    if name == "run_checks":
        from evals.checks import run_checks
        return run_checks
    elif name == "run_ablation":
        from evals.ablation import run_ablation
        return run_ablation
    elif name == "write_metrics_report":
        from evals.report import write_metrics_report
        return write_metrics_report
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")

__all__ = [
    "run_checks",
    "run_ablation",
    "write_metrics_report",
]
