"""
Verification Schema.

Result types for the oracle check suites.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List

from src.utils import now_iso


class CheckScope(str, Enum):
    """Check suites selectable from the command line."""
    LOSSES = "losses"
    METRICS = "metrics"
    GATES = "gates"
    ALL = "all"

    def suites(self) -> List["CheckScope"]:
        if self is CheckScope.ALL:
            return [CheckScope.LOSSES, CheckScope.METRICS, CheckScope.GATES]
        return [self]


@dataclass
class CheckResult:
    """Outcome of one check."""
    check_name: str
    suite: CheckScope
    passed: bool
    observed: float  # worst error / violation count seen
    tolerance: float
    details: str
    instances: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "check_name": self.check_name,
            "suite": self.suite.value,
            "passed": self.passed,
            "observed": self.observed,
            "tolerance": self.tolerance,
            "details": self.details,
            "instances": self.instances,
            "metadata": self.metadata,
        }


@dataclass
class CheckSuiteSummary:
    """Summary of a check run."""
    scope: CheckScope
    results: List[CheckResult]
    elapsed_s: float = 0.0
    timestamp: str = field(default_factory=now_iso)

    @property
    def passed(self) -> int:
        return sum(1 for r in self.results if r.passed)

    @property
    def failed(self) -> int:
        return len(self.results) - self.passed

    @property
    def all_passed(self) -> bool:
        return bool(self.results) and self.failed == 0

    def by_suite(self) -> Dict[str, Dict[str, int]]:
        out: Dict[str, Dict[str, int]] = {}
        for r in self.results:
            entry = out.setdefault(r.suite.value, {"total": 0, "passed": 0})
            entry["total"] += 1
            entry["passed"] += int(r.passed)
        return out

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "scope": self.scope.value,
            "total": len(self.results),
            "passed": self.passed,
            "failed": self.failed,
            "all_passed": self.all_passed,
            "elapsed_s": self.elapsed_s,
            "by_suite": self.by_suite(),
            "results": [r.to_dict() for r in self.results],
            "timestamp": self.timestamp,
        }
