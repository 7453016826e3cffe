"""
Check results and report artifacts.

Every verifier produces :class:`CheckResult` records; a subcommand
collects them into a :class:`VerificationReport` that is written as one
JSON summary, next to CSV files with the per-sample rows.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import ujson

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    """One verified inequality; ``slack`` must not fall below ``-tolerance``.

    ``upper`` checks need ``worst <= bound``, ``lower`` checks need ``worst >= bound``.
    """

    name: str
    bound: Optional[float]
    worst: Optional[float]
    samples: int
    tolerance: float = 1e-7
    direction: str = "upper"
    applicable: bool = True
    passed: Optional[bool] = None
    detail: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.passed is None:
            self.passed = self.applicable and self.slack is not None and self.slack >= -self.tolerance

    @property
    def slack(self) -> Optional[float]:
        if self.bound is None or self.worst is None:
            return None
        if self.direction == "lower":
            return self.worst - self.bound
        return self.bound - self.worst

    @classmethod
    def not_applicable(cls, name: str, reason: str) -> "CheckResult":
        return cls(name, None, None, 0, applicable=False, passed=False, detail={"reason": reason})

    @classmethod
    def failure(cls, name: str, message: str) -> "CheckResult":
        return cls(name, None, None, 0, passed=False, detail={"error": message})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "bound": self.bound,
            "worst": self.worst,
            "slack": self.slack,
            "samples": self.samples,
            "pass": bool(self.passed),
            "applicable": self.applicable,
            "detail": self.detail,
        }


@dataclass
class VerificationReport:
    scenario: Dict[str, Any]
    subcommand: str
    checks: List[CheckResult] = field(default_factory=list)
    wall_ms: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        out = {
            "scenario": self.scenario,
            "subcommand": self.subcommand,
            "checks": [c.to_dict() for c in self.checks],
            "pass": self.passed,
        }
        if include_timing:
            out["wall_ms"] = self.wall_ms
        return out


def clean(value: Any) -> Any:
    """Plain JSON types; numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return clean(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def dumps(data: Dict[str, Any]) -> str:
    return ujson.dumps(clean(data), sort_keys=True, indent=2)


def write_summary(report: VerificationReport, out_dir: Path, include_timing: bool = False) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{report.subcommand}.json"
    path.write_text(dumps(report.to_dict(include_timing)) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    logger.info("wrote %s", path)
    return path
