import csv
import json

import numpy as np
import pytest

from netembed.harness.reports import CheckResult, VerificationReport, clean, dumps, write_rows, write_summary


def test_upper_and_lower_checks() -> None:
    """Upper checks need worst <= bound, lower checks worst >= bound."""
    upper = CheckResult("round_preserving", 2.0, 1.5, 10)
    assert upper.slack == 0.5 and upper.passed
    lower = CheckResult("antipodal", 0.1, 0.05, 10, direction="lower")
    assert lower.slack == pytest.approx(-0.05)
    assert not lower.passed
    assert CheckResult("edge", 1.0, 1.0 + 1e-9, 1).passed
    assert not CheckResult("strict", 1.0, 1.0 + 1e-9, 1, tolerance=0.0).passed


def test_not_applicable_and_failure() -> None:
    """Skipped and crashed checks never pass and have no slack."""
    skipped = CheckResult.not_applicable("degree", "audit failed")
    assert not skipped.passed and not skipped.applicable and skipped.slack is None
    crashed = CheckResult.failure("gluing", "boom")
    assert not crashed.passed and crashed.applicable
    assert crashed.to_dict()["detail"] == {"error": "boom"}


def test_clean_makes_json_types() -> None:
    """numpy values unwrap and non-finite floats become strings."""
    data = clean({"a": np.float64(1.5), "b": np.array([1, 2]), "c": float("inf"), 3: (np.int64(4),)})
    assert data == {"a": 1.5, "b": [1, 2], "c": "inf", "3": [4]}
    assert json.loads(dumps({"x": np.nan}))["x"] == "nan"


def test_summary_and_rows_are_written(tmp_path) -> None:
    """The summary is <subcommand>.json; rows are CSV with full float precision."""
    report = VerificationReport({"name": "demo"}, "net-check", [CheckResult("net_cover", 3.0, 0.7, 4)], 12.5)
    path = write_summary(report, tmp_path)
    assert path.name == "net-check.json"
    written = json.loads(path.read_text())
    assert written["pass"] is True and "wall_ms" not in written
    assert written["checks"][0]["slack"] == pytest.approx(2.3)
    timed = json.loads(write_summary(report, tmp_path / "timed", include_timing=True).read_text())
    assert timed["wall_ms"] == 12.5

    rows = write_rows(tmp_path / "rows.csv", ["y0", "distance"], [[0.1, np.float64(1.0) / 3.0]])
    with open(rows) as fh:
        header, row = list(csv.reader(fh))
    assert header == ["y0", "distance"]
    assert float(row[1]) == 1.0 / 3.0


def test_empty_report_passes() -> None:
    """A subcommand with nothing to check passes."""
    assert VerificationReport({}, "directions").passed
