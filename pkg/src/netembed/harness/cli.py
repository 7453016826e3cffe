"""
Command-line entrypoint.

``netembed <subcommand> --config scenario.yaml`` loads a scenario, runs
the requested verifiers and writes JSON summaries and CSV rows into the
output directory.  Logging goes to a rotating file under
``<out>/logs`` and to stderr.  The exit status is 0 when every check
passed, 1 when a check failed or was not applicable, and 2 when the
scenario could not be loaded.
"""

from __future__ import annotations

import argparse
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import List, Optional, Sequence

from ..errors import ConfigurationError
from .reports import VerificationReport
from .runner import SUBCOMMANDS, VerificationManager, default_threads
from .scenario import load_scenario

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def configure_logging(out_dir: Path, verbose: bool = False) -> None:
    log_dir = out_dir / "logs"
    log_dir.mkdir(parents=True, exist_ok=True)
    fmt = logging.Formatter(LOG_FORMAT)
    handler = RotatingFileHandler(log_dir / "netembed.log", maxBytes=1_500_000, backupCount=3)
    handler.setFormatter(fmt)
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(fmt)
    console.setLevel(logging.DEBUG if verbose else logging.WARNING)
    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    for existing in list(root_logger.handlers):
        if getattr(existing, "_netembed", False):
            root_logger.removeHandler(existing)
            existing.close()
    for h in (handler, console):
        setattr(h, "_netembed", True)
        root_logger.addHandler(h)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="netembed",
        description="Verify the round-preserving map Phi and its companion checks on a scenario",
    )
    ap.add_argument("subcommand", choices=SUBCOMMANDS, help="Verifier to run")
    ap.add_argument("--config", required=True, help="Scenario YAML file")
    ap.add_argument("--threads", type=int, default=None, help="Worker threads (default: NETEMBED_THREADS or CPUs)")
    ap.add_argument("--out", default=None, help="Output directory (default: results/<scenario name>)")
    ap.add_argument("--seed", type=int, default=None, help="Override sampling.seed")
    ap.add_argument("--verbose", action="store_true", help="Echo debug logging to stderr")
    ap.add_argument("--timing", action="store_true", help="Add wall_ms to the JSON summaries")
    return ap


def _print_summary(reports: List[VerificationReport]) -> None:
    for report in reports:
        if report.subcommand == "all":
            continue
        for check in report.checks:
            status = "pass" if check.passed else ("n/a" if not check.applicable else "FAIL")
            slack = "" if check.slack is None else f" slack={check.slack:.3e}"
            print(f"{report.subcommand:<11} {check.name:<28} {status}{slack}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.config, seed=args.seed, output_dir=args.out)
    except ConfigurationError as exc:
        print(f"netembed: invalid scenario {args.config}:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_CONFIG

    configure_logging(scenario.output_dir, args.verbose)
    threads = args.threads if args.threads is not None else default_threads()
    logger.info("running %s on %s with %d threads", args.subcommand, scenario.name, threads)
    mgr = VerificationManager(scenario, threads, timing=args.timing)
    try:
        reports = mgr.run(args.subcommand)
    except Exception as exc:
        logger.exception("run aborted: %s", exc)
        return EXIT_FAILED
    _print_summary(reports)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
