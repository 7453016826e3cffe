"""
Verification manager.

:class:`VerificationManager` owns the objects built for one scenario
(simplex-map evaluator, glued map, net image index) and runs the
verifiers behind each CLI subcommand.  Sample loops run on a thread
pool; results keep sample order, so summaries are deterministic for a
given seed.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
import threading
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from ..directions import DirectionSampler, DriftParams, injectivity_experiment, local_direction_map
from ..errors import NetEmbedError
from ..gluedmap import GluedMap
from ..manifold import oracle_distance
from ..netlattice import (
    NetImageIndex,
    ball_samples,
    distortion_audit,
    gamma,
    lattice_distance_bracket,
    nearest_lattice_set,
    refinement_audit,
)
from ..simplexmap import SimplexMapEvaluator, continuity_probe, verify_condition_iii, verify_face_consistency
from ..triangulation import KuhnSimplex, adjacent_pairs, block_simplices
from .reports import CheckResult, VerificationReport, dumps, write_rows, write_summary
from .scenario import Scenario

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("audit", "phi-verify", "net-check", "degree", "directions", "all")
DOWNSTREAM = ("phi-verify", "net-check", "degree", "directions")
THREADS_ENV = "NETEMBED_THREADS"

FACE_TOL = 1e-6
ANTIPODAL_MIN = 0.1
ODDNESS_TOL = 1e-3
ORACLE_TOL = 1e-6


def default_threads() -> int:
    """``NETEMBED_THREADS`` if set, otherwise the machine's parallelism."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("ignoring invalid %s=%r", THREADS_ENV, raw)
    return os.cpu_count() or 1


def _salt(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def _row(*parts: Any) -> List[Any]:
    out: List[Any] = []
    for part in parts:
        if isinstance(part, (list, tuple, np.ndarray)):
            out.extend(float(v) for v in part)
        else:
            out.append(part)
    return out


class VerificationManager:
    """Runs the verifiers of one scenario and writes their reports."""

    def __init__(self, scenario: Scenario, threads: Optional[int] = None, timing: bool = False) -> None:
        self.scenario = scenario
        self.threads = max(1, int(threads or default_threads()))
        self.timing = timing
        self._timings: List[List[Any]] = []
        self._lock = threading.RLock()
        self._state: Dict[str, Any] = {"current": "", "completed": [], "failed": []}
        self._pool: Optional[ThreadPoolExecutor] = None
        self._index: Optional[NetImageIndex] = None
        self._glued: Optional[GluedMap] = None
        self.evaluator = SimplexMapEvaluator(scenario.solver, scenario.net, scenario.embedding, scenario.lattice)

    # ------------------------------------------------------------------
    # Shared objects
    @property
    def image_index(self) -> NetImageIndex:
        if self._index is None:
            sc = self.scenario
            probe = ball_samples(np.zeros(sc.dimension), float(sc.section("sampling")["radius"]), 64, sc.seed)
            self._index = NetImageIndex(sc.net, sc.embedding, sc.solver, margin=1.0, ratio_samples=probe)
        return self._index

    @property
    def glued(self) -> GluedMap:
        if self._glued is None:
            self._glued = GluedMap(self.evaluator, self.image_index)
        return self._glued

    def status(self) -> Dict[str, Any]:
        with self._lock:
            return {
                "scenario": self.scenario.name,
                "threads": self.threads,
                "current": self._state["current"],
                "completed": list(self._state["completed"]),
                "failed": list(self._state["failed"]),
            }

    # ------------------------------------------------------------------
    # Helpers
    def _map(self, fn: Callable[[Any], Any], items: Iterable[Any]) -> List[Any]:
        if self._pool is None or self.threads == 1:
            return list(map(fn, items))
        return list(self._pool.map(fn, items))

    def _rng(self, label: str) -> np.random.Generator:
        return np.random.default_rng([self.scenario.seed, _salt(label)])

    def _seed(self, label: str) -> int:
        return int(self._rng(label).integers(2 ** 31))

    def _ball(self, count: int, label: str, radius: Optional[float] = None) -> np.ndarray:
        r = float(radius if radius is not None else self.scenario.section("sampling")["radius"])
        return ball_samples(np.zeros(self.scenario.dimension), r, count, self._seed(label))

    def _core_cube(self, count: int, label: str) -> np.ndarray:
        half = float(self.scenario.section("sampling")["net_check_half_width"])
        unit = qmc.Halton(d=self.scenario.dimension, scramble=True, seed=self._seed(label)).random(count)
        return (2.0 * unit - 1.0) * half

    def _random_simplices(self, count: int, label: str) -> List[KuhnSimplex]:
        sc = self.scenario
        eps = sc.lattice.epsilon
        rng = self._rng(label)
        out = [KuhnSimplex((0,) * sc.dimension, tuple(range(sc.dimension)), eps)]
        for x in self._ball(max(count - 1, 0), label + "/anchors", 0.5 * float(sc.section("sampling")["radius"])):
            anchor = tuple(int(v) for v in np.floor(x / eps))
            perm = tuple(int(v) for v in rng.permutation(sc.dimension))
            out.append(KuhnSimplex(anchor, perm, eps))
        return out[:max(count, 1)]

    def _guard(self, name: str, fn: Callable[[], List[CheckResult]]) -> List[CheckResult]:
        try:
            return fn()
        except NetEmbedError as exc:
            logger.exception("check %s failed: %s", name, exc)
            return [CheckResult.failure(name, str(exc))]

    def _csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
        write_rows(self.scenario.output_dir / f"{name}.csv", header, rows)

    def _axes(self, prefix: str) -> List[str]:
        return [f"{prefix}{k}" for k in range(self.scenario.dimension)]

    # ------------------------------------------------------------------
    # Dispatch
    def run(self, subcommand: str) -> List[VerificationReport]:
        if subcommand not in SUBCOMMANDS:
            raise ValueError(f"Unknown command: {subcommand}")
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            self._pool = pool
            try:
                if subcommand == "all":
                    return self._run_all()
                return [self._run_one(subcommand)]
            finally:
                self._pool = None

    def _handler(self, name: str) -> Callable[[], List[CheckResult]]:
        if name == "audit":
            return self.audit
        elif name == "phi-verify":
            return self.phi_verify
        elif name == "net-check":
            return self.net_check
        elif name == "degree":
            return self.degree
        elif name == "directions":
            return self.directions
        raise ValueError(f"Unknown command: {name}")

    def _finish(self, name: str, checks: List[CheckResult], started: float) -> VerificationReport:
        wall_ms = (time.perf_counter() - started) * 1000.0
        report = VerificationReport(self.scenario.echo(), name, checks, wall_ms)
        write_summary(report, self.scenario.output_dir, include_timing=self.timing)
        with self._lock:
            self._timings.append([name, wall_ms])
            self._csv("timings", ["subcommand", "wall_ms"], list(self._timings))
            self._state["current"] = ""
            self._state["completed"].append(name)
            if not report.passed:
                self._state["failed"].append(name)
        logger.info("%s finished in %.0f ms: %s", name, wall_ms, "pass" if report.passed else "FAIL")
        return report

    def _run_one(self, name: str) -> VerificationReport:
        with self._lock:
            self._state["current"] = name
        started = time.perf_counter()
        return self._finish(name, self._handler(name)(), started)

    def _run_all(self) -> List[VerificationReport]:
        started = time.perf_counter()
        reports = [self._run_one("audit")]
        if reports[0].passed:
            reports.extend(self._run_one(name) for name in DOWNSTREAM)
        else:
            logger.warning("isometry hypothesis violated; downstream checks are not applicable")
            for name in DOWNSTREAM:
                skipped = [CheckResult.not_applicable(name, "net embedding failed the isometry audit")]
                reports.append(self._finish(name, skipped, time.perf_counter()))
        combined = [c for r in reports for c in r.checks]
        reports.append(self._finish("all", combined, started))
        return reports

    # ------------------------------------------------------------------
    # audit
    def audit(self) -> List[CheckResult]:
        checks = self._guard("distortion", self._distortion)
        if self.scenario.metric.has_oracle:
            checks += self._guard("oracle_equivalence", self._oracle_equivalence)
        return checks

    def _distortion(self) -> List[CheckResult]:
        sc = self.scenario
        threshold = float(sc.section("audit")["threshold"])
        points = sc.net.within(np.zeros(sc.dimension), float(sc.section("sampling")["audit_radius"]))
        # integrator distances, never the oracle
        report = distortion_audit(
            points, sc.solver.numeric(), sc.embedding, int(sc.section("budgets")["audit_pairs"]), sc.seed, self._map
        )
        violated = report.max_distortion > threshold
        if violated:
            logger.warning(
                "distortion %.3e exceeds %.3e: the embedding of the net is not isometric",
                report.max_distortion, threshold,
            )
        detail = {"worst_pair": report.worst_pair, "hypothesis_violated": violated, "solver": "numeric"}
        return [CheckResult("distortion", threshold, report.max_distortion, report.pairs, 0.0, detail=detail)]

    def _oracle_equivalence(self) -> List[CheckResult]:
        sc = self.scenario
        count = int(sc.section("budgets")["oracle_pairs"])
        pts = self._ball(2 * count, "oracle", float(sc.section("sampling")["audit_radius"]))
        numeric = sc.solver.numeric()

        def relative(k: int) -> float:
            a, b = pts[2 * k], pts[2 * k + 1]
            exact = oracle_distance(sc.metric, a, b)
            return abs(numeric.distance(a, b) - exact) / max(exact, 1e-12)

        errors = self._map(relative, range(count))
        return [CheckResult("oracle_equivalence", ORACLE_TOL, float(max(errors)), count, 0.0)]

    # ------------------------------------------------------------------
    # phi-verify
    def phi_verify(self) -> List[CheckResult]:
        checks: List[CheckResult] = []
        checks += self._guard("gamma_rounding", self._gamma_rounding)
        checks += self._guard("round_preserving", self._round_preserving)
        checks += self._guard("lower_bound", self._lower_bounds)
        checks += self._guard("condition_iii", self._condition_iii)
        checks += self._guard("face_consistency", self._face_consistency)
        checks += self._guard("gluing", self._gluing)
        checks += self._guard("continuity", self._continuity)
        checks += self._guard("lattice_bracket", self._lattice_bracket)
        return checks

    def _gamma_rounding(self) -> List[CheckResult]:
        sc = self.scenario
        lattice = sc.lattice
        count = int(sc.section("budgets")["gamma_points"])
        # multiples of eps/8 keep the grid exactly representable, halves included
        pts = self._rng("gamma").integers(-160, 161, size=(count, sc.dimension)) / 8.0 * lattice.epsilon
        image = gamma(pts, lattice)
        odd_violations = int(np.count_nonzero(np.any(gamma(-pts, lattice) != -image, axis=1)))
        outside = ties = tie_violations = 0
        for x, g in zip(pts[:1000], image[:1000]):
            nearest = nearest_lattice_set(x, lattice)
            if not any(np.allclose(g, s, atol=1e-12) for s in nearest):
                outside += 1
            if len(nearest) > 1:
                ties += 1
                # halved coordinates round toward zero: the unique minimal-norm member
                expected = min(nearest, key=lambda s: float(np.linalg.norm(s)))
                if not np.allclose(g, expected, atol=1e-12):
                    tie_violations += 1
        worst = float(np.max(np.linalg.norm(image - pts, axis=1)))
        bound = lattice.epsilon * math.sqrt(sc.dimension) / 2.0
        passed = worst <= bound + 1e-12 and odd_violations == 0 and tie_violations == 0 and outside == 0
        detail = {
            "odd_violations": odd_violations, "ties": ties, "tie_violations": tie_violations,
            "outside_nearest_set": outside,
        }
        return [CheckResult("gamma_rounding", bound, worst, count, 1e-12, passed=passed, detail=detail)]

    def _round_preserving(self) -> List[CheckResult]:
        xs = self._ball(int(self.scenario.section("budgets")["round_samples"]), "round")
        reports = self._map(self.glued.verify_round_preserving, list(xs))
        self._csv(
            "round_preserving",
            self._axes("x") + self._axes("phi") + ["bound", "observed", "slack"],
            (_row(x, r.image, r.bound, r.observed, r.slack) for x, r in zip(xs, reports)),
        )
        k = int(np.argmin([r.slack for r in reports]))
        detail = {"worst_x": xs[k], "anchor": reports[k].anchor}
        return [CheckResult("round_preserving", reports[k].bound, reports[k].observed, len(reports), detail=detail)]

    def _lower_bounds(self) -> List[CheckResult]:
        xs = list(self._ball(int(self.scenario.section("budgets")["lower_bound_samples"]), "lower"))
        lows = self._map(self.glued.lower_bound_check, xs)
        near = self._map(self.glued.gamma_proximity_check, xs)
        k = int(np.argmin([r.slack for r in lows]))
        j = int(np.argmin([r.slack for r in near]))
        return [
            CheckResult("lower_bound", lows[k].bound, lows[k].observed, len(xs), detail={"worst_x": xs[k]}),
            CheckResult("gamma_proximity", near[j].bound, near[j].observed, len(xs), detail={"worst_x": xs[j]}),
        ]

    def _condition_iii(self) -> List[CheckResult]:
        budgets = self.scenario.section("budgets")
        simplices = self._random_simplices(int(budgets["condition_simplices"]), "condition")
        reports = [
            verify_condition_iii(
                self.evaluator, s.vertex_indices, int(budgets["condition_samples"]), self.scenario.seed, self._map
            )
            for s in simplices
        ]
        k = int(np.argmin([r.slack for r in reports]))
        detail = {"worst_simplex": simplices[k].vertex_indices, "worst_lambda": reports[k].worst_lambda}
        samples = sum(r.samples for r in reports)
        return [CheckResult("condition_iii", reports[k].bound, reports[k].worst, samples, detail=detail)]

    def _face_consistency(self) -> List[CheckResult]:
        sc = self.scenario
        budgets = sc.section("budgets")
        rng = self._rng("faces")
        anchors = self._ball(int(budgets["face_pairs"]), "faces/anchors", 0.5 * float(sc.section("sampling")["radius"]))
        worst, worst_face, samples = 0.0, None, 0
        for k, x in enumerate(anchors):
            block = block_simplices(tuple(int(v) for v in np.floor(x / sc.lattice.epsilon)), 2, sc.lattice.epsilon)
            pairs = list(adjacent_pairs(block))
            s1, s2 = pairs[int(rng.integers(len(pairs)))]
            report = verify_face_consistency(
                self.evaluator, s1, s2, int(budgets["face_points"]), sc.seed + k, self._map
            )
            samples += report.samples
            if report.max_discrepancy >= worst:
                worst, worst_face = report.max_discrepancy, report.face
        return [CheckResult("face_consistency", FACE_TOL, worst, samples, 0.0, detail={"worst_face": worst_face})]

    def _gluing(self) -> List[CheckResult]:
        sc = self.scenario
        rng = self._rng("gluing")
        points = []
        for s in self._random_simplices(int(sc.section("budgets")["gluing_points"]), "gluing/simplices"):
            verts = np.delete(s.vertices(), int(rng.integers(sc.dimension + 1)), axis=0)
            points.append(rng.dirichlet(np.ones(sc.dimension)) @ verts)
        gaps = self._map(self.glued.gluing_discrepancy, points)
        return [CheckResult("gluing", FACE_TOL, float(max(gaps)), len(points), 0.0)]

    def _continuity(self) -> List[CheckResult]:
        sc = self.scenario
        budget = int(sc.section("budgets")["continuity_samples"])
        reports = [
            continuity_probe(self.evaluator, s.vertex_indices, budget, seed=sc.seed, mapper=self._map)
            for s in self._random_simplices(2, "continuity")
        ]
        worst = max(reports, key=lambda r: r.max_displacement / r.constant)
        samples = sum(r.samples for r in reports)
        return [CheckResult("continuity", worst.constant * worst.step, worst.max_displacement, samples, 0.0)]

    def _lattice_bracket(self) -> List[CheckResult]:
        sc = self.scenario
        count = int(sc.section("budgets")["bracket_pairs"])
        eps = sc.lattice.epsilon
        pts = np.rint(self._ball(2 * count, "bracket") / eps) * eps

        def bracket(k: int) -> Any:
            return lattice_distance_bracket(sc.solver, sc.net, sc.embedding, pts[2 * k], pts[2 * k + 1])

        reports = self._map(bracket, range(count))
        k = int(np.argmin([r.slack for r in reports]))
        observed = abs(reports[k].distance - reports[k].chart_distance)
        return [CheckResult("lattice_bracket", reports[k].bound, observed, count)]

    # ------------------------------------------------------------------
    # net-check
    def net_check(self) -> List[CheckResult]:
        checks = self._guard("net_cover", self._net_cover)
        checks += self._guard("refinement", self._refinement)
        return checks

    def _net_cover(self) -> List[CheckResult]:
        sc = self.scenario
        ys = self._core_cube(int(sc.section("budgets")["net_check_samples"]), "netcheck")
        found = self._map(self.image_index.nearest, list(ys))
        self._csv(
            "net_check",
            self._axes("y") + self._axes("q") + ["distance"],
            (_row(y, f.point, f.distance) for y, f in zip(ys, found)),
        )
        bound = 2.0 * sc.net.delta * sc.dimension
        worst = max(f.distance for f in found)
        detail = {"margin": bound - worst, "examined": sum(f.examined for f in found)}
        return [CheckResult("net_cover", bound, worst, len(found), 0.0, passed=worst < bound, detail=detail)]

    def _refinement(self) -> List[CheckResult]:
        sc = self.scenario
        report = refinement_audit(
            sc.net, np.zeros(sc.dimension), int(sc.section("budgets")["refinement_samples"]), self._seed("refine")
        )
        detail = {"radius": report.radius, "epsilon0": report.epsilon0}
        return [
            CheckResult(
                "refinement", sc.net.delta, report.refined_delta, report.samples, 0.0,
                passed=report.passed, detail=detail,
            )
        ]

    # ------------------------------------------------------------------
    # degree
    def degree(self) -> List[CheckResult]:
        checks: List[CheckResult] = []
        for r in self.scenario.section("degree")["radii"]:
            checks += self._guard(f"degree@{float(r):.4f}", lambda r=float(r): self._degree_at(r))
        checks += self._guard("surjectivity", self._surjectivity)
        return checks

    def _degree_at(self, r: float) -> List[CheckResult]:
        sc = self.scenario
        cfg = sc.section("degree")
        tag = f"{r:.4f}"
        report = self.glued.degree(r, int(cfg["resolution"]), int(cfg["level"]), sc.seed)
        anti = self.glued.antipodal_check(r, int(sc.section("budgets")["antipodal_samples"]), sc.seed, self._map)
        self._csv(
            f"antipodal_{tag}",
            self._axes("v") + ["angle", "distance_gap", "antipode_distance", "gamma_gap"],
            (_row(s.direction, s.angle, s.distance_gap, s.antipode_distance, s.gamma_gap) for s in anti.samples),
        )
        return [
            CheckResult(
                f"degree@{tag}", 1.0, float(abs(report.degree)), report.samples, 0.0,
                passed=abs(report.degree) == 1,
                detail={"degree": report.degree, "antipodal_gap": report.min_antipodal_gap},
            ),
            CheckResult(
                f"antipodal@{tag}", ANTIPODAL_MIN, anti.min_angle, len(anti.samples), 0.0, "lower",
                passed=anti.min_angle > ANTIPODAL_MIN and anti.separation_holds,
                detail={"separation_holds": anti.separation_holds},
            ),
            CheckResult(f"antipodal_gamma_gap@{tag}", 4.0 * sc.net.delta, anti.max_gamma_gap, len(anti.samples), 0.0),
        ]

    def _surjectivity(self) -> List[CheckResult]:
        sc = self.scenario
        budgets = sc.section("budgets")
        ys = self._core_cube(int(budgets["surjectivity_samples"]), "surjectivity")
        cubes = int(budgets["surjectivity_cubes"])
        reports = self._map(lambda y: self.glued.surjectivity_probe(y, cubes), list(ys))
        found = sum(1 for r in reports if r.found)
        detail = {
            "max_residual": max(r.residual for r in reports),
            "max_sphere_radius": max(r.sphere_radius for r in reports),
        }
        total = float(len(reports))
        return [CheckResult("surjectivity", total, float(found), len(reports), 0.0, "lower", detail=detail)]

    # ------------------------------------------------------------------
    # directions
    def directions(self) -> List[CheckResult]:
        if not self.scenario.section("directions")["enabled"]:
            logger.info("directions disabled for %s", self.scenario.name)
            return []
        checks = self._guard("direction_map", self._direction_map)
        checks += self._guard("injectivity", self._injectivity)
        return checks

    def _sampler(self) -> DirectionSampler:
        sc = self.scenario
        params = DriftParams.from_config(sc.section("directions"), 8.0 * max(sc.derived["R1"], 1.0))
        return DirectionSampler(sc.solver, sc.net, sc.embedding, params)

    def _direction_map(self) -> List[CheckResult]:
        sc = self.scenario
        cfg = sc.section("directions")
        base = sc.net.nu(np.asarray(cfg["base"], dtype=float))
        table = local_direction_map(self._sampler(), base, int(cfg["resolution"]), self._map)
        self._csv(
            "directions",
            self._axes("v") + self._axes("w") + ["oddness_defect", "trace_length"],
            (_row(e.direction, e.tangent, e.oddness_defect, e.trace_length) for e in table.entries),
        )
        count = len(table.entries)
        checks = [
            CheckResult(
                "direction_oddness", ODDNESS_TOL, table.max_oddness_defect, count, 0.0,
                detail={"converged": table.converged},
            ),
            CheckResult(
                "direction_separation", 0.5 * table.spacing, table.min_separation, count, 0.0, "lower",
                passed=table.injective_at_grid_scale,
            ),
        ]
        if sc.metric.family == "flat":
            checks.append(CheckResult("direction_identity", 1e-9, table.max_identity_defect, count, 0.0))
        return checks

    def _injectivity(self) -> List[CheckResult]:
        sc = self.scenario
        cfg = sc.section("directions")
        base = sc.net.nu(np.asarray(cfg["base"], dtype=float))
        report = injectivity_experiment(self._sampler(), self.image_index, base, cfg["u"], cfg["v"])
        out = sc.output_dir / "injectivity.json"
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(dumps(dataclasses.asdict(report)) + "\n", encoding="utf-8")
        detail = {
            "epsilon": report.epsilon,
            "T": report.horizon,
            "chart_distance": report.chart_distance,
            "witness_distance": report.witness_distance,
            "drift_holds": report.drift_holds,
        }
        return [
            CheckResult(
                "injectivity_bracket", report.delta_tilde, abs(report.chart_distance - report.horizon), 1, 0.0,
                passed=report.passed, detail=detail,
            )
        ]
