"""
The glued map ``Phi: R^n -> M`` and its verifiers.

``Phi`` is the union of the simplex maps of all Kuhn simplices of the
lattice.  The checkers here measure the inequalities that make ``Phi``
round-preserving and surjective: the round-preserving bound, the lower
bound ``|x| < d(Phi(x), o) + R0``, antipodal separation of radial
directions on spheres of radius ``r >= R1``, and the degree of
``v -> v_o(Phi(r v))``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.optimize import least_squares

from .errors import CoverageError, DomainError, NetEmbedError
from .manifold import orthonormal_frame, tangent_angle
from .netlattice import NetImageIndex, gamma
from .simplexmap import SimplexMapEvaluator
from .sphere import SphereMap, antipodes, circle_grid, icosphere_grid, sphere_degree, winding_number
from .triangulation import containing_simplices, locate

logger = logging.getLogger(__name__)

Mapper = Callable[..., Iterable[Any]]

PREIMAGE_TOL = 1e-6


def round_constants(dimension: int, epsilon: float, delta: float) -> Tuple[float, float]:
    """``(R0, R1)`` for the given dimension, lattice scale and net bound."""
    n, eps = dimension, epsilon
    root = math.sqrt(n)
    r0 = (eps + 2 * delta) * n + 1.5 * eps * root + 4 * delta
    r1 = 2 * (eps + 2 * delta) * n + 2.5 * eps * root + 7 * delta
    return r0, r1


@dataclass(frozen=True)
class RoundReport:
    anchor: Tuple[float, ...]
    image: Tuple[float, ...]
    bound: float
    observed: float

    @property
    def slack(self) -> float:
        return self.bound - self.observed


@dataclass(frozen=True)
class BoundReport:
    """A measured quantity against its bound; ``slack = bound - observed``."""

    bound: float
    observed: float

    @property
    def slack(self) -> float:
        return self.bound - self.observed


@dataclass(frozen=True)
class AntipodalSample:
    direction: Tuple[float, ...]
    angle: float
    distance_gap: float
    antipode_distance: float
    gamma_gap: float


@dataclass(frozen=True)
class AntipodalReport:
    radius: float
    min_angle: float
    max_gamma_gap: float
    separation_holds: bool
    samples: List[AntipodalSample] = field(repr=False)


@dataclass(frozen=True)
class DegreeReport:
    radius: float
    resolution: int
    degree: int
    min_antipodal_gap: float
    samples: int


@dataclass(frozen=True)
class SurjectivityReport:
    target: Tuple[float, ...]
    found: bool
    preimage: Optional[Tuple[float, ...]]
    residual: float
    cubes_tried: int
    sphere_radius: float


class GluedMap:
    """``Phi`` glued from the simplex maps of an evaluator; basepoint ``o = iota(nu(0))``."""

    def __init__(self, evaluator: SimplexMapEvaluator, image_index: Optional[NetImageIndex] = None) -> None:
        self.evaluator = evaluator
        self.solver = evaluator.solver
        self.metric = evaluator.metric
        self.net = evaluator.net
        self.lattice = evaluator.lattice
        self.epsilon = evaluator.lattice.epsilon
        self.delta = evaluator.net.delta
        self.dimension = evaluator.net.dimension
        self.image_index = image_index
        self.origin_index = (0,) * self.dimension
        self.basepoint = evaluator.vertex_image(self.origin_index)
        self.r0, self.r1 = round_constants(self.dimension, self.epsilon, self.delta)
        self._frame = orthonormal_frame(self.metric, self.basepoint)

    def constants(self) -> Dict[str, float]:
        return {"R0": self.r0, "R1": self.r1}

    # ------------------------------------------------------------------
    # Phi
    def phi(self, x: Any) -> np.ndarray:
        pt = np.asarray(x, dtype=float)
        if not self.net.box.contains(pt):
            raise CoverageError(f"{pt.tolist()} lies outside the coverage region")
        bary = locate(pt, self.epsilon)
        return self.evaluator.delta_eval(bary.simplex.vertex_indices, bary.weights)

    def gluing_discrepancy(self, x: Any) -> float:
        """Largest chart gap between evaluations of ``x`` through every simplex containing it."""
        values = [
            self.evaluator.delta_eval(b.simplex.vertex_indices, b.weights)
            for b in containing_simplices(x, self.epsilon, tol=1e-9)
        ]
        if len(values) < 2:
            return 0.0
        return max(float(np.linalg.norm(a - b)) for a in values for b in values)

    def _lattice_image(self, p: np.ndarray) -> np.ndarray:
        return self.evaluator.vertex_image(tuple(int(v) for v in np.rint(p / self.epsilon)))

    # ------------------------------------------------------------------
    # Bounds
    def verify_round_preserving(self, x: Any) -> RoundReport:
        """``d(Phi(x), nu(p)) <= n (eps + 2 max delta_nu(q))`` over the vertices ``q`` of ``Q(p)``."""
        pt = np.asarray(x, dtype=float)
        anchor = locate(pt, self.epsilon).simplex.anchor_index
        cube = self.lattice.cube(anchor)
        worst = max(self.evaluator.rounding_error(v) for v in cube.vertex_indices())
        bound = self.dimension * (self.epsilon + 2 * worst)
        image = self.phi(pt)
        observed = self.solver.distance(image, self.evaluator.vertex_image(anchor))
        return RoundReport(tuple(cube.anchor.tolist()), tuple(image.tolist()), bound, observed)

    def lower_bound_check(self, x: Any) -> BoundReport:
        """``|x| < d(Phi(x), o) + R0``, reported as ``bound = d + R0`` against ``|x|``."""
        pt = np.asarray(x, dtype=float)
        d = self.solver.distance(self.phi(pt), self.basepoint)
        return BoundReport(d + self.r0, float(np.linalg.norm(pt)))

    def gamma_proximity_check(self, x: Any) -> BoundReport:
        """``d(Phi(x), Gamma(x)) < (eps + 2 delta) n + eps sqrt(n) + 2 delta``."""
        pt = np.asarray(x, dtype=float)
        n, eps = self.dimension, self.epsilon
        bound = (eps + 2 * self.delta) * n + eps * math.sqrt(n) + 2 * self.delta
        image = self._lattice_image(gamma(pt, self.lattice))
        return BoundReport(bound, self.solver.distance(self.phi(pt), image))

    # ------------------------------------------------------------------
    # Spheres
    def radial_direction(self, y: np.ndarray) -> np.ndarray:
        """``v_o(y)`` as a Euclidean unit vector through the frame ``g(o)^(1/2)``."""
        w = self.solver.radial_projection(self.basepoint, y)
        unit = self._frame @ w.components
        return unit / np.linalg.norm(unit)

    def sphere_map(self, r: float) -> SphereMap:
        """``v -> v_o(Phi(r v))`` on the unit sphere."""

        def mapped(v: np.ndarray) -> np.ndarray:
            return self.radial_direction(self.phi(r * np.asarray(v, dtype=float)))

        return mapped

    def _warn_below(self, r: float) -> None:
        if r < self.r1:
            logger.warning("radius %.4f is below R1 = %.4f; separation is not guaranteed", r, self.r1)

    def _directions(self, count: int, seed: int) -> np.ndarray:
        if self.dimension == 2:
            return circle_grid(2 * max(1, count // 2))
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((count, self.dimension))
        return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)

    def antipodal_check(self, r: float, samples: int, seed: int = 0, mapper: Mapper = map) -> AntipodalReport:
        """Angle between ``v_o(Phi_r(v))`` and ``v_o(Phi_r(-v))`` over sampled ``v``.

        Each sample also records the gaps the separation argument compares:
        ``|d(o, Phi(x)) - d(o, Phi(-x))|`` against ``d(Phi(x), Phi(-x))``, and
        ``|d(o, Gamma(x)) - d(o, Gamma(-x))|`` which stays below ``4 delta``.
        """
        self._warn_below(r)
        dirs = self._directions(samples, seed)
        o = self.basepoint

        def measure(v: np.ndarray) -> AntipodalSample:
            x = r * v
            a, b = self.phi(x), self.phi(-x)
            wa = self.solver.radial_projection(o, a)
            wb = self.solver.radial_projection(o, b)
            da, db = self.solver.distance(o, a), self.solver.distance(o, b)
            ga = self.solver.distance(o, self._lattice_image(gamma(x, self.lattice)))
            gb = self.solver.distance(o, self._lattice_image(gamma(-x, self.lattice)))
            return AntipodalSample(
                direction=tuple(v.tolist()),
                angle=tangent_angle(self.metric, wa, wb),
                distance_gap=abs(da - db),
                antipode_distance=self.solver.distance(a, b),
                gamma_gap=abs(ga - gb),
            )

        rows = list(mapper(measure, list(dirs)))
        report = AntipodalReport(
            radius=float(r),
            min_angle=min(s.angle for s in rows),
            max_gamma_gap=max(s.gamma_gap for s in rows),
            separation_holds=all(s.antipode_distance > s.distance_gap for s in rows),
            samples=rows,
        )
        logger.info("antipodal check r=%.3f: min angle %.4f over %d samples", r, report.min_angle, len(rows))
        return report

    def degree(
        self,
        r: float,
        resolution: int,
        level: int = 4,
        seed: int = 0,
        override: Optional[SphereMap] = None,
        antipodal_samples: int = 64,
    ) -> DegreeReport:
        """Degree of ``v -> v_o(Phi_r(v))``; ``override`` substitutes another sphere map."""
        if r < self.r0 + 1.0:
            raise DomainError(f"radius {r} must be at least R0 + 1 = {self.r0 + 1.0:.4f}")
        self._warn_below(r)
        f = override if override is not None else self.sphere_map(r)
        if self.dimension == 2:
            winding = winding_number(f, resolution)
            grid = circle_grid(2 * max(1, antipodal_samples // 2))
            value, samples = winding.degree, winding.samples
        elif self.dimension == 3:
            covering = sphere_degree(f, level, np.random.default_rng(seed))
            grid, _ = icosphere_grid(42)
            value, samples, resolution = covering.degree, covering.faces, level
        else:
            raise DomainError(f"degree is implemented for n = 2 and n = 3, got n = {self.dimension}")
        images = np.array([f(v) for v in grid])
        images /= np.linalg.norm(images, axis=1, keepdims=True)
        opposite = images[antipodes(grid)]
        diff = np.linalg.norm(images - opposite, axis=1)
        total = np.linalg.norm(images + opposite, axis=1)
        gap = float(np.min(2.0 * np.arctan2(diff, total)))
        logger.info("degree at r=%.3f: %d (antipodal gap %.4f)", r, value, gap)
        return DegreeReport(float(r), int(resolution), int(value), gap, int(samples))

    # ------------------------------------------------------------------
    # Surjectivity
    def surjectivity_probe(self, y: Any, budget: int) -> SurjectivityReport:
        """Search for ``x`` with ``Phi(x) = y`` cube by cube, nearest cubes first."""
        target = np.asarray(y, dtype=float)
        sphere_radius = max(self.r1, self.r0 + self.solver.distance(self.basepoint, target) + 1.0)
        if self.image_index is not None:
            start = self.image_index.nearest(target).point
        else:
            start = target
        search = self.r0 + self.epsilon * math.sqrt(self.dimension)
        lo = np.floor((start - search) / self.epsilon).astype(int)
        hi = np.ceil((start + search) / self.epsilon).astype(int)
        anchors = [
            np.array(a) for a in np.ndindex(*(hi - lo + 1))
        ]
        centres = [(lo + a + 0.5) * self.epsilon for a in anchors]
        order = sorted(
            range(len(anchors)), key=lambda k: (float(np.linalg.norm(centres[k] - start)), tuple(anchors[k]))
        )
        best_residual = math.inf
        tried = 0
        for k in order[:budget]:
            anchor = lo + anchors[k]
            lower = anchor * self.epsilon
            upper = lower + self.epsilon
            if not (self.net.box.contains(lower) and self.net.box.contains(upper)):
                continue
            tried += 1

            def residual(x: np.ndarray) -> np.ndarray:
                return self.phi(x) - target

            try:
                fit = least_squares(
                    residual,
                    centres[k],
                    bounds=(lower, upper),
                    diff_step=1e-7,
                    xtol=1e-14,
                    ftol=1e-14,
                    gtol=1e-14,
                    max_nfev=200,
                )
            except NetEmbedError as exc:
                logger.warning("surjectivity probe failed on cube %s: %s", anchor.tolist(), exc)
                continue
            res = float(np.linalg.norm(fit.fun))
            best_residual = min(best_residual, res)
            if res < PREIMAGE_TOL:
                return SurjectivityReport(
                    tuple(target.tolist()), True, tuple(fit.x.tolist()), res, tried, sphere_radius
                )
        logger.info("no preimage of %s in %d cubes (best residual %.3e)", target.tolist(), tried, best_residual)
        return SurjectivityReport(tuple(target.tolist()), False, None, best_residual, tried, sphere_radius)
