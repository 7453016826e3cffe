"""
Riemannian metrics on the global chart R^n and geodesic primitives.

A :class:`MetricField` describes a complete metric in a single chart.
Four families ship with the library:

* ``flat`` -- the Euclidean metric;
* ``linear-pullback`` -- ``g = A^T A`` for an invertible matrix ``A``;
* ``nonlinear-pullback`` -- ``g = Dphi^T Dphi`` with ``phi`` the identity
  plus a sum of sine perturbations, ``sup |Dphi - I| <= 0.5``;
* ``conformal`` -- ``g = exp(2 f) I`` with ``f(x) = c.x + q |x|^2 / 2``.

Pullback families carry an exact geodesic oracle (geodesics are
``phi``-preimages of straight lines).  All other geodesics are computed
with an adaptive Runge-Kutta integrator (``scipy.integrate.solve_ivp``,
DOP853) and single shooting with a damped Newton iteration.

Metrics and paths are immutable; every function here is safe to call from
several threads at once.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BVPError, ConfigurationError, DomainError, IntegrationError, SingularMetricError

logger = logging.getLogger(__name__)

# Chart coordinates of a point of M.
ChartPoint = np.ndarray

FD_STEP = 1e-5
IVP_RTOL = 1e-10
IVP_ATOL = 1e-12
BVP_TOL = 1e-9
BVP_RESTARTS = 8
MAX_PERTURBATION = 0.5


def as_chart_point(x: Any, dimension: Optional[int] = None) -> ChartPoint:
    """Return ``x`` as a finite 1-D float array, raising ``DomainError`` otherwise."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"expected a coordinate vector, got shape {arr.shape}")
    if dimension is not None and arr.shape[0] != dimension:
        raise DomainError(f"expected {dimension} coordinates, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"non-finite chart point {arr.tolist()}")
    return arr


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector ``components`` at the chart point ``base``."""

    base: ChartPoint
    components: np.ndarray

    def norm(self, metric: "MetricField") -> float:
        g = metric.metric_at(self.base)
        return float(math.sqrt(self.components @ g @ self.components))

    def normalized(self, metric: "MetricField") -> "TangentVector":
        length = self.norm(metric)
        if length == 0.0:
            raise DomainError("cannot normalize the zero tangent vector")
        return TangentVector(self.base, self.components / length)


class MetricField(ABC):
    """A Riemannian metric on the chart R^n."""

    family = "generic"

    def __init__(self, dimension: int) -> None:
        if dimension < 1:
            raise ConfigurationError(f"dimension must be positive, got {dimension}")
        self.dimension = int(dimension)

    # ------------------------------------------------------------------
    # Family hooks
    @abstractmethod
    def _tensor(self, x: np.ndarray) -> np.ndarray:
        """Metric tensor at ``x`` without validation."""

    def _tensor_derivatives(self, x: np.ndarray) -> Optional[np.ndarray]:
        """Analytic ``d[k, i, j] = d_k g_ij`` or ``None`` for finite differences."""
        return None

    @property
    def has_oracle(self) -> bool:
        return False

    @property
    def unique_geodesics(self) -> bool:
        """Whether minimizing geodesics are unique between every pair of points."""
        return False

    def chart_lipschitz(self, samples: Optional[np.ndarray] = None) -> float:
        """Bound on ``|x - y| / d(x, y)``, with a factor two of slack.

        Generic metrics estimate it from the smallest metric eigenvalue on
        ``samples``.
        """
        if samples is None or len(samples) == 0:
            samples = np.zeros((1, self.dimension))
        lowest = min(float(np.linalg.eigvalsh(self._tensor(s))[0]) for s in samples)
        if lowest <= 0.0:
            raise SingularMetricError("metric is not positive-definite on the sampled region")
        return 2.0 / math.sqrt(lowest)

    def describe(self) -> Dict[str, Any]:
        return {"family": self.family, "dimension": self.dimension}

    # ------------------------------------------------------------------
    # Public API
    def metric_at(self, x: Any) -> np.ndarray:
        pt = as_chart_point(x, self.dimension)
        return self._tensor(pt)

    def christoffel_at(self, x: Any) -> np.ndarray:
        pt = as_chart_point(x, self.dimension)
        return self._christoffel(pt)

    def _christoffel(self, x: np.ndarray) -> np.ndarray:
        g = self._tensor(x)
        try:
            g_inv = np.linalg.inv(g)
        except np.linalg.LinAlgError as exc:
            raise SingularMetricError(f"metric is singular at {x.tolist()}") from exc
        dg = self._tensor_derivatives(x)
        if dg is None:
            dg = self._finite_difference_derivatives(x)
        # Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij)
        lowered = (
            np.einsum("ilj->lij", dg)
            + np.einsum("jli->lij", dg)
            - dg
        )
        return 0.5 * np.einsum("kl,lij->kij", g_inv, lowered)

    def _finite_difference_derivatives(self, x: np.ndarray) -> np.ndarray:
        n = self.dimension
        dg = np.empty((n, n, n))
        for k in range(n):
            step = np.zeros(n)
            step[k] = FD_STEP
            dg[k] = (self._tensor(x + step) - self._tensor(x - step)) / (2.0 * FD_STEP)
        return dg

    # Oracle hooks, implemented by pullback families.
    def forward_map(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.family} metric has no exact oracle")

    def inverse_map(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.family} metric has no exact oracle")

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.family} metric has no exact oracle")


class PullbackMetric(MetricField):
    """Metric ``g = Dphi^T Dphi`` pulled back from flat R^n by a diffeomorphism."""

    @property
    def has_oracle(self) -> bool:
        return True

    @property
    def unique_geodesics(self) -> bool:
        return True

    @abstractmethod
    def _hessian(self, x: np.ndarray) -> np.ndarray:
        """``H[a, b, c] = d_b d_c phi_a``."""

    @abstractmethod
    def forward_lipschitz(self) -> float:
        """Upper bound on ``sup |Dphi|``."""

    @abstractmethod
    def inverse_lipschitz(self) -> float:
        """Upper bound on ``sup |Dphi^-1|``."""

    def _tensor(self, x: np.ndarray) -> np.ndarray:
        jac = self.jacobian(x)
        return jac.T @ jac

    def _tensor_derivatives(self, x: np.ndarray) -> Optional[np.ndarray]:
        jac = self.jacobian(x)
        hess = self._hessian(x)
        # d_m g_bc = sum_a H[a, b, m] D[a, c] + D[a, b] H[a, c, m]
        return np.einsum("abm,ac->mbc", hess, jac) + np.einsum("ab,acm->mbc", jac, hess)

    def chart_lipschitz(self, samples: Optional[np.ndarray] = None) -> float:
        return 2.0 * self.inverse_lipschitz()


class LinearPullbackMetric(PullbackMetric):
    """Constant metric ``A^T A``; geodesics are chart-straight lines."""

    family = "linear-pullback"

    def __init__(self, matrix: Any) -> None:
        mat = np.asarray(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ConfigurationError(f"pullback matrix must be square, got shape {mat.shape}")
        if abs(float(np.linalg.det(mat))) < 1e-12:
            raise ConfigurationError("pullback matrix must be invertible")
        super().__init__(mat.shape[0])
        self.matrix = mat
        self._inverse = np.linalg.inv(mat)
        self._gram = mat.T @ mat

    def _tensor(self, x: np.ndarray) -> np.ndarray:
        return self._gram.copy()

    def _tensor_derivatives(self, x: np.ndarray) -> Optional[np.ndarray]:
        n = self.dimension
        return np.zeros((n, n, n))

    def _christoffel(self, x: np.ndarray) -> np.ndarray:
        n = self.dimension
        return np.zeros((n, n, n))

    def _hessian(self, x: np.ndarray) -> np.ndarray:
        n = self.dimension
        return np.zeros((n, n, n))

    def forward_map(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def inverse_map(self, y: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.matrix, y)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return self.matrix

    def forward_lipschitz(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def inverse_lipschitz(self) -> float:
        return float(np.linalg.norm(self._inverse, 2))

    def describe(self) -> Dict[str, Any]:
        info = super().describe()
        info["matrix"] = self.matrix.tolist()
        return info


class FlatMetric(LinearPullbackMetric):
    """The Euclidean metric."""

    family = "flat"

    def __init__(self, dimension: int) -> None:
        super().__init__(np.eye(int(dimension)))

    def forward_map(self, x: np.ndarray) -> np.ndarray:
        return np.array(x, dtype=float)

    def inverse_map(self, y: np.ndarray) -> np.ndarray:
        return np.array(y, dtype=float)


@dataclass(frozen=True)
class SineTerm:
    """Perturbation ``phi_target += amplitude * sin(frequency * x_source + phase)``."""

    target: int
    source: int
    amplitude: float
    frequency: float
    phase: float = 0.0


class SinePullbackMetric(PullbackMetric):
    """Pullback by ``phi = id + sum of SineTerm``; a global diffeomorphism."""

    family = "nonlinear-pullback"

    def __init__(self, dimension: int, terms: Sequence[SineTerm]) -> None:
        super().__init__(dimension)
        problems: List[str] = []
        for term in terms:
            for idx in (term.target, term.source):
                if not 0 <= idx < dimension:
                    problems.append(f"sine term index {idx} outside 0..{dimension - 1}")
        self.terms = tuple(terms)
        self.perturbation_bound = float(sum(abs(t.amplitude * t.frequency) for t in self.terms))
        if self.perturbation_bound > MAX_PERTURBATION:
            problems.append(
                f"sup |Dphi - I| bound {self.perturbation_bound:.4f} exceeds {MAX_PERTURBATION}"
            )
        if problems:
            raise ConfigurationError(problems)

    def _perturbation(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dimension)
        for t in self.terms:
            out[t.target] += t.amplitude * math.sin(t.frequency * x[t.source] + t.phase)
        return out

    def forward_map(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) + self._perturbation(x)

    def inverse_map(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        # contraction with constant <= 0.5
        x = y.copy()
        for _ in range(200):
            nxt = y - self._perturbation(x)
            if np.max(np.abs(nxt - x)) <= 1e-15 * max(1.0, float(np.max(np.abs(y)))):
                x = nxt
                break
            x = nxt
        for _ in range(2):
            x = x - np.linalg.solve(self.jacobian(x), self.forward_map(x) - y)
        return x

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        jac = np.eye(self.dimension)
        for t in self.terms:
            jac[t.target, t.source] += t.amplitude * t.frequency * math.cos(t.frequency * x[t.source] + t.phase)
        return jac

    def _hessian(self, x: np.ndarray) -> np.ndarray:
        n = self.dimension
        hess = np.zeros((n, n, n))
        for t in self.terms:
            hess[t.target, t.source, t.source] -= (
                t.amplitude * t.frequency ** 2 * math.sin(t.frequency * x[t.source] + t.phase)
            )
        return hess

    def forward_lipschitz(self) -> float:
        return 1.0 + self.perturbation_bound

    def inverse_lipschitz(self) -> float:
        return 1.0 / (1.0 - self.perturbation_bound)

    def describe(self) -> Dict[str, Any]:
        info = super().describe()
        info["terms"] = [t.__dict__.copy() for t in self.terms]
        return info


class ConformalMetric(MetricField):
    """``g = exp(2 f) I`` with ``f(x) = linear . x + quadratic * |x|^2 / 2``.

    No exact net embedding exists for these metrics; they serve as the
    negative control.
    """

    family = "conformal"

    def __init__(self, dimension: int, linear: Optional[Sequence[float]] = None, quadratic: float = 0.0) -> None:
        super().__init__(dimension)
        coeffs = np.zeros(dimension) if linear is None else np.asarray(linear, dtype=float)
        if coeffs.shape != (dimension,):
            raise ConfigurationError(f"conformal linear coefficients need {dimension} entries")
        self.linear = coeffs
        self.quadratic = float(quadratic)

    @property
    def unique_geodesics(self) -> bool:
        # Curvature is -exp(-2f) * laplacian(f) <= 0 in two dimensions.
        return self.dimension == 2 and self.quadratic >= 0.0

    def exponent(self, x: np.ndarray) -> float:
        return float(self.linear @ x + 0.5 * self.quadratic * (x @ x))

    def _tensor(self, x: np.ndarray) -> np.ndarray:
        return math.exp(2.0 * self.exponent(x)) * np.eye(self.dimension)

    def _tensor_derivatives(self, x: np.ndarray) -> Optional[np.ndarray]:
        grad = self.linear + self.quadratic * x
        scale = 2.0 * math.exp(2.0 * self.exponent(x))
        return scale * np.einsum("k,ij->kij", grad, np.eye(self.dimension))

    def describe(self) -> Dict[str, Any]:
        info = super().describe()
        info["linear"] = self.linear.tolist()
        info["quadratic"] = self.quadratic
        return info


def make_metric(cfg: Mapping[str, Any], dimension: int) -> MetricField:
    """Build a metric from the ``metric`` section of a scenario."""
    family = str(cfg.get("family", "flat")).lower()
    if family == "flat":
        return FlatMetric(dimension)
    if family == "linear-pullback":
        metric: MetricField = LinearPullbackMetric(cfg.get("matrix", np.eye(dimension).tolist()))
        if metric.dimension != dimension:
            raise ConfigurationError(
                f"pullback matrix is {metric.dimension}x{metric.dimension}, scenario is {dimension}D"
            )
        return metric
    if family == "nonlinear-pullback":
        terms = [
            SineTerm(
                target=int(t["target"]),
                source=int(t["source"]),
                amplitude=float(t["amplitude"]),
                frequency=float(t.get("frequency", 1.0)),
                phase=float(t.get("phase", 0.0)),
            )
            for t in cfg.get("terms", [])
        ]
        return SinePullbackMetric(dimension, terms)
    if family == "conformal":
        return ConformalMetric(dimension, cfg.get("linear"), float(cfg.get("quadratic", 0.0)))
    raise ConfigurationError(f"unknown metric family: {family}")


# ----------------------------------------------------------------------
# Geodesic paths


@dataclass(frozen=True)
class GeodesicPath:
    """A constant-speed geodesic ``t -> x(t)`` on ``[0, duration]``.

    ``times``, ``points`` and ``velocities`` are samples of the solution;
    :meth:`at` evaluates the dense output between them.
    """

    start: ChartPoint
    velocity: TangentVector
    duration: float
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    minimizing: bool
    _evaluate: Callable[[float], np.ndarray] = field(repr=False, compare=False)

    def at(self, t: float) -> ChartPoint:
        t = min(max(float(t), 0.0), self.duration)
        if t == 0.0:
            return self.start.copy()
        return np.asarray(self._evaluate(t), dtype=float)

    @property
    def endpoint(self) -> ChartPoint:
        return np.asarray(self.points[-1], dtype=float)

    def length(self, metric: MetricField) -> float:
        return self.velocity.norm(metric) * self.duration

    def speed_deviation(self, metric: MetricField) -> float:
        """Largest relative deviation of the metric speed from its initial value."""
        initial = self.velocity.norm(metric)
        if initial == 0.0:
            return 0.0
        speeds = [
            math.sqrt(v @ metric.metric_at(p) @ v) for p, v in zip(self.points, self.velocities)
        ]
        return max(abs(s - initial) for s in speeds) / initial


def _constant_path(x: np.ndarray) -> GeodesicPath:
    n = x.shape[0]
    return GeodesicPath(
        start=x.copy(),
        velocity=TangentVector(x.copy(), np.zeros(n)),
        duration=1.0,
        times=np.array([0.0, 1.0]),
        points=np.vstack([x, x]),
        velocities=np.zeros((2, n)),
        minimizing=True,
        _evaluate=lambda _t: x.copy(),
    )


def _oracle_ray(metric: MetricField, x: np.ndarray, v: np.ndarray, t_max: float) -> GeodesicPath:
    anchor = metric.forward_map(x)
    flat_velocity = metric.jacobian(x) @ v

    def evaluate(t: float) -> np.ndarray:
        return metric.inverse_map(anchor + t * flat_velocity)

    times = np.linspace(0.0, t_max, 9)
    points = np.array([x] + [evaluate(t) for t in times[1:]])
    velocities = np.array([np.linalg.solve(metric.jacobian(p), flat_velocity) for p in points])
    return GeodesicPath(
        start=x.copy(),
        velocity=TangentVector(x.copy(), np.array(v, dtype=float)),
        duration=float(t_max),
        times=times,
        points=points,
        velocities=velocities,
        minimizing=True,
        _evaluate=evaluate,
    )


def _numeric_ray(
    metric: MetricField,
    x: np.ndarray,
    v: np.ndarray,
    t_max: float,
    rtol: float = IVP_RTOL,
    atol: float = IVP_ATOL,
) -> GeodesicPath:
    n = metric.dimension

    def rhs(_t: float, state: np.ndarray) -> np.ndarray:
        vel = state[n:]
        gamma = metric._christoffel(state[:n])
        return np.concatenate((vel, -np.einsum("kij,i,j->k", gamma, vel, vel)))

    sol = solve_ivp(
        rhs,
        (0.0, float(t_max)),
        np.concatenate((x, v)),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=True,
    )
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise IntegrationError(
            f"geodesic integration from {x.tolist()} with velocity {v.tolist()} failed: {sol.message}"
        )
    dense = sol.sol
    return GeodesicPath(
        start=x.copy(),
        velocity=TangentVector(x.copy(), np.array(v, dtype=float)),
        duration=float(t_max),
        times=sol.t,
        points=sol.y[:n].T.copy(),
        velocities=sol.y[n:].T.copy(),
        minimizing=metric.unique_geodesics,
        _evaluate=lambda t: dense(t)[:n],
    )


def geodesic_ivp(
    metric: MetricField,
    x: Any,
    v: Any,
    t_max: float,
    *,
    use_oracle: bool = False,
    rtol: float = IVP_RTOL,
    atol: float = IVP_ATOL,
) -> GeodesicPath:
    """Integrate the geodesic equation from ``x`` with initial velocity ``v``."""
    start = as_chart_point(x, metric.dimension)
    vel = as_chart_point(getattr(v, "components", v), metric.dimension)
    if not t_max > 0.0:
        raise DomainError(f"t_max must be positive, got {t_max}")
    if use_oracle and metric.has_oracle:
        return _oracle_ray(metric, start, vel, t_max)
    return _numeric_ray(metric, start, vel, t_max, rtol, atol)


def _shoot_newton(
    metric: MetricField,
    x: np.ndarray,
    y: np.ndarray,
    guess: np.ndarray,
    tol: float,
    max_iter: int,
    rtol: float,
    atol: float,
) -> tuple[Optional[GeodesicPath], float]:
    """Damped Newton on the endpoint residual of the shooting map."""
    n = metric.dimension
    v = guess
    path = _numeric_ray(metric, x, v, 1.0, rtol, atol)
    res = path.endpoint - y
    res_norm = float(np.linalg.norm(res))
    for _ in range(max_iter):
        if res_norm < tol:
            return path, res_norm
        h = 1e-7 * max(1.0, float(np.linalg.norm(v)))
        jac = np.empty((n, n))
        for i in range(n):
            bumped = v.copy()
            bumped[i] += h
            jac[:, i] = (_numeric_ray(metric, x, bumped, 1.0, rtol, atol).endpoint - path.endpoint) / h
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            break
        damping = 1.0
        while damping >= 1.0 / 64.0:
            trial_v = v + damping * step
            trial = _numeric_ray(metric, x, trial_v, 1.0, rtol, atol)
            trial_res = trial.endpoint - y
            trial_norm = float(np.linalg.norm(trial_res))
            if trial_norm < res_norm:
                v, path, res, res_norm = trial_v, trial, trial_res, trial_norm
                break
            damping *= 0.5
        else:
            break
    if res_norm < tol:
        return path, res_norm
    return None, res_norm


def _numeric_bvp(
    metric: MetricField,
    x: np.ndarray,
    y: np.ndarray,
    tol: float,
    restarts: int,
    max_iter: int,
    rtol: float,
    atol: float,
    seed: int,
) -> GeodesicPath:
    chord = y - x
    scale = float(np.linalg.norm(chord))
    rng = np.random.default_rng(seed)
    last = math.inf
    for attempt in range(restarts + 1):
        if attempt == 0:
            guess = chord.copy()
        else:
            guess = chord * (1.0 + 0.25 * rng.standard_normal()) + 0.25 * scale * rng.standard_normal(chord.shape)
            logger.warning(
                "restarting shooting %s -> %s (attempt %d, residual %.3e)",
                x.tolist(), y.tolist(), attempt, last,
            )
        try:
            path, last = _shoot_newton(metric, x, y, guess, tol, max_iter, rtol, atol)
        except IntegrationError as exc:
            logger.warning("shooting attempt %d failed: %s", attempt, exc)
            continue
        if path is not None:
            return path
    raise BVPError(f"shooting from {x.tolist()} to {y.tolist()} did not converge", last)


def geodesic_bvp(
    metric: MetricField,
    x: Any,
    y: Any,
    *,
    use_oracle: bool = False,
    tol: float = BVP_TOL,
    restarts: int = BVP_RESTARTS,
    max_iter: int = 25,
    rtol: float = IVP_RTOL,
    atol: float = IVP_ATOL,
    seed: int = 0,
) -> GeodesicPath:
    """Minimizing geodesic ``gamma: [0, 1] -> M`` with ``gamma(0) = x`` and ``gamma(1) = y``."""
    start = as_chart_point(x, metric.dimension)
    end = as_chart_point(y, metric.dimension)
    if np.array_equal(start, end):
        return _constant_path(start)
    if use_oracle and metric.has_oracle:
        a = metric.forward_map(start)
        v0 = np.linalg.solve(metric.jacobian(start), metric.forward_map(end) - a)
        return _oracle_ray(metric, start, v0, 1.0)
    return _numeric_bvp(metric, start, end, tol, restarts, max_iter, rtol, atol, seed)


def distance(metric: MetricField, x: Any, y: Any, **options: Any) -> float:
    """Riemannian distance, the length of :func:`geodesic_bvp`."""
    if options.get("use_oracle") and metric.has_oracle:
        a = metric.forward_map(as_chart_point(x, metric.dimension))
        b = metric.forward_map(as_chart_point(y, metric.dimension))
        return float(np.linalg.norm(a - b))
    return geodesic_bvp(metric, x, y, **options).length(metric)


def oracle_distance(metric: MetricField, x: Any, y: Any) -> float:
    """``|phi(x) - phi(y)|`` for metrics with an exact oracle."""
    if not metric.has_oracle:
        raise DomainError(f"{metric.family} metric has no exact oracle")
    return distance(metric, x, y, use_oracle=True)


def radial_projection(metric: MetricField, o: Any, x: Any, **options: Any) -> TangentVector:
    """Unit initial direction at ``o`` of the minimizing geodesic to ``x``."""
    base = as_chart_point(o, metric.dimension)
    target = as_chart_point(x, metric.dimension)
    if float(np.linalg.norm(target - base)) <= 1e-9:
        raise DomainError(f"radial projection undefined at the basepoint {base.tolist()}")
    path = geodesic_bvp(metric, base, target, **options)
    return path.velocity.normalized(metric)


def metric_at(metric: MetricField, x: Any) -> np.ndarray:
    return metric.metric_at(x)


def christoffel_at(metric: MetricField, x: Any) -> np.ndarray:
    return metric.christoffel_at(x)


def orthonormal_frame(metric: MetricField, o: Any) -> np.ndarray:
    """Symmetric square root of ``g(o)``; maps ``S_oM`` isometrically onto the unit sphere."""
    vals, vecs = np.linalg.eigh(metric.metric_at(o))
    return (vecs * np.sqrt(vals)) @ vecs.T


def tangent_angle(metric: MetricField, a: TangentVector, b: TangentVector) -> float:
    """Metric angle between two tangent vectors at the same base point."""
    g = metric.metric_at(a.base)
    ua = a.components / math.sqrt(a.components @ g @ a.components)
    ub = b.components / math.sqrt(b.components @ g @ b.components)
    diff, total = ua - ub, ua + ub
    return 2.0 * math.atan2(math.sqrt(max(diff @ g @ diff, 0.0)), math.sqrt(max(total @ g @ total, 0.0)))


@dataclass(frozen=True)
class GeodesicSolver:
    """Solver settings bundled with a metric; the handle other modules use."""

    metric: MetricField
    use_oracle: bool = False
    tol: float = BVP_TOL
    restarts: int = BVP_RESTARTS
    max_iter: int = 25
    rtol: float = IVP_RTOL
    atol: float = IVP_ATOL
    seed: int = 0

    @classmethod
    def from_config(cls, metric: MetricField, cfg: Mapping[str, Any]) -> "GeodesicSolver":
        return cls(
            metric=metric,
            use_oracle=bool(cfg.get("use_oracle", False)),
            tol=float(cfg.get("bvp_tol", BVP_TOL)),
            restarts=int(cfg.get("restarts", BVP_RESTARTS)),
            max_iter=int(cfg.get("max_newton", 25)),
            rtol=float(cfg.get("rtol", IVP_RTOL)),
            atol=float(cfg.get("atol", IVP_ATOL)),
            seed=int(cfg.get("seed", 0)),
        )

    def numeric(self) -> "GeodesicSolver":
        """Copy of this solver that never uses the oracle."""
        return replace(self, use_oracle=False)

    def _bvp_options(self) -> Dict[str, Any]:
        return {
            "use_oracle": self.use_oracle,
            "tol": self.tol,
            "restarts": self.restarts,
            "max_iter": self.max_iter,
            "rtol": self.rtol,
            "atol": self.atol,
            "seed": self.seed,
        }

    def ivp(self, x: Any, v: Any, t_max: float) -> GeodesicPath:
        return geodesic_ivp(self.metric, x, v, t_max, use_oracle=self.use_oracle, rtol=self.rtol, atol=self.atol)

    def bvp(self, x: Any, y: Any) -> GeodesicPath:
        return geodesic_bvp(self.metric, x, y, **self._bvp_options())

    def distance(self, x: Any, y: Any) -> float:
        return distance(self.metric, x, y, **self._bvp_options())

    def radial_projection(self, o: Any, x: Any) -> TangentVector:
        return radial_projection(self.metric, o, x, **self._bvp_options())
