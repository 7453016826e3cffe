"""
Global directions and the global-to-local direction map.

A global direction ``v`` at a net point ``p`` is realised by the drifting
sequence ``p_m = nu(p + r_m v)`` with geometrically growing ``r_m``; the
initial unit tangents of the segments from ``iota(p)`` to ``iota(p_m)``
converge to the local direction ``w(v)`` in ``S_pM``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from .errors import DomainError, EvaluationError, NetEmbedError
from .manifold import GeodesicSolver, TangentVector, tangent_angle
from .netlattice import Embedding, Net, NetImageIndex
from .sphere import antipodes, circle_grid, grid_spacing, icosphere_grid

logger = logging.getLogger(__name__)

Mapper = Callable[..., Iterable[Any]]

EPSILON_GRID = 0.05
EPSILON_MARGIN = 0.01


@dataclass(frozen=True)
class DriftParams:
    start: float
    growth: float = 2.0
    max_terms: int = 12
    tol: float = 1e-6

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any], default_start: float) -> "DriftParams":
        return cls(
            start=float(cfg.get("start") or default_start),
            growth=float(cfg.get("growth", 2.0)),
            max_terms=int(cfg.get("max_terms", 12)),
            tol=float(cfg.get("tol", 1e-6)),
        )

    def radius(self, m: int) -> float:
        return self.start * self.growth ** m


@dataclass(frozen=True)
class TraceEntry:
    radius: float
    point: Tuple[float, ...]
    tangent: Tuple[float, ...]
    gap: Optional[float]


@dataclass(frozen=True)
class GlobalGeodesic:
    base: Tuple[float, ...]
    direction: Tuple[float, ...]
    tangent: TangentVector
    trace: List[TraceEntry] = field(repr=False)
    converged: bool

    @property
    def final_gap(self) -> Optional[float]:
        return self.trace[-1].gap if self.trace else None

    @property
    def last_point(self) -> np.ndarray:
        return np.array(self.trace[-1].point)


class DirectionSampler:
    """Builds global geodesics over one scenario's net and embedding."""

    def __init__(self, solver: GeodesicSolver, net: Net, embedding: Embedding, params: DriftParams) -> None:
        self.solver = solver
        self.metric = solver.metric
        self.net = net
        self.embedding = embedding
        self.params = params

    def _tangent_gap(self, a: TangentVector, b: TangentVector) -> float:
        diff = a.components - b.components
        return float(math.sqrt(diff @ self.metric.metric_at(a.base) @ diff))

    def global_geodesic(self, p: Any, v: Any) -> GlobalGeodesic:
        """Limit tangent at ``iota(p)`` of segments towards ``nu(p + r_m v)``."""
        base = np.asarray(p, dtype=float)
        direction = np.asarray(v, dtype=float)
        if abs(float(np.linalg.norm(direction)) - 1.0) > 1e-9:
            raise DomainError(f"direction {direction.tolist()} is not a unit vector")
        origin = self.embedding.image(base)
        trace: List[TraceEntry] = []
        previous: Optional[TangentVector] = None
        for m in range(self.params.max_terms):
            radius = self.params.radius(m)
            target = base + radius * direction
            if not self.net.box.contains(target):
                logger.info("drift towards %s left the net box at r=%.3g", direction.tolist(), radius)
                break
            p_m = self.net.nu(target)
            try:
                tangent = self.solver.radial_projection(origin, self.embedding.image(p_m))
            except NetEmbedError as exc:
                raise EvaluationError(f"drift segment failed: {exc}", [tuple(p_m.tolist())]) from exc
            gap = None if previous is None else self._tangent_gap(tangent, previous)
            trace.append(TraceEntry(radius, tuple(p_m.tolist()), tuple(tangent.components.tolist()), gap))
            previous = tangent
            if gap is not None and gap < self.params.tol:
                break
        if previous is None:
            raise DomainError(f"net box does not reach the first drift radius {self.params.start}")
        converged = trace[-1].gap is not None and trace[-1].gap < self.params.tol
        return GlobalGeodesic(tuple(base.tolist()), tuple(direction.tolist()), previous, trace, converged)


def direction_grid(dimension: int, resolution: int) -> np.ndarray:
    """Antipodally symmetric grid on ``S^(n-1)``."""
    if dimension == 2:
        if resolution < 8:
            raise DomainError("circle grid needs at least 8 points")
        return circle_grid(resolution + resolution % 2)
    if dimension == 3:
        if resolution < 42:
            raise DomainError("icosphere grid needs at least 42 points")
        grid, _ = icosphere_grid(resolution)
        return grid
    raise DomainError(f"direction grids exist for n = 2 and n = 3, got n = {dimension}")


@dataclass(frozen=True)
class DirectionEntry:
    direction: Tuple[float, ...]
    tangent: Tuple[float, ...]
    oddness_defect: float
    trace_length: int
    final_gap: Optional[float]


@dataclass(frozen=True)
class DirectionTable:
    base: Tuple[float, ...]
    entries: List[DirectionEntry] = field(repr=False)
    max_oddness_defect: float
    min_separation: float
    spacing: float
    max_identity_defect: float
    converged: int

    @property
    def injective_at_grid_scale(self) -> bool:
        return self.min_separation > 0.5 * self.spacing


def local_direction_map(
    sampler: DirectionSampler,
    p: Any,
    resolution: int,
    mapper: Mapper = map,
) -> DirectionTable:
    """``v -> w(v)`` over a grid, with oddness and separation statistics.

    ``max_identity_defect`` is ``max |w(v) - v|`` in chart components; it
    vanishes for the flat identity scenario.
    """
    base = np.asarray(p, dtype=float)
    grid = direction_grid(sampler.net.dimension, resolution)
    geodesics: List[GlobalGeodesic] = list(mapper(lambda v: sampler.global_geodesic(base, v), list(grid)))
    tangents = [g.tangent for g in geodesics]
    opposite = antipodes(grid)
    g0 = sampler.metric.metric_at(tangents[0].base)
    entries = []
    for k, geo in enumerate(geodesics):
        total = tangents[k].components + tangents[opposite[k]].components
        entries.append(DirectionEntry(
            direction=tuple(grid[k].tolist()),
            tangent=tuple(tangents[k].components.tolist()),
            oddness_defect=float(math.sqrt(total @ g0 @ total)),
            trace_length=len(geo.trace),
            final_gap=geo.final_gap,
        ))
    separation = min(
        tangent_angle(sampler.metric, tangents[i], tangents[j])
        for i in range(len(tangents)) for j in range(i + 1, len(tangents))
    )
    identity = max(float(np.linalg.norm(t.components - v)) for t, v in zip(tangents, grid))
    table = DirectionTable(
        base=tuple(base.tolist()),
        entries=entries,
        max_oddness_defect=max(e.oddness_defect for e in entries),
        min_separation=float(separation),
        spacing=grid_spacing(grid),
        max_identity_defect=identity,
        converged=sum(1 for g in geodesics if g.converged),
    )
    logger.info(
        "direction map at %s: %d directions, oddness %.2e, separation %.4f",
        table.base, len(entries), table.max_oddness_defect, table.min_separation,
    )
    return table


def separation_epsilon(u: np.ndarray, v: np.ndarray) -> float:
    """Gap ``eps`` with ``min(<w,u>, <w,v>) < 1 - eps`` for every unit ``w``.

    The maximum of ``min(<w,u>, <w,v>)`` is ``cos(angle / 2)``, attained at
    the bisector; the margin is subtracted and the result snapped down to
    the 0.05 grid.
    """
    angle = 2.0 * math.atan2(float(np.linalg.norm(u - v)), float(np.linalg.norm(u + v)))
    raw = 1.0 - math.cos(angle / 2.0) - EPSILON_MARGIN
    if raw <= 0.0:
        raise DomainError(f"directions {u.tolist()} and {v.tolist()} are too close to separate")
    snapped = math.floor(raw / EPSILON_GRID + 1e-9) * EPSILON_GRID
    return snapped if snapped > 0.0 else raw


@dataclass(frozen=True)
class InjectivityReport:
    base: Tuple[float, ...]
    u: Tuple[float, ...]
    v: Tuple[float, ...]
    epsilon: float
    delta_tilde: float
    horizon: float
    endpoint: Tuple[float, ...]
    witness: Optional[Tuple[float, ...]]
    witness_distance: float
    chart_distance: float
    bracket_holds: bool
    drift_inner: float
    drift_gap: float
    drift_holds: bool

    @property
    def found(self) -> bool:
        return self.witness is not None

    @property
    def passed(self) -> bool:
        return self.found and self.bracket_holds and self.drift_holds


def injectivity_experiment(
    sampler: DirectionSampler,
    index: NetImageIndex,
    p: Any,
    u: Any,
    v: Any,
) -> InjectivityReport:
    """Measure the inequalities separating ``gamma_{p,u}`` from ``gamma_{p,v}``.

    With ``delta~ = 2 delta n`` and ``T = 6 delta~ / eps`` the witness ``q``
    nearest to ``gamma_{p,v}(T)`` satisfies ``T - delta~ < |p - q| < T + delta~``,
    and for drift points ``p_m`` of ``u``:
    ``<(q - p)/|q - p|, (p_m - p)/|p_m - p|> < 1 - eps`` and
    ``|p_m - p| - |p_m - q| < (1 - eps)(T + delta~)``.
    """
    base = np.asarray(p, dtype=float)
    uu = np.asarray(u, dtype=float)
    vv = np.asarray(v, dtype=float)
    uu, vv = uu / np.linalg.norm(uu), vv / np.linalg.norm(vv)
    if float(np.linalg.norm(uu - vv)) < 1e-12:
        raise DomainError("the experiment needs two distinct directions")
    net = sampler.net
    eps = separation_epsilon(uu, vv)
    delta_tilde = 2.0 * net.delta * net.dimension
    horizon = 6.0 * delta_tilde / eps

    along_v = sampler.global_geodesic(base, vv)
    ray = sampler.solver.ivp(sampler.embedding.image(base), along_v.tangent, horizon)
    endpoint = ray.at(horizon)
    nearest = index.nearest(endpoint)
    witness: Optional[np.ndarray] = nearest.point if nearest.distance < delta_tilde else None
    if witness is None:
        logger.warning(
            "no net image within %.3f of gamma(T); nearest is %.3f away", delta_tilde, nearest.distance
        )
    q = nearest.point
    chart = float(np.linalg.norm(q - base))

    along_u = sampler.global_geodesic(base, uu)
    p_m = along_u.last_point
    to_q = (q - base) / chart if chart > 0.0 else np.zeros_like(q)
    to_m = (p_m - base) / np.linalg.norm(p_m - base)
    inner = float(to_q @ to_m)
    drift_gap = float(np.linalg.norm(p_m - base) - np.linalg.norm(p_m - q))

    report = InjectivityReport(
        base=tuple(base.tolist()),
        u=tuple(uu.tolist()),
        v=tuple(vv.tolist()),
        epsilon=eps,
        delta_tilde=delta_tilde,
        horizon=horizon,
        endpoint=tuple(endpoint.tolist()),
        witness=None if witness is None else tuple(witness.tolist()),
        witness_distance=nearest.distance,
        chart_distance=chart,
        bracket_holds=horizon - delta_tilde < chart < horizon + delta_tilde,
        drift_inner=inner,
        drift_gap=drift_gap,
        drift_holds=inner < 1.0 - eps and drift_gap < (1.0 - eps) * (horizon + delta_tilde),
    )
    logger.info(
        "injectivity: eps=%.2f T=%.1f |p-q|=%.3f witness distance %.3f",
        eps, horizon, chart, nearest.distance,
    )
    return report
