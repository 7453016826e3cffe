"""
Euclidean nets, their embeddings into M, and the two rounding maps.

``nu`` rounds a chart point to the nearest net point (ties broken by
lexicographic order), ``gamma`` rounds to the minimal-norm nearest point
of the lattice ``eps * Z^n``.  Nets are finite and restricted to a box;
the box is their coverage region.
"""

from __future__ import annotations

import itertools
import logging
import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .errors import ConfigurationError, CoverageError, DomainError
from .manifold import GeodesicSolver, MetricField, PullbackMetric

logger = logging.getLogger(__name__)

TIE_TOL = 1e-12
TABLE_DECIMALS = 12

Mapper = Callable[..., Iterable[Any]]


@dataclass(frozen=True)
class Box:
    """Axis-aligned chart box ``[lo, hi]``."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def from_config(cls, value: Any, dimension: int) -> "Box":
        """Accept ``[lo, hi]`` scalars or ``[[lo...], [hi...]]`` per axis."""
        lo, hi = value
        lo_arr = np.broadcast_to(np.asarray(lo, dtype=float), (dimension,)).copy()
        hi_arr = np.broadcast_to(np.asarray(hi, dtype=float), (dimension,)).copy()
        if np.any(hi_arr <= lo_arr):
            raise ConfigurationError(f"box upper corner {hi_arr.tolist()} must exceed lower {lo_arr.tolist()}")
        return cls(lo_arr, hi_arr)

    @property
    def dimension(self) -> int:
        return int(self.lo.shape[0])

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def depth(self, x: np.ndarray) -> float:
        """Chart distance from ``x`` to the box boundary (negative outside)."""
        return float(min(np.min(x - self.lo), np.min(self.hi - x)))

    def inner_radius(self) -> float:
        """Radius of the largest origin-centred ball inside the box."""
        return self.depth(np.zeros(self.dimension))


@dataclass(frozen=True)
class Lattice:
    """The lattice ``eps * Z^n``."""

    epsilon: float

    def __post_init__(self) -> None:
        if not self.epsilon > 0.0:
            raise ConfigurationError(f"lattice epsilon must be positive, got {self.epsilon}")

    def point(self, index: Sequence[int]) -> np.ndarray:
        return self.epsilon * np.asarray(index, dtype=float)

    def cube(self, anchor_index: Sequence[int]) -> "Cube":
        return Cube(tuple(int(i) for i in anchor_index), self.epsilon)


@dataclass(frozen=True)
class Cube:
    """Lattice cube ``Q_eps(p)`` with ``p = epsilon * anchor_index``."""

    anchor_index: Tuple[int, ...]
    epsilon: float

    @property
    def anchor(self) -> np.ndarray:
        return self.epsilon * np.asarray(self.anchor_index, dtype=float)

    def vertex_indices(self) -> List[Tuple[int, ...]]:
        n = len(self.anchor_index)
        return [
            tuple(a + b for a, b in zip(self.anchor_index, bits))
            for bits in itertools.product((0, 1), repeat=n)
        ]

    def vertices(self) -> List[np.ndarray]:
        return [self.epsilon * np.asarray(v, dtype=float) for v in self.vertex_indices()]

    def contains(self, x: np.ndarray) -> bool:
        t = np.asarray(x, dtype=float) / self.epsilon - np.asarray(self.anchor_index)
        return bool(np.all(t >= -1e-12) and np.all(t <= 1.0 + 1e-12))


def gamma(x: Any, lattice: Lattice) -> np.ndarray:
    """Lattice rounding: the minimal-norm point among the nearest lattice points.

    The norm is separable over coordinates, so each coordinate rounds to the
    nearest multiple of epsilon with exact halves rounded toward zero.
    """
    t = np.asarray(x, dtype=float) / lattice.epsilon
    if not np.all(np.isfinite(t)):
        raise DomainError(f"non-finite point {np.asarray(x).tolist()}")
    a = np.abs(t)
    fl = np.floor(a)
    k = fl + (a - fl > 0.5)
    return np.sign(t) * k * lattice.epsilon + 0.0


def gamma_index(x: Any, lattice: Lattice) -> Tuple[int, ...]:
    return tuple(int(v) for v in np.rint(gamma(x, lattice) / lattice.epsilon))


def nearest_lattice_set(x: Any, lattice: Lattice) -> List[np.ndarray]:
    """All lattice points nearest to ``x`` (the set Gamma minimises over)."""
    t = np.asarray(x, dtype=float) / lattice.epsilon
    choices = []
    for ti in t:
        fl = math.floor(ti)
        frac = ti - fl
        if frac == 0.5:
            choices.append((fl, fl + 1))
        else:
            choices.append((fl + (frac > 0.5),))
    return [lattice.epsilon * np.asarray(c, dtype=float) for c in itertools.product(*choices)]


# ----------------------------------------------------------------------
# Nets


class Net(ABC):
    """A finite delta-net of a chart box."""

    def __init__(self, dimension: int, delta: float, box: Box) -> None:
        if not delta > 0.0:
            raise ConfigurationError(f"net delta must be positive, got {delta}")
        self.dimension = int(dimension)
        self.delta = float(delta)
        self.box = box

    @property
    @abstractmethod
    def points(self) -> np.ndarray:
        """All net points, one per row."""

    @abstractmethod
    def within(self, x: np.ndarray, radius: float) -> np.ndarray:
        """Net points at chart distance ``<= radius`` from ``x``."""

    @abstractmethod
    def _candidates(self, x: np.ndarray) -> np.ndarray:
        """A point set guaranteed to contain every nearest net point of ``x``."""

    def nearest(self, x: Any) -> np.ndarray:
        pt = np.asarray(x, dtype=float)
        cand = self._candidates(pt)
        if len(cand) == 0:
            raise CoverageError(f"no net points near {pt.tolist()}")
        dists = np.linalg.norm(cand - pt, axis=1)
        tied = cand[dists <= dists.min() + TIE_TOL]
        if len(tied) > 1:
            # lexsort keys are read last-to-first
            tied = tied[np.lexsort(tied.T[::-1])]
        return tied[0].copy()

    def nu(self, x: Any) -> np.ndarray:
        """Net rounding; raises ``CoverageError`` outside the coverage region."""
        pt = np.asarray(x, dtype=float)
        if pt.shape != (self.dimension,) or not np.all(np.isfinite(pt)):
            raise DomainError(f"cannot round {pt.tolist()} in dimension {self.dimension}")
        if not self.box.contains(pt):
            raise CoverageError(f"{pt.tolist()} lies outside the net box")
        q = self.nearest(pt)
        err = float(np.linalg.norm(pt - q))
        if err >= self.delta:
            raise CoverageError(f"rounding error {err:.6f} at {pt.tolist()} is not below delta {self.delta}")
        return q

    def rounding_error(self, x: Any) -> float:
        pt = np.asarray(x, dtype=float)
        return float(np.linalg.norm(pt - self.nu(pt)))

    def covering_radius(self, samples: np.ndarray) -> float:
        """Largest sampled distance from ``samples`` to the net."""
        return max(float(np.linalg.norm(s - self.nearest(s))) for s in samples)

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": type(self).__name__,
            "dimension": self.dimension,
            "delta": self.delta,
            "box": [self.box.lo.tolist(), self.box.hi.tolist()],
        }


def _zigzag(i: int) -> int:
    return 2 * i if i >= 0 else -2 * i - 1


class JitteredLatticeNet(Net):
    """``epsilon_base * Z^n`` with each point moved inside a ball of radius ``jitter``.

    Points are generated on demand from ``(seed, index)``, so the net is
    deterministic without being materialised.
    """

    def __init__(self, epsilon_base: float, delta: float, jitter: float, seed: int, box: Box) -> None:
        super().__init__(box.dimension, delta, box)
        self.epsilon_base = float(epsilon_base)
        self.jitter = float(jitter)
        self.seed = int(seed)
        # one layer outside the box so every box point keeps its nearest point
        self.index_lo = np.floor(box.lo / self.epsilon_base).astype(int) - 1
        self.index_hi = np.ceil(box.hi / self.epsilon_base).astype(int) + 1
        self._cache: Dict[Tuple[int, ...], np.ndarray] = {}
        self._lock = threading.Lock()
        self._window = int(math.ceil(math.sqrt(self.dimension) / 2 + 2 * self.jitter / self.epsilon_base + 0.5))

    def point(self, index: Sequence[int]) -> np.ndarray:
        key = tuple(int(i) for i in index)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        base = self.epsilon_base * np.asarray(key, dtype=float)
        if self.jitter > 0.0:
            rng = np.random.default_rng([self.seed] + [_zigzag(i) for i in key])
            direction = rng.standard_normal(self.dimension)
            direction /= np.linalg.norm(direction)
            radius = self.jitter * rng.random() ** (1.0 / self.dimension)
            base = base + radius * direction
        with self._lock:
            self._cache.setdefault(key, base)
        return base

    def _index_block(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        lo = np.maximum(lo, self.index_lo)
        hi = np.minimum(hi, self.index_hi)
        if np.any(hi < lo):
            return np.empty((0, self.dimension))
        ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
        return np.array([self.point(idx) for idx in itertools.product(*ranges)])

    @property
    def points(self) -> np.ndarray:
        return self._index_block(self.index_lo, self.index_hi)

    def _candidates(self, x: np.ndarray) -> np.ndarray:
        centre = np.rint(x / self.epsilon_base).astype(int)
        return self._index_block(centre - self._window, centre + self._window)

    def within(self, x: np.ndarray, radius: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo = np.floor((x - radius - self.jitter) / self.epsilon_base).astype(int)
        hi = np.ceil((x + radius + self.jitter) / self.epsilon_base).astype(int)
        block = self._index_block(lo, hi)
        if len(block) == 0:
            return block
        return block[np.linalg.norm(block - x, axis=1) <= radius]

    def describe(self) -> Dict[str, Any]:
        info = super().describe()
        info.update(epsilon_base=self.epsilon_base, jitter=self.jitter, seed=self.seed)
        return info


class PointNet(Net):
    """An explicit point set, searched with a k-d tree."""

    def __init__(self, points: np.ndarray, delta: float, box: Optional[Box] = None) -> None:
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or len(pts) == 0:
            raise ConfigurationError("a point net needs at least one point")
        if box is None:
            box = Box(pts.min(axis=0), pts.max(axis=0))
        super().__init__(pts.shape[1], delta, box)
        self._points = pts
        self._tree = cKDTree(pts)

    @property
    def points(self) -> np.ndarray:
        return self._points

    def _candidates(self, x: np.ndarray) -> np.ndarray:
        best, _ = self._tree.query(x)
        return self._points[self._tree.query_ball_point(x, best + 1e-9)]

    def within(self, x: np.ndarray, radius: float) -> np.ndarray:
        return self._points[self._tree.query_ball_point(np.asarray(x, dtype=float), radius)]


def generate_net(epsilon_base: float, delta: float, jitter: float, seed: int, box: Box) -> JitteredLatticeNet:
    """Jittered lattice net whose covering radius is provably below ``delta``."""
    n = box.dimension
    if not epsilon_base > 0.0 or jitter < 0.0:
        raise ConfigurationError("epsilon_base must be positive and jitter non-negative")
    covering = epsilon_base * math.sqrt(n) / 2 + jitter
    if not covering < delta:
        raise ConfigurationError(
            f"epsilon_base*sqrt(n)/2 + jitter < delta fails: {covering:.4f} >= {delta}"
        )
    logger.debug("generating net eb=%s delta=%s jitter=%s seed=%s", epsilon_base, delta, jitter, seed)
    return JitteredLatticeNet(epsilon_base, delta, jitter, seed, box)


def nu(net: Net, x: Any) -> np.ndarray:
    return net.nu(x)


# ----------------------------------------------------------------------
# Embeddings


class Embedding:
    """Map ``iota`` from net points to chart points of M.

    ``pullback`` uses ``phi^-1``, ``identity`` maps each net point to itself,
    ``table`` looks points up in an explicit list.
    """

    MODES = ("pullback", "identity", "table")

    def __init__(
        self,
        mode: str,
        metric: MetricField,
        table: Optional[Mapping[Tuple[float, ...], np.ndarray]] = None,
    ) -> None:
        if mode not in self.MODES:
            raise ConfigurationError(f"unknown embedding mode: {mode}")
        if mode == "pullback" and not metric.has_oracle:
            raise ConfigurationError(f"pullback embedding needs a pullback metric, got {metric.family}")
        if mode == "table" and not table:
            raise ConfigurationError("table embedding needs a non-empty table")
        self.mode = mode
        self.metric = metric
        self._table: Dict[Tuple[float, ...], np.ndarray] = {}
        if table:
            for key, value in table.items():
                self._table[_table_key(np.asarray(key, dtype=float))] = np.asarray(value, dtype=float)
            self._table_keys = np.array([list(k) for k in self._table])
            self._image_tree = cKDTree(np.array(list(self._table.values())))

    def image(self, p: Any) -> np.ndarray:
        pt = np.asarray(p, dtype=float)
        if self.mode == "pullback":
            return self.metric.inverse_map(pt)
        if self.mode == "identity":
            return pt.copy()
        try:
            return self._table[_table_key(pt)].copy()
        except KeyError:
            raise CoverageError(f"net point {pt.tolist()} has no table entry") from None

    def net_space_ratio(self, samples: Optional[np.ndarray] = None) -> float:
        """``K`` with ``|p - hint(y)| <= K * d(y, iota(p))``, doubled for slack."""
        if self.mode == "pullback":
            assert isinstance(self.metric, PullbackMetric)
            return 2.0 * self.metric.forward_lipschitz() * self.metric.inverse_lipschitz()
        return self.metric.chart_lipschitz(samples)

    def candidates(self, net: Net, y: np.ndarray, radius: float) -> Tuple[np.ndarray, np.ndarray]:
        """Net points within ``radius`` of ``y`` in net coordinates, with those distances."""
        if self.mode == "table":
            idx = self._image_tree.query_ball_point(y, radius)
            images = self._image_tree.data[idx]
            return self._table_keys[idx], np.linalg.norm(images - y, axis=1)
        hint = self.metric.forward_map(y) if self.mode == "pullback" else y
        pts = net.within(hint, radius)
        return pts, np.linalg.norm(pts - hint, axis=1) if len(pts) else np.empty(0)


def _table_key(p: np.ndarray) -> Tuple[float, ...]:
    return tuple(float(v) + 0.0 for v in np.round(p, TABLE_DECIMALS))


def make_embedding(cfg: Mapping[str, Any], metric: MetricField, base_dir: Optional[Path] = None) -> Embedding:
    mode = str(cfg.get("mode", "pullback")).lower()
    if mode == "table":
        path = Path(str(cfg.get("table")))
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_embedding_table(path, metric)
    return Embedding(mode, metric)


# ----------------------------------------------------------------------
# File formats


def _read_rows(path: Union[str, Path]) -> Tuple[int, float, np.ndarray]:
    with open(path, "r") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ConfigurationError(f"{path}: first line must be 'n delta'")
        n, delta = int(header[0]), float(header[1])
        rows = [line.split() for line in fh if line.strip()]
    return n, delta, np.array(rows, dtype=float).reshape(len(rows), -1)


def load_net(path: Union[str, Path], box: Optional[Box] = None) -> PointNet:
    n, delta, data = _read_rows(path)
    if data.shape[1] != n:
        raise ConfigurationError(f"{path}: expected {n} columns, got {data.shape[1]}")
    return PointNet(data, delta, box)


def save_net(net: Net, path: Union[str, Path]) -> None:
    pts = net.points
    with open(path, "w") as fh:
        fh.write(f"{net.dimension} {net.delta!r}\n")
        for p in pts:
            fh.write(" ".join(repr(float(v)) for v in p) + "\n")


def load_embedding_table(path: Union[str, Path], metric: MetricField) -> Embedding:
    n, _delta, data = _read_rows(path)
    if data.shape[1] != 2 * n:
        raise ConfigurationError(f"{path}: embedding table needs {2 * n} columns")
    table = {tuple(row[:n]): row[n:] for row in data}
    return Embedding("table", metric, table)


def save_embedding_table(net: Net, embedding: Embedding, path: Union[str, Path]) -> None:
    with open(path, "w") as fh:
        fh.write(f"{net.dimension} {net.delta!r}\n")
        for p in net.points:
            row = np.concatenate((p, embedding.image(p)))
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


# ----------------------------------------------------------------------
# Audits


@dataclass(frozen=True)
class DistortionReport:
    max_distortion: float
    worst_pair: Tuple[Tuple[float, ...], Tuple[float, ...]]
    pairs: int


def _pair_distortion(args: Tuple[GeodesicSolver, Embedding, np.ndarray, np.ndarray]) -> float:
    solver, embedding, p, q = args
    d = solver.distance(embedding.image(p), embedding.image(q))
    return abs(d - float(np.linalg.norm(p - q)))


def distortion_audit(
    points: np.ndarray,
    solver: GeodesicSolver,
    embedding: Embedding,
    pair_budget: int,
    seed: int = 0,
    mapper: Mapper = map,
) -> DistortionReport:
    """Largest ``|d(iota p, iota q) - |p - q||`` over all pairs or a seeded sample."""
    pts = np.asarray(points, dtype=float)
    total = len(pts) * (len(pts) - 1) // 2
    if total == 0:
        raise DomainError("distortion audit needs at least two net points")
    if total <= pair_budget:
        pairs = list(itertools.combinations(range(len(pts)), 2))
    else:
        rng = np.random.default_rng(seed)
        pairs = []
        while len(pairs) < pair_budget:
            i, j = rng.choice(len(pts), size=2, replace=False)
            pairs.append((int(min(i, j)), int(max(i, j))))
    values = list(mapper(_pair_distortion, [(solver, embedding, pts[i], pts[j]) for i, j in pairs]))
    worst = int(np.argmax(values))
    i, j = pairs[worst]
    report = DistortionReport(
        max_distortion=float(values[worst]),
        worst_pair=(tuple(pts[i].tolist()), tuple(pts[j].tolist())),
        pairs=len(pairs),
    )
    logger.info("distortion audit over %d pairs: max %.3e", report.pairs, report.max_distortion)
    return report


@dataclass(frozen=True)
class BracketReport:
    distance: float
    chart_distance: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - abs(self.distance - self.chart_distance)


def lattice_distance_bracket(
    solver: GeodesicSolver, net: Net, embedding: Embedding, p: Any, q: Any
) -> BracketReport:
    """``|d(iota nu p, iota nu q) - |p - q|| <= delta_nu(p) + delta_nu(q)``."""
    p_arr, q_arr = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    rp, rq = net.nu(p_arr), net.nu(q_arr)
    d = solver.distance(embedding.image(rp), embedding.image(rq))
    bound = float(np.linalg.norm(p_arr - rp) + np.linalg.norm(q_arr - rq))
    return BracketReport(d, float(np.linalg.norm(p_arr - q_arr)), bound)


@dataclass(frozen=True)
class RefinementReport:
    centre: Tuple[float, ...]
    radius: float
    refined_delta: float
    epsilon0: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.epsilon0 > 0.0


def refinement_radius(dimension: int, delta: float) -> float:
    return 2 * dimension * (1 + 2 * delta) + 2 * delta + math.sqrt(dimension)


def refinement_audit(net: Net, centre: Any, samples: int, seed: int = 0) -> RefinementReport:
    """Sampled rounding bound on the ball ``B(centre, 2n(1 + 2 delta) + 2 delta + sqrt n)``.

    The refined bound ``delta~`` is the largest sampled distance to the
    net; ``epsilon0 = min(1/2, delta - delta~)`` must be positive.
    """
    c = np.asarray(centre, dtype=float)
    n = net.dimension
    radius = refinement_radius(n, net.delta)
    pts = ball_samples(c, radius, samples, seed)
    refined = max(net.rounding_error(p) for p in pts)
    eps0 = min(0.5, net.delta - refined)
    return RefinementReport(tuple(c.tolist()), radius, refined, eps0, len(pts))


def ball_samples(centre: np.ndarray, radius: float, count: int, seed: int = 0) -> np.ndarray:
    """Low-discrepancy points filling the closed ball, centre and boundary included."""
    n = centre.shape[0]
    halton = qmc.Halton(d=n, scramble=True, seed=seed)
    out: List[np.ndarray] = [centre.copy()]
    while len(out) < count:
        cube = 2.0 * halton.random(max(count, 16)) - 1.0
        for row in cube:
            if row @ row <= 1.0:
                out.append(centre + radius * row)
                if len(out) >= count:
                    break
    return np.array(out[:count])


@dataclass(frozen=True)
class NearestImage:
    point: np.ndarray
    image: np.ndarray
    distance: float
    examined: int


class NetImageIndex:
    """Nearest point of ``iota(X)`` to a chart point, measured in M.

    Candidates are pruned to net-space radius ``(2 delta n + margin) * K``
    where ``K`` bounds the net-space vs metric distance ratio, then examined
    in order of net-space distance until the bound rules out the rest.
    """

    def __init__(
        self,
        net: Net,
        embedding: Embedding,
        solver: GeodesicSolver,
        margin: float = 1.0,
        ratio_samples: Optional[np.ndarray] = None,
    ) -> None:
        self.net = net
        self.embedding = embedding
        self.solver = solver
        self.ratio = embedding.net_space_ratio(ratio_samples)
        self.radius = (2 * net.delta * net.dimension + margin) * self.ratio

    def nearest(self, y: Any) -> NearestImage:
        y_arr = np.asarray(y, dtype=float)
        pts, spread = self.embedding.candidates(self.net, y_arr, self.radius)
        if len(pts) == 0:
            raise CoverageError(f"no net image within the pruning radius of {y_arr.tolist()}")
        order = np.lexsort(tuple(pts.T[::-1]) + (np.round(spread, 12),))
        best: Optional[Tuple[float, np.ndarray, np.ndarray]] = None
        examined = 0
        for k in order:
            if best is not None and spread[k] / self.ratio > best[0]:
                break
            image = self.embedding.image(pts[k])
            d = self.solver.distance(y_arr, image)
            examined += 1
            if best is None or d < best[0] - TIE_TOL:
                best = (d, pts[k], image)
        assert best is not None
        return NearestImage(best[1].copy(), best[2], float(best[0]), examined)
