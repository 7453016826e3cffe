"""
Recursive geodesic simplex maps.

``Delta[u0, ..., uk]`` sends a Euclidean simplex into M: the image of a
point with barycentric weights ``lam`` is found on the minimizing geodesic
from ``iota(nu(u0))`` to the image of the opposite face, evaluated at
parameter ``1 - lam0``.  A lattice vertex ``u`` stands for ``iota(nu(u))``
throughout.
"""

from __future__ import annotations

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from .errors import EvaluationError, NetEmbedError
from .manifold import GeodesicPath, GeodesicSolver
from .netlattice import Embedding, Lattice, Net
from .triangulation import KuhnSimplex, VertexIndex, lattice_index, shared_face

logger = logging.getLogger(__name__)

SNAP = 1e-12
CACHE_LIMIT = 8192

Mapper = Callable[..., Iterable[Any]]


def simplex_samples(k: int, count: int, seed: int = 0, corners: bool = True) -> np.ndarray:
    """Low-discrepancy barycentric weights on the ``k``-simplex (rows sum to one)."""
    rows: List[np.ndarray] = []
    if corners:
        rows.extend(np.eye(k + 1))
    remaining = count - len(rows)
    if remaining > 0:
        if k == 0:
            rows.extend(np.ones((remaining, 1)))
        else:
            cube = qmc.Halton(d=k, scramble=True, seed=seed).random(remaining)
            cuts = np.sort(cube, axis=1)
            padded = np.hstack((np.zeros((remaining, 1)), cuts, np.ones((remaining, 1))))
            rows.extend(np.diff(padded, axis=1))
    return np.array(rows[:count])


class SimplexMapEvaluator:
    """Evaluates ``Delta`` for ordered lattice vertex tuples, memoizing geodesic segments."""

    def __init__(self, solver: GeodesicSolver, net: Net, embedding: Embedding, lattice: Lattice) -> None:
        self.solver = solver
        self.metric = solver.metric
        self.net = net
        self.embedding = embedding
        self.lattice = lattice
        self._lock = threading.RLock()
        self._images: Dict[VertexIndex, np.ndarray] = {}
        self._rounding: Dict[VertexIndex, float] = {}
        self._segments: "OrderedDict[Tuple[VertexIndex, bytes], GeodesicPath]" = OrderedDict()

    # ------------------------------------------------------------------
    # Vertex images
    def vertex_image(self, index: VertexIndex) -> np.ndarray:
        """``iota(nu(u))`` for the lattice vertex ``u = epsilon * index``."""
        cached = self._images.get(index)
        if cached is not None:
            return cached
        p = self.lattice.point(index)
        q = self.net.nu(p)
        image = self.embedding.image(q)
        image.setflags(write=False)
        with self._lock:
            image = self._images.setdefault(index, image)
            self._rounding.setdefault(index, float(np.linalg.norm(p - q)))
        return image

    def rounding_error(self, index: VertexIndex) -> float:
        """``delta_nu(u)`` for a lattice vertex."""
        if index not in self._rounding:
            self.vertex_image(index)
        return self._rounding[index]

    def to_indices(self, vertices: Sequence[Any]) -> Tuple[VertexIndex, ...]:
        out = []
        for v in vertices:
            if isinstance(v, tuple) and all(isinstance(c, int) for c in v):
                out.append(v)
            else:
                out.append(lattice_index(v, self.lattice.epsilon))
        return tuple(out)

    # ------------------------------------------------------------------
    # Evaluation
    def _segment(self, origin: VertexIndex, target: np.ndarray, vertices: Tuple[VertexIndex, ...]) -> GeodesicPath:
        key = (origin, target.tobytes())
        with self._lock:
            path = self._segments.get(key)
            if path is not None:
                self._segments.move_to_end(key)
                return path
        try:
            path = self.solver.bvp(self.vertex_image(origin), target)
        except NetEmbedError as exc:
            raise EvaluationError(f"geodesic segment failed: {exc}", vertices) from exc
        if not path.minimizing:
            raise EvaluationError("geodesic segment is not certified minimizing", vertices)
        with self._lock:
            path = self._segments.setdefault(key, path)
            while len(self._segments) > CACHE_LIMIT:
                self._segments.popitem(last=False)
        return path

    def _eval(self, vertices: Tuple[VertexIndex, ...], lam: np.ndarray) -> np.ndarray:
        if len(vertices) == 1:
            return self.vertex_image(vertices[0])
        lam0 = float(lam[0])
        if lam0 > 1.0 - SNAP:
            return self.vertex_image(vertices[0])
        face_point = self._eval(vertices[1:], lam[1:] / (1.0 - lam0))
        if lam0 == 0.0:
            return face_point
        path = self._segment(vertices[0], np.asarray(face_point, dtype=float), vertices)
        return path.at(1.0 - lam0)

    def delta_eval(self, vertices: Sequence[Any], lam: Any) -> np.ndarray:
        """``Delta[u0, ..., uk](lam)`` as a chart point of M."""
        verts = self.to_indices(vertices)
        weights = np.asarray(lam, dtype=float)
        if weights.shape != (len(verts),):
            raise EvaluationError(f"expected {len(verts)} barycentric weights, got {weights.shape}", verts)
        if np.any(weights < -1e-12) or abs(float(weights.sum()) - 1.0) > 1e-9:
            raise EvaluationError(f"invalid barycentric weights {weights.tolist()}", verts)
        if list(verts) != sorted(verts):
            raise EvaluationError("vertices must be in lexicographic order", verts)
        return np.array(self._eval(verts, np.clip(weights, 0.0, None)), dtype=float)

    def edge_length_sum(self, vertices: Sequence[Any]) -> float:
        """``sum d(u_i, u_i+1)`` along the ordered vertex tuple."""
        verts = self.to_indices(vertices)
        return float(sum(
            self.solver.distance(self.vertex_image(a), self.vertex_image(b))
            for a, b in zip(verts[:-1], verts[1:])
        ))

    def clear(self) -> None:
        with self._lock:
            self._segments.clear()


# ----------------------------------------------------------------------
# Verifiers


@dataclass(frozen=True)
class ConditionReport:
    bound: float
    worst: float
    worst_lambda: Tuple[float, ...]
    samples: int

    @property
    def slack(self) -> float:
        return self.bound - self.worst


def verify_condition_iii(
    evaluator: SimplexMapEvaluator,
    vertices: Sequence[Any],
    budget: int,
    seed: int = 0,
    mapper: Mapper = map,
) -> ConditionReport:
    """Largest ``d(y, u0)`` over sampled ``y`` in the image, against ``sum d(u_i, u_i+1)``."""
    if budget < 1:
        raise ValueError("sample budget must be at least one")
    verts = evaluator.to_indices(vertices)
    origin = evaluator.vertex_image(verts[0])
    bound = evaluator.edge_length_sum(verts)
    lams = simplex_samples(len(verts) - 1, budget, seed)

    def observe(lam: np.ndarray) -> float:
        return evaluator.solver.distance(origin, evaluator.delta_eval(verts, lam))

    observed = list(mapper(observe, lams))
    worst = int(np.argmax(observed))
    return ConditionReport(bound, float(observed[worst]), tuple(lams[worst].tolist()), len(lams))


@dataclass(frozen=True)
class FaceReport:
    max_discrepancy: float
    samples: int
    face: Tuple[VertexIndex, ...]


def verify_face_consistency(
    evaluator: SimplexMapEvaluator,
    s1: KuhnSimplex,
    s2: KuhnSimplex,
    budget: int,
    seed: int = 0,
    mapper: Mapper = map,
) -> FaceReport:
    """Largest chart gap between ``Delta[s1]``, ``Delta[s2]`` and ``Delta[tau]`` on the shared face."""
    j1, j2 = shared_face(s1, s2)
    if not j1:
        raise ValueError("simplices share no face")
    face = tuple(s1.vertex_indices[j] for j in j1)
    lams = simplex_samples(len(face) - 1, budget, seed)
    n1, n2 = len(s1.vertex_indices), len(s2.vertex_indices)

    def discrepancy(lam: np.ndarray) -> float:
        l1, l2 = np.zeros(n1), np.zeros(n2)
        l1[j1] = lam
        l2[j2] = lam
        a = evaluator.delta_eval(s1.vertex_indices, l1)
        b = evaluator.delta_eval(s2.vertex_indices, l2)
        c = evaluator.delta_eval(face, lam)
        return float(max(np.linalg.norm(a - b), np.linalg.norm(a - c), np.linalg.norm(b - c)))

    gaps = list(mapper(discrepancy, lams))
    return FaceReport(float(max(gaps)), len(lams), face)


@dataclass(frozen=True)
class ContinuityReport:
    max_displacement: float
    step: float
    constant: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.max_displacement < self.constant * self.step


def continuity_probe(
    evaluator: SimplexMapEvaluator,
    vertices: Sequence[Any],
    budget: int,
    step: float = 1e-6,
    seed: int = 0,
    mapper: Mapper = map,
) -> ContinuityReport:
    """Image displacement under barycentric perturbations of size ``step``.

    Passes when every displacement stays below ``10 * diam * step``.
    """
    verts = evaluator.to_indices(vertices)
    pts = np.array([evaluator.lattice.point(v) for v in verts])
    diameter = max(float(np.linalg.norm(a - b)) for a in pts for b in pts)
    lams = simplex_samples(len(verts) - 1, budget, seed, corners=False)
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal(lams.shape)
    directions -= directions.mean(axis=1, keepdims=True)
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    def displacement(args: Tuple[np.ndarray, np.ndarray]) -> float:
        lam, direction = args
        moved = lam + step * direction
        if np.any(moved < 0.0):
            moved = lam - step * direction
        if np.any(moved < 0.0):
            return 0.0
        a = evaluator.delta_eval(verts, lam)
        b = evaluator.delta_eval(verts, moved)
        return float(np.linalg.norm(a - b))

    shifts = list(mapper(displacement, list(zip(lams, directions))))
    return ContinuityReport(float(max(shifts)), step, 10.0 * diameter, len(lams))


def first_simplex(evaluator: SimplexMapEvaluator, anchor: Optional[Sequence[int]] = None) -> KuhnSimplex:
    """Identity-permutation simplex of the cube at ``anchor`` (default the origin)."""
    n = evaluator.net.dimension
    idx = tuple(anchor) if anchor is not None else (0,) * n
    return KuhnSimplex(tuple(int(i) for i in idx), tuple(range(n)), evaluator.lattice.epsilon)
