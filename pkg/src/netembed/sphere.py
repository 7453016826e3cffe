"""
Sphere grids and the degree of maps between spheres.

``circle_grid`` and ``icosphere`` give antipodally symmetric grids on
S^1 and S^2.  ``winding_number`` computes the degree of a loop in
R^2 minus the origin with adaptive refinement; ``sphere_degree`` counts
signed coverings of a regular value for maps S^2 -> S^2.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from .errors import DegeneracyError, ResolutionError

logger = logging.getLogger(__name__)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
MIN_NORM = 1e-6

SphereMap = Callable[[np.ndarray], np.ndarray]


def circle_grid(count: int) -> np.ndarray:
    angles = 2.0 * math.pi * np.arange(count) / count
    return np.column_stack((np.cos(angles), np.sin(angles)))


def _orient_outward(verts: np.ndarray, faces: np.ndarray) -> np.ndarray:
    out = faces.copy()
    dets = np.einsum("ij,ij->i", verts[out[:, 0]], np.cross(verts[out[:, 1]], verts[out[:, 2]]))
    flip = dets < 0
    out[flip] = out[flip][:, [0, 2, 1]]
    return out


def icosahedron() -> Tuple[np.ndarray, np.ndarray]:
    """Unit icosahedron with outward-oriented faces."""
    base = []
    for a in (-1.0, 1.0):
        for b in (-GOLDEN, GOLDEN):
            base.extend([(0.0, a, b), (a, b, 0.0), (b, 0.0, a)])
    verts = np.array(base)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = ConvexHull(verts).simplices
    return verts, _orient_outward(verts, np.asarray(faces))


def subdivide(verts: np.ndarray, faces: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split every triangle into four, pushing midpoints to the sphere; keeps orientation."""
    points: List[np.ndarray] = list(verts)
    midpoints: Dict[Tuple[int, int], int] = {}

    def midpoint(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        idx = midpoints.get(key)
        if idx is None:
            s = points[a] + points[b]
            points.append(s / np.linalg.norm(s))
            idx = len(points) - 1
            midpoints[key] = idx
        return idx

    new_faces = []
    for a, b, c in faces:
        i, j, k = midpoint(a, b), midpoint(b, c), midpoint(a, c)
        new_faces.extend([(a, i, k), (i, b, j), (k, j, c), (i, j, k)])
    return np.array(points), np.array(new_faces, dtype=int)


def icosphere(level: int) -> Tuple[np.ndarray, np.ndarray]:
    verts, faces = icosahedron()
    for _ in range(level):
        verts, faces = subdivide(verts, faces)
    return verts, faces


def icosphere_grid(min_points: int) -> Tuple[np.ndarray, np.ndarray]:
    """Coarsest icosphere with at least ``min_points`` vertices."""
    level = 0
    verts, faces = icosphere(0)
    while len(verts) < min_points:
        level += 1
        verts, faces = subdivide(verts, faces)
    return verts, faces


def antipodes(grid: np.ndarray) -> np.ndarray:
    """Index of ``-v`` for every grid vector ``v``."""
    dist, idx = cKDTree(grid).query(-grid)
    if np.max(dist) > 1e-9:
        raise DegeneracyError("grid is not antipodally symmetric")
    return idx


def grid_spacing(grid: np.ndarray) -> float:
    """Smallest angle between distinct grid directions."""
    dist, _ = cKDTree(grid).query(grid, k=2)
    chord = float(np.min(dist[:, 1]))
    return 2.0 * math.asin(min(1.0, chord / 2.0))


# ----------------------------------------------------------------------
# Degree


@dataclass(frozen=True)
class WindingResult:
    degree: int
    samples: int
    max_step: float


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def winding_number(
    f: SphereMap,
    resolution: int,
    max_step: float = math.pi / 4,
    max_samples: int = 1 << 18,
) -> WindingResult:
    """Degree of ``theta -> f(cos theta, sin theta)`` around the origin.

    Intervals whose image turns by more than ``max_step`` are bisected.
    """

    def angle_at(theta: float) -> float:
        w = np.asarray(f(np.array([math.cos(theta), math.sin(theta)])), dtype=float)
        if float(np.linalg.norm(w)) <= MIN_NORM:
            raise DegeneracyError(f"loop image meets the origin at theta={theta:.6f}")
        return math.atan2(w[1], w[0])

    thetas = np.linspace(0.0, 2.0 * math.pi, resolution + 1)
    angles = [angle_at(t) for t in thetas[:-1]]
    angles.append(angles[0])
    pending = deque((thetas[k], angles[k], thetas[k + 1], angles[k + 1]) for k in range(resolution))
    samples = resolution
    total = 0.0
    largest = 0.0
    while pending:
        t0, a0, t1, a1 = pending.popleft()
        step = _wrap(a1 - a0)
        if abs(step) > max_step:
            if samples >= max_samples:
                raise ResolutionError(f"winding refinement exceeded {max_samples} samples")
            tm = 0.5 * (t0 + t1)
            am = angle_at(tm)
            samples += 1
            pending.appendleft((tm, am, t1, a1))
            pending.appendleft((t0, a0, tm, am))
            continue
        largest = max(largest, abs(step))
        total += step
    turns = total / (2.0 * math.pi)
    degree = int(round(turns))
    if abs(turns - degree) > 1e-6:
        raise DegeneracyError(f"accumulated angle {total:.6f} is not a multiple of 2 pi")
    return WindingResult(degree, samples, largest)


@dataclass(frozen=True)
class SphereDegree:
    degree: int
    direction: Tuple[float, float, float]
    draws: int
    faces: int


def _covering_count(images: np.ndarray, faces: np.ndarray, d: np.ndarray, margin: float) -> Optional[int]:
    a, b, c = images[faces[:, 0]], images[faces[:, 1]], images[faces[:, 2]]
    orient = np.sign(np.einsum("ij,ij->i", a, np.cross(b, c)))
    edges = []
    for p, q in ((a, b), (b, c), (c, a)):
        normal = np.cross(p, q)
        length = np.linalg.norm(normal, axis=1)
        length[length == 0.0] = 1.0
        edges.append(orient * (normal @ d) / length)
    margins = np.column_stack(edges)
    front = (a + b + c) @ d > 0.0
    inside = front & np.all(margins > 0.0, axis=1)
    near = front & np.all(margins > -margin, axis=1) & np.any(np.abs(margins) < margin, axis=1)
    if np.any(near) or np.any(front & (orient == 0) & np.all(margins > -margin, axis=1)):
        return None
    return int(orient[inside].sum())


def sphere_degree(
    f: SphereMap,
    level: int,
    rng: np.random.Generator,
    margin: float = 1e-3,
    draws: int = 16,
) -> SphereDegree:
    """Degree of ``f: S^2 -> S^2`` by counting signed preimages of a random regular value."""
    verts, faces = icosphere(level)
    images = np.array([np.asarray(f(v), dtype=float) for v in verts])
    norms = np.linalg.norm(images, axis=1)
    if np.min(norms) <= MIN_NORM:
        raise DegeneracyError("sphere image meets the origin")
    images /= norms[:, None]
    for attempt in range(1, draws + 1):
        d = rng.standard_normal(3)
        d /= np.linalg.norm(d)
        count = _covering_count(images, faces, d, margin)
        if count is not None:
            return SphereDegree(count, tuple(float(v) for v in d), attempt, len(faces))  # type: ignore[arg-type]
        logger.debug("direction %s is within %.0e of an image edge, redrawing", d.tolist(), margin)
    raise DegeneracyError(f"no regular value found in {draws} draws")
