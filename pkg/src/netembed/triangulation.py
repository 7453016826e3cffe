"""
Kuhn triangulation of ``eps * Z^n``.

Each lattice cube ``Q(p)`` splits into the ``n!`` simplices
``sigma(p, pi) = conv{p, p + eps e_pi(1), ..., p + eps (e_pi(1) + ... + e_pi(n))}``.
Vertices are kept both in path form and in lexicographic order; the
lexicographic order is the canonical one for simplex maps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Iterator, List, Sequence, Tuple

import numpy as np

from .errors import DomainError

VertexIndex = Tuple[int, ...]

CLAMP = 1e-14


@dataclass(frozen=True)
class KuhnSimplex:
    """``sigma(p, pi)`` with ``p = epsilon * anchor_index``; ``permutation`` holds 0-based axes."""

    anchor_index: VertexIndex
    permutation: Tuple[int, ...]
    epsilon: float

    @property
    def dimension(self) -> int:
        return len(self.anchor_index)

    @property
    def path_indices(self) -> Tuple[VertexIndex, ...]:
        current = list(self.anchor_index)
        out = [tuple(current)]
        for axis in self.permutation:
            current[axis] += 1
            out.append(tuple(current))
        return tuple(out)

    @property
    def vertex_indices(self) -> Tuple[VertexIndex, ...]:
        """Lattice indices of the vertices in lexicographic order."""
        return tuple(sorted(self.path_indices))

    def vertices(self) -> np.ndarray:
        return self.epsilon * np.array(self.vertex_indices, dtype=float)

    def path_vertices(self) -> np.ndarray:
        return self.epsilon * np.array(self.path_indices, dtype=float)

    def volume(self) -> float:
        verts = self.vertices()
        return abs(float(np.linalg.det((verts[1:] - verts[0]).T))) / math.factorial(self.dimension)

    def contains(self, x: Any, tol: float = 1e-12) -> bool:
        """Coordinates of ``(x - p) / eps`` read along ``pi`` are non-increasing in ``[0, 1]``."""
        t = np.asarray(x, dtype=float) / self.epsilon - np.asarray(self.anchor_index)
        seq = t[list(self.permutation)]
        if seq[0] > 1.0 + tol or seq[-1] < -tol:
            return False
        return bool(np.all(np.diff(seq) <= tol))

    def sort_key(self) -> Tuple[VertexIndex, Tuple[int, ...]]:
        return (self.anchor_index, self.permutation)


@dataclass(frozen=True)
class BarycentricPoint:
    """Point of a Kuhn simplex with weights in lexicographic vertex order."""

    simplex: KuhnSimplex
    weights: np.ndarray

    def point(self) -> np.ndarray:
        return self.weights @ self.simplex.vertices()


def lattice_index(p: Any, epsilon: float) -> VertexIndex:
    """Index of a lattice point; ``DomainError`` when ``p`` is off the lattice."""
    t = np.asarray(p, dtype=float) / epsilon
    idx = np.rint(t)
    if np.max(np.abs(t - idx), initial=0.0) > 1e-9:
        raise DomainError(f"{np.asarray(p).tolist()} is not a point of the {epsilon}-lattice")
    return tuple(int(v) for v in idx)


def kuhn_simplices(p: Any, epsilon: float) -> List[KuhnSimplex]:
    """The ``n!`` simplices of the cube anchored at the lattice point ``p``."""
    anchor = lattice_index(p, epsilon)
    return simplices_of_cube(anchor, epsilon)


def simplices_of_cube(anchor_index: Sequence[int], epsilon: float) -> List[KuhnSimplex]:
    anchor = tuple(int(a) for a in anchor_index)
    return [KuhnSimplex(anchor, perm, epsilon) for perm in itertools.permutations(range(len(anchor)))]


def locate(x: Any, epsilon: float) -> BarycentricPoint:
    """Containing simplex of ``x`` and its barycentric weights.

    Shared faces resolve to the lexicographically smallest anchor and
    permutation.
    """
    pt = np.asarray(x, dtype=float)
    if pt.ndim != 1 or not np.all(np.isfinite(pt)):
        raise DomainError(f"cannot locate {pt.tolist()}")
    t = pt / epsilon
    anchor = np.ceil(t) - 1.0
    frac = np.clip(t - anchor, 0.0, 1.0)
    perm = tuple(int(a) for a in np.argsort(-frac, kind="stable"))
    simplex = KuhnSimplex(tuple(int(a) for a in anchor), perm, epsilon)

    ordered = frac[list(perm)]
    path_weights = np.empty(len(pt) + 1)
    path_weights[0] = 1.0 - ordered[0]
    path_weights[1:-1] = ordered[:-1] - ordered[1:]
    path_weights[-1] = ordered[-1]
    path_weights[path_weights < CLAMP] = 0.0
    path_weights /= path_weights.sum()

    position = {v: k for k, v in enumerate(simplex.vertex_indices)}
    weights = np.empty_like(path_weights)
    for k, v in enumerate(simplex.path_indices):
        weights[position[v]] = path_weights[k]
    return BarycentricPoint(simplex, weights)


def ordered_face(simplex: KuhnSimplex, subset: Sequence[int]) -> Tuple[VertexIndex, ...]:
    """Vertices selected by ``subset`` (sorted-vertex positions), in lexicographic order."""
    chosen = sorted(set(int(j) for j in subset))
    if not chosen:
        raise DomainError("a face needs at least one vertex")
    if chosen[0] < 0 or chosen[-1] > simplex.dimension:
        raise DomainError(f"face indices {chosen} out of range for a {simplex.dimension}-simplex")
    verts = simplex.vertex_indices
    return tuple(verts[j] for j in chosen)


def shared_face(s1: KuhnSimplex, s2: KuhnSimplex) -> Tuple[List[int], List[int]]:
    """Positions of the common vertices in each simplex's sorted vertex list."""
    common = set(s1.vertex_indices) & set(s2.vertex_indices)
    j1 = [k for k, v in enumerate(s1.vertex_indices) if v in common]
    j2 = [k for k, v in enumerate(s2.vertex_indices) if v in common]
    return j1, j2


def block_simplices(anchor_index: Sequence[int], size: int, epsilon: float) -> List[KuhnSimplex]:
    """All simplices of the ``size^n`` cubes starting at ``anchor_index``."""
    out: List[KuhnSimplex] = []
    for offset in itertools.product(range(size), repeat=len(anchor_index)):
        cube = tuple(a + o for a, o in zip(anchor_index, offset))
        out.extend(simplices_of_cube(cube, epsilon))
    return out


def adjacent_pairs(simplices: Sequence[KuhnSimplex]) -> Iterator[Tuple[KuhnSimplex, KuhnSimplex]]:
    """Pairs of simplices that share a facet."""
    by_facet: dict = {}
    for s in simplices:
        verts = s.vertex_indices
        for drop in range(len(verts)):
            facet = verts[:drop] + verts[drop + 1:]
            by_facet.setdefault(facet, []).append(s)
    for owners in by_facet.values():
        for a, b in itertools.combinations(owners, 2):
            yield a, b


def containing_simplices(x: Any, epsilon: float, tol: float = 1e-12) -> List[BarycentricPoint]:
    """Every Kuhn simplex containing ``x``, with weights in sorted-vertex order."""
    pt = np.asarray(x, dtype=float)
    t = pt / epsilon
    anchors = [sorted({int(math.floor(v)), int(math.ceil(v)) - 1}) for v in t]
    out: List[BarycentricPoint] = []
    for anchor in itertools.product(*anchors):
        for s in simplices_of_cube(anchor, epsilon):
            if not s.contains(pt, tol):
                continue
            verts = s.vertices()
            tail = np.linalg.solve((verts[1:] - verts[0]).T, pt - verts[0])
            weights = np.concatenate(([1.0 - tail.sum()], tail))
            weights[weights < CLAMP] = 0.0
            out.append(BarycentricPoint(s, weights / weights.sum()))
    return sorted(out, key=lambda b: b.simplex.sort_key())
