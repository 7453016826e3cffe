"""
netembed package root.

The surjective round-preserving map ``Phi`` from ``R^n`` onto a manifold
with a bi-Lipschitz net, glued from geodesic simplex maps over a Kuhn
triangulation.  Import :class:`GluedMap` and :class:`SimplexMapEvaluator`
from here; scenario loading and the verifiers live in
:mod:`netembed.harness`.
"""

from .errors import NetEmbedError  # noqa: F401
from .gluedmap import GluedMap  # noqa: F401
from .manifold import GeodesicSolver, make_metric  # noqa: F401
from .netlattice import Lattice, generate_net  # noqa: F401
from .simplexmap import SimplexMapEvaluator  # noqa: F401

__all__ = [
    "NetEmbedError",
    "GluedMap",
    "GeodesicSolver",
    "make_metric",
    "Lattice",
    "generate_net",
    "SimplexMapEvaluator",
]
