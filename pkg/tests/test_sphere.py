import math

import numpy as np
import pytest

from netembed.errors import DegeneracyError
from netembed.sphere import (
    antipodes,
    circle_grid,
    grid_spacing,
    icosahedron,
    icosphere,
    icosphere_grid,
    sphere_degree,
    winding_number,
)


def test_circle_grid_is_antipodal() -> None:
    """The k-th of 8 circle directions is opposite the (k+4)-th."""
    grid = circle_grid(8)
    assert np.array_equal(antipodes(grid), (np.arange(8) + 4) % 8)
    assert grid_spacing(grid) == pytest.approx(math.pi / 4.0)


def test_icosahedron_faces_point_outward() -> None:
    """Twelve unit vertices, twenty positively oriented faces."""
    verts, faces = icosahedron()
    assert verts.shape == (12, 3) and faces.shape == (20, 3)
    assert np.allclose(np.linalg.norm(verts, axis=1), 1.0)
    dets = np.einsum("ij,ij->i", verts[faces[:, 0]], np.cross(verts[faces[:, 1]], verts[faces[:, 2]]))
    assert np.all(dets > 0.0)


def test_subdivision_counts() -> None:
    """Each level quadruples the faces and keeps Euler characteristic two."""
    verts, faces = icosphere(2)
    assert len(verts) == 162 and len(faces) == 320
    edges = {tuple(sorted((int(f[i]), int(f[(i + 1) % 3])))) for f in faces for i in range(3)}
    assert len(verts) - len(edges) + len(faces) == 2
    assert np.allclose(np.linalg.norm(verts, axis=1), 1.0)
    assert len(antipodes(verts)) == 162


def test_icosphere_grid_picks_coarsest_level() -> None:
    """At least 42 points means one subdivision, 64 means two."""
    assert len(icosphere_grid(42)[0]) == 42
    assert len(icosphere_grid(64)[0]) == 162


def test_asymmetric_grid_is_rejected() -> None:
    """Antipodes only exist on symmetric grids."""
    with pytest.raises(DegeneracyError):
        antipodes(circle_grid(3))


def test_winding_numbers() -> None:
    """Identity winds once, reflection minus once, squaring twice."""
    assert winding_number(lambda v: v, 64).degree == 1
    assert winding_number(lambda v: np.array([v[0], -v[1]]), 64).degree == -1

    def square(v: np.ndarray) -> np.ndarray:
        theta = math.atan2(v[1], v[0])
        return np.array([math.cos(2.0 * theta), math.sin(2.0 * theta)])

    assert winding_number(square, 16).degree == 2
    assert winding_number(lambda v: np.array([2.0, 0.0]) + v, 64).degree == 0


def test_winding_refines_coarse_loops() -> None:
    """A three-sample loop is refined until every step turns less than max_step."""
    result = winding_number(lambda v: v, 3)
    assert result.degree == 1
    assert result.samples > 3
    assert result.max_step <= math.pi / 4.0


def test_winding_through_origin_is_degenerate() -> None:
    """A loop through the origin has no winding number."""
    with pytest.raises(DegeneracyError):
        winding_number(lambda v: v - np.array([1.0, 0.0]), 64)


def test_sphere_degree_of_identity_and_antipodal_map() -> None:
    """The identity has degree one and the antipodal map of S^2 degree minus one."""
    rng = np.random.default_rng(0)
    assert sphere_degree(lambda v: v, 2, rng).degree == 1
    assert sphere_degree(lambda v: -v, 2, rng).degree == -1
    assert sphere_degree(lambda v: np.array([v[0], v[1], -v[2]]), 2, rng).degree == -1
