import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netembed.errors import ConfigurationError, CoverageError
from netembed.manifold import ConformalMetric, FlatMetric, GeodesicSolver, LinearPullbackMetric
from netembed.netlattice import (
    Box,
    Embedding,
    Lattice,
    NetImageIndex,
    PointNet,
    ball_samples,
    distortion_audit,
    gamma,
    generate_net,
    lattice_distance_bracket,
    load_embedding_table,
    load_net,
    make_embedding,
    nearest_lattice_set,
    refinement_audit,
    refinement_radius,
    save_embedding_table,
    save_net,
)

UNIT = Lattice(1.0)
_coord = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False, allow_infinity=False)


def _grid_net(half_width: float = 20.0, delta: float = 0.75):
    return generate_net(1.0, delta, 0.0, 0, Box.from_config([-half_width, half_width], 2))


def test_gamma_examples() -> None:
    """Lattice rounding picks the minimal-norm nearest lattice point."""
    assert np.array_equal(gamma([0.5, 0.5], UNIT), [0.0, 0.0])
    assert np.array_equal(gamma([0.7, 0.2], UNIT), [1.0, 0.0])
    assert np.array_equal(gamma([-0.5, 0.25], UNIT), [0.0, 0.0])
    assert np.array_equal(gamma([0.5, -0.25], UNIT), [0.0, 0.0])
    assert np.array_equal(gamma([1.5, -2.5], UNIT), [1.0, -2.0])
    assert np.array_equal(gamma([0.3, 0.9], Lattice(0.5)), [0.5, 1.0])


def test_nearest_lattice_set_at_square_centre() -> None:
    """(0.5, 0.5) is equidistant from the four unit-square vertices."""
    found = {tuple(p.tolist()) for p in nearest_lattice_set([0.5, 0.5], UNIT)}
    assert found == {(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)}
    assert len(nearest_lattice_set([0.7, 0.2], UNIT)) == 1


@given(st.lists(_coord, min_size=3, max_size=3))
def test_gamma_is_odd_and_close(coords) -> None:
    """Gamma(-x) = -Gamma(x) exactly and |Gamma(x) - x| <= eps sqrt(n) / 2."""
    x = np.array(coords)
    g = gamma(x, UNIT)
    assert np.array_equal(gamma(-x, UNIT), -g)
    assert np.linalg.norm(g - x) <= math.sqrt(3.0) / 2.0 + 1e-12
    assert any(np.array_equal(g, s) for s in nearest_lattice_set(x, UNIT))


@given(st.lists(st.integers(min_value=-400, max_value=400), min_size=2, max_size=2))
def test_gamma_on_exact_eighths(numerators) -> None:
    """Halves round toward zero on an exactly representable grid."""
    x = np.array(numerators, dtype=float) / 8.0
    g = gamma(x, UNIT)
    assert np.array_equal(gamma(-x, UNIT), -g)
    assert np.all(np.abs(g) <= np.abs(x) + 0.5)
    assert np.all(np.abs(g - x) <= 0.5)


def test_generate_net_precondition() -> None:
    """epsilon_base sqrt(n)/2 + jitter must stay below delta."""
    box = Box.from_config([-5.0, 5.0], 2)
    assert generate_net(1.0, 0.75, 0.0, 0, box).delta == 0.75
    with pytest.raises(ConfigurationError, match="epsilon_base"):
        generate_net(1.0, 0.75, 0.1, 0, box)


def test_unjittered_net_is_the_lattice() -> None:
    """Without jitter the net points are the integer points of the box."""
    net = generate_net(1.0, 0.75, 0.0, 0, Box.from_config([-1.0, 1.0], 2))
    inside = [p for p in net.points if net.box.contains(p)]
    assert len(inside) == 9
    assert all(np.array_equal(p, np.rint(p)) for p in inside)


def test_jittered_net_is_deterministic() -> None:
    """Jittered points depend on the seed only and stay within the jitter radius."""
    box = Box.from_config([-3.0, 3.0], 2)
    a = generate_net(1.0, 0.85, 0.1, 7, box)
    b = generate_net(1.0, 0.85, 0.1, 7, box)
    c = generate_net(1.0, 0.85, 0.1, 8, box)
    assert np.array_equal(a.point((2, -1)), b.point((2, -1)))
    assert not np.array_equal(a.point((2, -1)), c.point((2, -1)))
    assert np.linalg.norm(a.point((2, -1)) - np.array([2.0, -1.0])) <= 0.1


def test_nu_examples() -> None:
    """Nearest net point with lexicographic tie-break."""
    net = _grid_net()
    assert np.array_equal(net.nu([0.2, 0.1]), [0.0, 0.0])
    assert net.rounding_error([0.2, 0.1]) == pytest.approx(math.sqrt(0.05), abs=1e-15)
    assert np.array_equal(net.nu([3.0, -4.0]), [3.0, -4.0])
    assert net.rounding_error([3.0, -4.0]) == 0.0
    assert np.array_equal(net.nu([0.5, 0.0]), [0.0, 0.0])
    assert np.array_equal(net.nu([-0.5, -0.5]), [-1.0, -1.0])


def test_nu_outside_box_is_a_coverage_error() -> None:
    """Points beyond the coverage region cannot be rounded."""
    with pytest.raises(CoverageError):
        _grid_net(half_width=2.0).nu([2.5, 0.0])


@settings(max_examples=200)
@given(st.lists(st.floats(min_value=-4.0, max_value=4.0, allow_nan=False), min_size=2, max_size=2))
def test_nu_stays_below_delta_on_jittered_net(coords) -> None:
    """The rounding error is below delta for a jittered net."""
    net = generate_net(1.0, 0.85, 0.1, 11, Box.from_config([-5.0, 5.0], 2))
    assert net.rounding_error(np.array(coords)) < 0.85


def test_box_rejects_empty_ranges() -> None:
    """The upper corner must exceed the lower one on every axis."""
    with pytest.raises(ConfigurationError):
        Box.from_config([[0.0, 0.0], [1.0, 0.0]], 2)


def test_pullback_embedding_needs_an_oracle() -> None:
    """Curved metrics without an exact map cannot use the pullback embedding."""
    with pytest.raises(ConfigurationError):
        make_embedding({"mode": "pullback"}, ConformalMetric(2, [0.1, 0.0]))
    assert make_embedding({"mode": "identity"}, ConformalMetric(2)).mode == "identity"


def test_distortion_is_zero_for_isometric_embeddings() -> None:
    """Flat identity and shear pullback embeddings are isometries."""
    net = _grid_net()
    pts = net.within(np.zeros(2), 3.0)
    flat_solver = GeodesicSolver(FlatMetric(2), use_oracle=True)
    flat = distortion_audit(pts, flat_solver, Embedding("identity", FlatMetric(2)), 200)
    assert flat.max_distortion < 1e-12
    shear = LinearPullbackMetric([[1.0, 1.0], [0.0, 1.0]])
    report = distortion_audit(pts, GeodesicSolver(shear, use_oracle=True), Embedding("pullback", shear), 200, seed=3)
    assert report.max_distortion < 1e-6
    assert report.pairs == 200


def test_conformal_identity_embedding_is_distorted() -> None:
    """A conformal metric does not carry Z^2 isometrically."""
    metric = ConformalMetric(2, [0.3, 0.0])
    net = generate_net(1.0, 0.75, 0.0, 0, Box.from_config([0.0, 3.0], 2))
    pts = net.within(np.zeros(2), 6.0)
    assert len(pts) == 16
    report = distortion_audit(pts, GeodesicSolver(metric), Embedding("identity", metric), 12, seed=1)
    assert report.max_distortion > 0.1


def test_net_file_round_trip(tmp_path) -> None:
    """Net files start with 'n delta' and load back as a point net."""
    net = _grid_net(half_width=1.0)
    path = tmp_path / "net.txt"
    save_net(net, path)
    assert path.read_text().splitlines()[0] == "2 0.75"
    loaded = load_net(path)
    assert isinstance(loaded, PointNet)
    assert loaded.delta == 0.75
    assert np.array_equal(loaded.nu([0.2, 0.1]), [0.0, 0.0])


def test_net_file_needs_a_header(tmp_path) -> None:
    """A file whose first line is not 'n delta' is rejected."""
    path = tmp_path / "bad.txt"
    path.write_text("0.0 0.0 0.0\n1.0 1.0 1.0\n")
    with pytest.raises(ConfigurationError):
        load_net(path)


def test_embedding_table_lookup(tmp_path) -> None:
    """A saved table embedding maps every net point to its recorded image."""
    shear = LinearPullbackMetric([[1.0, 1.0], [0.0, 1.0]])
    net = _grid_net(half_width=1.0)
    path = tmp_path / "table.txt"
    save_embedding_table(net, Embedding("pullback", shear), path)
    table = load_embedding_table(path, shear)
    assert np.allclose(table.image([1.0, 1.0]), [0.0, 1.0])
    with pytest.raises(CoverageError):
        table.image([7.0, 7.0])


def test_lattice_distance_bracket_flat() -> None:
    """|d(iota nu p, iota nu q) - |p - q|| stays within the rounding errors."""
    net = generate_net(1.0, 0.85, 0.1, 5, Box.from_config([-10.0, 10.0], 2))
    solver = GeodesicSolver(FlatMetric(2), use_oracle=True)
    report = lattice_distance_bracket(solver, net, Embedding("identity", FlatMetric(2)), [0.0, 0.0], [3.0, 4.0])
    assert report.chart_distance == 5.0
    assert report.slack >= 0.0
    assert report.bound < 2 * 0.85


def test_refinement_audit_on_integer_grid() -> None:
    """The sampled rounding bound on the refinement ball is sqrt(2)/2 at most."""
    net = _grid_net()
    report = refinement_audit(net, [0.0, 0.0], 500, seed=2)
    assert report.radius == pytest.approx(refinement_radius(2, 0.75))
    assert report.radius == pytest.approx(4 * 2.5 + 1.5 + math.sqrt(2.0))
    assert report.refined_delta <= math.sqrt(2.0) / 2.0 + 1e-12
    assert report.passed


def test_ball_samples_fill_the_ball() -> None:
    """Samples start at the centre and stay inside the closed ball."""
    centre = np.array([1.0, -2.0])
    pts = ball_samples(centre, 3.0, 100, seed=4)
    assert pts.shape == (100, 2)
    assert np.array_equal(pts[0], centre)
    assert np.all(np.linalg.norm(pts - centre, axis=1) <= 3.0 + 1e-12)


def test_net_image_index_nearest() -> None:
    """The nearest net image of (0.2, 0.1) under the flat identity is the origin."""
    net = _grid_net()
    solver = GeodesicSolver(FlatMetric(2), use_oracle=True)
    index = NetImageIndex(net, Embedding("pullback", FlatMetric(2)), solver)
    found = index.nearest([0.2, 0.1])
    assert np.array_equal(found.point, [0.0, 0.0])
    assert found.distance == pytest.approx(math.sqrt(0.05), abs=1e-15)
    assert found.examined >= 1
