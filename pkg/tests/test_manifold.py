import math
from typing import Optional

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from netembed.errors import ConfigurationError, DomainError
from netembed.manifold import (
    ConformalMetric,
    FlatMetric,
    GeodesicSolver,
    LinearPullbackMetric,
    SinePullbackMetric,
    SineTerm,
    distance,
    geodesic_bvp,
    geodesic_ivp,
    make_metric,
    oracle_distance,
    radial_projection,
    tangent_angle,
)

SHEAR = [[1.0, 1.0], [0.0, 1.0]]


def _sine() -> SinePullbackMetric:
    return SinePullbackMetric(2, [SineTerm(target=1, source=0, amplitude=0.3, frequency=1.0)])


CURVED = {
    "sine": _sine,
    "conformal": lambda: ConformalMetric(2, [0.3, -0.1], 0.2),
}

_coord = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)
_point = st.lists(_coord, min_size=2, max_size=2).map(np.array)


class _DifferencedConformal(ConformalMetric):
    """Conformal metric that falls back to finite-difference derivatives."""

    def _tensor_derivatives(self, x: np.ndarray) -> Optional[np.ndarray]:
        return None


def test_flat_metric_is_identity() -> None:
    """The flat metric is the identity matrix everywhere."""
    assert np.array_equal(FlatMetric(2).metric_at([2.3, -1.0]), np.eye(2))


def test_shear_metric_is_gram_matrix() -> None:
    """A linear pullback has the constant metric A^T A."""
    g = LinearPullbackMetric(SHEAR).metric_at([5.0, -3.0])
    assert np.allclose(g, [[1.0, 1.0], [1.0, 2.0]], atol=1e-15)


def test_sine_pullback_metric_at_origin() -> None:
    """phi(x, y) = (x, y + 0.3 sin x) gives Dphi^T Dphi at the origin."""
    g = _sine().metric_at([0.0, 0.0])
    assert np.allclose(g, [[1.09, 0.3], [0.3, 1.0]], atol=1e-12)


def test_metric_rejects_non_finite_points() -> None:
    """A NaN coordinate is a domain error."""
    with pytest.raises(DomainError):
        FlatMetric(2).metric_at([float("nan"), 0.0])


def test_constant_metrics_have_zero_christoffels() -> None:
    """Flat and linear pullback metrics have vanishing Christoffel symbols."""
    for metric in (FlatMetric(2), LinearPullbackMetric(SHEAR)):
        assert np.array_equal(metric.christoffel_at([0.7, -0.4]), np.zeros((2, 2, 2)))


def test_conformal_christoffels_match_closed_form() -> None:
    """For f(x) = x_1 the conformal symbols are 1, -1 and 1 wherever evaluated."""
    gamma = ConformalMetric(2, [1.0, 0.0]).christoffel_at([0.4, -1.2])
    assert gamma[0, 0, 0] == pytest.approx(1.0, abs=1e-12)
    assert gamma[0, 1, 1] == pytest.approx(-1.0, abs=1e-12)
    assert gamma[1, 0, 1] == pytest.approx(1.0, abs=1e-12)
    assert gamma[1, 1, 0] == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(gamma, np.transpose(gamma, (0, 2, 1)))


def test_finite_difference_christoffels_agree_with_analytic() -> None:
    """Central differences reproduce the analytic symbols of a curved metric."""
    x = [0.3, -0.2]
    analytic = ConformalMetric(2, [0.3, -0.1], 0.2).christoffel_at(x)
    differenced = _DifferencedConformal(2, [0.3, -0.1], 0.2).christoffel_at(x)
    assert np.allclose(analytic, differenced, atol=1e-6)


def test_sine_bound_is_enforced() -> None:
    """Perturbations with sup |Dphi - I| above 0.5 are rejected."""
    with pytest.raises(ConfigurationError):
        SinePullbackMetric(2, [SineTerm(1, 0, 0.4, 1.0), SineTerm(0, 1, 0.2, 1.0)])


def test_make_metric_families() -> None:
    """The factory builds every family and rejects unknown names."""
    assert make_metric({"family": "flat"}, 3).family == "flat"
    shear = make_metric({"family": "linear-pullback", "matrix": SHEAR}, 2)
    assert shear.has_oracle
    conformal = make_metric({"family": "conformal", "linear": [0.1, 0.0], "quadratic": 0.2}, 2)
    assert not conformal.has_oracle
    with pytest.raises(ConfigurationError):
        make_metric({"family": "hyperbolic"}, 2)
    with pytest.raises(ConfigurationError):
        make_metric({"family": "linear-pullback", "matrix": SHEAR}, 3)


def test_flat_ray_is_straight() -> None:
    """A flat geodesic from the origin along (1, 0) ends at (5, 0)."""
    path = geodesic_ivp(FlatMetric(2), [0.0, 0.0], [1.0, 0.0], 5.0)
    assert np.allclose(path.endpoint, [5.0, 0.0], atol=1e-9)


def test_shear_ray_reaches_unit_point() -> None:
    """Along (0, 1)/sqrt(2) for time sqrt(2) the shear geodesic ends at (0, 1)."""
    metric = LinearPullbackMetric(SHEAR)
    v = np.array([0.0, 1.0]) / math.sqrt(2.0)
    for use_oracle in (False, True):
        path = geodesic_ivp(metric, [0.0, 0.0], v, math.sqrt(2.0), use_oracle=use_oracle)
        assert np.allclose(path.endpoint, [0.0, 1.0], atol=1e-9)


def test_sine_geodesic_midpoint() -> None:
    """The geodesic from the origin to (pi, 0) passes (pi/2, -0.3) halfway."""
    path = geodesic_bvp(_sine(), [0.0, 0.0], [math.pi, 0.0], use_oracle=True)
    assert np.allclose(path.at(0.5), [math.pi / 2.0, -0.3], atol=1e-12)


def test_bvp_between_equal_points_is_constant() -> None:
    """Coincident endpoints give the constant path of length zero."""
    metric = ConformalMetric(2, [0.2, 0.0])
    path = geodesic_bvp(metric, [1.0, 1.0], [1.0, 1.0])
    assert path.length(metric) == 0.0
    assert np.array_equal(path.at(0.7), [1.0, 1.0])


def test_flat_bvp_length() -> None:
    """Shooting from (0, 0) to (3, 4) in the plane has length 5."""
    metric = FlatMetric(2)
    path = geodesic_bvp(metric, [0.0, 0.0], [3.0, 4.0])
    assert path.length(metric) == pytest.approx(5.0, abs=1e-9)
    assert np.allclose(path.endpoint, [3.0, 4.0], atol=1e-9)


def test_numeric_and_oracle_distances_agree() -> None:
    """Shooting reproduces the exact pullback distances."""
    shear = LinearPullbackMetric(SHEAR)
    assert distance(shear, [0.0, 0.0], [0.0, 1.0]) == pytest.approx(math.sqrt(2.0), abs=1e-8)
    assert oracle_distance(shear, [0.0, 0.0], [1.0, 0.0]) == pytest.approx(1.0, abs=1e-15)
    sine = _sine()
    numeric = distance(sine, [0.0, 0.0], [math.pi, 0.0])
    assert numeric == pytest.approx(math.pi, rel=1e-6)
    assert oracle_distance(sine, [0.0, 0.0], [math.pi, 0.0]) == pytest.approx(math.pi, abs=1e-12)


def test_distance_is_symmetric() -> None:
    """d(x, y) = d(y, x) for the curved conformal metric."""
    metric = ConformalMetric(2, [0.3, 0.0], 0.2)
    a, b = [0.0, 0.0], [1.0, 1.5]
    assert distance(metric, a, b) == pytest.approx(distance(metric, b, a), abs=1e-7)


def test_numeric_bvp_hits_target_at_constant_speed() -> None:
    """Shooting on a curved metric meets the endpoint and keeps its speed."""
    metric = ConformalMetric(2, [0.3, 0.0])
    path = geodesic_bvp(metric, [0.0, 0.0], [1.0, 1.0])
    assert np.linalg.norm(path.endpoint - np.array([1.0, 1.0])) < 1e-9
    assert path.speed_deviation(metric) < 1e-7
    assert path.minimizing


def test_radial_projection_examples() -> None:
    """Unit initial directions towards chart points."""
    flat = FlatMetric(2)
    assert np.allclose(radial_projection(flat, [0.0, 0.0], [0.0, 7.0]).components, [0.0, 1.0], atol=1e-9)
    assert np.allclose(radial_projection(flat, [0.0, 0.0], [3.0, 4.0]).components, [0.6, 0.8], atol=1e-9)
    shear = LinearPullbackMetric(SHEAR)
    w = radial_projection(shear, [0.0, 0.0], [0.0, 1.0], use_oracle=True)
    assert np.allclose(w.components, [0.0, 1.0 / math.sqrt(2.0)], atol=1e-12)
    assert w.norm(shear) == pytest.approx(1.0, abs=1e-12)


def test_radial_projection_at_basepoint_fails() -> None:
    """The radial projection is undefined at its own basepoint."""
    with pytest.raises(DomainError):
        radial_projection(FlatMetric(2), [1.0, 1.0], [1.0, 1.0])


def test_ivp_needs_positive_time() -> None:
    """t_max must be positive."""
    with pytest.raises(DomainError):
        geodesic_ivp(FlatMetric(2), [0.0, 0.0], [1.0, 0.0], 0.0)


def test_tangent_angle_uses_metric() -> None:
    """Under the shear metric (1, 0) and (-1, 1) are orthogonal."""
    shear = LinearPullbackMetric(SHEAR)
    solver = GeodesicSolver(shear, use_oracle=True)
    a = solver.radial_projection([0.0, 0.0], [1.0, 0.0])
    b = solver.radial_projection([0.0, 0.0], [-1.0, 1.0])
    assert tangent_angle(shear, a, b) == pytest.approx(math.pi / 2.0, abs=1e-12)


def test_solver_from_config_and_numeric_copy() -> None:
    """Solver settings come from the scenario section; numeric() drops the oracle."""
    solver = GeodesicSolver.from_config(FlatMetric(2), {"use_oracle": True, "restarts": 3, "bvp_tol": 1e-8})
    assert solver.use_oracle and solver.restarts == 3 and solver.tol == 1e-8
    assert not solver.numeric().use_oracle
    assert solver.numeric().restarts == 3


@pytest.mark.parametrize("family", sorted(CURVED))
@settings(max_examples=15, deadline=None)
@given(_point, _point, _point)
def test_triangle_inequality_on_curved_metrics(family, x, y, z) -> None:
    """d(x, z) <= d(x, y) + d(y, z) for shooting distances."""
    metric = CURVED[family]()
    assert distance(metric, x, z) <= distance(metric, x, y) + distance(metric, y, z) + 1e-7


@pytest.mark.parametrize("family", sorted(CURVED))
@settings(max_examples=15, deadline=None)
@given(_point, _point)
def test_radial_projection_then_ivp_returns_to_target(family, p, q) -> None:
    """Following the unit direction towards q for time d(p, q) ends at q."""
    assume(np.linalg.norm(q - p) > 0.05)
    metric = CURVED[family]()
    w = radial_projection(metric, p, q)
    d = distance(metric, p, q)
    path = geodesic_ivp(metric, p, w, d)
    assert np.linalg.norm(path.at(d) - q) < 1e-7


@pytest.mark.parametrize("family", sorted(CURVED))
@settings(max_examples=25, deadline=None)
@given(_point, _point, st.floats(min_value=0.1, max_value=2.0))
def test_ivp_keeps_constant_metric_speed(family, x, v, t_max) -> None:
    """The g-speed along an integrated geodesic stays at its initial value."""
    assume(np.linalg.norm(v) > 0.05)
    metric = CURVED[family]()
    path = geodesic_ivp(metric, x, v, t_max)
    assert path.speed_deviation(metric) < 1e-7
