import math

import numpy as np
import pytest

from netembed.directions import (
    DirectionSampler,
    DriftParams,
    direction_grid,
    injectivity_experiment,
    local_direction_map,
    separation_epsilon,
)
from netembed.errors import DomainError
from netembed.manifold import FlatMetric, GeodesicSolver, LinearPullbackMetric
from netembed.netlattice import Box, Embedding, NetImageIndex, generate_net


def _sampler(metric=None, mode: str = "identity", start: float = 8.0):
    metric = metric or FlatMetric(2)
    net = generate_net(1.0, 0.75, 0.0, 0, Box.from_config([-100.0, 100.0], 2))
    solver = GeodesicSolver(metric, use_oracle=True)
    return DirectionSampler(solver, net, Embedding(mode, metric), DriftParams(start=start))


def test_drift_params_from_config() -> None:
    """Missing entries fall back to the defaults and the given start radius."""
    params = DriftParams.from_config({"growth": 3}, default_start=5.0)
    assert params.start == 5.0 and params.growth == 3.0 and params.max_terms == 12
    assert params.radius(2) == 45.0


def test_axis_drift_converges_immediately() -> None:
    """Drifting along (1, 0) on the integer grid gives the tangent (1, 0)."""
    geo = _sampler().global_geodesic([0.0, 0.0], [1.0, 0.0])
    assert geo.converged
    assert np.allclose(geo.tangent.components, [1.0, 0.0], atol=1e-12)
    assert np.array_equal(geo.last_point, [16.0, 0.0])
    assert geo.final_gap == pytest.approx(0.0, abs=1e-12)


def test_shear_direction_of_vertical_drift() -> None:
    """Under the shear pullback the global direction (0, 1) is the unit tangent (-1, 1)."""
    shear = LinearPullbackMetric([[1.0, 1.0], [0.0, 1.0]])
    geo = _sampler(shear, mode="pullback").global_geodesic([0.0, 0.0], [0.0, 1.0])
    assert np.allclose(geo.tangent.components, [-1.0, 1.0], atol=1e-9)
    assert geo.tangent.norm(shear) == pytest.approx(1.0, abs=1e-9)


def test_drift_needs_unit_direction_and_room() -> None:
    """Non-unit directions and boxes smaller than the first radius are rejected."""
    with pytest.raises(DomainError):
        _sampler().global_geodesic([0.0, 0.0], [2.0, 0.0])
    with pytest.raises(DomainError):
        _sampler(start=500.0).global_geodesic([0.0, 0.0], [1.0, 0.0])


def test_direction_grid_sizes() -> None:
    """Circle grids are even and icosphere grids have at least 42 points."""
    assert len(direction_grid(2, 9)) == 10
    assert len(direction_grid(3, 42)) == 42
    with pytest.raises(DomainError):
        direction_grid(2, 4)
    with pytest.raises(DomainError):
        direction_grid(4, 64)


def test_flat_direction_map_is_the_identity() -> None:
    """On the flat grid w(v) = v, odd and separated by the grid spacing."""
    table = local_direction_map(_sampler(), [0.0, 0.0], 8)
    assert len(table.entries) == 8
    assert table.max_identity_defect < 1e-9
    assert table.max_oddness_defect < 1e-9
    assert table.min_separation == pytest.approx(math.pi / 4.0, abs=1e-9)
    assert table.spacing == pytest.approx(math.pi / 4.0)
    assert table.injective_at_grid_scale
    assert table.converged == 8


def test_separation_epsilon_examples() -> None:
    """Orthogonal directions give 0.25; coincident ones cannot be separated."""
    assert separation_epsilon(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(0.25)
    assert separation_epsilon(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == pytest.approx(0.95)
    with pytest.raises(DomainError):
        separation_epsilon(np.array([1.0, 0.0]), np.array([1.0, 0.0]))


def test_injectivity_experiment_on_the_flat_grid() -> None:
    """The witness at time T sits on the v axis and stays away from the u drift."""
    sampler = _sampler()
    index = NetImageIndex(sampler.net, sampler.embedding, sampler.solver)
    report = injectivity_experiment(sampler, index, [0.0, 0.0], [1.0, 0.0], [0.0, 1.0])
    assert report.epsilon == pytest.approx(0.25)
    assert report.delta_tilde == pytest.approx(3.0)
    assert report.horizon == pytest.approx(72.0)
    assert report.witness == pytest.approx((0.0, 72.0))
    assert report.bracket_holds and report.drift_holds
    assert report.passed


def test_injectivity_needs_distinct_directions() -> None:
    """u and v must differ."""
    sampler = _sampler()
    index = NetImageIndex(sampler.net, sampler.embedding, sampler.solver)
    with pytest.raises(DomainError):
        injectivity_experiment(sampler, index, [0.0, 0.0], [1.0, 0.0], [2.0, 0.0])
