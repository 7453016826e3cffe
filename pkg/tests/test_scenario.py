import math
from pathlib import Path

import pytest

from netembed.errors import ConfigurationError
from netembed.harness.scenario import load_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "config" / "scenarios"


def _data(**sections):
    data = {
        "name": "tiny",
        "dimension": 2,
        "metric": {"family": "flat"},
        "net": {"epsilon_base": 1.0, "delta": 0.75, "box": [-200.0, 200.0]},
        "lattice": {"epsilon": 1.0},
    }
    data.update(sections)
    return data


def test_flat_scenario_file_loads() -> None:
    """The flat identity scenario validates and derives its constants."""
    scenario = load_scenario(SCENARIOS / "flat_identity.yaml", seed=9)
    assert scenario.name == "flat_identity"
    assert scenario.seed == 9
    assert scenario.derived["R0"] == pytest.approx(8.0 + 1.5 * math.sqrt(2.0))
    assert scenario.derived["R1"] == pytest.approx(15.25 + 2.5 * math.sqrt(2.0))
    assert scenario.derived["separation_epsilon"] == pytest.approx(0.25)
    assert scenario.derived["T"] == pytest.approx(72.0)
    assert scenario.section("degree")["radii"] == [20.0, 40.0]
    assert scenario.embedding.mode == "pullback"
    assert scenario.output_dir == Path("results/flat_identity")


@pytest.mark.parametrize("name", sorted(p.name for p in SCENARIOS.glob("*.yaml")))
def test_shipped_scenarios_validate(name) -> None:
    """Every scenario under config/scenarios passes validation."""
    scenario = load_scenario(SCENARIOS / name)
    assert scenario.echo()["name"] == scenario.name


def test_defaults_are_filled_in(tmp_path) -> None:
    """Sampling radius, degree radii and direction pair default from R1."""
    scenario = load_scenario(data=_data(), output_dir=tmp_path)
    r1 = scenario.derived["R1"]
    assert scenario.section("sampling")["radius"] == pytest.approx(3.0 * r1)
    assert scenario.section("degree")["radii"] == [pytest.approx(r1), pytest.approx(2.0 * r1)]
    directions = scenario.section("directions")
    assert directions["base"] == [0.0, 0.0]
    assert directions["u"] == [1.0, 0.0] and directions["v"] == [0.0, 1.0]
    assert directions["start"] == pytest.approx(8.0 * r1)
    assert scenario.section("budgets")["audit_pairs"] == 1000
    assert scenario.output_dir == tmp_path


def test_missing_keys_are_reported_together() -> None:
    """All missing keys appear in one error."""
    data = _data()
    del data["dimension"]
    del data["lattice"]
    data["net"] = {"epsilon_base": 1.0}
    with pytest.raises(ConfigurationError) as info:
        load_scenario(data=data)
    problems = info.value.problems
    assert "missing key 'dimension'" in problems
    assert "missing key 'lattice.epsilon'" in problems
    assert "missing key 'net.delta'" in problems
    assert "missing key 'net.box'" in problems


def test_unknown_keys_are_rejected() -> None:
    """Typos at the top level and inside sections are errors."""
    data = _data(colour="red")
    data["net"]["spacing"] = 2.0
    with pytest.raises(ConfigurationError) as info:
        load_scenario(data=data)
    assert "unknown key 'colour'" in info.value.problems
    assert "unknown key 'net.spacing'" in info.value.problems


def test_jitter_precondition() -> None:
    """epsilon_base sqrt(n)/2 + jitter must stay below delta."""
    data = _data()
    data["net"]["jitter"] = 0.2
    with pytest.raises(ConfigurationError, match="epsilon_base"):
        load_scenario(data=data)


def test_box_must_leave_a_margin() -> None:
    """A box too small for the sampling radius plus max(R1, T) is rejected unless isometry is not expected."""
    data = _data()
    data["net"]["box"] = [-50.0, 50.0]
    with pytest.raises(ConfigurationError, match="inner radius"):
        load_scenario(data=data)
    data["audit"] = {"expect_isometry": False}
    assert load_scenario(data=data).derived["core_radius"] < 0.0


def test_unsupported_dimension_and_family() -> None:
    """Only n = 2 and n = 3 are supported, and the metric family must be known."""
    with pytest.raises(ConfigurationError, match="dimension"):
        load_scenario(data=_data(dimension=4))
    with pytest.raises(ConfigurationError):
        load_scenario(data=_data(metric={"family": "hyperbolic"}))


def test_unreadable_file_is_a_configuration_error(tmp_path) -> None:
    """Missing and malformed files are configuration errors."""
    with pytest.raises(ConfigurationError):
        load_scenario(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: [unclosed\n")
    with pytest.raises(ConfigurationError):
        load_scenario(bad)
