from pathlib import Path

import numpy as np
import pytest

from pilotwave.config import load_settings
from pilotwave.errors import ConfigurationError, ScenarioError
from pilotwave.scenario import (INITIAL_STATES, default_scenario, dump_scenario, load_scenario, parse_descriptor,
                                parse_points, parse_scenario)


def test_packaged_settings_load():
    settings = load_settings()
    assert settings["units"]["hbar"] == 1.0
    assert settings["ensemble"]["samples"] == 10000


def test_empty_scenario_takes_defaults():
    scenario = default_scenario()
    assert scenario.sector == "schrodinger"
    assert scenario.grid["points"] == 64
    assert scenario.integrator["method"] == "crank-nicolson"
    assert scenario.seed == 0
    grid = scenario.grid_spec()
    assert grid.length == 20.0


def test_dump_and_parse_agree():
    text = "sector: schrodinger\ngrid:\n  points: 32\n  length: 12.0\npotential:\n  kind: harmonic\n"
    scenario = parse_scenario(text)
    assert parse_scenario(dump_scenario(scenario)).to_dict() == scenario.to_dict()


def test_exponent_without_dot_is_a_float():
    scenario = parse_scenario("integrator:\n  dt: 1e-3\n")
    assert scenario.integrator["dt"] == 0.001
    assert isinstance(scenario.integrator["dt"], float)


def test_misspelled_section_reports_position_and_suggestion():
    with pytest.raises(ScenarioError) as info:
        parse_scenario("sector: schrodinger\npotental:\n  kind: free\n")
    error = info.value
    assert error.key == "potental"
    assert error.suggestion == "potential"
    assert (error.line, error.column) == (2, 1)
    assert "did you mean 'potential'" in str(error)


def test_misspelled_nested_key():
    with pytest.raises(ScenarioError) as info:
        parse_scenario("grid:\n  pionts: 32\n")
    assert info.value.key == "grid.pionts"
    assert info.value.suggestion == "points"
    assert info.value.line == 2


def test_malformed_yaml_has_a_position():
    with pytest.raises(ScenarioError) as info:
        parse_scenario("grid: [1, 2\n")
    assert info.value.line is not None


@pytest.mark.parametrize("text, key", [
    ("grid:\n  points: many\n", "grid.points"),
    ("integrator:\n  dt: -1.0\n", "integrator.dt"),
    ("integrator:\n  method: euler\n", "integrator.method"),
    ("particles:\n  positions: [[15.0]]\n", "particles.positions"),
    ("particles:\n  policy: bounce\n", "particles.policy"),
    ("units:\n  hbar: 0.0\n", "units.hbar"),
    ("grid:\n  points: 4\n", "grid"),
])
def test_invalid_values(text, key):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert info.value.key == key


def test_settings_overlay_defaults():
    scenario = parse_scenario("", settings={"ensemble": {"samples": 500}, "units": {"hbar": 2.0}})
    assert scenario.ensemble["samples"] == 500
    assert scenario.hbar == 2.0


def test_overrides_and_updates():
    scenario = default_scenario().with_overrides(hbar=0.5, seed=9)
    assert scenario.hbar == 0.5 and scenario.seed == 9
    updated = scenario.updated("integrator", dt=0.01, steps=None)
    assert updated.integrator["dt"] == 0.01
    assert updated.integrator["steps"] == scenario.integrator["steps"]
    with pytest.raises(ScenarioError):
        scenario.updated("integrator", dtt=0.01)


@pytest.mark.parametrize("kind", INITIAL_STATES)
def test_initial_states_are_normalized(kind):
    scenario = parse_scenario(f"grid:\n  points: 32\ninitial_state:\n  kind: {kind}\npotential:\n  kind: harmonic\n")
    assert scenario.initial_psi().norm() == pytest.approx(1.0, abs=1e-12)


def test_load_scenario_from_file(scenario_file):
    path = scenario_file("particles:\n  positions: [[0.5], [-1.0]]\n")
    scenario = load_scenario(path)
    assert scenario.particle_positions().tolist() == [[0.5], [-1.0]]


def test_descriptors():
    assert parse_descriptor("rest") == ("rest", {})
    assert parse_descriptor("boosted:0.6") == ("boosted", {"value": 0.6})
    assert parse_descriptor("superpose:p=0.5,c=0.3") == ("superpose", {"p": 0.5, "c": 0.3})
    assert parse_descriptor("coherent:n=2,re=0.5,im=-1") == ("coherent", {"n": 2, "re": 0.5, "im": -1})
    with pytest.raises(ConfigurationError):
        parse_descriptor(":0.5")


def test_points():
    assert parse_points("0.5,-1,2", 1).tolist() == [[0.5], [-1.0], [2.0]]
    assert np.array_equal(parse_points("0,1;2,3", 2), [[0.0, 1.0], [2.0, 3.0]])
    with pytest.raises(ConfigurationError):
        parse_points("a,b", 1)


@pytest.mark.parametrize("path", sorted((Path(__file__).resolve().parents[1] / "scenarios").glob("*.yaml")),
                         ids=lambda p: p.stem)
def test_shipped_scenarios_are_valid(path):
    scenario = load_scenario(str(path))
    assert scenario.initial_psi().norm() == pytest.approx(1.0, abs=1e-12)
