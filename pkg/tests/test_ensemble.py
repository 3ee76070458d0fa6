import json

import numpy as np
import pytest

from conftest import free_gaussian
from pilotwave import ensemble
from pilotwave.ensemble import (HISTOGRAM, EnsembleSpec, discretization_budget, equivariance_test, histogram_check,
                                ks_statistic, ks_threshold, sample_density)
from pilotwave.errors import ConfigurationError, InvalidTestError, NormalizationError
from pilotwave.frames import FrameSeries
from pilotwave.grid import HARD_WALL, GridSpec
from pilotwave.guidance import NodeEvent, TrajectoryResult
from pilotwave.states import commensurate_wavenumber, gaussian_packet, oscillator_ground_state, plane_wave


def _uniform(grid):
    return plane_wave(grid, commensurate_wavenumber(grid, 2)).normalized()


def test_sampling_is_reproducible(grid64):
    psi = gaussian_packet(grid64, momentum=0.3)
    first = sample_density(psi, 1000, seed=7)
    assert first.shape == (1000, 1)
    assert np.array_equal(first, sample_density(psi, 1000, seed=7))
    assert not np.array_equal(first, sample_density(psi, 1000, seed=8))
    assert grid64.contains(first)


def test_sampling_needs_a_normalized_state(grid64):
    with pytest.raises(NormalizationError):
        sample_density(gaussian_packet(grid64) * 2.0, 100)


def test_uniform_density_sample_passes_ks(grid64):
    psi = _uniform(grid64)
    points = sample_density(psi, 10000, seed=0)
    assert ks_statistic(points, psi) < ks_threshold(10000)
    assert discretization_budget(psi) == pytest.approx(0.0, abs=1e-12)


def test_histogram_check_on_own_sample(grid64):
    psi = gaussian_packet(grid64, width=2.0)
    points = sample_density(psi, 10000, seed=3)
    report = histogram_check(points, psi, 40)
    assert report["passed"]
    assert sum(report["counts"]) == 10000
    assert len(report["bin_edges"]) == 41


def test_two_axis_sampling_stays_in_the_box():
    grid = GridSpec(dimension=2, points=32, length=10.0)
    psi = gaussian_packet(grid, center=[1.0, -1.0])
    points = sample_density(psi, 2000, seed=1)
    assert points.shape == (2000, 2)
    assert grid.contains(points)
    assert np.mean(points[:, 0]) == pytest.approx(1.0, abs=0.1)
    assert np.mean(points[:, 1]) == pytest.approx(-1.0, abs=0.1)


def test_static_state_keeps_its_ensemble():
    grid = GridSpec(points=128, length=20.0, boundary=HARD_WALL)
    frames = FrameSeries.static(oscillator_ground_state(grid), 0.5)
    report = equivariance_test(frames, EnsembleSpec(samples=2000, seed=2), dt=0.05)
    assert report.ks_final == pytest.approx(report.ks_initial, abs=1e-12)
    assert report.halted_fraction == 0.0
    assert len(report.slices) == 5


def _free_frames(grid, t_final, count, states):
    frames = FrameSeries.from_function(grid, states, np.linspace(0.0, t_final, count))
    scale = 1.0 / frames.frames[0].norm()
    return FrameSeries(frames.times, tuple(frame * scale for frame in frames.frames))


@pytest.mark.parametrize("states", [
    lambda t, x: free_gaussian(t, x, 0.5, 1.0),
    lambda t, x: free_gaussian(t, x, -2.0, 0.5) + free_gaussian(t, x, 2.0, 0.5),
], ids=["gaussian", "double-gaussian"])
def test_free_evolution_is_equivariant(states):
    grid = GridSpec(points=256, length=40.0)
    frames = _free_frames(grid, 0.5, 101, states)
    report = equivariance_test(frames, EnsembleSpec(samples=10000, seed=0))
    assert report.final_time == pytest.approx(0.5)
    assert report.passed
    assert report.ks_final < report.threshold + report.budget


def test_report_serializes_with_sorted_keys(grid64):
    frames = FrameSeries.static(_uniform(grid64), 0.1)
    report = equivariance_test(frames, EnsembleSpec(samples=500, seed=4, metric=HISTOGRAM), dt=0.05)
    payload = json.loads(report.to_json())
    assert list(payload) == sorted(payload)
    assert payload["ensemble"]["metric"] == HISTOGRAM
    assert payload["passed"] == report.histogram["passed"]


def test_too_many_halted_members_invalidates_the_test(grid64, monkeypatch):
    frames = FrameSeries.static(_uniform(grid64), 0.1)

    def halted(frames, points, dt, **kwargs):
        n = len(points)
        paths = np.repeat(points[None], 2, axis=0)
        events = [NodeEvent(i, 0.0, (float(points[i, 0]),), 0.0) for i in range(n // 10)]
        return TrajectoryResult(np.array([0.0, 0.1]), paths, np.zeros((2, n)), events)

    monkeypatch.setattr(ensemble, "integrate_trajectory", halted)
    with pytest.raises(InvalidTestError):
        equivariance_test(frames, EnsembleSpec(samples=200))


@pytest.mark.parametrize("kwargs", [{"samples": 50}, {"metric": "chi2"}, {"bins": 1}])
def test_invalid_ensemble_specs(kwargs):
    with pytest.raises(ConfigurationError):
        EnsembleSpec(**kwargs)
