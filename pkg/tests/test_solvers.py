import numpy as np
import pytest
from numpy.testing import assert_allclose

from pilotwave.errors import ConfigurationError
from pilotwave.flow import HamiltonianSpec
from pilotwave.grid import HARD_WALL, SPECTRAL, GridSpec, inner_product
from pilotwave.solvers import (CRANK_NICOLSON, SOLVER_METHODS, CrankNicolsonSolver, SolverConfig, SplitStepSolver,
                               compare_solutions, continuity_residual, energy, lattice_ground_state, make_solver,
                               step_crank_nicolson, step_split_step)
from pilotwave.states import gaussian_packet


def _width(psi):
    x = psi.grid.axis()
    rho = psi.density() * psi.grid.spacing
    mean = np.sum(x * rho)
    return np.sqrt(np.sum((x - mean) ** 2 * rho))


@pytest.mark.parametrize("method", SOLVER_METHODS)
def test_norm_is_conserved(method):
    grid = GridSpec(points=128, length=20.0)
    h = HamiltonianSpec.build(grid, "harmonic")
    psi = gaussian_packet(grid, center=2.0, momentum=1.0)
    frames = make_solver(SolverConfig(method, 1e-3), h).run(psi, 100, record_every=25)
    assert len(frames) == 5
    for _, frame in frames:
        assert frame.norm() == pytest.approx(1.0, abs=1e-10)


def test_oscillator_ground_state_returns_after_a_period():
    grid = GridSpec(points=128, length=20.0)
    h = HamiltonianSpec.build(grid, "harmonic")
    ground, e0 = lattice_ground_state(h)
    assert e0 == pytest.approx(0.5, abs=1e-2)
    assert energy(ground, h) == pytest.approx(e0, rel=1e-10)
    period = 2.0 * np.pi
    frames = CrankNicolsonSolver(h, period / 1000).run(ground, 1000, record_every=1000)
    overlap = inner_product(ground, frames.final)
    assert abs(overlap) == pytest.approx(1.0, abs=1e-10)
    assert (frames.final * (1.0 / (overlap / abs(overlap))) - ground).norm() < 1e-9


def test_free_gaussian_spreads_at_the_analytic_rate():
    grid = GridSpec(points=256, length=32.0)
    h = HamiltonianSpec(grid, method=SPECTRAL)
    psi = gaussian_packet(grid, width=1.0)
    frames = SplitStepSolver(h, 1e-3).run(psi, 1000, record_every=1000)
    assert frames.end == pytest.approx(1.0)
    assert _width(frames.final) == pytest.approx(np.sqrt(1.25), rel=1e-3)


def test_split_step_agrees_with_crank_nicolson_on_a_barrier():
    grid = GridSpec(points=2048, length=40.0)
    h = HamiltonianSpec.build(grid, "barrier", height=1.0, width=1.0)
    psi = gaussian_packet(grid, center=-4.0, width=2.0, momentum=0.5)
    cn = CrankNicolsonSolver(h, 1e-3).run(psi, 500, record_every=100)
    split = SplitStepSolver(h, 1e-3).run(psi, 500, record_every=100)
    distances = compare_solutions(cn, split)
    assert distances[0] == 0.0
    assert distances.max() < 1e-5


def test_continuity_residual_is_second_order():
    residuals = []
    for points in (64, 128):
        grid = GridSpec(points=points, length=20.0)
        h = HamiltonianSpec(grid)
        residuals.append(continuity_residual(gaussian_packet(grid, momentum=1.0), h))
    assert residuals[0] / residuals[1] > 3.0


def test_functional_step_matches_solver(small_grid):
    psi = gaussian_packet(small_grid, momentum=0.5)
    h = HamiltonianSpec(small_grid)
    assert_allclose(step_crank_nicolson(psi, 0.0, 1e-2).values, CrankNicolsonSolver(h, 1e-2).step(psi).values)
    assert_allclose(step_split_step(psi, 0.0, 1e-2).values, SplitStepSolver(h, 1e-2).step(psi).values)


def test_hard_wall_crank_nicolson_keeps_wall_at_zero():
    grid = GridSpec(points=64, length=20.0, boundary=HARD_WALL)
    h = HamiltonianSpec(grid)
    frames = CrankNicolsonSolver(h, 1e-2).run(gaussian_packet(grid, momentum=2.0), 50)
    assert frames.final.values[0] == 0.0
    assert frames.final.norm() == pytest.approx(1.0, abs=1e-10)


def test_two_axis_crank_nicolson_is_unitary():
    grid = GridSpec(dimension=2, points=24, length=12.0)
    h = HamiltonianSpec.build(grid, "harmonic")
    psi = gaussian_packet(grid, center=[1.0, -0.5], momentum=[0.3, 0.0])
    frames = CrankNicolsonSolver(h, 1e-2).run(psi, 20, record_every=20)
    assert frames.final.norm() == pytest.approx(1.0, abs=1e-10)


def test_invalid_configurations(small_grid):
    with pytest.raises(ConfigurationError):
        SolverConfig("leapfrog")
    with pytest.raises(ConfigurationError):
        SolverConfig(CRANK_NICOLSON, dt=0.0)
    with pytest.raises(ConfigurationError):
        SplitStepSolver(HamiltonianSpec(GridSpec(points=16, boundary=HARD_WALL)), 1e-3)
    with pytest.raises(ConfigurationError):
        CrankNicolsonSolver(HamiltonianSpec(small_grid, method=SPECTRAL), 1e-3)
