import numpy as np
import pytest
from numpy.testing import assert_allclose

from pilotwave.errors import ConfigurationError, GridMismatchError, NumericalError
from pilotwave.grid import (FINITE_DIFFERENCE, HARD_WALL, SPECTRAL, ComplexLatticeField, GridSpec, derivative,
                            inner_product, l2_distance, laplacian, laplacian_spectral_radius, second_derivative)
from pilotwave.states import (commensurate_wavenumber, double_gaussian, gaussian_packet, oscillator_ground_state,
                              plane_wave, product_state)


def test_grid_geometry(grid64):
    assert grid64.spacing == pytest.approx(20.0 / 64)
    assert grid64.shape == (64,)
    assert grid64.cell_volume == pytest.approx(grid64.spacing)
    assert grid64.lattice_delta == pytest.approx(1.0 / grid64.spacing)
    axis = grid64.axis()
    assert axis[0] == pytest.approx(-10.0)
    assert axis[-1] == pytest.approx(10.0 - grid64.spacing)


def test_two_axis_grid_has_area_cells():
    grid = GridSpec(dimension=2, points=32, length=8.0)
    assert grid.shape == (32, 32)
    assert grid.site_count == 1024
    assert grid.cell_volume == pytest.approx(0.25 ** 2)
    x, y = grid.coordinates()
    assert x.shape == (32, 32)
    assert np.all(x[:, 0] == grid.axis())
    assert np.all(y[0, :] == grid.axis())


@pytest.mark.parametrize("kwargs", [
    {"dimension": 3},
    {"points": 4},
    {"length": -1.0},
    {"boundary": "open"},
])
def test_invalid_grids_rejected(kwargs):
    with pytest.raises(ConfigurationError):
        GridSpec(**kwargs)


def test_field_shape_must_match(grid64):
    with pytest.raises(GridMismatchError):
        ComplexLatticeField(grid64, np.zeros(63))


def test_field_rejects_nan(grid64):
    values = np.zeros(64, dtype=complex)
    values[3] = np.nan
    with pytest.raises(NumericalError):
        ComplexLatticeField(grid64, values)


def test_field_values_are_read_only(grid64):
    psi = gaussian_packet(grid64)
    with pytest.raises(ValueError):
        psi.values[0] = 1.0


def test_hard_wall_fields_vanish_on_the_wall():
    grid = GridSpec(points=32, length=10.0, boundary=HARD_WALL)
    psi = ComplexLatticeField(grid, np.ones(32))
    assert psi.values[0] == 0.0
    assert np.all(psi.values[1:] == 1.0)


def test_fields_on_different_grids_do_not_mix(grid64):
    other = GridSpec(points=32, length=20.0)
    with pytest.raises(GridMismatchError):
        inner_product(gaussian_packet(grid64), gaussian_packet(other))


def test_initial_states_are_normalized(grid64):
    for psi in (gaussian_packet(grid64, center=1.0, width=1.5, momentum=0.7),
                double_gaussian(grid64),
                oscillator_ground_state(grid64)):
        assert psi.norm() == pytest.approx(1.0, abs=1e-12)
        assert inner_product(psi, psi).real == pytest.approx(1.0, abs=1e-12)
    assert l2_distance(gaussian_packet(grid64), gaussian_packet(grid64)) == 0.0


def test_spectral_derivative_of_plane_wave_is_exact(grid64):
    k = commensurate_wavenumber(grid64, 3)
    psi = plane_wave(grid64, k)
    assert_allclose(derivative(psi, 0, SPECTRAL).values, 1j * k * psi.values, atol=1e-12)
    assert_allclose(second_derivative(psi, 0, SPECTRAL).values, -k ** 2 * psi.values, atol=1e-11)


def test_finite_difference_symbols(grid64):
    k = commensurate_wavenumber(grid64, 5)
    dx = grid64.spacing
    psi = plane_wave(grid64, k)
    assert_allclose(derivative(psi, 0).values, 1j * np.sin(k * dx) / dx * psi.values, atol=1e-12)
    symbol = -(2.0 - 2.0 * np.cos(k * dx)) / dx ** 2
    assert_allclose(laplacian(psi).values, symbol * psi.values, atol=1e-11)


def test_laplacian_sums_axes():
    grid = GridSpec(dimension=2, points=16, length=2 * np.pi)
    psi = plane_wave(grid, [1.0, 2.0])
    assert_allclose(laplacian(psi, SPECTRAL).values, -5.0 * psi.values, atol=1e-11)


def test_spectral_needs_periodic_grid():
    grid = GridSpec(points=16, boundary=HARD_WALL)
    with pytest.raises(ConfigurationError):
        derivative(ComplexLatticeField.zeros(grid), 0, SPECTRAL)


def test_laplacian_spectral_radius(grid64):
    dx = grid64.spacing
    assert laplacian_spectral_radius(grid64, FINITE_DIFFERENCE) == pytest.approx(4.0 / dx ** 2)
    assert laplacian_spectral_radius(grid64, SPECTRAL) == pytest.approx((np.pi / dx) ** 2)


def test_wrap_and_nearest_site(grid64):
    assert grid64.wrap(np.array([10.5]))[0] == pytest.approx(-9.5)
    assert grid64.nearest_site([0.0]) == (32,)
    walled = GridSpec(points=64, length=20.0, boundary=HARD_WALL)
    assert walled.wrap(np.array([12.0]))[0] == 10.0


def test_product_state_factors():
    line = GridSpec(points=16, length=8.0)
    plane = GridSpec(dimension=2, points=16, length=8.0)
    f, g = gaussian_packet(line, -1.0), gaussian_packet(line, 1.0)
    psi = product_state(plane, [f, g])
    assert psi.values[3, 5] == pytest.approx(f.values[3] * g.values[5])
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
