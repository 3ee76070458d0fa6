import numpy as np
import pytest
from numpy.testing import assert_allclose

from pilotwave.constraints import (FIELDS, CanonicalGradient, FieldPhaseSpaceState, LatticeFunctional,
                                   bracket_functional, constraint_functional, constraint_matrix, dirac_bracket,
                                   linear_functional, poisson_bracket, primary_constraints, site_value)
from pilotwave.errors import GridMismatchError, ToleranceError
from pilotwave.flow import HamiltonianSpec, solve_multipliers
from pilotwave.grid import ComplexLatticeField, GridSpec
from pilotwave.states import gaussian_packet


def test_on_constraint_state_has_zero_residual(small_grid):
    psi = gaussian_packet(small_grid, momentum=0.4)
    state = FieldPhaseSpaceState.on_constraint(psi, hbar=0.7)
    phi1, phi2 = primary_constraints(state, hbar=0.7)
    assert np.max(np.abs(phi1.values)) == 0.0
    assert np.max(np.abs(phi2.values)) == 0.0
    assert state.is_on_constraint(hbar=0.7)
    assert not state.is_on_constraint(hbar=1.0)


def test_canonical_fields_share_grid(small_grid):
    other = GridSpec(points=32, length=8.0)
    with pytest.raises(GridMismatchError):
        FieldPhaseSpaceState(ComplexLatticeField.zeros(small_grid), ComplexLatticeField.zeros(small_grid),
                             ComplexLatticeField.zeros(other), ComplexLatticeField.zeros(small_grid))


def test_canonical_pairs_use_lattice_delta(random_state, small_grid):
    delta = small_grid.lattice_delta
    assert poisson_bracket(site_value("psi", 3, small_grid), site_value("pi_psi", 3, small_grid),
                           random_state) == pytest.approx(delta)
    assert poisson_bracket(site_value("psi_star", 5, small_grid), site_value("pi_psi_star", 5, small_grid),
                           random_state) == pytest.approx(delta)
    assert poisson_bracket(site_value("psi", 3, small_grid), site_value("pi_psi", 4, small_grid),
                           random_state) == 0.0
    assert poisson_bracket(site_value("psi", 3, small_grid), site_value("psi_star", 3, small_grid),
                           random_state) == 0.0


def test_constraint_pair_bracket(random_state, small_grid):
    hbar = 1.3
    phi1 = constraint_functional(1, 2, small_grid, hbar)
    phi2 = constraint_functional(2, 2, small_grid, hbar)
    expected = -1j * hbar / small_grid.cell_volume
    assert poisson_bracket(phi1, phi2, random_state) == pytest.approx(expected)
    assert poisson_bracket(phi2, phi1, random_state) == pytest.approx(-expected)
    assert poisson_bracket(phi1, phi1, random_state) == 0.0


@pytest.mark.parametrize("hbar", [1.0, 2.0])
def test_constraint_matrix_is_antisymmetric_and_second_class(random_state, small_grid, hbar):
    report = constraint_matrix(random_state, [0, 3, 7, 11], hbar)
    assert report.matrix.shape == (8, 8)
    assert_allclose(report.matrix, -report.matrix.T, atol=1e-12)
    expected = hbar / small_grid.cell_volume
    assert report.smallest_singular_value == pytest.approx(expected, rel=1e-10)
    assert report.second_class
    assert report.to_dict()["classification"] == "second class"


def test_dirac_bracket_with_a_constraint_vanishes(random_state, small_grid, rng):
    sites = [1, 2, 5]
    target = linear_functional({
        "psi": rng.standard_normal(small_grid.shape),
        "pi_psi_star": rng.standard_normal(small_grid.shape) * 1j,
    })
    for site in sites:
        for which in (1, 2):
            phi = constraint_functional(which, site, small_grid)
            assert abs(dirac_bracket(phi, target, random_state, sites)) < 1e-10
            assert abs(dirac_bracket(target, phi, random_state, sites)) < 1e-10


def test_dirac_bracket_of_field_and_conjugate(random_state, small_grid):
    hbar = 0.5
    psi = site_value("psi", 4, small_grid)
    psi_star = site_value("psi_star", 4, small_grid)
    result = dirac_bracket(psi, psi_star, random_state, [4], hbar)
    assert result == pytest.approx(-1j / (hbar * small_grid.cell_volume))


def test_numeric_derivatives_match_analytic(small_grid):
    values = np.linspace(0.1, 1.6, small_grid.points) + 0.2j
    field = ComplexLatticeField(small_grid, values)
    state = FieldPhaseSpaceState(field, field * 0.5, field.conj(), field * 2.0)
    product = LatticeFunctional(lambda s: s.psi.values[0] * s.pi_psi.values[0], support=(0,), name="q*p")
    result = poisson_bracket(product, site_value("psi", 0, small_grid), state)
    assert result == pytest.approx(-values[0] / small_grid.cell_volume, abs=1e-8)


def test_unconverged_numeric_derivative_is_reported(small_grid):
    zero = ComplexLatticeField.zeros(small_grid)
    state = FieldPhaseSpaceState(zero, zero, zero, zero)
    wiggle = LatticeFunctional(lambda s: np.sin(1.0e6 * s.psi.values[0].real), support=(0,), name="wiggle")
    with pytest.raises(ToleranceError):
        poisson_bracket(wiggle, site_value("pi_psi", 0, small_grid), state)


def test_multipliers_match_closed_form(small_grid):
    h = HamiltonianSpec.build(small_grid, "harmonic", omega=0.8)
    psi = gaussian_packet(small_grid, center=0.5, momentum=0.7)
    state = FieldPhaseSpaceState.on_constraint(psi)
    solution = solve_multipliers(state, h)
    assert solution.max_deviation < 1e-10
    assert_allclose(solution.u1.values, 1j * h.apply_k(psi).values, atol=1e-10)


def _quadratic(first, second, coefficients, grid):
    """sum_i c_i first_i second_i with analytic partials."""
    slots = FIELDS.index(first), FIELDS.index(second)

    def evaluate(state):
        return np.sum(coefficients * state.field(first).values * state.field(second).values)

    def derivatives(state):
        gradient = CanonicalGradient.zeros(grid.shape)
        gradient[slots[0]][...] += coefficients * state.field(second).values
        gradient[slots[1]][...] += coefficients * state.field(first).values
        return gradient

    return LatticeFunctional(evaluate, derivatives, name=f"{first}*{second}")


def test_jacobi_identity(random_state, small_grid, rng):
    def coefficients():
        return rng.standard_normal(small_grid.shape) + 1j * rng.standard_normal(small_grid.shape)

    F = _quadratic("psi", "psi_star", coefficients(), small_grid)
    G = _quadratic("pi_psi", "psi_star", coefficients(), small_grid)
    H = _quadratic("pi_psi_star", "pi_psi", coefficients(), small_grid)
    terms = [
        poisson_bracket(F, bracket_functional(G, H), random_state),
        poisson_bracket(G, bracket_functional(H, F), random_state),
        poisson_bracket(H, bracket_functional(F, G), random_state),
    ]
    scale = max(abs(t) for t in terms)
    assert scale > 0.0
    assert abs(sum(terms)) < 1e-6 * scale
