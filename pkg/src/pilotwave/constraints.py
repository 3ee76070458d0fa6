"""
Canonical phase space of the lattice Schrodinger field and its constraint algebra.

(psi, Pi_psi) and (psi*, Pi_psi*) are independent canonical pairs. With site
partials dF/dq_i the lattice bracket is

    {F, G} = sum_i [dF/dq_i dG/dp_i - dF/dp_i dG/dq_i + (conjugate pair)] / dx**d

so that {psi(x_i), Pi_psi(x_j)} = delta_ij / dx**d.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DegeneracyError, GridMismatchError, ToleranceError
from .grid import ComplexLatticeField

logger = logging.getLogger(__name__)

FIELDS = ("psi", "pi_psi", "psi_star", "pi_psi_star")
LATTICE_DELTA_CONVENTION = "delta(x_i - x_j) -> delta_ij / dx**d"

DERIVATIVE_STEP = 1.0e-5
DERIVATIVE_RTOL = 1.0e-6


class CanonicalGradient(NamedTuple):
    """Site partials with respect to (q, p, q_conj, p_conj)."""

    q: np.ndarray
    p: np.ndarray
    q_conj: np.ndarray
    p_conj: np.ndarray

    @classmethod
    def zeros(cls, shape):
        return cls(*(np.zeros(shape, dtype=complex) for _ in range(4)))


@dataclass(frozen=True, eq=False)
class FieldPhaseSpaceState:
    psi: ComplexLatticeField
    pi_psi: ComplexLatticeField
    psi_star: ComplexLatticeField
    pi_psi_star: ComplexLatticeField
    time: float = 0.0

    def __post_init__(self):
        grids = {self.field(name).grid for name in FIELDS}
        if len(grids) != 1:
            raise GridMismatchError("all four canonical fields must share one GridSpec")

    @classmethod
    def on_constraint(cls, psi, hbar=1.0, time=0.0):
        """State on the constraint surface: Pi_psi = (i hbar/2) psi*, Pi_psi* = -(i hbar/2) psi."""
        psi_star = psi.conj()
        return cls(
            psi=psi,
            pi_psi=psi_star * (0.5j * hbar),
            psi_star=psi_star,
            pi_psi_star=psi * (-0.5j * hbar),
            time=time,
        )

    @property
    def grid(self):
        return self.psi.grid

    def field(self, name):
        return getattr(self, name)

    def arrays(self):
        return tuple(self.field(name).values for name in FIELDS)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_arrays(self, arrays, time=None):
        fields = {
            name: ComplexLatticeField(self.grid, values) for name, values in zip(FIELDS, arrays)
        }
        return FieldPhaseSpaceState(time=self.time if time is None else time, **fields)

    def constraint_residual(self, hbar=1.0):
        phi1, phi2 = primary_constraints(self, hbar)
        return float(max(np.max(np.abs(phi1.values)), np.max(np.abs(phi2.values))))

    def is_on_constraint(self, hbar=1.0, tol=1.0e-10):
        return self.constraint_residual(hbar) <= tol


@dataclass(frozen=True)
class LatticeFunctional:
    """A complex functional of the canonical state.

    `derivatives` returns the analytic site partials; without it the bracket
    falls back to central differences restricted to `support` (flat site
    indices, all sites when None).
    """

    evaluate: Callable[[FieldPhaseSpaceState], complex]
    derivatives: Optional[Callable[[FieldPhaseSpaceState], CanonicalGradient]] = None
    support: Optional[Sequence[int]] = None
    name: str = "F"

    def __call__(self, state):
        return complex(self.evaluate(state))


def primary_constraints(state, hbar=1.0):
    """phi1 = Pi_psi - (i hbar/2) psi*, phi2 = Pi_psi* + (i hbar/2) psi, per site."""
    phi1 = state.pi_psi - state.psi_star * (0.5j * hbar)
    phi2 = state.pi_psi_star + state.psi * (0.5j * hbar)
    return phi1, phi2


def _flat_site(grid, site):
    if isinstance(site, (tuple, list, np.ndarray)):
        return int(np.ravel_multi_index(tuple(int(i) for i in site), grid.shape))
    return int(site)


def site_value(name, site, grid):
    """The functional state -> <field name>(x_site)."""
    index = _flat_site(grid, site)
    slot = FIELDS.index(name)

    def evaluate(state):
        return state.field(name).values.flat[index]

    def derivatives(state):
        gradient = CanonicalGradient.zeros(grid.shape)
        gradient[slot].flat[index] = 1.0
        return gradient

    return LatticeFunctional(evaluate, derivatives, support=(index,), name=f"{name}[{index}]")


def constraint_functional(which, site, grid, hbar=1.0):
    """phi1(x_site) (which=1) or phi2(x_site) (which=2)."""
    index = _flat_site(grid, site)
    if which == 1:

        def evaluate(state):
            return state.pi_psi.values.flat[index] - 0.5j * hbar * state.psi_star.values.flat[index]

        def derivatives(state):
            gradient = CanonicalGradient.zeros(grid.shape)
            gradient.p.flat[index] = 1.0
            gradient.q_conj.flat[index] = -0.5j * hbar
            return gradient

    elif which == 2:

        def evaluate(state):
            return state.pi_psi_star.values.flat[index] + 0.5j * hbar * state.psi.values.flat[index]

        def derivatives(state):
            gradient = CanonicalGradient.zeros(grid.shape)
            gradient.p_conj.flat[index] = 1.0
            gradient.q.flat[index] = 0.5j * hbar
            return gradient

    else:
        raise ValueError(f"constraint index must be 1 or 2, got {which}")
    return LatticeFunctional(evaluate, derivatives, support=(index,), name=f"phi{which}[{index}]")


def linear_functional(coefficients, constant=0.0, name="L"):
    """sum over fields and sites of coefficients[field] * field, plus a constant."""
    coefficients = {key: np.asarray(value, dtype=complex) for key, value in coefficients.items()}
    unknown = set(coefficients) - set(FIELDS)
    if unknown:
        raise ValueError(f"unknown canonical fields {sorted(unknown)}")

    def evaluate(state):
        total = complex(constant)
        for key, coef in coefficients.items():
            total += np.sum(coef * state.field(key).values)
        return total

    def derivatives(state):
        shape = state.grid.shape
        return CanonicalGradient(
            *(np.broadcast_to(coefficients.get(key, np.zeros(shape)), shape).astype(complex) for key in FIELDS)
        )

    return LatticeFunctional(evaluate, derivatives, name=name)


def numerical_gradient(functional, state, step=DERIVATIVE_STEP):
    """Central-difference site partials, step h = step * (1 + |value|)."""
    grid = state.grid
    arrays = [np.array(values) for values in state.arrays()]
    gradient = CanonicalGradient.zeros(grid.shape)
    sites = range(grid.site_count) if functional.support is None else functional.support
    for slot in range(4):
        for index in sites:
            original = arrays[slot].flat[index]
            h = step * (1.0 + abs(original))
            arrays[slot].flat[index] = original + h
            plus = functional(state.with_arrays(arrays))
            arrays[slot].flat[index] = original - h
            minus = functional(state.with_arrays(arrays))
            arrays[slot].flat[index] = original
            gradient[slot].flat[index] = (plus - minus) / (2.0 * h)
    return gradient


def _gradients(functional, state):
    """Analytic gradient twice, or numeric gradients at h and h/2 for the convergence gate."""
    if functional.derivatives is not None:
        gradient = functional.derivatives(state)
        return gradient, gradient
    return (
        numerical_gradient(functional, state, DERIVATIVE_STEP),
        numerical_gradient(functional, state, 0.5 * DERIVATIVE_STEP),
    )


def _gate(coarse, fine, what):
    scale = max(abs(fine), 1.0)
    if abs(coarse - fine) > DERIVATIVE_RTOL * scale:
        raise ToleranceError(
            f"numerical functional derivative did not converge for {what}: "
            f"|{coarse} - {fine}| exceeds {DERIVATIVE_RTOL} relative"
        )
    return fine


def bracket_of_gradients(a, b, cell_volume):
    total = np.sum(a.q * b.p - a.p * b.q + a.q_conj * b.p_conj - a.p_conj * b.q_conj)
    return complex(total / cell_volume)


def bracket_matrix(rows, columns, cell_volume):
    """All brackets {rows[i], columns[j]} of gradient lists at once."""

    def stack(gradients, slot):
        return np.array([g[slot].ravel() for g in gradients])

    a = [stack(rows, slot) for slot in range(4)]
    b = [stack(columns, slot) for slot in range(4)]
    matrix = a[0] @ b[1].T - a[1] @ b[0].T + a[2] @ b[3].T - a[3] @ b[2].T
    return matrix / cell_volume


def poisson_bracket(F, G, state):
    dF_coarse, dF_fine = _gradients(F, state)
    dG_coarse, dG_fine = _gradients(G, state)
    dV = state.grid.cell_volume
    coarse = bracket_of_gradients(dF_coarse, dG_coarse, dV)
    fine = bracket_of_gradients(dF_fine, dG_fine, dV)
    return _gate(coarse, fine, f"{{{F.name}, {G.name}}}")


def bracket_functional(F, G):
    """{F, G} as a functional of the state (numeric derivatives)."""
    return LatticeFunctional(lambda state: poisson_bracket(F, G, state), name=f"{{{F.name},{G.name}}}")


@dataclass(frozen=True)
class ConstraintMatrix:
    matrix: np.ndarray
    singular_values: np.ndarray
    sites: tuple

    @property
    def smallest_singular_value(self):
        return float(self.singular_values.min())

    @property
    def second_class(self):
        return self.smallest_singular_value > 1.0e-12 * max(float(self.singular_values.max()), 1.0)

    def to_dict(self):
        return {
            "sites": list(self.sites),
            "matrix_real": self.matrix.real.tolist(),
            "matrix_imag": self.matrix.imag.tolist(),
            "singular_values": self.singular_values.tolist(),
            "smallest_singular_value": self.smallest_singular_value,
            "classification": "second class" if self.second_class else "degenerate",
        }


def _constraint_list(grid, sites, hbar):
    """Interleaved phi1(x_i), phi2(x_i) for each requested site."""
    functionals = []
    for site in sites:
        functionals.append(constraint_functional(1, site, grid, hbar))
        functionals.append(constraint_functional(2, site, grid, hbar))
    return functionals


def constraint_matrix(state, sites, hbar=1.0):
    """2n x 2n matrix of brackets among the primary constraints at the given sites."""
    sites = tuple(_flat_site(state.grid, site) for site in sites)
    if not sites:
        raise ValueError("constraint_matrix needs at least one site")
    constraints = _constraint_list(state.grid, sites, hbar)
    gradients = [phi.derivatives(state) for phi in constraints]
    matrix = bracket_matrix(gradients, gradients, state.grid.cell_volume)
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    return ConstraintMatrix(matrix, singular_values, sites)


def dirac_bracket(F, G, state, sites, hbar=1.0):
    """{F,G}_D = {F,G} - {F,phi_a} (C^-1)_ab {phi_b,G} over the constraints at `sites`."""
    report = constraint_matrix(state, sites, hbar)
    if not report.second_class:
        raise DegeneracyError("constraint matrix is singular on the chosen sites")
    constraints = _constraint_list(state.grid, report.sites, hbar)
    phi_gradients = [phi.derivatives(state) for phi in constraints]
    dV = state.grid.cell_volume
    dF_coarse, dF_fine = _gradients(F, state)
    dG_coarse, dG_fine = _gradients(G, state)

    def evaluate(dF, dG):
        base = bracket_of_gradients(dF, dG, dV)
        f_phi = bracket_matrix([dF], phi_gradients, dV)[0]
        phi_g = bracket_matrix(phi_gradients, [dG], dV)[:, 0]
        return base - complex(f_phi @ np.linalg.solve(report.matrix, phi_g))

    coarse = evaluate(dF_coarse, dG_coarse)
    fine = evaluate(dF_fine, dG_fine)
    return _gate(coarse, fine, f"{{{F.name}, {G.name}}}_D")


@dataclass(frozen=True)
class SpinorConstraintReport:
    matrix: np.ndarray
    singular_values: np.ndarray
    sites: int

    @property
    def second_class(self):
        return float(self.singular_values.min()) > 1.0e-12 * float(self.singular_values.max())

    def to_dict(self):
        return {
            "sites": self.sites,
            "block_real": self.matrix[:8, :8].real.tolist(),
            "block_imag": self.matrix[:8, :8].imag.tolist(),
            "singular_values": sorted(set(np.round(self.singular_values, 12).tolist())),
            "classification": "second class" if self.second_class else "degenerate",
        }


def spinor_constraint_gradients(state):
    """Analytic gradients of phi1_k = Pi_psi,k - (i/2)(psibar gamma0)_k and phi2_k = Pi_psibar,k + (i/2)(gamma0 psi)_k.

    Ordering: per site, phi1_0..3 then phi2_0..3. `state` is a SpinorLatticeState.
    """
    gamma0 = state.algebra.gamma[0]
    shape = (state.grid.points, 4)
    gradients = []
    for site in range(state.grid.points):
        for k in range(4):
            g = CanonicalGradient.zeros(shape)
            g.p[site, k] = 1.0
            g.q_conj[site, :] = -0.5j * gamma0[:, k]
            gradients.append(g)
        for k in range(4):
            g = CanonicalGradient.zeros(shape)
            g.p_conj[site, k] = 1.0
            g.q[site, :] = 0.5j * gamma0[k, :]
            gradients.append(g)
    return gradients


def dirac_field_constraint_brackets(state):
    """Bracket matrix of the Dirac-field primary constraints, with its singular values."""
    sites = state.grid.points
    gradients = spinor_constraint_gradients(state)
    matrix = bracket_matrix(gradients, gradients, state.grid.spacing)
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    logger.debug("spinor constraint matrix %s, smallest singular value %.6g", matrix.shape, singular_values.min())
    return SpinorConstraintReport(matrix, singular_values, sites)
