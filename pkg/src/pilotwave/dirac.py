"""
Relativistic guidance for Dirac spinors.

The particle velocity is the normalized current J^mu = psibar gamma^mu psi / sqrt(a^2 + b^2),
a = psibar psi, b = i psibar gamma5 psi, integrated in proper time (dX^mu/dtau = J^mu).
Spinor fields are closed-form plane waves and their superpositions; a 1+1D
lattice check confirms that Hamilton's equations of H_T reproduce the Dirac equation.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .constraints import (CanonicalGradient, bracket_matrix, dirac_field_constraint_brackets,
                          spinor_constraint_gradients)
from .errors import ConfigurationError, LightlikeDegeneracyError
from .grid import SPECTRAL, ComplexLatticeField, derivative

logger = logging.getLogger(__name__)

ETA = np.diag([1.0, -1.0, -1.0, -1.0])
DEGENERACY_EPSILON = 1.0e-20

_I2 = np.eye(2, dtype=complex)
_Z2 = np.zeros((2, 2), dtype=complex)
PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True, eq=False)
class GammaAlgebra:
    """gamma^0..gamma^3 and gamma5 in one representation.

    `unitary` maps a spinor written in the Dirac basis into this
    representation, so physical results can be compared across them.
    """

    name: str
    gamma: tuple
    unitary: np.ndarray

    @property
    def gamma5(self):
        g0, g1, g2, g3 = self.gamma
        return 1j * g0 @ g1 @ g2 @ g3

    def clifford_error(self):
        worst = 0.0
        for mu in range(4):
            for nu in range(4):
                anti = self.gamma[mu] @ self.gamma[nu] + self.gamma[nu] @ self.gamma[mu]
                worst = max(worst, float(np.max(np.abs(anti - 2.0 * ETA[mu, nu] * np.eye(4)))))
        return worst

    def slash(self, p_upper):
        """gamma^mu p_mu for a contravariant four-vector p^mu."""
        p_lower = ETA @ np.asarray(p_upper, dtype=complex)
        return sum(g * p for g, p in zip(self.gamma, p_lower))

    def from_dirac(self, spinor):
        return np.asarray(spinor, dtype=complex) @ self.unitary.T

    def bar(self, psi):
        return np.conj(psi) @ self.gamma[0]

    def boost(self, rapidity, axis=1):
        """Spinor boost S = expm((eta/2) gamma^0 gamma^k)."""
        return scipy.linalg.expm(0.5 * rapidity * self.gamma[0] @ self.gamma[axis])


def _dirac_gammas():
    g0 = np.block([[_I2, _Z2], [_Z2, -_I2]])
    gk = tuple(np.block([[_Z2, s], [-s, _Z2]]) for s in PAULI)
    return (g0,) + gk


def dirac_representation():
    return GammaAlgebra("dirac", _dirac_gammas(), np.eye(4, dtype=complex))


def weyl_representation():
    g0 = np.block([[_Z2, _I2], [_I2, _Z2]])
    gk = tuple(np.block([[_Z2, s], [-s, _Z2]]) for s in PAULI)
    unitary = np.block([[_I2, -_I2], [_I2, _I2]]) / np.sqrt(2.0)
    return GammaAlgebra("weyl", (g0,) + gk, unitary)


REPRESENTATIONS = {"dirac": dirac_representation, "weyl": weyl_representation}


def representation(name="dirac"):
    if name not in REPRESENTATIONS:
        raise ConfigurationError(f"unknown gamma representation '{name}' (expected one of {sorted(REPRESENTATIONS)})")
    return REPRESENTATIONS[name]()


def lorentz_boost(rapidity, axis=1):
    """Four-vector boost matching GammaAlgebra.boost."""
    matrix = np.eye(4)
    ch, sh = np.cosh(rapidity), np.sinh(rapidity)
    matrix[0, 0] = matrix[axis, axis] = ch
    matrix[0, axis] = matrix[axis, 0] = sh
    return matrix


@dataclass(frozen=True)
class Current:
    J: np.ndarray
    a: float
    b: float
    imaginary_parts: float = 0.0

    def minkowski_norm(self):
        return float(self.J @ ETA @ self.J)


def bilinears(psi, algebra):
    """(psibar gamma^mu psi, a, b) for spinors of shape (..., 4), before normalization."""
    psi = np.asarray(psi, dtype=complex)
    psibar = algebra.bar(psi)
    j = np.stack([np.einsum("...i,ij,...j->...", psibar, g, psi) for g in algebra.gamma], axis=-1)
    a = np.einsum("...i,...i->...", psibar, psi)
    b = 1j * np.einsum("...i,ij,...j->...", psibar, algebra.gamma5, psi)
    return j, a, b


def current(psi, algebra=None):
    """Normalized current J^mu and the scalars a, b at one spinor value."""
    algebra = algebra or dirac_representation()
    psi = np.asarray(psi, dtype=complex).reshape(4)
    j, a, b = bilinears(psi, algebra)
    density = float(np.real(np.vdot(psi, psi)))
    norm2 = float(np.real(a) ** 2 + np.real(b) ** 2)
    if norm2 <= DEGENERACY_EPSILON * density ** 2:
        raise LightlikeDegeneracyError(f"a^2 + b^2 = {norm2:.3e} is below the lightlike threshold")
    imaginary = float(max(abs(np.imag(a)), abs(np.imag(b)), np.max(np.abs(np.imag(j)))))
    return Current(np.real(j) / np.sqrt(norm2), float(np.real(a)), float(np.real(b)), imaginary)


def plane_wave_spinor(momentum, mass=1.0, spin=0, algebra=None):
    """Positive-energy spinor u(p) with ubar u = 1; momentum is a 3-vector or an x-component."""
    algebra = algebra or dirac_representation()
    if mass <= 0:
        raise ConfigurationError("plane-wave spinors need a positive mass")
    p = np.zeros(3)
    p[: np.size(momentum)] = np.atleast_1d(momentum)
    energy = np.sqrt(p @ p + mass ** 2)
    chi = np.array([1.0, 0.0], dtype=complex) if spin == 0 else np.array([0.0, 1.0], dtype=complex)
    sigma_p = sum(s * pk for s, pk in zip(PAULI, p))
    upper, lower = chi, sigma_p @ chi / (energy + mass)
    u = np.sqrt((energy + mass) / (2.0 * mass)) * np.concatenate([upper, lower])
    return algebra.from_dirac(u), energy


@dataclass(frozen=True, eq=False)
class SpinorField:
    """psi(t, x) for x along the first spatial axis."""

    rule: Callable
    descriptor: dict
    algebra: GammaAlgebra

    def __call__(self, t, x):
        return self.rule(t, x)


def plane_wave_field(momentum=0.0, mass=1.0, algebra=None, spin=0):
    algebra = algebra or dirac_representation()
    u, energy = plane_wave_spinor(momentum, mass, spin, algebra)

    def rule(t, x):
        return u * np.exp(-1j * (energy * t - momentum * x))

    return SpinorField(rule, {"kind": "plane-wave", "momentum": momentum, "mass": mass,
                              "energy": float(energy), "representation": algebra.name}, algebra)


def rest_field(mass=1.0, algebra=None):
    return plane_wave_field(0.0, mass, algebra)


def boosted_field(beta, mass=1.0, algebra=None):
    """Rest spinor boosted along x to velocity beta (|beta| < 1)."""
    if not abs(beta) < 1.0:
        raise ConfigurationError(f"boost velocity must satisfy |beta| < 1, got {beta}")
    algebra = algebra or dirac_representation()
    rapidity = np.arctanh(beta)
    u = algebra.boost(rapidity) @ plane_wave_spinor(0.0, mass, 0, algebra)[0]
    energy, momentum = mass * np.cosh(rapidity), mass * np.sinh(rapidity)

    def rule(t, x):
        return u * np.exp(-1j * (energy * t - momentum * x))

    return SpinorField(rule, {"kind": "boosted", "beta": beta, "rapidity": float(rapidity), "mass": mass,
                              "representation": algebra.name}, algebra)


def superposition_field(momentum=0.5, ratio=0.3, mass=1.0, algebra=None):
    """u(p) e^{ipx} + c u(-p) e^{-ipx}, both at energy E."""
    algebra = algebra or dirac_representation()
    u_plus, energy = plane_wave_spinor(momentum, mass, 0, algebra)
    u_minus, _ = plane_wave_spinor(-momentum, mass, 0, algebra)

    def rule(t, x):
        return np.exp(-1j * energy * t) * (u_plus * np.exp(1j * momentum * x)
                                           + ratio * u_minus * np.exp(-1j * momentum * x))

    return SpinorField(rule, {"kind": "superposition", "momentum": momentum, "ratio": ratio, "mass": mass,
                              "energy": float(energy), "representation": algebra.name}, algebra)


def superposition_period(momentum, ratio, mass=1.0):
    """Coordinate time for x to advance by pi/p in the two-wave superposition."""
    energy = np.sqrt(momentum ** 2 + mass ** 2)
    return float(np.pi * energy * (1.0 + ratio ** 2) / (momentum ** 2 * (1.0 - ratio ** 2)))


def dirac_equation_residual(momentum, mass=1.0, algebra=None):
    """|(gamma^mu p_mu - m) u| for the plane-wave spinor."""
    algebra = algebra or dirac_representation()
    u, energy = plane_wave_spinor(momentum, mass, 0, algebra)
    p = np.zeros(4)
    p[0] = energy
    p[1: 1 + np.size(momentum)] = np.atleast_1d(momentum)
    return float(np.max(np.abs((algebra.slash(p) - mass * np.eye(4)) @ u)))


def particle_hamiltonian(momenta, currents):
    """H_p = p_mu J^mu."""
    return float(np.sum(np.einsum("...i,ij,...j->...", momenta, ETA, currents)))


@dataclass
class Worldline:
    tau: np.ndarray
    events: np.ndarray
    currents: np.ndarray
    a: np.ndarray
    b: np.ndarray
    momenta: np.ndarray
    truncated: bool = False
    event: Optional[dict] = None

    @property
    def particle_energy(self):
        """H_p along the path; zero because p_mu = 0 is imposed."""
        return particle_hamiltonian(self.momenta, self.currents)

    def coordinate_time_at(self, x):
        """Interpolated X^0 at which the x-coordinate first reaches x."""
        xs = self.events[:, 1]
        index = int(np.argmax(xs >= x)) if np.any(xs >= x) else None
        if index is None or index == 0:
            raise ConfigurationError(f"worldline never reaches x = {x}")
        x0, x1 = xs[index - 1], xs[index]
        t0, t1 = self.events[index - 1, 0], self.events[index, 0]
        return float(t0 + (x - x0) * (t1 - t0) / (x1 - x0))

    def rows(self):
        for i in range(len(self.tau)):
            yield (float(self.tau[i]), *self.events[i].tolist(), *self.currents[i].tolist(),
                   float(self.a[i]), float(self.b[i]))


def integrate_worldline(spinor_field, start, dtau, steps):
    """RK4 in proper time of dX^mu/dtau = J^mu(X); stops early at a lightlike point."""
    if dtau <= 0 or steps < 1:
        raise ConfigurationError("dtau must be positive and steps at least 1")
    algebra = spinor_field.algebra

    def j_at(x):
        return current(spinor_field(x[0], x[1]), algebra)

    x = np.asarray(start, dtype=float).reshape(4)
    first = j_at(x)
    events, currents, a_values, b_values, taus = [x], [first.J], [first.a], [first.b], [0.0]
    truncated, event = False, None
    for step in range(1, steps + 1):
        try:
            k1 = currents[-1]
            k2 = j_at(x + 0.5 * dtau * k1).J
            k3 = j_at(x + 0.5 * dtau * k2).J
            k4 = j_at(x + dtau * k3).J
            x = x + dtau / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            here = j_at(x)
        except LightlikeDegeneracyError as exc:
            truncated = True
            event = {"tau": taus[-1], "position": events[-1].tolist(), "reason": str(exc)}
            logger.warning("worldline truncated at tau=%.6g: %s", taus[-1], exc)
            break
        events.append(x)
        currents.append(here.J)
        a_values.append(here.a)
        b_values.append(here.b)
        taus.append(step * dtau)
    events = np.array(events)
    if np.any(np.diff(events[:, 0]) <= 0):
        raise LightlikeDegeneracyError("worldline is not future-directed")
    return Worldline(np.array(taus), events, np.array(currents), np.array(a_values),
                     np.array(b_values), np.zeros_like(events), truncated, event)


@dataclass(frozen=True, eq=False)
class SpinorLatticeState:
    """Canonical Dirac-field variables on a 1D periodic lattice, arrays of shape (N, 4)."""

    grid: object
    psi: np.ndarray
    pi_psi: np.ndarray
    psi_bar: np.ndarray
    pi_psi_bar: np.ndarray
    algebra: GammaAlgebra = field(default_factory=dirac_representation)

    def __post_init__(self):
        if self.grid.dimension != 1 or not self.grid.periodic:
            raise ConfigurationError("the spinor lattice is a 1D periodic grid")
        for name in ("psi", "pi_psi", "psi_bar", "pi_psi_bar"):
            values = np.asarray(getattr(self, name), dtype=complex)
            if values.shape != (self.grid.points, 4):
                raise ConfigurationError(f"{name} must have shape ({self.grid.points}, 4)")
            object.__setattr__(self, name, values)

    @classmethod
    def on_constraint(cls, grid, psi, algebra=None):
        """Pi_psi = (i/2) psibar gamma0 and Pi_psibar = -(i/2) gamma0 psi."""
        algebra = algebra or dirac_representation()
        psi = np.asarray(psi, dtype=complex)
        g0 = algebra.gamma[0]
        psi_bar = algebra.bar(psi)
        return cls(grid, psi, 0.5j * psi_bar @ g0, psi_bar, -0.5j * psi @ g0.T, algebra)

    @classmethod
    def from_field(cls, grid, spinor_field, t=0.0):
        x = grid.axis()
        psi = np.array([spinor_field(t, xi) for xi in x])
        return cls.on_constraint(grid, psi, spinor_field.algebra)


def _spatial_derivative(grid, values, method):
    columns = [derivative(ComplexLatticeField(grid, values[:, k]), 0, method).values for k in range(4)]
    return np.stack(columns, axis=-1)


def _mass_operator(state, potential, mass, charge):
    """Local part e A_mu gamma^mu + m, with A_mu = (A_0, A_1) covariant."""
    algebra = state.algebra
    a0, a1 = potential
    return charge * (a0 * algebra.gamma[0] + a1 * algebra.gamma[1]) + mass * np.eye(4)


def direct_dirac_rhs(state, potential=(0.0, 0.0), mass=1.0, charge=1.0, method=SPECTRAL):
    """dpsi/dt = -i gamma0 [-i gamma1 d_x + e A_mu gamma^mu + m] psi."""
    algebra = state.algebra
    g0, g1 = algebra.gamma[0], algebra.gamma[1]
    d_psi = _spatial_derivative(state.grid, state.psi, method)
    m_psi = -1j * d_psi @ g1.T + state.psi @ _mass_operator(state, potential, mass, charge).T
    return -1j * m_psi @ g0.T


def _canonical_gradient(state, potential, mass, charge, method):
    """Site partials of H_C = sum dx psibar [-i gamma1 d_x + e A.gamma + m] psi."""
    dx = state.grid.spacing
    g1 = state.algebra.gamma[1]
    local = _mass_operator(state, potential, mass, charge)
    d_psi = _spatial_derivative(state.grid, state.psi, method)
    d_psi_bar = _spatial_derivative(state.grid, state.psi_bar, method)
    by_psi_bar = dx * (-1j * d_psi @ g1.T + state.psi @ local.T)
    # d_x is antisymmetric on the periodic lattice
    by_psi = dx * (1j * d_psi_bar @ g1 + state.psi_bar @ local)
    zeros = np.zeros_like(state.psi)
    return CanonicalGradient(q=by_psi, p=zeros, q_conj=by_psi_bar, p_conj=zeros)


@dataclass(frozen=True)
class LatticeEomCheck:
    residual_psi: float
    residual_psi_bar: float
    generated: np.ndarray
    direct: np.ndarray

    @property
    def residual(self):
        return max(self.residual_psi, self.residual_psi_bar)


def dirac_lattice_eom_check(state, potential=(0.0, 0.0), mass=1.0, charge=1.0, method=SPECTRAL):
    """Solve the H_T consistency conditions for the multipliers and compare dpsi/dt with the Dirac equation."""
    report = dirac_field_constraint_brackets(state)
    gradients = spinor_constraint_gradients(state)
    dx = state.grid.spacing
    h_gradient = _canonical_gradient(state, potential, mass, charge, method)
    drift = bracket_matrix(gradients, [h_gradient], dx)[:, 0]
    u = np.linalg.solve(report.matrix, -drift) / dx
    u = u.reshape(state.grid.points, 2, 4)
    generated_psi, generated_psi_bar = u[:, 0, :], u[:, 1, :]
    direct = direct_dirac_rhs(state, potential, mass, charge, method)
    direct_bar = np.conj(direct) @ state.algebra.gamma[0]
    return LatticeEomCheck(
        residual_psi=float(np.max(np.abs(generated_psi - direct))),
        residual_psi_bar=float(np.max(np.abs(generated_psi_bar - direct_bar))),
        generated=generated_psi,
        direct=direct,
    )


def phase_rate(state, potential=(0.0, 0.0), mass=1.0, charge=1.0, method=SPECTRAL):
    """i (dpsi/dt) / psi at the site of largest amplitude; E + e A_0 for a plane wave."""
    rhs = direct_dirac_rhs(state, potential, mass, charge, method)
    site, comp = np.unravel_index(np.argmax(np.abs(state.psi)), state.psi.shape)
    return complex(1j * rhs[site, comp] / state.psi[site, comp])
