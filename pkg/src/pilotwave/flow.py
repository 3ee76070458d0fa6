"""
Extended phase-space flow generated by the total Hamiltonian

    H_T = (i/hbar) sum_i dx**d [Pi_psi (K psi) - Pi_psi* (K psi*)],   K = sum_a (hbar^2/2m_a) d_a^2 - V,

optionally coupled to particles through H_p = sum_k p_k . grad_k S(X) / m.
Hamilton's equations of this lattice H_T are field_eom; on the constraint
surface H_T equals <psi|H|psi>.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from . import states
from .constraints import CanonicalGradient, FieldPhaseSpaceState, bracket_matrix, constraint_functional
from .errors import ConfigurationError, NodeError
from .grid import (FINITE_DIFFERENCE, ComplexLatticeField, derivative, laplacian_spectral_radius,
                   second_derivative)
from .guidance import (POLICIES, SHRINK, SHRINK_FACTOR, SHRINK_WINDOW, axis_masses, default_method,
                       interpolator, velocity_field)

logger = logging.getLogger(__name__)

FIELD_ONLY = "field-only"
FIELD_AND_PARTICLE = "field+particle"
COUPLINGS = (FIELD_ONLY, FIELD_AND_PARTICLE)

CONSTRAINT_WARNING = 1.0e-12


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """Potential, units and discretization shared by the flow and the reference solvers.

    `potential` is an array on the grid or a callable t -> array. `mass` may
    hold one mass per grid axis, which turns a 2-axis grid into the
    configuration space of two 1D particles.
    """

    grid: object
    potential: Union[np.ndarray, Callable] = 0.0
    mass: object = 1.0
    hbar: float = 1.0
    method: str = FINITE_DIFFERENCE
    particle_count: int = 1
    coupling: str = FIELD_ONLY

    def __post_init__(self):
        if self.coupling not in COUPLINGS:
            raise ConfigurationError(f"unknown coupling '{self.coupling}' (expected one of {COUPLINGS})")
        if self.hbar <= 0:
            raise ConfigurationError(f"hbar must be positive, got {self.hbar}")
        object.__setattr__(self, "mass", tuple(axis_masses(self.mass, self.grid.dimension)))
        if not callable(self.potential):
            values = np.broadcast_to(np.asarray(self.potential), self.grid.shape)
            if np.iscomplexobj(values) and np.any(np.imag(values) != 0):
                raise ConfigurationError("potential must be real-valued")
            values = np.array(np.real(values), dtype=float)
            values.flags.writeable = False
            object.__setattr__(self, "potential", values)

    @classmethod
    def build(cls, grid, kind="free", mass=1.0, hbar=1.0, method=FINITE_DIFFERENCE, **params):
        return cls(grid, states.build_potential(grid, kind, **params), mass, hbar, method)

    @property
    def time_dependent(self):
        return callable(self.potential)

    def potential_at(self, t=0.0):
        if self.time_dependent:
            values = np.asarray(self.potential(t))
            if np.iscomplexobj(values) and np.any(np.imag(values) != 0):
                raise ConfigurationError("potential must be real-valued")
            return np.broadcast_to(np.real(values).astype(float), self.grid.shape)
        return self.potential

    def kinetic(self, f):
        """sum_a (hbar^2 / 2 m_a) d_a^2 f."""
        result = None
        for axis, m in enumerate(self.mass):
            term = second_derivative(f, axis, self.method) * (self.hbar ** 2 / (2.0 * m))
            result = term if result is None else result + term
        return result

    def apply_k(self, f, t=0.0):
        """K f = kinetic f - V f, so that i hbar dpsi/dt = -K psi."""
        return self.kinetic(f) - f * self.potential_at(t)

    def apply_h(self, f, t=0.0):
        return -self.apply_k(f, t)

    def spectral_radius(self, t=0.0):
        rate = self.hbar / (2.0 * min(self.mass)) * laplacian_spectral_radius(self.grid, self.method)
        return rate + float(np.max(np.abs(self.potential_at(t)))) / self.hbar

    def to_dict(self):
        return {
            "grid": self.grid.to_dict(),
            "mass": list(self.mass),
            "hbar": self.hbar,
            "method": self.method,
            "particle_count": self.particle_count,
            "coupling": self.coupling,
            "time_dependent_potential": self.time_dependent,
        }


class FieldDerivative(NamedTuple):
    psi: ComplexLatticeField
    pi_psi: ComplexLatticeField
    psi_star: ComplexLatticeField
    pi_psi_star: ComplexLatticeField


def field_eom(s, h, t=None):
    """Time derivatives of (psi, Pi_psi, psi*, Pi_psi*) from Hamilton's equations of H_T."""
    t = s.time if t is None else t
    rate = 1j / h.hbar
    return FieldDerivative(
        psi=h.apply_k(s.psi, t) * rate,
        pi_psi=h.apply_k(s.pi_psi, t) * (-rate),
        psi_star=h.apply_k(s.psi_star, t) * (-rate),
        pi_psi_star=h.apply_k(s.pi_psi_star, t) * rate,
    )


def check_stability(h, dt, t=0.0):
    """RK4 is stable on the imaginary axis while dt * rho <= 2 (rho the spectral radius of K/hbar)."""
    rho = h.spectral_radius(t)
    if dt * rho > 2.0:
        raise ConfigurationError(
            f"dt={dt} violates the RK4 stability bound dt <= {2.0 / rho:.6g} for this grid and potential"
        )


def _field_rhs(arrays, h, t):
    grid = h.grid
    return tuple(d.values for d in field_eom(_state_from(grid, arrays, t), h, t))


def _state_from(grid, arrays, t):
    return FieldPhaseSpaceState(*(ComplexLatticeField(grid, a) for a in arrays), time=t)


def _rk4_fields(arrays, h, t, dt, extra=None):
    """One classical RK4 step of the field arrays; `extra(arrays, t)` adds coupling terms."""

    def rhs(y, tau):
        derivs = _field_rhs(y, h, tau)
        if extra is not None:
            derivs = tuple(d + e for d, e in zip(derivs, extra(y, tau)))
        return derivs

    k1 = rhs(arrays, t)
    k2 = rhs(tuple(y + 0.5 * dt * k for y, k in zip(arrays, k1)), t + 0.5 * dt)
    k3 = rhs(tuple(y + 0.5 * dt * k for y, k in zip(arrays, k2)), t + 0.5 * dt)
    k4 = rhs(tuple(y + dt * k for y, k in zip(arrays, k3)), t + dt)
    return tuple(
        y + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d) for y, a, b, c, d in zip(arrays, k1, k2, k3, k4)
    ), (k1, k2, k3, k4)


@dataclass
class ExtendedTrajectory:
    times: np.ndarray
    states: list
    constraint_residuals: np.ndarray

    @property
    def final(self):
        return self.states[-1]

    @property
    def max_constraint_residual(self):
        return float(self.constraint_residuals.max())


def evolve_extended(s, h, dt, steps, record_every=1):
    """RK4 integration of field_eom from s; returns the recorded states."""
    if dt <= 0 or steps < 0:
        raise ConfigurationError("dt must be positive and steps non-negative")
    check_stability(h, dt, s.time)
    grid = s.grid
    arrays = s.arrays()
    t = s.time
    states_out, times, residuals = [s], [t], [s.constraint_residual(h.hbar)]
    for step in range(1, steps + 1):
        arrays, _ = _rk4_fields(arrays, h, t, dt)
        t = s.time + step * dt
        if step % record_every == 0 or step == steps:
            state = _state_from(grid, arrays, t)
            states_out.append(state)
            times.append(t)
            residuals.append(state.constraint_residual(h.hbar))
    residuals = np.array(residuals)
    if residuals.max() > CONSTRAINT_WARNING:
        logger.warning("constraint residual reached %.3e during extended evolution", residuals.max())
    logger.debug("evolve_extended: %d steps of dt=%g, final t=%g", steps, dt, t)
    return ExtendedTrajectory(np.array(times), states_out, residuals)


@dataclass(frozen=True, eq=False)
class ParticleState:
    """Positions and canonical momenta, one row per particle (or configuration point)."""

    positions: np.ndarray
    momenta: Optional[np.ndarray] = None
    masses: object = 1.0

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float, ndmin=2)
        momenta = np.zeros_like(positions) if self.momenta is None else np.array(self.momenta, dtype=float, ndmin=2)
        if momenta.shape != positions.shape:
            raise ConfigurationError("momenta must match the shape of positions")
        positions.flags.writeable = False
        momenta.flags.writeable = False
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "momenta", momenta)
        object.__setattr__(self, "masses", tuple(axis_masses(self.masses, positions.shape[1])))

    @property
    def count(self):
        return self.positions.shape[0]

    def max_momentum(self):
        return float(np.max(np.abs(self.momenta))) if self.momenta.size else 0.0

    def satisfies_guidance_constraint(self, tol=0.0):
        return self.max_momentum() <= tol

    def inside(self, grid):
        return grid.contains(self.positions)


class ParticleDerivative(NamedTuple):
    positions: np.ndarray
    momenta: np.ndarray


def _gradient_s(psi, h):
    """d_a S = hbar Im(psi* d_a psi) / |psi|^2 on the grid, zero at nodes."""
    vfield = velocity_field(psi, h.hbar, h.mass)
    return tuple(v * m for v, m in zip(vfield.components, h.mass)), vfield


def particle_eom(ps, s, h, policy=SHRINK):
    """dX_k/dt = grad_k S / m and dp_k/dt = -(p_l / m) d_k d_l S at X.

    Under freeze, particles at a node get zero rates for both X and p.
    """
    grad_s, vfield = _gradient_s(s.psi, h)
    velocities, density = vfield.evaluate(ps.positions)
    frozen = density < vfield.threshold
    if policy == SHRINK and np.any(frozen):
        first = int(np.flatnonzero(frozen)[0])
        raise NodeError(f"particle {first} at a node of the wave function", s.time,
                        ps.positions[first].tolist())
    velocities[frozen] = 0.0
    if not np.any(ps.momenta):
        return ParticleDerivative(velocities, np.zeros_like(ps.momenta))
    grid = h.grid
    dp = np.zeros_like(ps.momenta)
    for l, (dl_s, m_l) in enumerate(zip(grad_s, h.mass)):
        field_l = ComplexLatticeField(grid, dl_s)
        for k in range(grid.dimension):
            hessian = np.real(derivative(field_l, k, default_method(grid)).values)
            dp[:, k] -= ps.momenta[:, l] / m_l * interpolator(grid, hessian)(grid.wrap(ps.positions))
    dp[frozen] = 0.0
    return ParticleDerivative(velocities, dp)


def coupling_term(s, ps, h):
    """Extra Pi_psi and Pi_psi* rates from H_p: (p_k/m)(hbar/(2i psi)) d_k delta(x - X) and its mirror."""
    grid = h.grid
    d_pi = np.zeros(grid.shape, dtype=complex)
    d_pi_star = np.zeros(grid.shape, dtype=complex)
    if not np.any(ps.momenta):
        return d_pi, d_pi_star
    psi = s.psi.values
    for position, momentum in zip(ps.positions, ps.momenta):
        delta = np.zeros(grid.shape)
        delta[grid.nearest_site(position)] = grid.lattice_delta
        delta_field = ComplexLatticeField(grid, delta)
        for k, (p_k, m_k) in enumerate(zip(momentum, h.mass)):
            if p_k == 0.0:
                continue
            d_delta = derivative(delta_field, k, FINITE_DIFFERENCE).values
            support = d_delta != 0
            weight = np.zeros(grid.shape, dtype=complex)
            weight[support] = h.hbar / (2j * psi[support])
            d_pi += p_k / m_k * weight * d_delta
            d_pi_star += p_k / m_k * np.conj(weight) * d_delta
    return d_pi, d_pi_star


@dataclass
class CoupledTrajectory:
    times: np.ndarray
    fields: list
    particles: list
    max_momentum: float
    constraint_violation: bool = False
    constraint_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    refined_steps: int = 0

    @property
    def positions(self):
        return np.array([p.positions for p in self.particles])


def _near_node(psi, h, positions):
    """True when a particle sits inside the shrink window around a node."""
    vfield = velocity_field(psi, h.hbar, h.mass)
    _, density = vfield.evaluate(positions)
    return bool(np.any(density < SHRINK_WINDOW * vfield.threshold))


def evolve_coupled(s, ps, h, dt, steps, policy=SHRINK, record_every=1):
    """Co-integrate field and particles under H_T + H_p with RK4.

    With p = 0 the coupling terms are skipped, so the field path is the same
    floating-point computation as evolve_extended. Under shrink, a step that
    starts with a particle inside the node window is taken as SHRINK_FACTOR
    sub-steps; a particle that still reaches a node raises NodeError.
    """
    if policy not in POLICIES:
        raise ConfigurationError(f"unknown node policy '{policy}' (expected one of {POLICIES})")
    if not ps.inside(h.grid):
        raise ConfigurationError("initial particle positions must lie inside the box")
    if dt <= 0 or steps < 0:
        raise ConfigurationError("dt must be positive and steps non-negative")
    check_stability(h, dt, s.time)
    grid = h.grid

    def advance(arrays, positions, momenta, t, dt):
        current = ParticleState(positions, momenta, ps.masses)

        def extra(y, tau):
            d_pi, d_pi_star = coupling_term(_state_from(grid, y, tau), current, h)
            return (0.0, d_pi, 0.0, d_pi_star)

        new_arrays, stages = _rk4_fields(arrays, h, t, dt, extra if np.any(momenta) else None)
        stage_times = (t, t + 0.5 * dt, t + 0.5 * dt, t + dt)
        k_x, k_p = [], []
        x_stage, p_stage = positions, momenta
        for index, (y, tau) in enumerate(zip(_stage_states(arrays, stages, dt), stage_times)):
            rates = particle_eom(ParticleState(grid.wrap(x_stage), p_stage, ps.masses),
                                 _state_from(grid, y, tau), h, policy)
            k_x.append(rates.positions)
            k_p.append(rates.momenta)
            if index < 3:
                factor = 0.5 * dt if index < 2 else dt
                x_stage = positions + factor * rates.positions
                p_stage = momenta + factor * rates.momenta
        positions = grid.wrap(positions + dt / 6.0 * (k_x[0] + 2 * k_x[1] + 2 * k_x[2] + k_x[3]))
        momenta = momenta + dt / 6.0 * (k_p[0] + 2 * k_p[1] + 2 * k_p[2] + k_p[3])
        return new_arrays, positions, momenta

    arrays = s.arrays()
    positions, momenta = ps.positions, ps.momenta
    t = s.time
    fields, particles, times = [s], [ps], [t]
    residuals = [s.constraint_residual(h.hbar)]
    max_p = ps.max_momentum()
    refined = 0

    for step in range(1, steps + 1):
        if policy == SHRINK and _near_node(_state_from(grid, arrays, t).psi, h, positions):
            refined += 1
            logger.debug("particle inside the node window at t=%.6g, sub-stepping", t)
            sub = dt / SHRINK_FACTOR
            for j in range(SHRINK_FACTOR):
                arrays, positions, momenta = advance(arrays, positions, momenta, t + j * sub, sub)
        else:
            arrays, positions, momenta = advance(arrays, positions, momenta, t, dt)
        t = s.time + step * dt
        max_p = max(max_p, float(np.max(np.abs(momenta))) if momenta.size else 0.0)
        if step % record_every == 0 or step == steps:
            state = _state_from(grid, arrays, t)
            fields.append(state)
            particles.append(ParticleState(positions, momenta, ps.masses))
            times.append(t)
            residuals.append(state.constraint_residual(h.hbar))

    violation = max_p > CONSTRAINT_WARNING
    if violation:
        logger.warning("particle momentum constraint p = 0 violated: max |p| = %.3e", max_p)
    if refined:
        logger.info("%d of %d steps sub-stepped near a node", refined, steps)
    return CoupledTrajectory(np.array(times), fields, particles, max_p, violation, np.array(residuals), refined)


def _stage_states(arrays, stages, dt):
    """Field arrays at which the four RK4 stages were evaluated."""
    k1, k2, k3, _ = stages
    return (
        arrays,
        tuple(y + 0.5 * dt * k for y, k in zip(arrays, k1)),
        tuple(y + 0.5 * dt * k for y, k in zip(arrays, k2)),
        tuple(y + dt * k for y, k in zip(arrays, k3)),
    )


def hamiltonian_value(s, ps=None, h=None, t=None):
    """H_T + H_p on the lattice."""
    t = s.time if t is None else t
    dV = h.grid.cell_volume
    k_psi = h.apply_k(s.psi, t).values
    k_psi_star = h.apply_k(s.psi_star, t).values
    total = 1j / h.hbar * np.sum(s.pi_psi.values * k_psi - s.pi_psi_star.values * k_psi_star) * dV
    if ps is not None and np.any(ps.momenta):
        grad_s, _ = _gradient_s(s.psi, h)
        points = h.grid.wrap(ps.positions)
        for axis, (component, m) in enumerate(zip(grad_s, h.mass)):
            total += np.sum(ps.momenta[:, axis] / m * interpolator(h.grid, component)(points))
    return complex(total)


@dataclass(frozen=True, eq=False)
class MultiplierSolution:
    u1: ComplexLatticeField
    u2: ComplexLatticeField
    closed_form_u1: ComplexLatticeField
    closed_form_u2: ComplexLatticeField

    @property
    def max_deviation(self):
        return float(max(np.max(np.abs(self.u1.values - self.closed_form_u1.values)),
                         np.max(np.abs(self.u2.values - self.closed_form_u2.values))))


def _canonical_hamiltonian_gradient(s, h, t):
    """Site partials of H_C = -sum dx**d psi* K psi (no momentum dependence)."""
    dV = h.grid.cell_volume
    zeros = np.zeros(h.grid.shape, dtype=complex)
    return CanonicalGradient(
        q=-dV * h.apply_k(s.psi_star, t).values,
        p=zeros,
        q_conj=-dV * h.apply_k(s.psi, t).values,
        p_conj=zeros,
    )


def solve_multipliers(s, h, t=None):
    """Solve {phi_a, H_C} + sum_b C_ab dx**d u_b = 0 for the multipliers u1, u2 at every site."""
    t = s.time if t is None else t
    grid = h.grid
    constraints = []
    for site in range(grid.site_count):
        constraints.append(constraint_functional(1, site, grid, h.hbar))
        constraints.append(constraint_functional(2, site, grid, h.hbar))
    gradients = [phi.derivatives(s) for phi in constraints]
    dV = grid.cell_volume
    matrix = bracket_matrix(gradients, gradients, dV)
    drift = bracket_matrix(gradients, [_canonical_hamiltonian_gradient(s, h, t)], dV)[:, 0]
    u = np.linalg.solve(matrix, -drift) / dV
    rate = 1j / h.hbar
    return MultiplierSolution(
        u1=ComplexLatticeField(grid, u[0::2]),
        u2=ComplexLatticeField(grid, u[1::2]),
        closed_form_u1=h.apply_k(s.psi, t) * rate,
        closed_form_u2=h.apply_k(s.psi_star, t) * (-rate),
    )
