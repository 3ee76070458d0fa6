"""
Truncated-mode scalar field with Gaussian wave functionals.

Each half-set mode carries Psi_k = exp(-alpha |q - c|^2 + i(pi* (q - c) + pi (q* - c*)) + i gamma)
under the mode Hamiltonian -d^2/dq dq* + omega^2 q q*. Mode coordinates are
guided by dq/dt = dS/dq* = pi - Im(alpha) (q - c).

Measure: q = (x + i y) / sqrt(2) with dx dy, so the mode problem is the 2D
oscillator -(1/2) laplacian + (1/2) omega^2 r^2.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, InstabilityError, NodeError, RealityError
from .flow import HamiltonianSpec
from .grid import ComplexLatticeField, GridSpec
from .guidance import NODE_THRESHOLD, POLICIES, SHRINK, velocity_at
from .solvers import SplitStepSolver
from .states import harmonic_potential

logger = logging.getLogger(__name__)

REALITY_TOLERANCE = 1.0e-10
CONSTRAINT_WARNING = 1.0e-12


@dataclass(frozen=True)
class ModeSet:
    """Half-set n = 1..n_max (plus n = 0 when include_zero); k = 2 pi n / L, omega = sqrt(k^2 + m^2)."""

    box_length: float = 2.0 * np.pi
    n_max: int = 8
    mass: float = 1.0
    include_zero: bool = False

    def __post_init__(self):
        if self.n_max < 0 or (self.n_max == 0 and not self.include_zero):
            raise ConfigurationError("the mode set is empty")
        if not self.box_length > 0:
            raise ConfigurationError(f"box length must be positive, got {self.box_length}")
        if self.mass < 0:
            raise ConfigurationError(f"mass must be non-negative, got {self.mass}")
        if self.include_zero and self.mass == 0:
            raise ConfigurationError("a massless zero mode has no normalizable ground state")

    @property
    def numbers(self):
        start = 0 if self.include_zero else 1
        return np.arange(start, self.n_max + 1)

    @property
    def full_numbers(self):
        """Mode set closed under n -> -n."""
        return np.union1d(-self.numbers, self.numbers)

    @property
    def wavenumbers(self):
        return 2.0 * np.pi * self.numbers / self.box_length

    @property
    def omegas(self):
        return np.sqrt(self.wavenumbers ** 2 + self.mass ** 2)

    @property
    def volume(self):
        return self.box_length

    def __len__(self):
        return len(self.numbers)

    def to_dict(self):
        return {"box_length": self.box_length, "n_max": self.n_max, "mass": self.mass,
                "include_zero": self.include_zero, "numbers": self.numbers.tolist()}


def _complex(values, size):
    values = np.asarray(values, dtype=complex)
    return np.broadcast_to(values, (size,)).copy()


@dataclass(frozen=True, eq=False)
class GaussianModeState:
    modes: ModeSet
    alpha: np.ndarray
    center: np.ndarray
    momentum: np.ndarray
    phase: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        n = len(self.modes)
        for name in ("alpha", "center", "momentum", "phase"):
            object.__setattr__(self, name, _complex(getattr(self, name), n))
        if np.any(self.alpha.real <= 0):
            raise InstabilityError(f"Gaussian width collapsed: min Re(alpha) = {self.alpha.real.min():.3e}")

    @property
    def omegas(self):
        return self.modes.omegas

    def norms(self):
        """Per-mode norm e^{-2 Im gamma} pi / Re alpha (dx dy measure)."""
        return np.exp(-2.0 * self.phase.imag) * np.pi / self.alpha.real

    def energy(self):
        """<H> summed over modes: |alpha|^2/(2 Re alpha) + |pi|^2 + omega^2 <|q|^2>."""
        kinetic = np.abs(self.alpha) ** 2 / (2.0 * self.alpha.real) + np.abs(self.momentum) ** 2
        return float(np.sum(kinetic + self.omegas ** 2 * self.second_moment()))

    def second_moment(self):
        """<|q_k|^2> = 1/(2 Re alpha) + |c|^2."""
        return 1.0 / (2.0 * self.alpha.real) + np.abs(self.center) ** 2

    def log_amplitude(self, q):
        w = np.asarray(q, dtype=complex) - self.center
        return (-self.alpha * np.abs(w) ** 2
                + 1j * (np.conj(self.momentum) * w + self.momentum * np.conj(w))
                + 1j * self.phase)

    def wave_functional(self, q):
        """Psi at the mode coordinates q (one complex value per half-set mode)."""
        return complex(np.exp(np.sum(self.log_amplitude(q))))

    def mode_values(self, index, q):
        """Single-mode Psi_k over an array of q values."""
        w = np.asarray(q, dtype=complex) - self.center[index]
        return np.exp(-self.alpha[index] * np.abs(w) ** 2
                      + 1j * (np.conj(self.momentum[index]) * w + self.momentum[index] * np.conj(w))
                      + 1j * self.phase[index])

    def to_dict(self):
        return {
            "time": self.time,
            "alpha": [[z.real, z.imag] for z in self.alpha],
            "center": [[z.real, z.imag] for z in self.center],
            "momentum": [[z.real, z.imag] for z in self.momentum],
            "phase": [[z.real, z.imag] for z in self.phase],
        }


def _normalized_phase(alpha):
    """gamma with Im gamma = (1/2) ln(pi / Re alpha), so each mode has unit norm."""
    return 0.5j * np.log(np.pi / np.real(alpha))


def vacuum_state(modes):
    omegas = modes.omegas
    return GaussianModeState(modes, omegas, 0.0, 0.0, _normalized_phase(omegas))


def coherent_state(modes, amplitudes):
    """alpha = omega, c = amplitudes, pi = -i omega c, so c(t) = c(0) e^{-i omega t}."""
    omegas = modes.omegas
    c = _complex(amplitudes, len(modes))
    return GaussianModeState(modes, omegas, c, -1j * omegas * c, _normalized_phase(omegas))


def squeezed_state(modes, alpha, center=0.0, momentum=0.0):
    alpha = _complex(alpha, len(modes))
    return GaussianModeState(modes, alpha, center, momentum, _normalized_phase(alpha))


def vacuum_energy(modes):
    return float(np.sum(modes.omegas))


def vacuum_phase(modes, t):
    """S(q, t) = -E0 t for the vacuum."""
    return -vacuum_energy(modes) * t


def gaussian_rhs(alpha, center, momentum, phase, omegas):
    w2 = omegas ** 2
    return (
        -1j * (alpha ** 2 - w2),
        momentum,
        -w2 * center,
        np.abs(momentum) ** 2 - w2 * np.abs(center) ** 2 - alpha,
    )


def _rk4(rhs, y, dt, t=0.0):
    k1 = rhs(y, t)
    k2 = rhs(tuple(a + 0.5 * dt * k for a, k in zip(y, k1)), t + 0.5 * dt)
    k3 = rhs(tuple(a + 0.5 * dt * k for a, k in zip(y, k2)), t + 0.5 * dt)
    k4 = rhs(tuple(a + dt * k for a, k in zip(y, k3)), t + dt)
    return tuple(a + dt / 6.0 * (p + 2.0 * q + 2.0 * r + s) for a, p, q, r, s in zip(y, k1, k2, k3, k4))


def _parameters(state):
    return (state.alpha, state.center, state.momentum, state.phase)


def _with_parameters(state, params, t):
    alpha, center, momentum, phase = params
    return replace(state, alpha=alpha, center=center, momentum=momentum, phase=phase, time=t)


def evolve_gaussian(state, dt, steps, record_every=1):
    """RK4 on the closed (alpha, c, pi, gamma) system; returns the recorded states."""
    if dt <= 0 or steps < 0:
        raise ConfigurationError("dt must be positive and steps non-negative")
    omegas = state.omegas

    def rhs(y, _):
        return gaussian_rhs(*y, omegas)

    params = _parameters(state)
    out = [state]
    for step in range(1, steps + 1):
        params = _rk4(rhs, params, dt)
        t = state.time + step * dt
        if np.any(params[0].real <= 0):
            raise InstabilityError(f"Gaussian width collapsed at t={t:.6g}")
        if step % record_every == 0 or step == steps:
            out.append(_with_parameters(state, params, t))
    return out


def riccati_alpha(alpha0, omega, t):
    """Closed-form width parameter of the mode oscillator."""
    c, s = np.cos(omega * t), np.sin(omega * t)
    return omega * (alpha0 * c + 1j * omega * s) / (omega * c + 1j * alpha0 * s)


@dataclass(frozen=True, eq=False)
class ModeParticleState:
    q: np.ndarray
    p: np.ndarray = None

    def __post_init__(self):
        q = np.array(self.q, dtype=complex, ndmin=1)
        p = np.zeros_like(q) if self.p is None else np.array(self.p, dtype=complex, ndmin=1)
        if p.shape != q.shape:
            raise ConfigurationError("mode momenta must match the mode coordinates")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    def max_momentum(self):
        return float(np.max(np.abs(self.p)))

    def satisfies_constraint(self, tol=0.0):
        return self.max_momentum() <= tol


def _guidance(alpha, center, momentum, q):
    return momentum - alpha.imag * (q - center)


def _guided_velocity(alpha, center, momentum, q, policy, node_threshold, time):
    relative_density = np.exp(-2.0 * alpha.real * np.abs(q - center) ** 2)
    velocity = _guidance(alpha, center, momentum, q)
    low = relative_density < node_threshold
    if np.any(low):
        if policy == SHRINK:
            raise NodeError("mode coordinate in a region of vanishing |Psi|^2", time,
                            [[z.real, z.imag] for z in q])
        velocity = np.where(low, 0.0, velocity)
    return velocity


def _momentum_rate(alpha, p):
    if not np.any(p):
        return np.zeros_like(p)
    return p * alpha.imag


def mode_guidance_rhs(state, mp, policy=SHRINK, node_threshold=NODE_THRESHOLD):
    """dq_k/dt = dS/dq*_k from the Gaussian parameters; dq*_k/dt is its conjugate."""
    if policy not in POLICIES:
        raise ConfigurationError(f"unknown node policy '{policy}'")
    return _guided_velocity(state.alpha, state.center, state.momentum, mp.q, policy, node_threshold, state.time)


def mode_momentum_rhs(state, p):
    """dp_k/dt = -d H_p / d q_k = p_k Im(alpha_k); identically zero for p = 0."""
    return _momentum_rate(state.alpha, np.asarray(p, dtype=complex))


@dataclass
class ModeTrajectory:
    states: list
    coordinates: np.ndarray
    momenta: np.ndarray
    max_momentum: float
    constraint_violation: bool = False

    @property
    def times(self):
        return np.array([s.time for s in self.states])


def evolve_coupled_modes(state, mp, dt, steps, record_every=1, policy=SHRINK):
    """Co-evolve the Gaussian parameters and the guided mode coordinates with RK4.

    Under shrink, a coordinate reaching vanishing |Psi|^2 raises NodeError with
    the stage time; under freeze its velocity is set to zero.
    """
    if policy not in POLICIES:
        raise ConfigurationError(f"unknown node policy '{policy}'")
    if dt <= 0 or steps < 0:
        raise ConfigurationError("dt must be positive and steps non-negative")
    omegas = state.omegas

    def rhs(y, tau):
        alpha, center, momentum, phase, q, p = y
        d_params = gaussian_rhs(alpha, center, momentum, phase, omegas)
        d_q = _guided_velocity(alpha, center, momentum, q, policy, NODE_THRESHOLD, tau)
        d_p = _momentum_rate(alpha, p)
        return (*d_params, d_q, d_p)

    y = (*_parameters(state), mp.q.copy(), mp.p.copy())
    states, coords, momenta = [state], [mp.q.copy()], [mp.p.copy()]
    max_p = mp.max_momentum()
    for step in range(1, steps + 1):
        y = _rk4(rhs, y, dt, state.time + (step - 1) * dt)
        t = state.time + step * dt
        if np.any(y[0].real <= 0):
            raise InstabilityError(f"Gaussian width collapsed at t={t:.6g}")
        max_p = max(max_p, float(np.max(np.abs(y[5]))))
        if step % record_every == 0 or step == steps:
            states.append(_with_parameters(state, y[:4], t))
            coords.append(y[4].copy())
            momenta.append(y[5].copy())
    violation = max_p > CONSTRAINT_WARNING
    if violation:
        logger.warning("mode momentum constraint p = 0 violated: max |p| = %.3e", max_p)
    return ModeTrajectory(states, np.array(coords), np.array(momenta), max_p, violation)


def _full_coefficients(modes, q):
    """Map n -> q_n over the full mode set, from a half-set array or a mapping."""
    if isinstance(q, dict):
        coefficients = {int(n): complex(v) for n, v in q.items()}
        for n, v in coefficients.items():
            partner = coefficients.get(-n)
            if partner is None or abs(partner - np.conj(v)) > REALITY_TOLERANCE * max(1.0, abs(v)):
                raise RealityError(f"mode pair n={n} breaks q_(-k) = q_k*")
        return coefficients
    q = np.asarray(q, dtype=complex)
    if q.shape != (len(modes),):
        raise ConfigurationError(f"expected {len(modes)} half-set coordinates, got shape {q.shape}")
    coefficients = {}
    for n, value in zip(modes.numbers, q):
        if n == 0:
            if abs(value.imag) > REALITY_TOLERANCE * max(1.0, abs(value)):
                raise RealityError("the zero-mode coordinate must be real")
            coefficients[0] = complex(value.real)
        else:
            coefficients[int(n)] = value
            coefficients[-int(n)] = np.conj(value)
    return coefficients


def reconstruct_field(modes, q, x):
    """phi(x) = (1/sqrt(V)) sum_k q_k e^{ikx} with the reality pairing."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape, dtype=complex)
    for n, value in sorted(_full_coefficients(modes, q).items()):
        total += value * np.exp(2j * np.pi * n * x / modes.box_length)
    total /= np.sqrt(modes.volume)
    imaginary = float(np.max(np.abs(total.imag))) if total.size else 0.0
    if imaginary > REALITY_TOLERANCE * max(1.0, float(np.max(np.abs(total.real)))):
        raise RealityError(f"reconstructed field has imaginary part {imaginary:.3e}")
    return total.real


def oracle_grid(points=80, length=20.0):
    return GridSpec(dimension=2, points=points, length=length)


def sample_mode(state, index, grid):
    """Single-mode Psi_k on the (x, y) grid with q = (x + i y)/sqrt(2)."""
    x, y = grid.coordinates()
    return ComplexLatticeField(grid, state.mode_values(index, (x + 1j * y) / np.sqrt(2.0)))


@dataclass
class GridOracleResult:
    distance: float
    grid_state: ComplexLatticeField
    analytic_state: ComplexLatticeField
    velocity_grid: complex = None
    velocity_analytic: complex = None


def single_mode_grid_oracle(state, index, t_final, dt=2.5e-4, points=80, length=20.0, at=None):
    """Evolve one mode on a 2D real grid with split-step and compare with the Gaussian evolution.

    With `at` (a complex q) the grid guidance velocity at that point is
    compared with dq/dt from the Gaussian parameters.
    """
    grid = oracle_grid(points, length)
    omega = float(state.omegas[index])
    hamiltonian = HamiltonianSpec(grid, harmonic_potential(grid, omega=omega))
    steps = int(round(t_final / dt))
    psi = sample_mode(state, index, grid)
    solver = SplitStepSolver(hamiltonian, dt)
    for _ in range(steps):
        psi = solver.step(psi)
    evolved = evolve_gaussian(state, dt, steps, record_every=max(steps, 1))[-1]
    analytic = sample_mode(evolved, index, grid)
    result = GridOracleResult((psi - analytic).norm(), psi, analytic)
    if at is not None:
        point = np.array([np.sqrt(2.0) * at.real, np.sqrt(2.0) * at.imag])
        vx, vy = velocity_at(psi, point)
        result.velocity_grid = complex(vx, vy) / np.sqrt(2.0)
        result.velocity_analytic = complex(_guidance(evolved.alpha[index], evolved.center[index],
                                                     evolved.momentum[index], at))
    return result
