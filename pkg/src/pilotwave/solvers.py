"""
Reference Schrodinger solvers: Crank-Nicolson (Cayley form) and Strang split-step Fourier.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.sparse as sparse
from scipy.sparse.linalg import eigsh, splu

from .errors import ConfigurationError, SolverError
from .flow import HamiltonianSpec
from .frames import FrameSeries
from .grid import FINITE_DIFFERENCE, ComplexLatticeField, derivative, inner_product

logger = logging.getLogger(__name__)

CRANK_NICOLSON = "crank-nicolson"
SPLIT_STEP = "split-step"
SOLVER_METHODS = (CRANK_NICOLSON, SPLIT_STEP)

DENSE_EIGEN_LIMIT = 1024


@dataclass(frozen=True)
class SolverConfig:
    method: str = CRANK_NICOLSON
    dt: float = 1.0e-3
    tolerance: float = 1.0e-12

    def __post_init__(self):
        if self.method not in SOLVER_METHODS:
            raise ConfigurationError(f"unknown solver '{self.method}' (expected one of {SOLVER_METHODS})")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.tolerance > 0:
            raise ConfigurationError(f"tolerance must be positive, got {self.tolerance}")


def _second_difference_1d(grid):
    """Sparse 3-point second difference; periodic corners when the grid is periodic."""
    n = grid.points
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    matrix = sparse.diags([off, main, off], [-1, 0, 1], format="lil")
    if grid.periodic:
        matrix[0, n - 1] = 1.0
        matrix[n - 1, 0] = 1.0
    return matrix.tocsc() / grid.spacing ** 2


def kinetic_matrices(h):
    """Per-axis sparse matrices of (hbar^2/2m_a) d_a^2 acting on C-ordered flat fields."""
    grid = h.grid
    d2 = _second_difference_1d(grid)
    identity = sparse.identity(grid.points, format="csc")
    matrices = []
    for axis, m in enumerate(h.mass):
        factors = [identity] * grid.dimension
        factors[axis] = d2
        op = factors[0]
        for factor in factors[1:]:
            op = sparse.kron(op, factor, format="csc")
        matrices.append(op * (h.hbar ** 2 / (2.0 * m)))
    return matrices


def hamiltonian_matrix(h, t=0.0):
    """Finite-difference H = -sum_a (hbar^2/2m_a) d_a^2 + V as a sparse matrix."""
    if h.method != FINITE_DIFFERENCE:
        raise ConfigurationError("matrix solvers need the finite-difference Laplacian")
    kinetic = sum(kinetic_matrices(h))
    return (-kinetic + sparse.diags(np.ravel(h.potential_at(t)))).tocsc()


def _interior(grid):
    return np.flatnonzero(grid.interior_mask().ravel())


class _CayleyFactor:
    """(1 + i tau A / 2hbar)^-1 (1 - i tau A / 2hbar) restricted to interior sites."""

    def __init__(self, operator, tau, hbar, interior, tolerance):
        operator = operator[interior][:, interior]
        identity = sparse.identity(operator.shape[0], format="csc")
        self.lhs = (identity + 0.5j * tau / hbar * operator).tocsc()
        self.rhs = (identity - 0.5j * tau / hbar * operator).tocsc()
        self.lu = splu(self.lhs)
        self.interior = interior
        self.tolerance = tolerance

    def __call__(self, flat):
        b = self.rhs @ flat[self.interior]
        x = self.lu.solve(b)
        scale = max(np.linalg.norm(b), np.finfo(float).tiny)
        residual = np.linalg.norm(self.lhs @ x - b) / scale
        if residual > self.tolerance:
            raise SolverError(f"Crank-Nicolson solve residual {residual:.3e} above tolerance {self.tolerance:.1e}")
        out = np.zeros_like(flat)
        out[self.interior] = x
        return out


class CrankNicolsonSolver:
    """Unitary Cayley stepping. 2D grids use the symmetric product C_x(dt/2) C_y(dt) C_x(dt/2)."""

    def __init__(self, hamiltonian, dt, tolerance=1.0e-12):
        SolverConfig(CRANK_NICOLSON, dt, tolerance)
        if hamiltonian.method != FINITE_DIFFERENCE:
            raise ConfigurationError("Crank-Nicolson runs on the finite-difference Laplacian")
        self.hamiltonian = hamiltonian
        self.dt = dt
        self.tolerance = tolerance
        self.time = 0.0
        self._factors = None if hamiltonian.time_dependent else self._build(0.5 * dt)

    def _build(self, t_mid):
        h = self.hamiltonian
        grid = h.grid
        interior = _interior(grid)
        potential = sparse.diags(np.ravel(h.potential_at(t_mid)))
        kinetic = kinetic_matrices(h)
        if grid.dimension == 1:
            return [_CayleyFactor(-kinetic[0] + potential, self.dt, h.hbar, interior, self.tolerance)]
        half_v = 0.5 * potential
        x_half = _CayleyFactor(-kinetic[0] + half_v, 0.5 * self.dt, h.hbar, interior, self.tolerance)
        y_full = _CayleyFactor(-kinetic[1] + half_v, self.dt, h.hbar, interior, self.tolerance)
        return [x_half, y_full, x_half]

    def step(self, psi):
        factors = self._factors
        if factors is None:
            factors = self._build(self.time + 0.5 * self.dt)
        flat = np.ravel(psi.values).astype(complex)
        for factor in factors:
            flat = factor(flat)
        self.time += self.dt
        return psi.with_values(flat)

    __call__ = step

    def run(self, psi, steps, record_every=1):
        return _run(self, psi, steps, record_every)


class SplitStepSolver:
    """Strang splitting e^{-iV dt/2hbar} F^-1 e^{-i hbar k^2 dt/2m} F e^{-iV dt/2hbar}."""

    def __init__(self, hamiltonian, dt):
        SolverConfig(SPLIT_STEP, dt)
        grid = hamiltonian.grid
        if not grid.periodic:
            raise ConfigurationError("split-step Fourier needs a periodic grid")
        self.hamiltonian = hamiltonian
        self.dt = dt
        self.time = 0.0
        k = grid.wavenumbers()
        kinetic = np.zeros(grid.shape)
        for axis, m in enumerate(hamiltonian.mass):
            shape = [1] * grid.dimension
            shape[axis] = grid.points
            kinetic = kinetic + hamiltonian.hbar * k.reshape(shape) ** 2 / (2.0 * m)
        self._kinetic_phase = np.exp(-1j * kinetic * dt)
        self._half_potential = None if hamiltonian.time_dependent else self._potential_phase(0.5 * dt)

    def _potential_phase(self, t_mid):
        h = self.hamiltonian
        return np.exp(-0.5j * h.potential_at(t_mid) * self.dt / h.hbar)

    def step(self, psi):
        half = self._half_potential
        if half is None:
            half = self._potential_phase(self.time + 0.5 * self.dt)
        values = half * psi.values
        values = scipy.fft.ifftn(self._kinetic_phase * scipy.fft.fftn(values))
        self.time += self.dt
        return psi.with_values(half * values)

    __call__ = step

    def run(self, psi, steps, record_every=1):
        return _run(self, psi, steps, record_every)


def _run(solver, psi, steps, record_every):
    times, frames = [solver.time], [psi]
    for step in range(1, steps + 1):
        psi = solver.step(psi)
        if step % record_every == 0 or step == steps:
            times.append(solver.time)
            frames.append(psi)
    logger.debug("%s: %d steps of dt=%g", type(solver).__name__, steps, solver.dt)
    return FrameSeries(np.array(times), tuple(frames))


def make_solver(config, hamiltonian):
    if config.method == CRANK_NICOLSON:
        return CrankNicolsonSolver(hamiltonian, config.dt, config.tolerance)
    return SplitStepSolver(hamiltonian, config.dt)


def step_crank_nicolson(psi, potential, dt, hbar=1.0, mass=1.0, tolerance=1.0e-12):
    h = HamiltonianSpec(psi.grid, potential, mass, hbar)
    return CrankNicolsonSolver(h, dt, tolerance).step(psi)


def step_split_step(psi, potential, dt, hbar=1.0, mass=1.0):
    h = HamiltonianSpec(psi.grid, potential, mass, hbar)
    return SplitStepSolver(h, dt).step(psi)


def energy(psi, h, t=0.0):
    """<psi|H|psi> / <psi|psi> with the Hamiltonian's own Laplacian."""
    return float(np.real(inner_product(psi, h.apply_h(psi, t)))) / psi.norm() ** 2


def lattice_ground_state(h):
    """Lowest eigenpair of the finite-difference Hamiltonian, phase fixed so the state is real and positive."""
    grid = h.grid
    interior = _interior(grid)
    matrix = hamiltonian_matrix(h)[interior][:, interior]
    if matrix.shape[0] <= DENSE_EIGEN_LIMIT:
        values, vectors = scipy.linalg.eigh(matrix.toarray(), subset_by_index=[0, 0])
    else:
        values, vectors = eigsh(matrix, k=1, which="SA")
    vector = vectors[:, 0]
    vector = vector * np.sign(vector[np.argmax(np.abs(vector))])
    full = np.zeros(grid.site_count)
    full[interior] = np.real(vector)
    return ComplexLatticeField(grid, full).normalized(), float(values[0])


def continuity_residual(psi, h, t=0.0):
    """||d rho/dt + div j|| / ||d rho/dt|| with d rho/dt = (2/hbar) Im(psi* H psi)."""
    rho_t = 2.0 / h.hbar * np.imag(np.conj(psi.values) * h.apply_h(psi, t).values)
    divergence = np.zeros(psi.grid.shape)
    for axis, m in enumerate(h.mass):
        current = h.hbar / m * np.imag(np.conj(psi.values) * derivative(psi, axis, FINITE_DIFFERENCE).values)
        divergence += np.real(derivative(ComplexLatticeField(psi.grid, current), axis, FINITE_DIFFERENCE).values)
    scale = np.linalg.norm(rho_t)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(rho_t + divergence) / scale)


def compare_solutions(reference, other):
    """L2 distance between two FrameSeries at every reference time."""
    return np.array([(other.at(t) - psi).norm() for t, psi in reference])

