"""Initial wave functions and potentials sampled on a GridSpec."""

import numpy as np

from .errors import ConfigurationError
from .grid import ComplexLatticeField


def _as_vector(value, dimension):
    vector = np.zeros(dimension) if value is None else np.atleast_1d(np.asarray(value, dtype=float))
    if vector.size == 1 and dimension > 1:
        vector = np.repeat(vector, dimension)
    return vector


def gaussian_packet(grid, center=0.0, width=1.0, momentum=0.0, hbar=1.0):
    """Gaussian packet whose density |psi|^2 has standard deviation `width` per axis."""
    center = _as_vector(center, grid.dimension)
    momentum = _as_vector(momentum, grid.dimension)
    width = _as_vector(width, grid.dimension)
    coords = grid.coordinates()
    exponent = np.zeros(grid.shape, dtype=complex)
    for x, x0, p, sigma in zip(coords, center, momentum, width):
        exponent += -((x - x0) ** 2) / (4.0 * sigma ** 2) + 1j * p * x / hbar
    return ComplexLatticeField(grid, np.exp(exponent)).normalized()


def commensurate_wavenumber(grid, n):
    """Wavenumber 2*pi*n/L that is exactly periodic on the grid."""
    return 2.0 * np.pi * n / grid.length


def plane_wave(grid, wavenumber, amplitude=1.0):
    wavenumber = _as_vector(wavenumber, grid.dimension)
    phase = sum(k * x for k, x in zip(wavenumber, grid.coordinates()))
    return ComplexLatticeField(grid, amplitude * np.exp(1j * phase))


def oscillator_ground_state(grid, omega=1.0, mass=1.0, hbar=1.0):
    """Analytic ground state of V = m omega^2 x^2 / 2, lattice-normalized."""
    r2 = sum(x ** 2 for x in grid.coordinates())
    return ComplexLatticeField(grid, np.exp(-mass * omega * r2 / (2.0 * hbar))).normalized()


def double_gaussian(grid, separation=4.0, width=0.5, momentum=0.0, hbar=1.0):
    """Equal-weight superposition of two packets at +-separation/2 along the first axis."""
    offset = np.zeros(grid.dimension)
    offset[0] = 0.5 * separation
    left = gaussian_packet(grid, -offset, width, momentum, hbar)
    right = gaussian_packet(grid, offset, width, momentum, hbar)
    return (left + right).normalized()


def product_state(grid, factors):
    """psi(x1, x2) = f(x1) g(x2) on a 2-axis configuration grid from 1D factors."""
    if grid.dimension != len(factors):
        raise ConfigurationError("one factor per configuration axis is required")
    values = np.multiply.outer(factors[0].values, factors[1].values)
    return ComplexLatticeField(grid, values)


def harmonic_potential(grid, omega=1.0, mass=1.0):
    masses = _as_vector(mass, grid.dimension)
    return sum(0.5 * m * omega ** 2 * x ** 2 for m, x in zip(masses, grid.coordinates()))


def barrier_potential(grid, height=1.0, width=1.0, center=0.0):
    """Smooth Gaussian barrier along the first axis."""
    x = grid.coordinates()[0]
    return height * np.exp(-((x - center) ** 2) / (2.0 * width ** 2))


def constant_potential(grid, value=0.0):
    return np.full(grid.shape, float(value))


POTENTIALS = {
    "free": lambda grid, **kw: constant_potential(grid, 0.0),
    "constant": constant_potential,
    "harmonic": harmonic_potential,
    "barrier": barrier_potential,
}


def build_potential(grid, kind="free", **params):
    if kind not in POTENTIALS:
        raise ConfigurationError(f"unknown potential '{kind}'")
    return np.asarray(POTENTIALS[kind](grid, **params), dtype=float)
