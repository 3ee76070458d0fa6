"""
Uniform periodic / hard-wall lattices and the complex fields living on them.

All functional sums carry the cell volume dx**d, so lattice quantities
converge to the continuum integrals and the lattice delta is 1/dx**d.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import ConfigurationError, GridMismatchError, NumericalError

PERIODIC = "periodic"
HARD_WALL = "hard-wall"
BOUNDARIES = (PERIODIC, HARD_WALL)

FINITE_DIFFERENCE = "finite-difference"
SPECTRAL = "spectral"
METHODS = (FINITE_DIFFERENCE, SPECTRAL)


@dataclass(frozen=True)
class GridSpec:
    dimension: int = 1
    points: int = 64
    length: float = 20.0
    boundary: str = PERIODIC

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigurationError(f"grid dimension must be 1 or 2, got {self.dimension}")
        if int(self.points) != self.points or self.points < 8:
            raise ConfigurationError(f"points per axis must be an integer >= 8, got {self.points}")
        if not self.length > 0:
            raise ConfigurationError(f"box length must be positive, got {self.length}")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"unknown boundary '{self.boundary}' (expected one of {BOUNDARIES})")
        object.__setattr__(self, "points", int(self.points))
        object.__setattr__(self, "length", float(self.length))

    @property
    def spacing(self):
        return self.length / self.points

    @property
    def shape(self):
        return (self.points,) * self.dimension

    @property
    def site_count(self):
        return self.points ** self.dimension

    @property
    def cell_volume(self):
        return self.spacing ** self.dimension

    @property
    def lattice_delta(self):
        """Value of delta(x_i - x_i) under the dx**d measure convention."""
        return 1.0 / self.cell_volume

    @property
    def periodic(self):
        return self.boundary == PERIODIC

    def axis(self):
        return -0.5 * self.length + self.spacing * np.arange(self.points)

    def coordinates(self):
        """Site coordinates, one array of grid shape per axis."""
        axes = [self.axis()] * self.dimension
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def wavenumbers(self):
        return 2.0 * np.pi * scipy.fft.fftfreq(self.points, d=self.spacing)

    def interior_mask(self):
        """False on wall sites (first site along each axis) for hard-wall grids."""
        mask = np.ones(self.shape, dtype=bool)
        if self.boundary == HARD_WALL:
            for axis in range(self.dimension):
                index = [slice(None)] * self.dimension
                index[axis] = 0
                mask[tuple(index)] = False
        return mask

    def contains(self, points):
        points = np.atleast_2d(points)
        half = 0.5 * self.length
        return bool(np.all((points >= -half) & (points <= half)))

    def wrap(self, points):
        """Map positions back into the box (periodic) or clip them (hard wall)."""
        points = np.asarray(points, dtype=float)
        half = 0.5 * self.length
        if self.periodic:
            return np.mod(points + half, self.length) - half
        return np.clip(points, -half, half)

    def nearest_site(self, point):
        point = self.wrap(np.asarray(point, dtype=float).reshape(self.dimension))
        index = np.rint((point + 0.5 * self.length) / self.spacing).astype(int)
        if self.periodic:
            index = np.mod(index, self.points)
        else:
            index = np.clip(index, 0, self.points - 1)
        return tuple(int(i) for i in index)

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "points": self.points,
            "length": self.length,
            "boundary": self.boundary,
        }


@dataclass(frozen=True, eq=False)
class ComplexLatticeField:
    """Complex values on every site of a GridSpec. Immutable."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            if values.size != self.grid.site_count:
                raise GridMismatchError(
                    f"field has {values.size} values, grid has {self.grid.site_count} sites"
                )
            values = values.reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise NumericalError("field contains NaN or Inf values")
        if self.grid.boundary == HARD_WALL:
            values[~self.grid.interior_mask()] = 0.0
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(*grid.coordinates()))

    def with_values(self, values):
        return ComplexLatticeField(self.grid, values)

    def conj(self):
        return self.with_values(np.conj(self.values))

    def density(self):
        return np.abs(self.values) ** 2

    def norm(self):
        return float(np.sqrt(np.sum(self.density()) * self.grid.cell_volume))

    def normalized(self):
        norm = self.norm()
        if norm == 0.0:
            raise NumericalError("cannot normalize a zero field")
        return self.with_values(self.values / norm)

    def _other_values(self, other):
        if isinstance(other, ComplexLatticeField):
            _require_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other_values(other))

    def __sub__(self, other):
        return self.with_values(self.values - self._other_values(other))

    def __mul__(self, other):
        return self.with_values(self.values * self._other_values(other))

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def __repr__(self):
        return f"ComplexLatticeField(grid={self.grid!r}, norm={self.norm():.6g})"


def _require_same_grid(f, g):
    if f.grid != g.grid:
        raise GridMismatchError(f"fields live on different grids: {f.grid} vs {g.grid}")


def inner_product(f, g):
    """Lattice version of the integral of conj(f) g."""
    _require_same_grid(f, g)
    return complex(np.sum(np.conj(f.values) * g.values) * f.grid.cell_volume)


def l2_distance(f, g):
    return (f - g).norm()


def _shift(values, axis, step, boundary):
    """out[i] = values[i + step] with periodic wrap or zero fill at walls."""
    out = np.roll(values, -step, axis=axis)
    if boundary == HARD_WALL:
        index = [slice(None)] * values.ndim
        index[axis] = slice(-step, None) if step > 0 else slice(None, -step)
        out[tuple(index)] = 0.0
    return out


def _check_method(grid, method):
    if method not in METHODS:
        raise ConfigurationError(f"unknown derivative method '{method}' (expected one of {METHODS})")
    if method == SPECTRAL and not grid.periodic:
        raise ConfigurationError("spectral derivatives require a periodic grid")


def _axis_wavenumbers(grid, axis):
    shape = [1] * grid.dimension
    shape[axis] = grid.points
    return grid.wavenumbers().reshape(shape)


def _spectral(values, grid, axis, order):
    k = _axis_wavenumbers(grid, axis)
    if order == 1:
        factor = 1j * k
        if grid.points % 2 == 0:
            # Nyquist mode has no odd derivative on a real field.
            nyquist = [slice(None)] * grid.dimension
            nyquist[axis] = grid.points // 2
            factor = factor.copy()
            factor[tuple(nyquist)] = 0.0
    else:
        factor = -(k ** 2)
    return scipy.fft.ifft(factor * scipy.fft.fft(values, axis=axis), axis=axis)


def derivative(f, axis, method=FINITE_DIFFERENCE):
    """First derivative along one axis: central differences or spectral."""
    _check_method(f.grid, method)
    grid = f.grid
    if method == SPECTRAL:
        return f.with_values(_spectral(f.values, grid, axis, 1))
    forward = _shift(f.values, axis, 1, grid.boundary)
    backward = _shift(f.values, axis, -1, grid.boundary)
    return f.with_values((forward - backward) / (2.0 * grid.spacing))


def second_derivative(f, axis, method=FINITE_DIFFERENCE):
    """Second derivative along one axis: 3-point stencil or -k**2 in Fourier space."""
    _check_method(f.grid, method)
    grid = f.grid
    if method == SPECTRAL:
        return f.with_values(_spectral(f.values, grid, axis, 2))
    forward = _shift(f.values, axis, 1, grid.boundary)
    backward = _shift(f.values, axis, -1, grid.boundary)
    return f.with_values((forward - 2.0 * f.values + backward) / grid.spacing ** 2)


def laplacian(f, method=FINITE_DIFFERENCE):
    result = second_derivative(f, 0, method)
    for axis in range(1, f.grid.dimension):
        result = result + second_derivative(f, axis, method)
    return result


def gradient(f, method=FINITE_DIFFERENCE):
    return tuple(derivative(f, axis, method) for axis in range(f.grid.dimension))


def laplacian_spectral_radius(grid, method=FINITE_DIFFERENCE):
    """Largest |eigenvalue| of the lattice Laplacian."""
    if method == SPECTRAL:
        return grid.dimension * (np.pi / grid.spacing) ** 2
    return 4.0 * grid.dimension / grid.spacing ** 2
