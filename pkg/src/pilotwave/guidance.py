"""
Guidance velocities from the probability current, and particle trajectories.

The velocity is always the current ratio (hbar/m) Im(psi* grad psi) / |psi|^2;
the phase S is never unwrapped. Sites whose density falls below
node_threshold * max|psi|^2 are masked.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import ConfigurationError, DegeneracyError, NodeError
from .grid import FINITE_DIFFERENCE, SPECTRAL, ComplexLatticeField, derivative

logger = logging.getLogger(__name__)

SHRINK = "shrink"
FREEZE = "freeze"
POLICIES = (SHRINK, FREEZE)

NODE_THRESHOLD = 1.0e-12
SHRINK_WINDOW = 1.0e3
SHRINK_FACTOR = 4

_PAD = 4


def default_method(grid):
    return SPECTRAL if grid.periodic else FINITE_DIFFERENCE


def axis_masses(mass, dimension):
    masses = np.atleast_1d(np.asarray(mass, dtype=float))
    if masses.size == 1:
        masses = np.repeat(masses, dimension)
    if masses.size != dimension or np.any(masses <= 0):
        raise ConfigurationError(f"need {dimension} positive masses, got {mass}")
    return masses


class _PeriodicSpline1D:
    def __init__(self, grid, values):
        x = np.append(grid.axis(), grid.axis()[0] + grid.length)
        self._spline = CubicSpline(x, np.append(values, values[0]), bc_type="periodic")

    def __call__(self, points):
        return self._spline(points[:, 0])


class _Spline1D:
    def __init__(self, grid, values):
        self._spline = CubicSpline(grid.axis(), values)

    def __call__(self, points):
        return self._spline(points[:, 0])


class _Spline2D:
    def __init__(self, grid, values):
        axis = grid.axis()
        if grid.periodic:
            pad = np.arange(-_PAD, grid.points + _PAD)
            axis = axis[0] + grid.spacing * pad
            values = np.pad(values, _PAD, mode="wrap")
        self._spline = RectBivariateSpline(axis, axis, values, kx=3, ky=3)

    def __call__(self, points):
        return self._spline(points[:, 0], points[:, 1], grid=False)


def interpolator(grid, values):
    if grid.dimension == 1:
        return _PeriodicSpline1D(grid, values) if grid.periodic else _Spline1D(grid, values)
    return _Spline2D(grid, values)


@dataclass(frozen=True, eq=False)
class VelocityField:
    grid: object
    components: tuple
    density: np.ndarray
    mask: np.ndarray
    threshold: float

    def __post_init__(self):
        for component in self.components:
            if not np.all(np.isfinite(component[~self.mask])):
                raise DegeneracyError("velocity field is not finite on unmasked sites")

    @cached_property
    def _splines(self):
        return tuple(interpolator(self.grid, c) for c in self.components)

    @cached_property
    def _density_spline(self):
        return interpolator(self.grid, self.density)

    def evaluate(self, points):
        """Interpolated velocities (n, d) and densities (n,) at points (n, d)."""
        points = np.asarray(points, dtype=float).reshape(-1, self.grid.dimension)
        inside = self.grid.wrap(points)
        velocities = np.stack([spline(inside) for spline in self._splines], axis=-1)
        return velocities, self._density_spline(inside)

    def as_array(self):
        return np.stack(self.components, axis=-1)


def velocity_field(psi, hbar=1.0, mass=1.0, method=None, node_threshold=NODE_THRESHOLD):
    grid = psi.grid
    method = default_method(grid) if method is None else method
    masses = axis_masses(mass, grid.dimension)
    density = psi.density()
    peak = float(density.max())
    if peak == 0.0:
        raise DegeneracyError("velocity field of a zero wave function")
    threshold = node_threshold * peak
    mask = density < threshold
    if np.all(mask):
        raise DegeneracyError("every site is a node")
    safe = np.where(mask, 1.0, density)
    components = []
    for axis in range(grid.dimension):
        current = np.imag(np.conj(psi.values) * derivative(psi, axis, method).values)
        components.append(np.where(mask, 0.0, hbar / masses[axis] * current / safe))
    return VelocityField(grid, tuple(components), density, mask, threshold)


def _as_velocity_field(source, hbar, mass, method, node_threshold):
    if isinstance(source, VelocityField):
        return source
    return velocity_field(source, hbar, mass, method, node_threshold)


def velocity_at(source, point, hbar=1.0, mass=1.0, policy=SHRINK, method=None,
                node_threshold=NODE_THRESHOLD, time=None):
    """Velocity at one point from a wave function or a precomputed VelocityField."""
    if policy not in POLICIES:
        raise ConfigurationError(f"unknown node policy '{policy}' (expected one of {POLICIES})")
    vfield = _as_velocity_field(source, hbar, mass, method, node_threshold)
    point = np.asarray(point, dtype=float).reshape(1, vfield.grid.dimension)
    if not vfield.grid.contains(point):
        raise ConfigurationError(f"point {point[0].tolist()} lies outside the box")
    velocity, density = vfield.evaluate(point)
    if density[0] < vfield.threshold:
        if policy == SHRINK:
            raise NodeError("particle reached a node of the wave function", time, point[0].tolist())
        return np.zeros(vfield.grid.dimension)
    return velocity[0]


def velocity_configuration(psi, points, hbar=1.0, masses=1.0, policy=SHRINK, method=None):
    """Per-particle velocities at one configuration point.

    `psi` is either a configuration-grid field (one axis per particle
    coordinate) or a sequence of single-particle fields for a product state.
    """
    points = np.asarray(points, dtype=float)
    if isinstance(psi, ComplexLatticeField):
        velocity = velocity_at(psi, points.ravel(), hbar, masses, policy, method)
        return velocity.reshape(-1, 1)
    factors = list(psi)
    points = points.reshape(len(factors), -1)
    masses = np.broadcast_to(np.asarray(masses, dtype=float), (len(factors),))
    return np.array([
        velocity_at(f, x, hbar, m, policy, method) for f, x, m in zip(factors, points, masses)
    ])


@dataclass(frozen=True)
class NodeEvent:
    particle: int
    time: float
    position: tuple
    density: float

    def to_dict(self):
        return {"particle": self.particle, "time": self.time,
                "position": list(self.position), "density": self.density}


@dataclass
class TrajectoryResult:
    times: np.ndarray
    paths: np.ndarray
    speeds: np.ndarray
    node_events: list = field(default_factory=list)
    policy: str = SHRINK

    @property
    def final_positions(self):
        return self.paths[-1]

    @property
    def halted(self):
        mask = np.zeros(self.paths.shape[1], dtype=bool)
        for event in self.node_events:
            mask[event.particle] = True
        return mask

    @property
    def halted_fraction(self):
        return float(self.halted.mean())

    def rows(self):
        """(t, particle, X..., speed, node_event) rows in time-major order."""
        events = {(e.particle, e.time) for e in self.node_events}
        for step, t in enumerate(self.times):
            for particle in range(self.paths.shape[1]):
                yield (float(t), particle, *self.paths[step, particle].tolist(),
                       float(self.speeds[step, particle]), int((particle, float(t)) in events))


class _VelocityCache:
    """Velocity fields of the interpolated frames, keyed by time."""

    def __init__(self, frames, hbar, mass, method, node_threshold, size=4):
        self.frames = frames
        self.args = (hbar, mass, method, node_threshold)
        self.size = size
        self._fields = {}

    def __call__(self, t):
        key = round(float(t), 12)
        if key not in self._fields:
            if len(self._fields) >= self.size:
                self._fields.pop(next(iter(self._fields)))
            self._fields[key] = velocity_field(self.frames.at(t), *self.args)
        return self._fields[key]


def _wrap_outside(grid, points):
    half = 0.5 * grid.length
    outside = np.any((points < -half) | (points >= half), axis=-1)
    if np.any(outside):
        points = points.copy()
        points[outside] = grid.wrap(points[outside])
    return points


def _rk4(velocities, x, t, dt):
    k1 = velocities(t)(x)
    k2 = velocities(t + 0.5 * dt)(x + 0.5 * dt * k1)
    k3 = velocities(t + 0.5 * dt)(x + 0.5 * dt * k2)
    k4 = velocities(t + dt)(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_trajectory(frames, initial_points, dt, t_final=None, hbar=1.0, mass=1.0,
                         policy=SHRINK, method=None, node_threshold=NODE_THRESHOLD):
    """RK4 integration of dX/dt = v(X, t) for every initial point at once."""
    if policy not in POLICIES:
        raise ConfigurationError(f"unknown node policy '{policy}' (expected one of {POLICIES})")
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    grid = frames.grid
    x = np.array(initial_points, dtype=float).reshape(-1, grid.dimension)
    if not grid.contains(x):
        raise ConfigurationError("initial points must lie inside the box")
    t_final = frames.end if t_final is None else float(t_final)
    steps = int(round((t_final - frames.start) / dt))
    cache = _VelocityCache(frames, hbar, mass, method, node_threshold)

    def stage_velocity(t):
        vfield = cache(t)

        def evaluate(points):
            v, rho = vfield.evaluate(points)
            if policy == FREEZE:
                v[rho < vfield.threshold] = 0.0
            return v

        return evaluate

    n = x.shape[0]
    times = frames.start + dt * np.arange(steps + 1)
    paths = np.empty((steps + 1, n, grid.dimension))
    speeds = np.zeros((steps + 1, n))
    active = np.ones(n, dtype=bool)
    events = []
    paths[0] = x
    for step in range(steps + 1):
        t = times[step]
        vfield = cache(t)
        v, rho = vfield.evaluate(x)
        speeds[step] = np.linalg.norm(v, axis=-1)
        if policy == SHRINK:
            for i in np.flatnonzero(active & (rho < vfield.threshold)):
                events.append(NodeEvent(int(i), float(t), tuple(x[i].tolist()), float(rho[i])))
                active[i] = False
                logger.warning("particle %d halted at a node, t=%.6g x=%s", i, t, x[i].tolist())
            speeds[step, ~active] = 0.0
        if step == steps:
            break
        moving = np.flatnonzero(active)
        if moving.size:
            new = _rk4(stage_velocity, x[moving], t, dt)
            if policy == SHRINK:
                near = rho[moving] < SHRINK_WINDOW * vfield.threshold
                if np.any(near):
                    sub = x[moving[near]]
                    h = dt / SHRINK_FACTOR
                    for j in range(SHRINK_FACTOR):
                        sub = _rk4(stage_velocity, sub, t + j * h, h)
                    new[near] = sub
            x = x.copy()
            x[moving] = _wrap_outside(grid, new)
        paths[step + 1] = x
    return TrajectoryResult(times, paths, speeds, events, policy)
