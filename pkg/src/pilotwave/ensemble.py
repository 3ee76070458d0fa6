"""
Equivariance checks: sample |psi(0)|^2, transport the sample with the guidance
flow, and compare the empirical distribution against |psi(T)|^2.
"""

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigurationError, InvalidTestError, NormalizationError
from .guidance import SHRINK, integrate_trajectory

logger = logging.getLogger(__name__)

KS = "ks"
HISTOGRAM = "histogram"
METRICS = (KS, HISTOGRAM)

KS_COEFFICIENT_99 = 1.63
MAX_HALTED_FRACTION = 0.01
MAX_BIN_DEVIATION = 5.0
MIN_EXPECTED_COUNT = 5.0
NORM_TOLERANCE = 1.0e-8


@dataclass(frozen=True)
class EnsembleSpec:
    samples: int = 10000
    seed: int = 0
    metric: str = KS
    bins: int = 40

    def __post_init__(self):
        if self.samples < 100:
            raise ConfigurationError(f"ensemble needs at least 100 samples, got {self.samples}")
        if self.metric not in METRICS:
            raise ConfigurationError(f"unknown metric '{self.metric}' (expected one of {METRICS})")
        if self.bins < 2:
            raise ConfigurationError(f"need at least 2 histogram bins, got {self.bins}")

    def to_dict(self):
        return {"samples": self.samples, "seed": self.seed, "metric": self.metric, "bins": self.bins}


def _check_normalized(psi):
    norm = psi.norm()
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise NormalizationError(f"sampling needs a normalized wave function, ||psi|| = {norm:.12g}")


def _cell_start(grid):
    return grid.axis()[0] - 0.5 * grid.spacing


def _sample_cells(rng, weights, count):
    cdf = np.cumsum(weights)
    u = rng.random(count) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(weights) - 1)


def sample_density(psi, samples, seed=0):
    """Inverse-CDF sampling of the piecewise-constant density |psi|^2 dx^d (cells centred on sites).

    Two-axis grids draw the first coordinate from the marginal and the second
    from the conditional row.
    """
    _check_normalized(psi)
    grid = psi.grid
    rng = np.random.default_rng(seed)
    density = psi.density() * grid.cell_volume
    axis = grid.axis()
    dx = grid.spacing
    if grid.dimension == 1:
        cells = _sample_cells(rng, density, samples)
        points = axis[cells] - 0.5 * dx + rng.random(samples) * dx
        points = points.reshape(-1, 1)
    else:
        rows = _sample_cells(rng, density.sum(axis=1), samples)
        row_cdf = np.cumsum(density[rows], axis=1)
        u = rng.random(samples) * row_cdf[:, -1]
        cols = np.minimum((row_cdf < u[:, None]).sum(axis=1), grid.points - 1)
        jitter = rng.random((samples, 2)) * dx
        points = np.stack([axis[rows], axis[cols]], axis=-1) - 0.5 * dx + jitter
    if grid.periodic:
        half = 0.5 * grid.length
        outside = np.any(points < -half, axis=-1)
        points[outside] = grid.wrap(points[outside])
    else:
        points = np.clip(points, -0.5 * grid.length, 0.5 * grid.length)
    return points


def marginal_cdf(psi, axis=0):
    """Cell edges and the piecewise-linear CDF of the marginal density along one axis."""
    grid = psi.grid
    density = psi.density() * grid.cell_volume
    if grid.dimension == 2:
        density = density.sum(axis=1 - axis)
    edges = _cell_start(grid) + grid.spacing * np.arange(grid.points + 1)
    cdf = np.concatenate([[0.0], np.cumsum(density)])
    return edges, cdf / cdf[-1]


def _canonical(grid, values):
    """Positions mapped into the cell interval [x_0 - dx/2, x_0 - dx/2 + L)."""
    start = _cell_start(grid)
    if grid.periodic:
        return start + np.mod(values - start, grid.length)
    return values


def ks_statistic(points, psi, axis=0):
    edges, cdf = marginal_cdf(psi, axis)
    values = _canonical(psi.grid, np.asarray(points)[:, axis])
    result = stats.kstest(values, lambda x: np.interp(x, edges, cdf))
    return float(result.statistic)


def ks_threshold(samples):
    return KS_COEFFICIENT_99 / np.sqrt(samples)


def discretization_budget(psi):
    """2 dx max_i |rho_{i+1} - rho_i| on the marginal density."""
    grid = psi.grid
    density = psi.density()
    if grid.dimension == 2:
        density = density.sum(axis=1) * grid.spacing
    jumps = np.abs(np.diff(density, append=density[:1] if grid.periodic else density[-1:]))
    return float(2.0 * grid.spacing * jumps.max())


def histogram_check(points, psi, bins, axis=0):
    """Counts per bin against the expected counts from the piecewise-linear marginal CDF."""
    edges, cdf = marginal_cdf(psi, axis)
    bin_edges = np.linspace(edges[0], edges[-1], bins + 1)
    values = _canonical(psi.grid, np.asarray(points)[:, axis])
    counts, _ = np.histogram(values, bins=bin_edges)
    expected = np.diff(np.interp(bin_edges, edges, cdf)) * len(values)
    significant = expected >= MIN_EXPECTED_COUNT
    deviations = np.zeros(bins)
    deviations[significant] = np.abs(counts[significant] - expected[significant]) / np.sqrt(expected[significant])
    l1 = float(np.abs(counts / len(values) - expected / len(values)).sum())
    return {
        "bin_edges": bin_edges.tolist(),
        "counts": counts.tolist(),
        "expected": expected.tolist(),
        "max_deviation": float(deviations.max()),
        "l1_distance": l1,
        "passed": bool(deviations.max() <= MAX_BIN_DEVIATION),
    }


@dataclass
class EquivarianceReport:
    spec: EnsembleSpec
    final_time: float
    ks_initial: float
    ks_final: float
    threshold: float
    budget: float
    passed: bool
    slices: list = field(default_factory=list)
    histogram: dict = field(default_factory=dict)
    halted_fraction: float = 0.0
    node_events: list = field(default_factory=list)

    def to_dict(self):
        return {
            "ensemble": self.spec.to_dict(),
            "final_time": self.final_time,
            "ks_initial": self.ks_initial,
            "ks_final": self.ks_final,
            "ks_threshold": self.threshold,
            "discretization_budget": self.budget,
            "passed": self.passed,
            "slices": self.slices,
            "histogram": self.histogram,
            "halted_fraction": self.halted_fraction,
            "node_events": [event.to_dict() for event in self.node_events],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def equivariance_test(frames, spec=None, dt=None, hbar=1.0, mass=1.0, policy=SHRINK, checkpoints=4):
    """Transport a |psi(0)|^2 sample through `frames` and KS-test it at each checkpoint."""
    spec = spec or EnsembleSpec()
    initial = frames.frames[0]
    if dt is None:
        dt = float(np.min(np.diff(frames.times))) if len(frames) > 1 else 1.0e-3
    points = sample_density(initial, spec.samples, spec.seed)
    ks_initial = ks_statistic(points, initial)
    result = integrate_trajectory(frames, points, dt, hbar=hbar, mass=mass, policy=policy)
    if result.halted_fraction > MAX_HALTED_FRACTION:
        raise InvalidTestError(
            f"{100 * result.halted_fraction:.2f}% of ensemble members halted at nodes "
            f"(limit {100 * MAX_HALTED_FRACTION:.0f}%)"
        )

    threshold = ks_threshold(spec.samples)
    slices = []
    steps = len(result.times) - 1
    marks = sorted({int(round(steps * j / checkpoints)) for j in range(checkpoints + 1)})
    for step in marks:
        t = float(result.times[step])
        psi_t = frames.at(t)
        ks = ks_statistic(result.paths[step], psi_t)
        budget = discretization_budget(psi_t)
        slices.append({"time": t, "ks": ks, "threshold": threshold + budget,
                       "passed": bool(ks < threshold + budget)})

    final_psi = frames.at(float(result.times[-1]))
    final_points = result.final_positions
    budget = discretization_budget(final_psi)
    ks_final = ks_statistic(final_points, final_psi)
    histogram = histogram_check(final_points, final_psi, spec.bins)
    if spec.metric == KS:
        passed = ks_final < threshold + budget
    else:
        passed = histogram["passed"]
    logger.info("equivariance: KS(0)=%.4g KS(T)=%.4g threshold=%.4g passed=%s",
                ks_initial, ks_final, threshold + budget, passed)
    return EquivarianceReport(
        spec=spec,
        final_time=float(result.times[-1]),
        ks_initial=ks_initial,
        ks_final=ks_final,
        threshold=threshold,
        budget=budget,
        passed=bool(passed),
        slices=slices,
        histogram=histogram,
        halted_fraction=result.halted_fraction,
        node_events=list(result.node_events),
    )
