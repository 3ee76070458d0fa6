import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pilotwave.constraints import FieldPhaseSpaceState  # noqa: E402
from pilotwave.grid import ComplexLatticeField, GridSpec  # noqa: E402


def free_gaussian(t, x, x0=0.0, sigma=1.0, hbar=1.0, mass=1.0):
    """Closed-form free packet; |psi|^2 has width sigma * sqrt(1 + tau^2), tau = hbar t / (2 m sigma^2)."""
    tau = hbar * t / (2.0 * mass * sigma ** 2)
    spread = sigma ** 2 * (1.0 + 1j * tau)
    return ((2.0 * np.pi * sigma ** 2) ** -0.25 / np.sqrt(1.0 + 1j * tau)
            * np.exp(-((x - x0) ** 2) / (4.0 * spread)))


@pytest.fixture
def grid64():
    return GridSpec(dimension=1, points=64, length=20.0)


@pytest.fixture
def small_grid():
    return GridSpec(dimension=1, points=16, length=8.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(grid, rng):
    return ComplexLatticeField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


@pytest.fixture
def random_state(small_grid, rng):
    """An arbitrary (off-constraint) point of the field phase space."""
    return FieldPhaseSpaceState(*(random_field(small_grid, rng) for _ in range(4)))


@pytest.fixture
def scenario_file(tmp_path):
    def write(text, name="scenario.yaml"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write
