"""Time-indexed wave-function snapshots, the frame provider for trajectory integration."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GridMismatchError
from .grid import ComplexLatticeField


@dataclass(frozen=True, eq=False)
class FrameSeries:
    times: np.ndarray
    frames: tuple

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        frames = tuple(self.frames)
        if times.ndim != 1 or len(times) != len(frames) or len(frames) == 0:
            raise ConfigurationError("frame series needs one time per frame and at least one frame")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ConfigurationError("frame times must be strictly increasing")
        grid = frames[0].grid
        if any(frame.grid != grid for frame in frames):
            raise GridMismatchError("all frames must share one GridSpec")
        times.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "frames", frames)

    @classmethod
    def static(cls, psi, t_final):
        """A state that does not change between 0 and t_final."""
        return cls(np.array([0.0, float(t_final)]), (psi, psi))

    @classmethod
    def from_function(cls, grid, fn, times):
        """Frames sampled from a closed form fn(t, *coords)."""
        times = np.asarray(times, dtype=float)
        coords = grid.coordinates()
        return cls(times, tuple(ComplexLatticeField(grid, fn(t, *coords)) for t in times))

    @property
    def grid(self):
        return self.frames[0].grid

    @property
    def start(self):
        return float(self.times[0])

    @property
    def end(self):
        return float(self.times[-1])

    @property
    def final(self):
        return self.frames[-1]

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(zip(self.times, self.frames))

    def at(self, t):
        """psi(t), linear in t between the bracketing frames."""
        span = max(self.end - self.start, 1.0)
        if t < self.start - 1e-9 * span or t > self.end + 1e-9 * span:
            raise ConfigurationError(f"t={t} outside the recorded frames [{self.start}, {self.end}]")
        if len(self.frames) == 1:
            return self.frames[0]
        t = min(max(t, self.start), self.end)
        index = int(np.searchsorted(self.times, t, side="right")) - 1
        index = min(max(index, 0), len(self.times) - 2)
        t0, t1 = self.times[index], self.times[index + 1]
        weight = (t - t0) / (t1 - t0)
        if weight == 0.0:
            return self.frames[index]
        if weight == 1.0:
            return self.frames[index + 1]
        left, right = self.frames[index].values, self.frames[index + 1].values
        return ComplexLatticeField(self.grid, (1.0 - weight) * left + weight * right)
