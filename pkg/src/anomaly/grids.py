"""Uniform spatial and temporal grids."""

from dataclasses import dataclass

import numpy as np

BOUNDARY_KINDS = ("FreeSpace", "Reflecting", "Absorbing", "Periodic")


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``x_i = x0 + i*dx``, ``i = 0..n-1``, with a boundary tag."""

    x0: float
    dx: float
    n: int
    bc: str = "FreeSpace"

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"Grid1D needs n >= 3, got {self.n}")
        if not self.dx > 0:
            raise ValueError(f"Grid1D needs dx > 0, got {self.dx}")
        if self.bc not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary kind {self.bc!r}; expected one of {BOUNDARY_KINDS}")

    @classmethod
    def centered(cls, half_width, dx, bc="FreeSpace"):
        """Symmetric grid on [-half_width, half_width] (node at 0 when possible)."""
        m = int(round(half_width / dx))
        return cls(-m * dx, dx, 2 * m + 1, bc)

    @classmethod
    def periodic(cls, length, n, x0=None):
        """Periodic grid of n nodes covering [x0, x0 + length)."""
        if x0 is None:
            x0 = -length / 2
        return cls(x0, length / n, n, "Periodic")

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def length(self):
        return self.dx * self.n

    @property
    def edges(self):
        """Bin edges when the nodes are read as bin centres."""
        return self.x0 - 0.5 * self.dx + self.dx * np.arange(self.n + 1)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t_k = k*dt`` for ``k = 0..n_steps``."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"TimeGrid needs dt > 0, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"TimeGrid needs n_steps >= 1, got {self.n_steps}")

    @classmethod
    def until(cls, horizon, dt):
        n = int(round(horizon / dt))
        if n < 1 or abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
            raise ValueError(f"horizon {horizon} is not a multiple of dt {dt}")
        return cls(dt, n)

    @property
    def t(self):
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def horizon(self):
        return self.dt * self.n_steps

    def index(self, t):
        """Index of the grid node at time t (must lie on the grid)."""
        k = int(round(t / self.dt))
        if k < 0 or k > self.n_steps or abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a node of the time grid")
        return k
