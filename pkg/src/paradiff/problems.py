"""Benchmark problems, reference solutions and error norms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .fem1d import SpaceMesh, semidiscrete_rates
from .spacetime import SpaceTimeSystem


@dataclass(frozen=True)
class ProblemSpec:
    """Model setup: domain, horizon, reaction strength and initial state."""

    name: str
    X: float
    T: float
    gamma: float
    u0: Callable[[np.ndarray], np.ndarray]
    exact: Callable[[np.ndarray, float], np.ndarray] | None = None

    def __post_init__(self):
        if self.X <= 0 or self.T <= 0:
            raise ConfigurationError("domain length and final time must be positive")
        if self.gamma < 0:
            raise ConfigurationError("reaction intensity must be nonnegative")


_HEAT_MODES = ((1, 1.0), (3, 2.0), (4, 3.0))


def heat_problem() -> ProblemSpec:
    """Pure diffusion on [0, 1] x [0, 1] with a three-cosine initial state."""

    def u0(x):
        x = np.asarray(x, dtype=float)
        return sum(a * np.cos(k * np.pi * x) for k, a in _HEAT_MODES)

    def exact(x, t):
        x = np.asarray(x, dtype=float)
        return sum(
            a * np.cos(k * np.pi * x) * np.exp(-((k * np.pi) ** 2) * t)
            for k, a in _HEAT_MODES
        )

    return ProblemSpec(name="heat", X=1.0, T=1.0, gamma=0.0, u0=u0, exact=exact)


def heat_semidiscrete_exact(mesh: SpaceMesh) -> Callable[[np.ndarray, float], np.ndarray]:
    """Exact solution of the lumped-mass semidiscretization of the heat problem.

    The cosine modes are exact eigenvectors of the discrete operator, so each
    mode decays with its discrete rate; the result isolates the time error.
    """
    rates = {k: semidiscrete_rates(mesh, k) for k, _ in _HEAT_MODES}

    def exact(x, t):
        x = np.asarray(x, dtype=float)
        return sum(
            a * np.cos(k * np.pi * x) * np.exp(rates[k] * t) for k, a in _HEAT_MODES
        )

    return exact


def monodomain_problem() -> ProblemSpec:
    """Cubic reaction-diffusion on [0, 10] x [0, 2] with a centered stimulus.

    The Gaussian pulse (amplitude 2, width 0.1) triggers a traveling
    activation front; by t = T the state is stationary near u = 1.
    """

    def u0(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * np.exp(-(((x - 5.0) / 0.1) ** 2))

    return ProblemSpec(name="monodomain", X=10.0, T=2.0, gamma=5.0, u0=u0, exact=None)


def get_problem(name: str) -> ProblemSpec:
    if name == "heat":
        return heat_problem()
    if name == "monodomain":
        return monodomain_problem()
    raise ConfigurationError(f"unknown problem {name!r}; expected 'heat' or 'monodomain'")


def error_norms(
    u_num: np.ndarray,
    reference: Callable[[np.ndarray, float], np.ndarray],
    system: SpaceTimeSystem,
) -> tuple[float, np.ndarray]:
    """(max error at t = T, per-element end-node max errors) vs a reference."""
    mesh = system.space.mesh
    grid = system.grid
    xs = mesh.vertices
    steps = system.as_steps(u_num)
    per_step = np.empty(grid.Nt)
    for n in range(grid.Nt):
        t_end = (n + 1) * grid.dt
        per_step[n] = float(np.max(np.abs(steps[n, -1] - reference(xs, t_end))))
    return float(per_step[-1]), per_step


def spatial_mean(space, values: np.ndarray) -> float:
    """Lumped-mass-weighted spatial mean (conserved for pure diffusion)."""
    w = space.lumped_diagonal
    return float(np.dot(w, values) / np.sum(w))
