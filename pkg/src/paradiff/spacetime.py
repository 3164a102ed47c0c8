"""Monolithic space-time system for the 1D reaction-diffusion model.

The unknown vector stacks time elements, then temporal nodes, then spatial
dofs: entry ((n*M + m)*(Nx+1) + j) holds the coefficient of node m of time
element n at vertex j.  The linear part is block lower bidiagonal with
A = Kq x Mh + dt*(Mq x Kh) on the diagonal and B = -(Jq x Mh) below it; the
cubic reaction enters through dt*(Mq x Mh) applied to r(u) = u^3 - u.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .collocation import CollocationTableau
from .errors import ConfigurationError, SolverError
from .fem1d import SpaceOperators
from .linalg import kron
from .report import SolveReport


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``Nt`` time elements on [0, T]."""

    Nt: int
    T: float

    def __post_init__(self):
        if self.Nt < 1:
            raise ConfigurationError(f"need at least 1 time element, got {self.Nt}")
        if self.T <= 0:
            raise ConfigurationError("final time must be positive")

    @property
    def dt(self) -> float:
        return self.T / self.Nt


def reaction(u: np.ndarray) -> np.ndarray:
    """Pointwise cubic reaction r(u) = u^3 - u (zeros at -1, 0, 1)."""
    return u**3 - u


def reaction_deriv(u: np.ndarray) -> np.ndarray:
    return 3.0 * u**2 - 1.0


class SpaceTimeSystem:
    """Assembled blocks and evaluation routines of the space-time problem."""

    def __init__(
        self,
        tableau: CollocationTableau,
        space: SpaceOperators,
        grid: TimeGrid,
        gamma: float,
        u0: np.ndarray,
    ):
        u0 = np.asarray(u0, dtype=np.float64)
        if u0.size != space.mesh.ndof:
            raise ConfigurationError(
                f"initial state has {u0.size} entries, mesh has {space.mesh.ndof} dofs"
            )
        if gamma < 0:
            raise ConfigurationError("reaction intensity must be nonnegative")
        self.tableau = tableau
        self.space = space
        self.grid = grid
        self.gamma = float(gamma)
        self.u0 = u0

        dt = grid.dt
        self.Aqh = kron(tableau.Kq, space.Mh) + dt * kron(tableau.Mq, space.Kh)
        self.Bqh = -kron(tableau.Jq, space.Mh)
        self.Mqh = dt * kron(tableau.Mq, space.Mh)
        self._global = None
        self._reaction_mass = None

    # ---- shapes ----
    @property
    def block_size(self) -> int:
        return self.tableau.M * self.space.mesh.ndof

    @property
    def size(self) -> int:
        return self.grid.Nt * self.block_size

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.grid.Nt, self.tableau.M, self.space.mesh.ndof)

    def zero_vector(self) -> np.ndarray:
        return np.zeros(self.size)

    def as_steps(self, u: np.ndarray) -> np.ndarray:
        """View of the flat vector as (Nt, M, Nx+1)."""
        return u.reshape(self.shape)

    def padded_initial_vector(self) -> np.ndarray:
        """[0, ..., 0, u0] with (Nx+1)(M-1) leading zeros (one block row)."""
        out = np.zeros(self.block_size)
        out[-self.space.mesh.ndof:] = self.u0
        return out

    def rhs(self) -> np.ndarray:
        """Right-hand side: -B applied to the padded initial vector, first row only."""
        out = self.zero_vector()
        out[: self.block_size] = -self.Bqh @ self.padded_initial_vector()
        return out

    # ---- operators ----
    def global_matrix(self) -> sp.csr_matrix:
        """Linear part assembled as one sparse matrix (cached)."""
        if self._global is None:
            Nt = self.grid.Nt
            eye = sp.eye(Nt, format="csr")
            sub = sp.diags([np.ones(Nt - 1)], [-1], format="csr") if Nt > 1 else sp.csr_matrix((Nt, Nt))
            self._global = kron(eye, self.Aqh) + kron(sub, self.Bqh)
        return self._global

    def _reaction_mass_matrix(self) -> sp.csr_matrix:
        if self._reaction_mass is None:
            self._reaction_mass = kron(sp.eye(self.grid.Nt, format="csr"), self.Mqh)
        return self._reaction_mass

    def residual(self, u: np.ndarray) -> np.ndarray:
        """F(u) = L u + gamma*(I x Mqh) r(u) - rhs, evaluated blockwise."""
        if u.size != self.size:
            raise ConfigurationError("vector size does not match the space-time grid")
        U = u.reshape(self.grid.Nt, self.block_size)
        res = (self.Aqh @ U.T).T
        if self.gamma != 0.0:
            res += self.gamma * (self.Mqh @ reaction(U).T).T
        if self.grid.Nt > 1:
            res[1:] += (self.Bqh @ U[:-1].T).T
        res[0] -= -self.Bqh @ self.padded_initial_vector()
        return res.ravel()

    def jacobian(self, u: np.ndarray) -> sp.csr_matrix:
        """J(u) = L + gamma*(I x Mqh) diag(3u^2 - 1)."""
        J = self.global_matrix()
        if self.gamma != 0.0:
            J = J + self.gamma * (
                self._reaction_mass_matrix() @ sp.diags(reaction_deriv(u))
            )
        return sp.csr_matrix(J)

    # ---- direct solvers ----
    def _element_solve(self, rhs_block, u_guess, tol=1e-13, lu=None):
        """Solve A u + gamma*Mqh r(u) = rhs on one time element."""
        if self.gamma == 0.0:
            lu = lu if lu is not None else splu(self.Aqh.tocsc())
            return lu.solve(rhs_block)
        u = u_guess.copy()
        threshold = max(tol, tol * np.linalg.norm(rhs_block))
        for _ in range(50):
            F = self.Aqh @ u + self.gamma * (self.Mqh @ reaction(u)) - rhs_block
            if np.linalg.norm(F) <= threshold:
                return u
            J = self.Aqh + self.gamma * (self.Mqh @ sp.diags(reaction_deriv(u)))
            u -= splu(sp.csc_matrix(J)).solve(F)
        raise SolverError("element Newton iteration did not converge")

    def solve_sequential(self) -> np.ndarray:
        """Time-march element by element with a sparse direct solve per element."""
        U = self.as_steps(self.zero_vector())
        nxd = self.space.mesh.ndof
        lu = splu(self.Aqh.tocsc()) if self.gamma == 0.0 else None
        ell0 = self.tableau.left_values
        u_in = self.u0
        guess = np.tile(self.u0, self.tableau.M)
        for n in range(self.grid.Nt):
            rhs_block = np.kron(ell0, self.space.Mh @ u_in)
            sol = self._element_solve(rhs_block, guess, lu=lu)
            U[n] = sol.reshape(self.tableau.M, nxd)
            u_in = U[n, -1]
            guess = sol
        return U.ravel()

    def solve_direct(self) -> np.ndarray:
        """One global sparse direct solve (Newton in the nonlinear case)."""
        if self.gamma == 0.0:
            return splu(self.global_matrix().tocsc()).solve(self.rhs())
        u = self.zero_vector()
        for _ in range(50):
            F = self.residual(u)
            if np.linalg.norm(F) <= 1e-12 * max(1.0, np.linalg.norm(self.rhs())):
                return u
            u -= splu(sp.csc_matrix(self.jacobian(u))).solve(F)
        raise SolverError("global Newton iteration did not converge")

    def final_state(self, u: np.ndarray) -> np.ndarray:
        """Spatial values at the last node of the last time element (t = T)."""
        return self.as_steps(u)[-1, -1].copy()


def assemble_system(
    tableau: CollocationTableau,
    space: SpaceOperators,
    grid: TimeGrid,
    gamma: float,
    u0: np.ndarray,
) -> SpaceTimeSystem:
    return SpaceTimeSystem(tableau, space, grid, gamma, u0)


def newton_solve(
    system: SpaceTimeSystem,
    linear_solver,
    u_init: np.ndarray | None = None,
    tol: float = 1e-9,
    max_newton: int = 50,
) -> tuple[np.ndarray, SolveReport]:
    """Newton iteration around an inner linear solver for J delta = -F.

    ``linear_solver(J, rhs)`` returns (delta, inner_report).  Full steps by
    default; on residual growth the step is halved (recorded) before giving
    up.  Terminates when ||F(u)|| <= max(tol, tol*||F(u_init)||).
    """
    report = SolveReport()
    t0 = time.perf_counter()
    u = system.zero_vector() if u_init is None else np.asarray(u_init, dtype=float).copy()
    res_norm = float(np.linalg.norm(system.residual(u)))
    threshold = max(tol, tol * res_norm)
    report.residual_history.append(res_norm)
    for _ in range(max_newton):
        if res_norm <= threshold:
            report.converged = True
            break
        J = system.jacobian(u)
        delta, inner = linear_solver(J, -system.residual(u))
        report.inner_iterations.append(inner.iterations)
        if inner.diverged:
            report.diverged = True
            break
        step = 1.0
        for _ in range(8):
            new_norm = float(np.linalg.norm(system.residual(u + step * delta)))
            if new_norm < res_norm or new_norm <= threshold:
                break
            step *= 0.5
            report.damped_steps += 1
        u = u + step * delta
        res_norm = new_norm
        report.newton_iterations += 1
        report.residual_history.append(res_norm)
    else:
        report.diverged = res_norm > threshold
    if res_norm <= threshold:
        report.converged = True
    report.iterations = report.newton_iterations
    report.wall_time = time.perf_counter() - t0
    return u, report
