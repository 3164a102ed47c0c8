"""Space-time multigrid with spatial, space-time and node-count coarsening.

Transfer operators are tensor products of one-dimensional factors: full
weighting / linear interpolation over the spatial vertices, the same stencil
over the time-element index, and Lagrange interpolation between node sets of
different size.  Any factor degenerates to the identity, which yields the
semi-coarsening variants.  Coarse matrices are Galerkin products; smoothing
is ILU(0)-preconditioned GMRES (block-Jacobi ILU(0) when partitioned) and the
coarsest level is solved by dense LU.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .collocation import radau_nodes, LagrangeBasis
from .errors import ConfigurationError, SolverError
from .linalg import (
    BlockJacobiPrecond,
    DenseLU,
    Ilu0,
    as_csr,
    gmres,
    kron,
)
from .report import SolveReport
from .spacetime import SpaceTimeSystem

STRATEGIES = ("SMG", "STMG", "SMMG")


# ---------------------------------------------------------------- transfers
def spatial_restriction(n_fine: int) -> sp.csr_matrix:
    """Full weighting [1, 2, 1]/4 over vertex dofs; boundary rows renormalized.

    Maps n_fine = Nx+1 vertex values to Nx/2+1 coarse values; every row sums
    to one, so constants are preserved.
    """
    if (n_fine - 1) % 2 != 0 or n_fine < 3:
        raise ConfigurationError(f"cannot bisect {n_fine} vertex dofs")
    n_coarse = (n_fine - 1) // 2 + 1
    R = sp.lil_matrix((n_coarse, n_fine))
    for i in range(n_coarse):
        f = 2 * i
        if f - 1 >= 0:
            R[i, f - 1] = 0.25
        R[i, f] = 0.5
        if f + 1 < n_fine:
            R[i, f + 1] = 0.25
    R = R.tocsr()
    scale = np.asarray(R.sum(axis=1)).ravel()
    return as_csr(sp.diags(1.0 / scale) @ R)


def spatial_prolongation(n_fine: int) -> sp.csr_matrix:
    """Linear interpolation from Nx/2+1 coarse vertices to Nx+1 fine ones."""
    if (n_fine - 1) % 2 != 0 or n_fine < 3:
        raise ConfigurationError(f"cannot bisect {n_fine} vertex dofs")
    n_coarse = (n_fine - 1) // 2 + 1
    P = sp.lil_matrix((n_fine, n_coarse))
    for f in range(n_fine):
        c, rem = divmod(f, 2)
        if rem == 0:
            P[f, c] = 1.0
        else:
            P[f, c] = 0.5
            P[f, c + 1] = 0.5
    return as_csr(P)


def time_restriction(nt_fine: int) -> sp.csr_matrix:
    """[1, 2, 1]/4 over the time-element index; edge rows truncated/renormalized."""
    if nt_fine % 2 != 0 or nt_fine < 2:
        raise ConfigurationError(f"cannot bisect {nt_fine} time elements")
    nt_coarse = nt_fine // 2
    R = sp.lil_matrix((nt_coarse, nt_fine))
    for i in range(nt_coarse):
        f = 2 * i
        if f - 1 >= 0:
            R[i, f - 1] = 0.25
        R[i, f] = 0.5
        if f + 1 < nt_fine:
            R[i, f + 1] = 0.25
    R = R.tocsr()
    scale = np.asarray(R.sum(axis=1)).ravel()
    return as_csr(sp.diags(1.0 / scale) @ R)


def time_prolongation(nt_fine: int) -> sp.csr_matrix:
    """Linear interpolation over the element index; constant past the last node."""
    if nt_fine % 2 != 0 or nt_fine < 2:
        raise ConfigurationError(f"cannot bisect {nt_fine} time elements")
    nt_coarse = nt_fine // 2
    P = sp.lil_matrix((nt_fine, nt_coarse))
    for f in range(nt_fine):
        c, rem = divmod(f, 2)
        if rem == 0:
            P[f, c] = 1.0
        elif c + 1 < nt_coarse:
            P[f, c] = 0.5
            P[f, c + 1] = 0.5
        else:
            P[f, c] = 1.0
    return as_csr(P)


def node_prolongation(m_coarse: int, m_fine: int) -> sp.csr_matrix:
    """Lagrange interpolation from m_coarse to m_fine Radau nodes."""
    if m_coarse > m_fine:
        raise ConfigurationError("node prolongation must not reduce the node count")
    basis = LagrangeBasis(radau_nodes(m_coarse))
    fine = radau_nodes(m_fine)
    P = np.array([basis.eval(t) for t in fine])
    return as_csr(sp.csr_matrix(P))


def node_restriction(m_coarse: int, m_fine: int) -> sp.csr_matrix:
    """Row-normalized transpose of the node prolongation (preserves constants)."""
    P = node_prolongation(m_coarse, m_fine)
    R = sp.csr_matrix(P.T)
    scale = np.asarray(R.sum(axis=1)).ravel()
    return as_csr(sp.diags(1.0 / scale) @ R)


@dataclass(frozen=True)
class LevelDims:
    nt: int
    m: int
    nx_dofs: int

    @property
    def size(self) -> int:
        return self.nt * self.m * self.nx_dofs


@dataclass(frozen=True)
class TransferSet:
    """Composite restriction/prolongation between two adjacent levels."""

    restriction: sp.csr_matrix
    prolongation: sp.csr_matrix


def _level_dims(strategy: str, L: int, nt: int, m: int, nx: int) -> list[LevelDims]:
    dims = []
    for l in range(1, L + 1):
        if strategy == "SMG":
            dims.append(LevelDims(nt, m, nx // 2 ** (l - 1) + 1))
        elif strategy == "STMG":
            dims.append(LevelDims(nt // 2 ** (l - 1), m, nx // 2 ** (l - 1) + 1))
        else:  # SMMG
            dims.append(LevelDims(nt, max(m - l + 1, 1), nx // 2 ** (l - 1) + 1))
    return dims


def _check_divisibility(strategy: str, L: int, nt: int, nx: int) -> None:
    for l in range(1, L):
        if nx % 2**l != 0:
            raise ConfigurationError(
                f"{strategy}: Nx={nx} not divisible by 2^{l} needed for level {l + 1}"
            )
        if strategy == "STMG" and nt % 2**l != 0:
            raise ConfigurationError(
                f"STMG: Nt={nt} not divisible by 2^{l} needed for level {l + 1}"
            )


def _build_transfers(strategy: str, dims: list[LevelDims]) -> list[TransferSet]:
    transfers = []
    for fine, coarse in zip(dims[:-1], dims[1:]):
        if fine.nt != coarse.nt:
            Rt, Pt = time_restriction(fine.nt), time_prolongation(fine.nt)
        else:
            Rt = Pt = sp.eye(fine.nt, format="csr")
        if fine.m != coarse.m:
            Rm = node_restriction(coarse.m, fine.m)
            Pm = node_prolongation(coarse.m, fine.m)
        else:
            Rm = Pm = sp.eye(fine.m, format="csr")
        Rs, Ps = spatial_restriction(fine.nx_dofs), spatial_prolongation(fine.nx_dofs)
        transfers.append(
            TransferSet(
                restriction=kron(Rt, kron(Rm, Rs)),
                prolongation=kron(Pt, kron(Pm, Ps)),
            )
        )
    return transfers


class MultigridHierarchy:
    """Per-level Galerkin matrices, smoothers and the coarsest dense LU."""

    def __init__(
        self,
        fine_matrix: sp.csr_matrix,
        strategy: str,
        dims: list[LevelDims],
        transfers: list[TransferSet],
        nu: int,
        partitions: int,
        restart: int = 30,
        smooth_solves: int = 1,
    ):
        self.strategy = strategy
        self.dims = dims
        self.transfers = transfers
        self.nu = nu
        self.partitions = partitions
        self.restart = restart
        self.smooth_solves = smooth_solves
        self.matrices: list[sp.csr_matrix] = []
        self.smoothers: list = []
        self.coarse_lu: DenseLU | None = None
        self.set_fine_matrix(fine_matrix)

    @property
    def num_levels(self) -> int:
        return len(self.dims)

    def set_fine_matrix(self, A: sp.csr_matrix) -> None:
        """Install a new fine matrix; rebuild Galerkin products and factors."""
        A = as_csr(A)
        if A.shape[0] != self.dims[0].size:
            raise ConfigurationError(
                f"matrix size {A.shape[0]} does not match level 1 size {self.dims[0].size}"
            )
        self.matrices = [A]
        for t in self.transfers:
            self.matrices.append(as_csr(t.restriction @ self.matrices[-1] @ t.prolongation))
        self.smoothers = []
        for mat in self.matrices[:-1]:
            blocks = min(self.partitions, mat.shape[0])
            if blocks > 1:
                self.smoothers.append(BlockJacobiPrecond(mat, blocks))
            else:
                self.smoothers.append(Ilu0(mat))
        self.coarse_lu = DenseLU(self.matrices[-1])

    def _smooth(self, level: int, b: np.ndarray, x: np.ndarray) -> np.ndarray:
        for _ in range(self.smooth_solves):
            r = b - self.matrices[level] @ x
            dx, _ = gmres(
                self.matrices[level],
                r,
                precond=self.smoothers[level],
                tol_rel=1e-13,
                tol_abs=0.0,
                restart=min(self.nu, self.restart),
                max_it=self.nu,
            )
            x = x + dx
        return x

    def _cycle(self, level: int, b: np.ndarray, x: np.ndarray) -> np.ndarray:
        if level == self.num_levels - 1:
            return self.coarse_lu.solve(b)
        x = self._smooth(level, b, x)
        r = b - self.matrices[level] @ x
        rc = self.transfers[level].restriction @ r
        xc = self._cycle(level + 1, rc, np.zeros_like(rc))
        x = x + self.transfers[level].prolongation @ xc
        return self._smooth(level, b, x)

    def vcycle(self, b: np.ndarray, x: np.ndarray) -> np.ndarray:
        """One V(nu, nu) cycle for A_1 x = b starting from x."""
        out = self._cycle(0, b, x.copy())
        if not np.all(np.isfinite(out)):
            raise SolverError("V-cycle produced non-finite values")
        return out

    def solve(
        self,
        b: np.ndarray,
        x0: np.ndarray | None = None,
        tol_rel: float = 1e-9,
        tol_abs: float = 1e-9,
        max_cycles: int = 1000,
    ) -> tuple[np.ndarray, SolveReport]:
        """V-cycle until the residual drops below max(tol_abs, tol_rel*initial)."""
        t0 = time.perf_counter()
        x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float).copy()
        r = b - self.matrices[0] @ x
        res = float(np.linalg.norm(r))
        report = SolveReport(residual_history=[res])
        threshold = max(tol_abs, tol_rel * res)
        min_res = res
        while res > threshold:
            if report.iterations >= max_cycles:
                report.diverged = True
                break
            x = self.vcycle(b, x)
            res = float(np.linalg.norm(b - self.matrices[0] @ x))
            report.iterations += 1
            report.residual_history.append(res)
            if not np.isfinite(res) or res > 10.0 * min_res:
                report.diverged = True
                break
            min_res = min(min_res, res)
        report.converged = res <= threshold
        report.wall_time = time.perf_counter() - t0
        return x, report


def build_hierarchy(
    system: SpaceTimeSystem,
    strategy: str,
    L: int,
    nu: int,
    partitions: int = 1,
    restart: int = 30,
    smooth_solves: int = 1,
    matrix: sp.csr_matrix | None = None,
) -> MultigridHierarchy:
    """Build the level hierarchy for the system's linear part (or ``matrix``)."""
    strategy = strategy.upper()
    if strategy not in STRATEGIES:
        raise ConfigurationError(f"unknown strategy {strategy!r}; expected {STRATEGIES}")
    if L < 1:
        raise ConfigurationError("need at least one level")
    if nu < 1:
        raise ConfigurationError("need at least one smoothing iteration")
    nt, m, nx = system.grid.Nt, system.tableau.M, system.space.mesh.Nx
    _check_divisibility(strategy, L, nt, nx)
    dims = _level_dims(strategy, L, nt, m, nx)
    if dims[-1].nx_dofs < 2:
        raise ConfigurationError("coarsest spatial level has fewer than 2 dofs")
    transfers = _build_transfers(strategy, dims)
    A = matrix if matrix is not None else system.global_matrix()
    return MultigridHierarchy(
        A, strategy, dims, transfers, nu=nu, partitions=partitions,
        restart=restart, smooth_solves=smooth_solves,
    )


def mg_linear_solver(
    hierarchy: MultigridHierarchy,
    tol_rel=1e-9,
    tol_abs=1e-9,
    max_cycles=1000,
    fixed_cycles: int | None = None,
):
    """Adapter: a Newton inner solver that refreshes the hierarchy per Jacobian.

    By default each inner solve iterates to the tolerance; ``fixed_cycles``
    switches to a constant number of V-cycles per Newton step instead.
    """

    def solver(J, rhs):
        hierarchy.set_fine_matrix(J)
        if fixed_cycles is not None:
            x = np.zeros_like(rhs)
            for _ in range(fixed_cycles):
                x = hierarchy.vcycle(rhs, x)
            res = float(np.linalg.norm(rhs - hierarchy.matrices[0] @ x))
            rep = SolveReport(iterations=fixed_cycles, converged=True,
                              residual_history=[res])
            return x, rep
        return hierarchy.solve(rhs, tol_rel=tol_rel, tol_abs=tol_abs, max_cycles=max_cycles)

    return solver
