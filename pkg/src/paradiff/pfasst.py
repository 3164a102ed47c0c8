"""SDC sweeps, multilevel FAS corrections and the time-parallel driver.

Each time step solves the collocation system U = U0 + dt*Q F(U) on the
semidiscrete right-hand side f(u) = -Mh^{-1} Kh u - gamma*r(u) (lumped mass).
Sweeps precondition with the triangular Q_delta matrices; the semi-implicit
variant treats diffusion implicitly and the reaction explicitly.  The driver
processes the time steps in windows of P simultaneous steps, one worker
thread per step, with terminal values passed forward between neighbors after
every iteration and serial communication on the coarsest level only.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

import scipy.sparse as sp

from .collocation import CollocationTableau, LagrangeBasis, make_tableau
from .errors import ConfigurationError, SolverError
from .fem1d import SpaceMesh, SpaceOperators, assemble_space
from .linalg import Ilu0, as_csr, gmres
from .multigrid import spatial_prolongation, spatial_restriction
from .report import SolveReport
from .spacetime import TimeGrid, reaction, reaction_deriv

MODES = ("implicit", "imex")

_NODE_SOLVE_TOL = 1e-13


@dataclass
class SweeperState:
    """Node values, step initial value and FAS correction on one level."""

    U: np.ndarray                 # (M, ndof)
    U0: np.ndarray                # (ndof,)
    tau: np.ndarray | None = None  # (M, ndof) coarse-level FAS term

    def copy(self) -> "SweeperState":
        return SweeperState(
            self.U.copy(), self.U0.copy(), None if self.tau is None else self.tau.copy()
        )

    @property
    def terminal(self) -> np.ndarray:
        return self.U[-1]


def spread_state(u0: np.ndarray, M: int) -> SweeperState:
    """Initial guess: copy the step initial value to every node."""
    u0 = np.asarray(u0, dtype=np.float64)
    return SweeperState(np.tile(u0, (M, 1)), u0.copy())


class SdcLevel:
    """Operators and node solvers for SDC sweeps on one level."""

    def __init__(
        self,
        tableau: CollocationTableau,
        space: SpaceOperators,
        dt: float,
        gamma: float,
        mode: str = "implicit",
    ):
        if mode not in MODES:
            raise ConfigurationError(f"unknown sweep mode {mode!r}; expected {MODES}")
        self.tableau = tableau
        self.space = space
        self.dt = float(dt)
        self.gamma = float(gamma)
        self.mode = mode
        self.mh = space.lumped_diagonal
        self.Kh = as_csr(space.Kh)
        self.Mh = sp.diags(self.mh, format="csr")
        qd = tableau.QDeltaImplicit
        self._node_factors = [
            Ilu0(self.Mh + self.dt * qd[m, m] * self.Kh) for m in range(tableau.M)
        ]

    @property
    def M(self) -> int:
        return self.tableau.M

    @property
    def ndof(self) -> int:
        return self.mh.size

    # ---- right-hand side splitting ----
    def f_diffusion(self, U: np.ndarray) -> np.ndarray:
        return -(self.Kh @ U.T).T / self.mh

    def f_reaction(self, U: np.ndarray) -> np.ndarray:
        if self.gamma == 0.0:
            return np.zeros_like(U)
        return -self.gamma * reaction(U)

    def f_total(self, U: np.ndarray) -> np.ndarray:
        return self.f_diffusion(U) + self.f_reaction(U)

    # ---- residual ----
    def collocation_residual(self, state: SweeperState) -> np.ndarray:
        """U - U0 - dt*Q F(U) - tau, stacked as (M, ndof)."""
        res = state.U - state.U0 - self.dt * self.tableau.Q @ self.f_total(state.U)
        if state.tau is not None:
            res = res - state.tau
        return res

    def residual_norm(self, state: SweeperState) -> float:
        return float(np.linalg.norm(self.collocation_residual(state)))

    # ---- node solves ----
    def _solve_node_linear(self, m: int, rhs: np.ndarray, guess: np.ndarray) -> np.ndarray:
        b = self.mh * rhs
        x, rep = gmres(
            self.Mh + self.dt * self.tableau.QDeltaImplicit[m, m] * self.Kh,
            b,
            precond=self._node_factors[m],
            x0=guess,
            tol_rel=_NODE_SOLVE_TOL,
            tol_abs=_NODE_SOLVE_TOL * max(1.0, float(np.linalg.norm(b))),
            restart=30,
            max_it=200,
        )
        if rep.diverged:
            raise SolverError(f"node solve failed at node {m}")
        return x

    def _solve_node_newton(self, m: int, rhs: np.ndarray, guess: np.ndarray) -> np.ndarray:
        """Fully implicit node solve with the reaction linearized by Newton."""
        q = self.dt * self.tableau.QDeltaImplicit[m, m]
        u = guess.copy()
        b = self.mh * rhs
        scale = max(1.0, float(np.linalg.norm(b)))
        for _ in range(50):
            g = self.mh * u + q * (self.Kh @ u + self.gamma * self.mh * reaction(u)) - b
            if np.linalg.norm(g) <= 1e-12 * scale:
                return u
            J = self.Mh + q * (self.Kh + self.gamma * sp.diags(self.mh * reaction_deriv(u)))
            delta, rep = gmres(
                J, -g, precond=Ilu0(J), tol_rel=_NODE_SOLVE_TOL,
                tol_abs=_NODE_SOLVE_TOL * scale, restart=30, max_it=200,
            )
            if rep.diverged:
                raise SolverError(f"node Newton solve failed at node {m}")
            u = u + delta
        raise SolverError(f"node Newton iteration stalled at node {m}")

    # ---- sweeps ----
    def sweep(self, state: SweeperState) -> SweeperState:
        """One preconditioned Richardson pass over the nodes.

        Implicit mode treats the whole right-hand side with the lower
        triangular Q_delta; imex mode keeps diffusion implicit and lags the
        reaction along the strictly lower explicit matrix, so every node
        solve stays linear.
        """
        M, dt = self.M, self.dt
        Q = self.tableau.Q
        qdi = self.tableau.QDeltaImplicit
        qde = self.tableau.QDeltaExplicit
        imex = self.mode == "imex" and self.gamma != 0.0

        with np.errstate(over="ignore", invalid="ignore"):
            if imex:
                fi_old = self.f_diffusion(state.U)
                fe_old = self.f_reaction(state.U)
                base = state.U0 + dt * ((Q - qdi) @ fi_old + (Q - qde) @ fe_old)
            else:
                f_old = self.f_total(state.U)
                base = state.U0 + dt * ((Q - qdi) @ f_old)
            if state.tau is not None:
                base = base + state.tau
            if not np.all(np.isfinite(base)):
                raise SolverError("non-finite values entered an SDC sweep")

            Unew = np.empty_like(state.U)
            fi_new = np.empty_like(state.U)
            fe_new = np.empty_like(state.U) if imex else None
            for m in range(M):
                rhs = base[m].copy()
                for j in range(m):
                    rhs += dt * qdi[m, j] * fi_new[j]
                    if imex:
                        rhs += dt * qde[m, j] * fe_new[j]
                if imex or self.gamma == 0.0:
                    Unew[m] = self._solve_node_linear(m, rhs, state.U[m])
                else:
                    Unew[m] = self._solve_node_newton(m, rhs, state.U[m])
                if imex:
                    fi_new[m] = self.f_diffusion(Unew[m][None, :])[0]
                    fe_new[m] = self.f_reaction(Unew[m][None, :])[0]
                else:
                    fi_new[m] = self.f_total(Unew[m][None, :])[0]
        return SweeperState(Unew, state.U0, state.tau)


def sdc_sweep_implicit(
    state: SweeperState,
    tableau: CollocationTableau,
    dt: float,
    space: SpaceOperators,
    gamma: float = 0.0,
) -> SweeperState:
    return SdcLevel(tableau, space, dt, gamma, "implicit").sweep(state)


def sdc_sweep_imex(
    state: SweeperState,
    tableau: CollocationTableau,
    dt: float,
    space: SpaceOperators,
    gamma: float = 0.0,
) -> SweeperState:
    return SdcLevel(tableau, space, dt, gamma, "imex").sweep(state)


def sdc_solve_step(
    u0: np.ndarray,
    level: SdcLevel,
    tol_rel: float = 1e-9,
    tol_abs: float = 1e-9,
    max_sweeps: int = 1000,
) -> tuple[SweeperState, SolveReport]:
    """Sweep one time step until the collocation residual meets the tolerance."""
    state = spread_state(u0, level.M)
    res = level.residual_norm(state)
    report = SolveReport(residual_history=[res])
    threshold = max(tol_abs, tol_rel * res)
    min_res = res
    while res > threshold:
        if report.iterations >= max_sweeps:
            report.diverged = True
            break
        state = level.sweep(state)
        res = level.residual_norm(state)
        report.iterations += 1
        report.residual_history.append(res)
        if not np.isfinite(res) or res > 10.0 * min_res:
            report.diverged = True
            break
        min_res = min(min_res, res)
    report.converged = res <= threshold
    return state, report


# ------------------------------------------------------------------ transfers
@dataclass(frozen=True)
class LevelTransfer:
    """Space and node transfer between two adjacent sweep levels."""

    space_restrict: sp.csr_matrix
    space_prolong: sp.csr_matrix
    node_restrict: np.ndarray   # (M_coarse, M_fine)
    node_prolong: np.ndarray    # (M_fine, M_coarse)

    def restrict_nodes(self, U: np.ndarray) -> np.ndarray:
        return self.node_restrict @ (self.space_restrict @ U.T).T

    def prolong_nodes(self, U: np.ndarray) -> np.ndarray:
        return self.node_prolong @ (self.space_prolong @ U.T).T

    def restrict_u0(self, u0: np.ndarray) -> np.ndarray:
        return self.space_restrict @ u0


def _node_eval_restriction(fine_nodes: np.ndarray, coarse_nodes: np.ndarray) -> np.ndarray:
    """Evaluate the fine nodal polynomial at the coarse nodes.

    With right-Radau sets the right endpoint is shared, so the restricted
    terminal value equals the fine terminal value; the pipelined coarse
    communication stays consistent with the fine fixed point.
    """
    basis = LagrangeBasis(fine_nodes)
    return np.array([basis.eval(t) for t in coarse_nodes])


def fas_correction(
    fine_level: SdcLevel,
    coarse_level: SdcLevel,
    transfer: LevelTransfer,
    fine_state: SweeperState,
) -> np.ndarray:
    """tau = C_c(R u_f) - R C_f(u_f), with the fine tau restricted and carried.

    C_l(u) := u - dt*Q_l F_l(u) is the level's collocation operator.  Adding
    tau to the coarse right-hand side makes the coarse equation exact for
    the restricted fine solution.
    """
    RU = transfer.restrict_nodes(fine_state.U)
    c_coarse = RU - coarse_level.dt * coarse_level.tableau.Q @ coarse_level.f_total(RU)
    c_fine = fine_state.U - fine_level.dt * fine_level.tableau.Q @ fine_level.f_total(
        fine_state.U
    )
    tau = c_coarse - transfer.restrict_nodes(c_fine)
    if fine_state.tau is not None:
        tau = tau + transfer.restrict_nodes(fine_state.tau)
    return tau


class PfasstHierarchy:
    """Sweep levels (fine M, then M=1 with bisected meshes) plus transfers."""

    def __init__(self, levels: list[SdcLevel], transfers: list[LevelTransfer], nu: int):
        self.levels = levels
        self.transfers = transfers
        self.nu = nu

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def fine(self) -> SdcLevel:
        return self.levels[0]


def build_pfasst_hierarchy(
    M: int,
    mesh: SpaceMesh,
    grid: TimeGrid,
    gamma: float,
    L: int,
    nu: int = 1,
    mode: str = "implicit",
    qdelta: str = "implicit-euler",
) -> PfasstHierarchy:
    """Fine level with M nodes; every coarser level has one node and half the mesh."""
    if L < 1:
        raise ConfigurationError("need at least one level")
    if mesh.Nx % 2 ** (L - 1) != 0:
        raise ConfigurationError(
            f"Nx={mesh.Nx} not divisible by 2^{L - 1} for {L} levels"
        )
    levels = []
    transfers = []
    tab_fine = make_tableau(M, qdelta)
    tab_coarse = make_tableau(1, qdelta)
    for l in range(L):
        nx = mesh.Nx // 2**l
        space = assemble_space(SpaceMesh(nx, mesh.X))
        tab = tab_fine if l == 0 else tab_coarse
        levels.append(SdcLevel(tab, space, grid.dt, gamma, mode))
    for l in range(L - 1):
        n_fine = levels[l].ndof
        mf, mc = levels[l].M, levels[l + 1].M
        if mf != mc:
            node_r = _node_eval_restriction(levels[l].tableau.nodes, levels[l + 1].tableau.nodes)
            node_p = _node_eval_restriction(levels[l + 1].tableau.nodes, levels[l].tableau.nodes)
        else:
            node_r = node_p = np.eye(mf)
        transfers.append(
            LevelTransfer(
                space_restrict=spatial_restriction(n_fine),
                space_prolong=spatial_prolongation(n_fine),
                node_restrict=node_r,
                node_prolong=node_p,
            )
        )
    return PfasstHierarchy(levels, transfers, nu)


# ------------------------------------------------------------------ driver
@dataclass
class _WindowShared:
    """Synchronization state for one window of P simultaneous steps."""

    P: int
    barrier: threading.Barrier
    residuals: np.ndarray
    thresholds: np.ndarray
    coarse_queues: list[queue.Queue]
    fine_msgs: list[list[np.ndarray | None]]   # [level][worker] terminal values
    stop: threading.Event
    diverged: threading.Event
    errors: list = field(default_factory=list)


class _Worker:
    """One pipelined time step inside a window."""

    def __init__(self, hier: PfasstHierarchy, shared: _WindowShared, w: int,
                 u_start: np.ndarray, max_iters: int):
        self.hier = hier
        self.shared = shared
        self.w = w
        self.u_start = u_start
        self.max_iters = max_iters
        self.states: list[SweeperState] = []
        self.iterations = 0
        self.min_res = 1e-300
        self._u0_chain: list[np.ndarray] = []

    def _restrict_chain(self, u0: np.ndarray) -> list[np.ndarray]:
        vals = [u0]
        for t in self.hier.transfers:
            vals.append(t.restrict_u0(vals[-1]))
        return vals

    def setup(self) -> None:
        self._u0_chain = self._restrict_chain(self.u_start)
        self.states = [
            spread_state(self._u0_chain[l], lvl.M)
            for l, lvl in enumerate(self.hier.levels)
        ]
        r0 = self.hier.fine.residual_norm(self.states[0])
        self.shared.residuals[self.w] = r0
        self.min_res = max(r0, 1e-300)

    def _receive_nonblocking(self) -> None:
        """Initial conditions for all levels but the coarsest (previous iteration)."""
        L = self.hier.num_levels
        if self.w > 0:
            for l in range(max(L - 1, 1)):
                msg = self.shared.fine_msgs[l][self.w - 1]
                if msg is not None:
                    self.states[l].U0 = msg.copy()
        # worker 0 keeps the window start values

    def _coarse_phase(self) -> None:
        L = self.hier.num_levels
        if L == 1:
            return
        # cascade down with FAS corrections
        for l in range(1, L):
            t = self.hier.transfers[l - 1]
            RU = t.restrict_nodes(self.states[l - 1].U)
            tau = fas_correction(
                self.hier.levels[l - 1], self.hier.levels[l], t, self.states[l - 1]
            )
            self.states[l] = SweeperState(RU, self.states[l].U0, tau)
            if l < L - 1:
                for _ in range(self.hier.nu):
                    self.states[l] = self.hier.levels[l].sweep(self.states[l])
        # coarsest: serial forward communication within the iteration
        if self.w > 0:
            while True:
                try:
                    u0c = self.shared.coarse_queues[self.w].get(timeout=0.5)
                    break
                except queue.Empty:
                    if self.shared.stop.is_set() or self.shared.errors:
                        raise SolverError("window aborted")
            self.states[L - 1].U0 = u0c
        else:
            self.states[L - 1].U0 = self._u0_chain[L - 1].copy()
        for _ in range(self.hier.nu):
            self.states[L - 1] = self.hier.levels[L - 1].sweep(self.states[L - 1])
        if self.w < self.shared.P - 1:
            self.shared.coarse_queues[self.w + 1].put(self.states[L - 1].terminal.copy())
        # cascade up with interpolated corrections
        for l in range(L - 2, -1, -1):
            t = self.hier.transfers[l]
            RU = t.restrict_nodes(self.states[l].U)
            self.states[l].U = self.states[l].U + t.prolong_nodes(self.states[l + 1].U - RU)
            if 0 < l < L - 1:
                for _ in range(self.hier.nu):
                    self.states[l] = self.hier.levels[l].sweep(self.states[l])

    def _publish(self) -> None:
        L = self.hier.num_levels
        for l in range(max(L - 1, 1)):
            self.shared.fine_msgs[l][self.w] = self.states[l].terminal.copy()
        res = self.hier.fine.residual_norm(self.states[0])
        self.shared.residuals[self.w] = res
        if not np.isfinite(res) or res > 10.0 * self.min_res:
            self.shared.diverged.set()
        self.min_res = min(self.min_res, max(res, 1e-300))

    def run(self) -> None:
        try:
            self.setup()
            self.shared.barrier.wait()
            if bool(np.all(self.shared.residuals <= self.shared.thresholds)):
                return  # nothing to do (zero right-hand side)
            for k in range(1, self.max_iters + 1):
                self._receive_nonblocking()
                self.shared.barrier.wait()
                with np.errstate(over="ignore", invalid="ignore"):
                    for _ in range(self.hier.nu):
                        self.states[0] = self.hier.fine.sweep(self.states[0])
                    self._coarse_phase()
                self._publish()
                self.iterations = k
                self.shared.barrier.wait()
                if self.shared.diverged.is_set() or self.shared.stop.is_set():
                    return
                if bool(np.all(self.shared.residuals <= self.shared.thresholds)):
                    return
            self.shared.diverged.set()  # iteration cap
        except SolverError:
            # numeric blow-up inside a sweep: report n.c., release the others
            self.shared.diverged.set()
            self.shared.stop.set()
            self.shared.barrier.abort()
        except threading.BrokenBarrierError:
            pass  # a neighbor aborted; flags are already set
        except Exception as exc:  # noqa: BLE001 - propagate to the driver
            self.shared.errors.append(exc)
            self.shared.stop.set()
            self.shared.barrier.abort()


def pfasst_run(
    hierarchy: PfasstHierarchy,
    u_init: np.ndarray,
    Nt: int,
    workers: int,
    tol_rel: float = 1e-9,
    tol_abs: float = 1e-9,
    max_iters: int = 1000,
) -> tuple[np.ndarray, SolveReport]:
    """Run the pipelined iteration over all time steps.

    Steps are processed in windows of ``workers`` simultaneous steps, one
    thread per step.  Returns the full space-time vector (time element, node,
    space dof) flattened, and a report whose ``iterations`` is the maximum
    window iteration count (per-window counts in ``inner_iterations``).
    """
    if workers < 1 or workers > Nt:
        raise ConfigurationError(f"worker count must be in [1, Nt={Nt}], got {workers}")
    if Nt % workers != 0:
        raise ConfigurationError(f"worker count {workers} must divide Nt={Nt}")
    fine = hierarchy.fine
    ndof, M = fine.ndof, fine.M
    u_init = np.asarray(u_init, dtype=np.float64)
    if u_init.size != ndof:
        raise ConfigurationError("initial state does not match the fine mesh")

    t0 = time.perf_counter()
    out = np.zeros((Nt, M, ndof))
    report = SolveReport()
    u_start = u_init
    converged = True
    for start in range(0, Nt, workers):
        P = workers
        shared = _WindowShared(
            P=P,
            barrier=threading.Barrier(P),
            residuals=np.zeros(P),
            thresholds=np.zeros(P),
            coarse_queues=[queue.Queue() for _ in range(P)],
            fine_msgs=[[None] * P for _ in range(max(hierarchy.num_levels - 1, 1))],
            stop=threading.Event(),
            diverged=threading.Event(),
        )
        ws = [_Worker(hierarchy, shared, w, u_start, max_iters) for w in range(P)]
        # thresholds require the initial residuals, computed in setup(); the
        # spread state is identical for every worker, so precompute once
        probe = spread_state(u_start, M)
        r0 = fine.residual_norm(probe)
        shared.thresholds[:] = max(tol_abs, tol_rel * r0)

        if P == 1:
            ws[0].run()
        else:
            threads = [
                threading.Thread(target=w.run, name=f"pfasst-w{w.w}", daemon=True)
                for w in ws
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        if shared.errors:
            raise shared.errors[0]
        window_iters = max(w.iterations for w in ws)
        report.inner_iterations.append(window_iters)
        report.residual_history.append(float(np.max(shared.residuals)))
        if shared.diverged.is_set():
            converged = False
            report.diverged = True
            for w in ws:
                out[start + w.w] = w.states[0].U
            break
        for w in ws:
            out[start + w.w] = w.states[0].U
        u_start = ws[-1].states[0].terminal.copy()
    report.converged = converged and not report.diverged
    report.iterations = max(report.inner_iterations) if report.inner_iterations else 0
    report.wall_time = time.perf_counter() - t0
    return out.ravel(), report
