"""Temporal discretization on a single time element.

Builds right Gauss-Radau nodes on (0, 1], the collocation matrix Q, the
low-order triangular sweep preconditioners Q_delta, and the nodal
time-Galerkin matrices (Kq, Mq, Jq) of the upwinded weak form.  Everything
lives on the unit interval; callers scale by the step size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from .errors import ConfigurationError, SolverError

MAX_NODES = 9

QDELTA_KINDS = ("implicit-euler", "explicit-euler", "lu-trick")


def radau_nodes(M: int) -> np.ndarray:
    """Right Gauss-Radau nodes on (0, 1], strictly increasing, last node 1.

    Roots of P_{M-1} - P_M (Legendre) on [-1, 1], found via the companion
    matrix of the Legendre series and polished with one Newton step.
    """
    if not 1 <= M <= MAX_NODES:
        raise ConfigurationError(f"node count must be in [1, {MAX_NODES}], got {M}")
    if M == 1:
        return np.array([1.0])
    coeffs = np.zeros(M + 1)
    coeffs[M - 1] = 1.0
    coeffs[M] = -1.0
    roots = np.real(legendre.legroots(coeffs))
    roots = np.sort(roots[np.abs(roots - 1.0) > 1e-8])
    # one Newton polish on p(x) = P_{M-1}(x) - P_M(x)
    dcoeffs = legendre.legder(coeffs)
    roots -= legendre.legval(roots, coeffs) / legendre.legval(roots, dcoeffs)
    nodes = np.append((roots + 1.0) / 2.0, 1.0)
    return nodes


class LagrangeBasis:
    """Lagrange polynomials on distinct nodes; evaluates values and derivatives."""

    def __init__(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if len(np.unique(nodes)) != nodes.size:
            raise ConfigurationError("Lagrange nodes must be distinct")
        self.nodes = nodes
        self.M = nodes.size

    def eval(self, t: float) -> np.ndarray:
        """Vector [l_1(t), ..., l_M(t)]."""
        x, out = self.nodes, np.empty(self.M)
        for j in range(self.M):
            num = 1.0
            for k in range(self.M):
                if k != j:
                    num *= (t - x[k]) / (x[j] - x[k])
            out[j] = num
        return out

    def deriv(self, t: float) -> np.ndarray:
        """Vector [l_1'(t), ..., l_M'(t)]."""
        x, out = self.nodes, np.zeros(self.M)
        for j in range(self.M):
            s = 0.0
            for i in range(self.M):
                if i == j:
                    continue
                term = 1.0 / (x[j] - x[i])
                for k in range(self.M):
                    if k != j and k != i:
                        term *= (t - x[k]) / (x[j] - x[k])
                s += term
            out[j] = s
        return out


def _gauss_rule(npts: int, a: float, b: float):
    """Gauss-Legendre points/weights on [a, b]; exact for degree 2*npts - 1."""
    x, w = legendre.leggauss(npts)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def build_q(nodes) -> np.ndarray:
    """Collocation weights q[m, j] = integral of l_j over [0, t_m].

    Integrands are polynomials of degree M-1, so the M+1-point Gauss rule
    integrates them exactly (up to roundoff); row m sums to t_m.
    """
    basis = LagrangeBasis(nodes)
    M = basis.M
    Q = np.empty((M, M))
    for m in range(M):
        pts, wts = _gauss_rule(M + 1, 0.0, basis.nodes[m])
        vals = np.array([basis.eval(t) for t in pts])
        Q[m] = wts @ vals
    return Q


def build_qdelta(nodes, kind: str = "implicit-euler") -> np.ndarray:
    """Triangular sweep preconditioner for the collocation system.

    implicit-euler: Q_delta[m, j] = t_j - t_{j-1} for j <= m (t_0 = 0).
    explicit-euler: the same matrix shifted one row down (strictly lower).
    lu-trick: transpose of the U factor of Q^T (Weiser's choice).
    """
    nodes = np.asarray(nodes, dtype=float)
    M = nodes.size
    deltas = np.diff(nodes, prepend=0.0)
    if kind == "implicit-euler":
        return np.tril(np.tile(deltas, (M, 1)))
    if kind == "explicit-euler":
        return np.tril(np.tile(deltas, (M, 1)), k=-1)
    if kind == "lu-trick":
        import scipy.linalg

        _, _, U = scipy.linalg.lu(build_q(nodes).T)
        return U.T
    raise ConfigurationError(
        f"unknown qdelta kind {kind!r}; expected one of {QDELTA_KINDS}"
    )


def build_dg_matrices(nodes) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodal time-Galerkin matrices on the unit interval.

    Kq[i, j] = -int l_i' l_j + l_i(1) l_j(1)
    Mq[i, j] =  int l_i l_j
    Jq[i, j] =  l_i(0) l_j(1)

    Row index i is the test function.  The M+1-point Gauss rule is exact for
    the degree <= 2M-2 integrands.
    """
    basis = LagrangeBasis(nodes)
    M = basis.M
    pts, wts = _gauss_rule(M + 1, 0.0, 1.0)
    vals = np.array([basis.eval(t) for t in pts])        # (npts, M)
    dvals = np.array([basis.deriv(t) for t in pts])      # (npts, M)
    Mq = vals.T @ (wts[:, None] * vals)
    l1 = basis.eval(1.0)
    l0 = basis.eval(0.0)
    Kq = -(dvals.T @ (wts[:, None] * vals)) + np.outer(l1, l1)
    Jq = np.outer(l0, l1)
    return Kq, Mq, Jq


@dataclass(frozen=True)
class CollocationTableau:
    """All single-element temporal matrices for M Radau nodes on (0, 1].

    Immutable; safe to share across threads.  Scale Q, Mq and the Q_delta
    matrices by the step size at use sites.
    """

    M: int
    nodes: np.ndarray
    Q: np.ndarray
    QDeltaImplicit: np.ndarray
    QDeltaExplicit: np.ndarray
    Kq: np.ndarray
    Mq: np.ndarray
    Jq: np.ndarray

    @property
    def left_values(self) -> np.ndarray:
        """Basis values at t=0 (equals Kq @ ones; weights the incoming state)."""
        return self.Jq[:, -1].copy()


def make_tableau(M: int, qdelta: str = "implicit-euler") -> CollocationTableau:
    """Build the full tableau for M right Radau nodes."""
    nodes = radau_nodes(M)
    Kq, Mq, Jq = build_dg_matrices(nodes)
    return CollocationTableau(
        M=M,
        nodes=nodes,
        Q=build_q(nodes),
        QDeltaImplicit=build_qdelta(nodes, qdelta),
        QDeltaExplicit=build_qdelta(nodes, "explicit-euler"),
        Kq=Kq,
        Mq=Mq,
        Jq=Jq,
    )


def scalar_dg_step(tableau: CollocationTableau, dt: float, lam: complex, u0: float) -> np.ndarray:
    """Node values of one time-Galerkin step of u' = lam*u from u0.

    Solves (Kq - dt*lam*Mq) U = Jq [u0, ..., u0] by dense LU.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    A = tableau.Kq - dt * lam * tableau.Mq
    rhs = tableau.Jq @ np.full(tableau.M, u0, dtype=np.result_type(lam, float))
    try:
        return np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular time-element system (lam*dt = {lam * dt})") from exc


def scalar_collocation_solve(
    tableau: CollocationTableau, dt: float, lam: complex, u0: float
) -> np.ndarray:
    """Node values of the collocation system (I - dt*lam*Q) U = [u0, ..., u0]."""
    A = np.eye(tableau.M) - dt * lam * tableau.Q
    rhs = np.full(tableau.M, u0, dtype=np.result_type(lam, float))
    try:
        return np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular collocation system (lam*dt = {lam * dt})") from exc
