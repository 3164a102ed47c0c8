"""Sparse kernels shared by both solver families.

CSR ILU(0), restarted GMRES with right preconditioning, a time-partitioned
block-Jacobi preconditioner, Kronecker products and a dense coarse-level LU.
The ILU(0) factorization and triangular solves are numba-compiled; they
release the GIL so block solves can run concurrently.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from numba import njit

from .errors import ConfigurationError, SolverError
from .report import SolveReport

THREAD_CAP_ENV = "PARADIFF_MAX_THREADS"

_SIZE_LIMIT = 2**31 - 1


def thread_cap(default: int = 16) -> int:
    """Worker-thread cap honored by all parallel code paths."""
    raw = os.environ.get(THREAD_CAP_ENV, "")
    try:
        cap = int(raw) if raw else default
    except ValueError:
        cap = default
    return max(1, min(cap, os.cpu_count() or 1))


_pool: ThreadPoolExecutor | None = None


def _shared_pool() -> ThreadPoolExecutor:
    global _pool
    if _pool is None:
        _pool = ThreadPoolExecutor(max_workers=thread_cap(), thread_name_prefix="paradiff-blk")
    return _pool


def as_csr(A) -> sp.csr_matrix:
    """Canonical CSR: sorted column indices, duplicates summed."""
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def kron(A, B) -> sp.csr_matrix:
    """Sparse Kronecker product (A x B) in CSR form."""
    A, B = sp.coo_matrix(A), sp.coo_matrix(B)
    if A.shape[0] * B.shape[0] > _SIZE_LIMIT or A.shape[1] * B.shape[1] > _SIZE_LIMIT:
        raise ConfigurationError("Kronecker product dimensions overflow index range")
    return as_csr(sp.kron(A, B, format="csr"))


@njit(cache=True, nogil=True)
def _ilu0_factor(indptr, indices, data, diag_pos):
    """In-place incomplete LU on the CSR pattern; returns failing row or -1.

    Unit lower factor strictly below the diagonal, U on and above, both
    confined to the original sparsity pattern.
    """
    n = indptr.size - 1
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        row_start, row_end = indptr[i], indptr[i + 1]
        diag_pos[i] = -1
        for p in range(row_start, row_end):
            pos[indices[p]] = p
            if indices[p] == i:
                diag_pos[i] = p
        for pk in range(row_start, row_end):
            k = indices[pk]
            if k >= i:
                break
            dk = diag_pos[k]
            ukk = data[dk]
            if ukk == 0.0:
                return k
            lik = data[pk] / ukk
            data[pk] = lik
            for p in range(dk + 1, indptr[k + 1]):
                pj = pos[indices[p]]
                if pj >= 0:
                    data[pj] -= lik * data[p]
        if diag_pos[i] < 0 or data[diag_pos[i]] == 0.0:
            return i
        for p in range(row_start, row_end):
            pos[indices[p]] = -1
    return -1


@njit(cache=True, nogil=True)
def _ilu0_solve(indptr, indices, data, diag_pos, b, out):
    """out = U^{-1} L^{-1} b for the factors stored by _ilu0_factor."""
    n = indptr.size - 1
    for i in range(n):
        s = b[i]
        for p in range(indptr[i], diag_pos[i]):
            s -= data[p] * out[indices[p]]
        out[i] = s
    for i in range(n - 1, -1, -1):
        s = out[i]
        for p in range(diag_pos[i] + 1, indptr[i + 1]):
            s -= data[p] * out[indices[p]]
        out[i] = s / data[diag_pos[i]]


class Ilu0:
    """ILU(0) factors of a square CSR matrix, applied as a preconditioner."""

    def __init__(self, A):
        A = as_csr(A)
        if A.shape[0] != A.shape[1]:
            raise ConfigurationError("ILU(0) needs a square matrix")
        self.n = A.shape[0]
        self._indptr = A.indptr.astype(np.int64)
        self._indices = A.indices.astype(np.int64)
        self._data = A.data.astype(np.float64).copy()
        self._diag_pos = np.empty(self.n, dtype=np.int64)
        bad = _ilu0_factor(self._indptr, self._indices, self._data, self._diag_pos)
        if bad >= 0:
            raise SolverError(f"zero pivot in ILU(0) at row {bad}")

    def solve(self, b: np.ndarray) -> np.ndarray:
        out = np.empty_like(b, dtype=np.float64)
        _ilu0_solve(self._indptr, self._indices, self._data, self._diag_pos,
                    np.asarray(b, dtype=np.float64), out)
        return out

    def factors(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """(L, U) as explicit CSR matrices (unit diagonal on L)."""
        full = sp.csr_matrix(
            (self._data, self._indices, self._indptr), shape=(self.n, self.n)
        )
        L = sp.tril(full, k=-1) + sp.eye(self.n, format="csr")
        U = sp.triu(full, k=0)
        return as_csr(L), as_csr(U)


def ilu0(A) -> Ilu0:
    return Ilu0(A)


class BlockJacobiPrecond:
    """Per-block ILU(0) of contiguous diagonal blocks.

    The index ranges partition [0, n); when ``num_blocks`` does not divide n
    the last block absorbs the remainder.  Block solves may run on the shared
    thread pool; results are merged by index range, so the output is bitwise
    independent of the worker count.
    """

    def __init__(self, A, num_blocks: int, parallel: bool | None = None):
        A = as_csr(A)
        n = A.shape[0]
        if num_blocks < 1 or num_blocks > n:
            raise ConfigurationError(f"num_blocks must be in [1, {n}], got {num_blocks}")
        size = n // num_blocks
        self.ranges = [
            (b * size, (b + 1) * size if b < num_blocks - 1 else n)
            for b in range(num_blocks)
        ]
        self.blocks = [Ilu0(A[r0:r1, r0:r1]) for r0, r1 in self.ranges]
        if parallel is None:
            parallel = num_blocks > 1 and thread_cap() > 1
        self.parallel = parallel

    def solve(self, b: np.ndarray) -> np.ndarray:
        out = np.empty_like(b, dtype=np.float64)
        if self.parallel and len(self.blocks) > 1:
            pool = _shared_pool()
            futures = [
                pool.submit(blk.solve, b[r0:r1])
                for blk, (r0, r1) in zip(self.blocks, self.ranges)
            ]
            for (r0, r1), fut in zip(self.ranges, futures):
                out[r0:r1] = fut.result()
        else:
            for blk, (r0, r1) in zip(self.blocks, self.ranges):
                out[r0:r1] = blk.solve(b[r0:r1])
        return out


def block_jacobi(A, num_blocks: int, parallel: bool | None = None) -> BlockJacobiPrecond:
    return BlockJacobiPrecond(A, num_blocks, parallel)


class DenseLU:
    """Dense LU with partial pivoting (coarsest-level solver)."""

    def __init__(self, A):
        A = np.asarray(A.toarray() if sp.issparse(A) else A, dtype=np.float64)
        if A.shape[0] != A.shape[1]:
            raise ConfigurationError("dense LU needs a square matrix")
        try:
            self._lu = scipy.linalg.lu_factor(A)
        except (ValueError, scipy.linalg.LinAlgError) as exc:
            raise SolverError(f"dense LU factorization failed: {exc}") from exc

    def solve(self, b: np.ndarray) -> np.ndarray:
        return scipy.linalg.lu_solve(self._lu, b)


GROWTH_FACTOR = 10.0  # residual above this multiple of its minimum => diverged


def gmres(
    A,
    b: np.ndarray,
    precond=None,
    x0: np.ndarray | None = None,
    tol_rel: float = 1e-9,
    tol_abs: float = 1e-9,
    restart: int = 30,
    max_it: int = 1000,
) -> tuple[np.ndarray, SolveReport]:
    """Restarted GMRES with right preconditioning.

    ``A`` is a matrix or a callable matvec; ``precond`` needs a ``solve``
    method (or is callable).  With right preconditioning the monitored
    residual is the true residual of the original system.  Converged when
    ||b - A x|| <= max(tol_abs, tol_rel * ||b - A x0||); flagged diverged on
    iteration-cap overrun or when the residual grows past 10x its minimum.
    """
    matvec = A.dot if hasattr(A, "dot") else A
    if precond is None:
        psolve = lambda v: v  # noqa: E731
    else:
        psolve = precond.solve if hasattr(precond, "solve") else precond
    b = np.asarray(b, dtype=np.float64)
    n = b.size
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    restart = max(1, min(restart, n))

    r = b - matvec(x)
    beta = float(np.linalg.norm(r))
    if not np.isfinite(beta):
        raise SolverError("non-finite initial residual in GMRES")
    threshold = max(tol_abs, tol_rel * beta)
    report = SolveReport(residual_history=[beta])
    if beta <= threshold:
        report.converged = True
        return x, report

    min_res = beta
    total = 0
    while True:
        V = np.empty((restart + 1, n))
        H = np.zeros((restart + 1, restart))
        cs = np.empty(restart)
        sn = np.empty(restart)
        g = np.zeros(restart + 1)
        V[0] = r / beta
        g[0] = beta
        j = -1
        for j in range(restart):
            w = matvec(psolve(V[j]))
            for i in range(j + 1):
                H[i, j] = np.dot(w, V[i])
                w -= H[i, j] * V[i]
            hnext = float(np.linalg.norm(w))
            H[j + 1, j] = hnext
            happy = hnext <= 1e-14 * max(1.0, beta)
            if not happy:
                V[j + 1] = w / hnext
            for i in range(j):  # previously computed Givens rotations
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            res = abs(g[j + 1])
            if not np.isfinite(res):
                raise SolverError("non-finite residual in GMRES iteration")
            total += 1
            report.residual_history.append(res)
            if res <= threshold or happy or total >= max_it:
                break
        # solve the small triangular system and update x
        k = j + 1
        y = scipy.linalg.solve_triangular(H[:k, :k], g[:k], lower=False)
        x = x + psolve(V[:k].T @ y)
        r = b - matvec(x)
        beta = float(np.linalg.norm(r))
        if not np.isfinite(beta):
            raise SolverError("non-finite residual in GMRES restart")
        report.residual_history[-1] = beta  # replace estimate with true residual
        min_res = min(min_res, beta)
        if beta <= threshold:
            report.converged = True
            break
        if total >= max_it or beta > GROWTH_FACTOR * min_res:
            report.diverged = True
            break
    report.iterations = total
    return x, report
