"""Uniform 1D linear finite elements with homogeneous Neumann boundaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError


@dataclass(frozen=True)
class SpaceMesh:
    """Uniform mesh of ``Nx`` elements on [0, X]; Nx+1 vertex dofs."""

    Nx: int
    X: float = 1.0

    def __post_init__(self):
        if self.Nx < 2:
            raise ConfigurationError(f"need at least 2 elements, got {self.Nx}")
        if self.X <= 0:
            raise ConfigurationError("domain length must be positive")

    @property
    def h(self) -> float:
        return self.X / self.Nx

    @property
    def ndof(self) -> int:
        return self.Nx + 1

    @property
    def vertices(self) -> np.ndarray:
        return np.linspace(0.0, self.X, self.Nx + 1)


@dataclass(frozen=True)
class SpaceOperators:
    """Stiffness and mass matrices of the linear FEM discretization.

    ``Kh`` is symmetric positive semidefinite with the constants as null
    space (natural Neumann conditions).  ``Mh`` is the row-sum lumped mass
    (diagonal); the consistent mass is kept for verification.
    """

    mesh: SpaceMesh
    Kh: sp.csr_matrix
    Mh: sp.dia_matrix
    MhConsistent: sp.csr_matrix

    @property
    def lumped_diagonal(self) -> np.ndarray:
        return self.Mh.diagonal()


def assemble_space(mesh: SpaceMesh) -> SpaceOperators:
    """Assemble stiffness, consistent mass and lumped mass on the mesh."""
    n = mesh.ndof
    h = mesh.h
    main = np.full(n, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    off = np.full(n - 1, -1.0 / h)
    Kh = sp.diags([off, main, off], [-1, 0, 1], format="csr")

    m_main = np.full(n, 4.0 * h / 6.0)
    m_main[0] = m_main[-1] = 2.0 * h / 6.0
    m_off = np.full(n - 1, h / 6.0)
    Mc = sp.diags([m_off, m_main, m_off], [-1, 0, 1], format="csr")

    lumped = np.asarray(Mc.sum(axis=1)).ravel()
    Mh = sp.diags(lumped, format="dia")
    return SpaceOperators(mesh=mesh, Kh=Kh, Mh=Mh, MhConsistent=Mc)


def semidiscrete_rates(mesh: SpaceMesh, k: int) -> float:
    """Decay rate of the k-th cosine mode of the lumped-mass semidiscretization.

    rho_k = (2 cos(k pi h) - 2) / h^2; tends to -(k pi)^2 as h -> 0.
    """
    h = mesh.h
    return (2.0 * np.cos(k * np.pi * h) - 2.0) / h**2
