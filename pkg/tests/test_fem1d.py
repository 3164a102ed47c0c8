"""Spatial discretization: stiffness, lumped mass, discrete mode rates."""

import numpy as np
import pytest

from paradiff import ConfigurationError, SpaceMesh, assemble_space, semidiscrete_rates


class TestMesh:
    def test_basic_quantities(self):
        mesh = SpaceMesh(4, 2.0)
        assert mesh.h == 0.5
        assert mesh.ndof == 5
        np.testing.assert_allclose(mesh.vertices, [0.0, 0.5, 1.0, 1.5, 2.0])

    @pytest.mark.parametrize("nx,X", [(1, 1.0), (0, 1.0), (4, -1.0), (4, 0.0)])
    def test_invalid_mesh_rejected(self, nx, X):
        with pytest.raises(ConfigurationError):
            SpaceMesh(nx, X)


class TestAssembly:
    def test_nx2_stiffness_textbook(self):
        ops = assemble_space(SpaceMesh(2, 1.0))
        expected = 2.0 * np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
        np.testing.assert_allclose(ops.Kh.toarray(), expected, atol=1e-15)

    def test_nx2_lumped_mass(self):
        ops = assemble_space(SpaceMesh(2, 1.0))
        np.testing.assert_allclose(
            ops.Mh.toarray(), np.diag([0.25, 0.5, 0.25]), atol=1e-15
        )
        assert abs(ops.lumped_diagonal.sum() - 1.0) < 1e-15

    def test_neumann_null_space(self):
        ops = assemble_space(SpaceMesh(64, 1.0))
        np.testing.assert_allclose(ops.Kh @ np.ones(65), 0.0, atol=1e-13)

    def test_stiffness_symmetric_positive_semidefinite(self):
        ops = assemble_space(SpaceMesh(16, 3.0))
        K = ops.Kh.toarray()
        np.testing.assert_allclose(K, K.T, atol=1e-15)
        eigs = np.linalg.eigvalsh(K)
        assert eigs[0] > -1e-12
        assert np.sum(np.abs(eigs) < 1e-10) == 1  # constants only

    def test_lumping_is_row_sum_of_consistent_mass(self):
        ops = assemble_space(SpaceMesh(10, 2.5))
        row_sums = np.asarray(ops.MhConsistent.sum(axis=1)).ravel()
        np.testing.assert_allclose(ops.lumped_diagonal, row_sums, atol=1e-15)

    def test_total_mass_equals_domain_length(self):
        for nx, X in ((8, 1.0), (32, 10.0)):
            ops = assemble_space(SpaceMesh(nx, X))
            assert abs(ops.lumped_diagonal.sum() - X) < 1e-12 * max(1.0, X)


class TestSemidiscreteRates:
    def test_zero_mode_has_zero_rate(self):
        assert semidiscrete_rates(SpaceMesh(16, 1.0), 0) == 0.0

    def test_fine_mesh_approaches_continuum(self):
        mesh = SpaceMesh(1024, 1.0)
        rho = semidiscrete_rates(mesh, 1)
        assert abs(rho + np.pi**2) / np.pi**2 <= 1e-5

    @pytest.mark.parametrize("k", [1, 3, 4])
    def test_rayleigh_quotient_oracle(self, k):
        # cosine modes are exact eigenvectors of the lumped-mass operator
        mesh = SpaceMesh(64, 1.0)
        ops = assemble_space(mesh)
        v = np.cos(k * np.pi * mesh.vertices)
        quotient = -(v @ (ops.Kh @ v)) / (v @ (ops.Mh @ v))
        assert abs(semidiscrete_rates(mesh, k) - quotient) < 1e-10

    @pytest.mark.parametrize("k", [1, 3, 4])
    def test_cosine_modes_are_eigenvectors(self, k):
        mesh = SpaceMesh(32, 1.0)
        ops = assemble_space(mesh)
        v = np.cos(k * np.pi * mesh.vertices)
        lhs = (ops.Kh @ v) / ops.lumped_diagonal
        rho = semidiscrete_rates(mesh, k)
        np.testing.assert_allclose(lhs, -rho * v, atol=1e-9 * abs(rho))
