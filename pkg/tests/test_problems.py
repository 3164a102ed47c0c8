"""Problem definitions, reference solutions, error norms."""

import numpy as np
import pytest

from paradiff import (
    ConfigurationError,
    SpaceMesh,
    TimeGrid,
    assemble_space,
    assemble_system,
    error_norms,
    get_problem,
    heat_problem,
    heat_semidiscrete_exact,
    make_tableau,
    monodomain_problem,
    semidiscrete_rates,
)
from paradiff.problems import spatial_mean


class TestHeatProblem:
    def test_exact_matches_initial_condition(self):
        prob = heat_problem()
        x = np.linspace(0.0, 1.0, 33)
        np.testing.assert_allclose(prob.exact(x, 0.0), prob.u0(x), atol=1e-14)

    def test_amplitude_sum_at_origin(self):
        assert abs(heat_problem().u0(0.0) - 6.0) < 1e-14

    def test_origin_value_decays_after_transient(self):
        prob = heat_problem()
        ts = np.linspace(0.02, 1.0, 50)
        vals = [prob.exact(0.0, t) for t in ts]
        assert all(a > b for a, b in zip(vals, vals[1:]))


class TestSemidiscreteReference:
    def test_matches_initial_condition(self):
        prob = heat_problem()
        mesh = SpaceMesh(32, 1.0)
        ref = heat_semidiscrete_exact(mesh)
        np.testing.assert_allclose(
            ref(mesh.vertices, 0.0), prob.u0(mesh.vertices), atol=1e-14
        )

    def test_fine_mesh_limit_recovers_continuum(self):
        prob = heat_problem()
        mesh = SpaceMesh(4096, 1.0)
        ref = heat_semidiscrete_exact(mesh)
        x = mesh.vertices[::128]
        a = ref(x, 0.25)
        b = prob.exact(x, 0.25)
        assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 1e-5

    def test_modes_use_discrete_rates(self):
        mesh = SpaceMesh(16, 1.0)
        ref = heat_semidiscrete_exact(mesh)
        # mode-1 content at t: project onto cos(pi x) weights
        t = 0.5
        rho1 = semidiscrete_rates(mesh, 1)
        x = mesh.vertices
        vals = ref(x, t)
        # remove the other two modes using their known discrete decays
        vals -= 2 * np.cos(3 * np.pi * x) * np.exp(semidiscrete_rates(mesh, 3) * t)
        vals -= 3 * np.cos(4 * np.pi * x) * np.exp(semidiscrete_rates(mesh, 4) * t)
        np.testing.assert_allclose(vals, np.cos(np.pi * x) * np.exp(rho1 * t),
                                   atol=1e-12)


class TestMonodomainProblem:
    def test_stimulus_peak_at_center(self):
        prob = monodomain_problem()
        assert abs(prob.u0(prob.X / 2) - 2.0) < 1e-14
        assert prob.u0(0.0) < 1e-100

    def test_parameters(self):
        prob = monodomain_problem()
        assert (prob.X, prob.T, prob.gamma) == (10.0, 2.0, 5.0)
        assert prob.exact is None

    def test_diffusion_only_variant_decays_to_mean(self):
        prob = monodomain_problem()
        mesh = SpaceMesh(64, prob.X)
        space = assemble_space(mesh)
        system = assemble_system(
            make_tableau(2), space, TimeGrid(32, 20.0), 0.0, prob.u0(mesh.vertices)
        )
        u = system.solve_sequential()
        final = system.final_state(u)
        mean0 = spatial_mean(space, system.u0)
        assert np.max(np.abs(final - mean0)) < 0.05 * abs(mean0) + 1e-3

    def test_unknown_problem_rejected(self):
        with pytest.raises(ConfigurationError):
            get_problem("wave")


class TestErrorNorms:
    def test_zero_error_against_self(self):
        prob = heat_problem()
        mesh = SpaceMesh(16, 1.0)
        system = assemble_system(
            make_tableau(2), assemble_space(mesh), TimeGrid(4, 1.0), 0.0,
            prob.u0(mesh.vertices),
        )
        u = system.solve_sequential()
        steps = system.as_steps(u)

        def replay(x, t):
            n = int(round(t / system.grid.dt)) - 1
            return steps[n, -1]

        end, per_step = error_norms(u, replay, system)
        assert end == 0.0
        np.testing.assert_allclose(per_step, 0.0)

    def test_error_ratio_approaches_temporal_order(self):
        # halving Nt divides the end-node error vs the semidiscrete
        # reference by about 2^(2M-1)
        prob = heat_problem()
        mesh = SpaceMesh(1024, 1.0)
        ref = heat_semidiscrete_exact(mesh)
        errs = []
        for nt in (4, 8, 16):
            system = assemble_system(
                make_tableau(3), assemble_space(mesh), TimeGrid(nt, 1.0), 0.0,
                prob.u0(mesh.vertices),
            )
            err, _ = error_norms(system.solve_sequential(), ref, system)
            errs.append(err)
        ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
        assert 20.0 < ratios[-1] < 45.0  # 2^5 = 32

    def test_spatial_error_floor_vs_true_solution(self):
        # once the temporal error is negligible, the error against the true
        # solution saturates at the spatial discretization error (~4e-10 for
        # this mesh) instead of decaying with Nt
        prob = heat_problem()
        mesh = SpaceMesh(1024, 1.0)
        errs = []
        for nt in (32, 64):
            system = assemble_system(
                make_tableau(3), assemble_space(mesh), TimeGrid(nt, 1.0), 0.0,
                prob.u0(mesh.vertices),
            )
            err, _ = error_norms(system.solve_sequential(), prob.exact, system)
            errs.append(err)
        assert abs(errs[0] - errs[1]) / errs[0] < 0.5  # saturating, not order 5
        assert all(1e-11 < e < 1e-7 for e in errs)
