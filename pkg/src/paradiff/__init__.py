"""Parallel-in-time solvers for the 1D reaction-diffusion equation.

Two solver families share one spatial discretization: a space-time multigrid
over the monolithic time-Galerkin system (spatial, space-time and node-count
coarsening) and a pipelined multilevel SDC iteration over the per-step
collocation systems.  Both converge to the same discrete solution.
"""

from .collocation import (
    CollocationTableau,
    LagrangeBasis,
    build_dg_matrices,
    build_q,
    build_qdelta,
    make_tableau,
    radau_nodes,
    scalar_collocation_solve,
    scalar_dg_step,
)
from .errors import ConfigurationError, SolverError
from .fem1d import SpaceMesh, SpaceOperators, assemble_space, semidiscrete_rates
from .harness import ExperimentConfig, order_study, run_experiment, scaling_study
from .linalg import BlockJacobiPrecond, DenseLU, Ilu0, block_jacobi, gmres, ilu0, kron
from .multigrid import MultigridHierarchy, build_hierarchy, mg_linear_solver
from .pfasst import (
    PfasstHierarchy,
    SdcLevel,
    SweeperState,
    build_pfasst_hierarchy,
    fas_correction,
    pfasst_run,
    sdc_solve_step,
    sdc_sweep_imex,
    sdc_sweep_implicit,
    spread_state,
)
from .problems import (
    ProblemSpec,
    error_norms,
    get_problem,
    heat_problem,
    heat_semidiscrete_exact,
    monodomain_problem,
)
from .report import SolveReport
from .spacetime import (
    SpaceTimeSystem,
    TimeGrid,
    assemble_system,
    newton_solve,
    reaction,
)

__version__ = "0.1.0"

__all__ = [
    "BlockJacobiPrecond",
    "CollocationTableau",
    "ConfigurationError",
    "DenseLU",
    "ExperimentConfig",
    "Ilu0",
    "LagrangeBasis",
    "MultigridHierarchy",
    "PfasstHierarchy",
    "ProblemSpec",
    "SdcLevel",
    "SolveReport",
    "SolverError",
    "SpaceMesh",
    "SpaceOperators",
    "SpaceTimeSystem",
    "SweeperState",
    "TimeGrid",
    "assemble_space",
    "assemble_system",
    "build_dg_matrices",
    "build_hierarchy",
    "build_pfasst_hierarchy",
    "build_q",
    "build_qdelta",
    "block_jacobi",
    "error_norms",
    "fas_correction",
    "get_problem",
    "gmres",
    "heat_problem",
    "heat_semidiscrete_exact",
    "ilu0",
    "kron",
    "make_tableau",
    "mg_linear_solver",
    "monodomain_problem",
    "newton_solve",
    "order_study",
    "pfasst_run",
    "radau_nodes",
    "reaction",
    "run_experiment",
    "scalar_collocation_solve",
    "scalar_dg_step",
    "scaling_study",
    "sdc_solve_step",
    "sdc_sweep_imex",
    "sdc_sweep_implicit",
    "semidiscrete_rates",
    "spread_state",
]
