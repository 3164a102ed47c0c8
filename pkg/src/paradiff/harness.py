"""Benchmark harness: single runs, accuracy studies and scaling tables.

Every run is summarized as one CSV row; plot data is written as plain
``x y`` pairs, one file per series.  Wall times are recorded for information
only; iteration counts and errors are the quantities the studies compare,
and the weak-scaling ratio R is computed from iteration counts so that
re-running a configuration reproduces the table bitwise.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .collocation import make_tableau
from .errors import ConfigurationError
from .fem1d import SpaceMesh, assemble_space
from .harness_util import fit_slope
from .linalg import THREAD_CAP_ENV
from .multigrid import build_hierarchy, mg_linear_solver
from .pfasst import build_pfasst_hierarchy, pfasst_run
from .problems import ProblemSpec, error_norms, get_problem, heat_semidiscrete_exact
from .report import SolveReport
from .spacetime import SpaceTimeSystem, TimeGrid, assemble_system, newton_solve

METHODS = ("smg", "stmg", "smmg", "pfasst", "direct")

CSV_FIELDS = (
    "method", "M", "Nt", "Nx", "L", "nu", "P",
    "iterations", "newton_iters", "converged", "end_error", "R",
)


def worker_limit(default: int = 16) -> int:
    """Maximum time-parallel workers/partitions accepted by the harness."""
    raw = os.environ.get(THREAD_CAP_ENV, "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        return default


@dataclass
class ExperimentConfig:
    problem: str = "heat"
    method: str = "smg"
    M: int = 2
    Nt: int = 32
    Nx: int = 64
    L: int = 3
    nu: int = 3
    P: int = 1
    tol: float = 1e-9
    mode: str = ""            # "" = implicit for heat, imex for monodomain
    cm: int = 0               # weak-scaling multiplier; 0 = per-M default
    output: str = ""
    max_iters: int = 1000

    def resolved_mode(self, gamma: float) -> str:
        if self.mode:
            return self.mode
        return "imex" if gamma > 0 else "implicit"

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; expected {METHODS}")
        if self.P < 1:
            raise ConfigurationError("P must be at least 1")
        if self.P > worker_limit():
            raise ConfigurationError(
                f"P={self.P} exceeds the worker cap {worker_limit()} "
                f"(set {THREAD_CAP_ENV} to raise it)"
            )
        if self.method == "pfasst" and self.Nt % self.P != 0:
            raise ConfigurationError(f"P={self.P} must divide Nt={self.Nt}")
        if self.mode and self.mode not in ("implicit", "imex"):
            raise ConfigurationError("mode must be 'implicit' or 'imex'")


def build_system(problem: ProblemSpec, M: int, Nt: int, Nx: int) -> SpaceTimeSystem:
    mesh = SpaceMesh(Nx, problem.X)
    space = assemble_space(mesh)
    grid = TimeGrid(Nt, problem.T)
    tableau = make_tableau(M)
    u0 = problem.u0(mesh.vertices)
    return assemble_system(tableau, space, grid, problem.gamma, u0)


def _solve_multigrid(system: SpaceTimeSystem, cfg: ExperimentConfig):
    hierarchy = build_hierarchy(
        system, cfg.method.upper(), cfg.L, cfg.nu, partitions=cfg.P
    )
    if system.gamma == 0.0:
        u, rep = hierarchy.solve(
            system.rhs(), tol_rel=cfg.tol, tol_abs=cfg.tol, max_cycles=cfg.max_iters
        )
        return u, rep
    solver = mg_linear_solver(hierarchy, tol_rel=cfg.tol, tol_abs=cfg.tol,
                              max_cycles=cfg.max_iters)
    return newton_solve(system, solver, tol=cfg.tol)


def _solve_pfasst(system: SpaceTimeSystem, cfg: ExperimentConfig):
    hier = build_pfasst_hierarchy(
        cfg.M, system.space.mesh, system.grid, system.gamma,
        L=cfg.L, nu=cfg.nu, mode=cfg.resolved_mode(system.gamma),
    )
    return pfasst_run(
        hier, system.u0, system.grid.Nt, cfg.P,
        tol_rel=cfg.tol, tol_abs=cfg.tol, max_iters=cfg.max_iters,
    )


def run_experiment(cfg: ExperimentConfig) -> tuple[SolveReport, dict]:
    """Execute one configuration; returns the report and its CSV row."""
    cfg.validate()
    problem = get_problem(cfg.problem)
    system = build_system(problem, cfg.M, cfg.Nt, cfg.Nx)

    if cfg.method == "direct":
        t0 = time.perf_counter()
        u = system.solve_sequential()
        report = SolveReport(iterations=1, converged=True,
                             wall_time=time.perf_counter() - t0)
    elif cfg.method == "pfasst":
        u, report = _solve_pfasst(system, cfg)
    else:
        u, report = _solve_multigrid(system, cfg)

    if problem.exact is not None and report.converged:
        end_err, _ = error_norms(u, problem.exact, system)
        report.end_error = end_err
    row = {
        "method": cfg.method,
        "M": cfg.M,
        "Nt": cfg.Nt,
        "Nx": cfg.Nx,
        "L": cfg.L,
        "nu": cfg.nu,
        "P": cfg.P,
        "iterations": report.iterations,
        "newton_iters": report.newton_iterations,
        "converged": report.converged,
        "end_error": report.end_error,
        "R": report.weak_scaling_ratio,
    }
    if cfg.output:
        append_rows(cfg.output, [row])
    return report, row


def append_rows(path: str, rows: list[dict]) -> None:
    """Append CSV rows, writing the header if the file is new."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    new = not p.exists() or p.stat().st_size == 0
    with p.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        if new:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in CSV_FIELDS})


def write_series(path: str, pairs: list[tuple[float, float]]) -> None:
    """Plot data: one '<x> <y>' line per point."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as fh:
        for x, y in pairs:
            fh.write(f"{x:.17g} {y:.17g}\n")


DEFAULT_NT_RANGES = {
    1: (64, 128, 256, 512, 1024),
    2: (8, 16, 32, 64),
    3: (4, 8, 16, 32),
    4: (4, 8, 16, 32),
    5: (4, 8, 16),
}

ERROR_FLOOR = 1e-14


def order_study(
    M_values=(1, 2, 3, 4, 5),
    Nt_values: dict | None = None,
    Nx: int = 256,
    out_dir: str = "",
) -> tuple[list[dict], dict[int, float]]:
    """End-node accuracy vs the exact and the semidiscrete-exact solutions.

    Solves the pure-diffusion problem exactly in the algebraic sense
    (element-by-element direct solves), so the measured error against the
    semidiscrete reference isolates the temporal discretization error; the
    fitted slope per node count approaches 2M-1.
    """
    problem = get_problem("heat")
    rows: list[dict] = []
    slopes: dict[int, float] = {}
    for M in M_values:
        nts = (Nt_values or DEFAULT_NT_RANGES)[M]
        errs_semi, errs_exact = [], []
        semi_ref = None
        for Nt in nts:
            system = build_system(problem, M, Nt, Nx)
            if semi_ref is None:
                semi_ref = heat_semidiscrete_exact(system.space.mesh)
            u = system.solve_sequential()
            e_semi, _ = error_norms(u, semi_ref, system)
            e_exact, _ = error_norms(u, problem.exact, system)
            errs_semi.append(e_semi)
            errs_exact.append(e_exact)
            rows.append({
                "M": M, "Nt": Nt,
                "error_vs_exact": e_exact, "error_vs_semidiscrete": e_semi,
            })
        slopes[M] = fit_slope(nts, errs_semi, floor=ERROR_FLOOR)
        for row in rows:
            if row["M"] == M:
                row["slope"] = slopes[M]
        if out_dir:
            write_series(
                str(Path(out_dir) / f"order_heat_M{M}_vs_semidiscrete.dat"),
                list(zip(map(float, nts), errs_semi)),
            )
            write_series(
                str(Path(out_dir) / f"order_heat_M{M}_vs_exact.dat"),
                list(zip(map(float, nts), errs_exact)),
            )
    if out_dir:
        path = Path(out_dir) / "order_study.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=("M", "Nt", "error_vs_exact", "error_vs_semidiscrete", "slope")
            )
            writer.writeheader()
            writer.writerows(rows)
    return rows, slopes


DEFAULT_WEAK_CM = {1: 16, 2: 8}


def scaling_study(
    cfg: ExperimentConfig,
    P_values=(1, 2, 4),
    weak: bool = False,
) -> list[dict]:
    """Sweep the worker/partition count; weak mode grows Nt = C_M * P.

    The R column divides the run's iteration count by the base row's
    (first entry); R = 1 is ideal weak scaling.
    """
    rows = []
    base_iters = None
    for P in P_values:
        run_cfg = ExperimentConfig(**{**cfg.__dict__, "P": P, "output": ""})
        if weak:
            cm = cfg.cm or DEFAULT_WEAK_CM.get(cfg.M, 4)
            run_cfg.Nt = cm * P
        if run_cfg.method == "pfasst" and run_cfg.Nt % P != 0:
            raise ConfigurationError(f"P={P} does not divide Nt={run_cfg.Nt}")
        report, row = run_experiment(run_cfg)
        if base_iters is None:
            base_iters = max(report.iterations, 1)
        row["R"] = report.iterations / base_iters
        report.weak_scaling_ratio = row["R"]
        rows.append(row)
    if cfg.output:
        append_rows(cfg.output, rows)
    return rows


def compare_methods(cfg: ExperimentConfig, agree_tol: float = 1e-8) -> tuple[bool, float, list[dict]]:
    """Run SMG and PFASST on the same discretization; check final-time agreement."""
    problem = get_problem(cfg.problem)
    system = build_system(problem, cfg.M, cfg.Nt, cfg.Nx)
    rows = []

    smg_cfg = ExperimentConfig(**{**cfg.__dict__, "method": "smg", "output": ""})
    pf_cfg = ExperimentConfig(**{**cfg.__dict__, "method": "pfasst", "output": ""})
    smg_cfg.validate()
    pf_cfg.validate()

    u_smg, rep_smg = _solve_multigrid(system, smg_cfg)
    u_pf, rep_pf = _solve_pfasst(system, pf_cfg)
    for cfg_i, rep in ((smg_cfg, rep_smg), (pf_cfg, rep_pf)):
        rows.append({
            "method": cfg_i.method, "M": cfg_i.M, "Nt": cfg_i.Nt, "Nx": cfg_i.Nx,
            "L": cfg_i.L, "nu": cfg_i.nu, "P": cfg_i.P,
            "iterations": rep.iterations, "newton_iters": rep.newton_iterations,
            "converged": rep.converged, "end_error": rep.end_error,
            "R": float("nan"),
        })
    diff = float(np.max(np.abs(system.final_state(u_smg) - system.final_state(u_pf))))
    agree = rep_smg.converged and rep_pf.converged and diff <= agree_tol
    if cfg.output:
        append_rows(cfg.output, rows)
    return agree, diff, rows
