"""Solve reports shared by the iterative solvers and the benchmark harness."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class SolveReport:
    """Outcome of one solver run.

    ``iterations`` counts outer iterations (V-cycles, PFASST iterations,
    GMRES iterations, ...).  ``inner_iterations`` collects per-outer-iteration
    inner counts where applicable (e.g. multigrid cycles per Newton step).
    ``diverged`` is set on residual growth or iteration-cap overrun; a run
    with ``converged == False`` and ``diverged == True`` is reported as
    "n.c." by the harness.
    """

    iterations: int = 0
    converged: bool = False
    diverged: bool = False
    residual_history: list[float] = field(default_factory=list)
    inner_iterations: list[int] = field(default_factory=list)
    newton_iterations: int = 0
    damped_steps: int = 0
    end_error: float = float("nan")
    weak_scaling_ratio: float = float("nan")
    wall_time: float = 0.0

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")

    def label(self) -> str:
        return f"[{self.iterations}]" if self.converged else "n.c."
