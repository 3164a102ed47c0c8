"""Command-line interface: solve, order-study, strong-scaling, weak-scaling, compare.

Exit codes: 0 on success, 1 when a solver fails to converge (or methods
disagree in compare), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigurationError
from .harness import (
    ExperimentConfig,
    METHODS,
    compare_methods,
    order_study,
    run_experiment,
    scaling_study,
)


def _add_common(p: argparse.ArgumentParser, with_method: bool = True) -> None:
    p.add_argument("--problem", choices=("heat", "monodomain"), default="heat")
    if with_method:
        p.add_argument("--method", choices=METHODS, default="smg")
    p.add_argument("-M", "--num-nodes", type=int, default=2, dest="M",
                   help="collocation/DG nodes per time element")
    p.add_argument("--nt", type=int, default=32, help="time elements")
    p.add_argument("--nx", type=int, default=64, help="space elements")
    p.add_argument("-L", "--levels", type=int, default=3, dest="L")
    p.add_argument("--nu", type=int, default=3, help="smoothing iterations / sweeps")
    p.add_argument("-P", "--workers", type=int, default=1, dest="P",
                   help="time partitions (multigrid) or parallel workers (pfasst)")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--mode", choices=("implicit", "imex"), default="",
                   help="sweep mode for pfasst (default: imex when reaction is on)")
    p.add_argument("-o", "--output", default="", help="CSV file to append rows to")


def _config(args: argparse.Namespace, method: str | None = None) -> ExperimentConfig:
    return ExperimentConfig(
        problem=args.problem,
        method=method or getattr(args, "method", "smg"),
        M=args.M, Nt=args.nt, Nx=args.nx, L=args.L, nu=args.nu, P=args.P,
        tol=args.tol, mode=args.mode, cm=getattr(args, "cm", 0),
        output=args.output,
    )


def _row_line(row: dict) -> str:
    status = "converged" if row["converged"] else "n.c."
    err = row["end_error"]
    err_s = f"{err:.3e}" if err == err else "-"
    return (f"{row['method']} M={row['M']} Nt={row['Nt']} Nx={row['Nx']} "
            f"L={row['L']} nu={row['nu']} P={row['P']}: {status} "
            f"[{row['iterations']}] end_error={err_s}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="paradiff",
        description="Parallel-in-time solvers for 1D reaction-diffusion benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one solver configuration")
    _add_common(p_solve)

    p_order = sub.add_parser("order-study", help="temporal accuracy study")
    p_order.add_argument("--nx", type=int, default=256)
    p_order.add_argument("-M", "--num-nodes", type=int, nargs="+",
                         default=[1, 2, 3, 4, 5], dest="M_list")
    p_order.add_argument("-o", "--output", default="order_out",
                         help="directory for CSV and plot-data files")

    p_strong = sub.add_parser("strong-scaling", help="fixed problem, sweep P")
    _add_common(p_strong)
    p_strong.add_argument("--p-list", type=int, nargs="+", default=[1, 2, 4])

    p_weak = sub.add_parser("weak-scaling", help="grow Nt with P (Nt = C_M * P)")
    _add_common(p_weak)
    p_weak.add_argument("--p-list", type=int, nargs="+", default=[1, 2, 4])
    p_weak.add_argument("--cm", type=int, default=0,
                        help="steps per worker (default depends on M)")

    p_cmp = sub.add_parser("compare", help="run SMG and PFASST, check agreement")
    _add_common(p_cmp, with_method=False)
    p_cmp.add_argument("--agree-tol", type=float, default=1e-8)

    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            report, row = run_experiment(_config(args))
            print(_row_line(row))
            return 0 if report.converged else 1

        if args.command == "order-study":
            rows, slopes = order_study(M_values=tuple(args.M_list), Nx=args.nx,
                                       out_dir=args.output)
            for M, slope in slopes.items():
                print(f"M={M}: fitted slope {slope:.3f} (expected {2 * M - 1})")
            return 0

        if args.command in ("strong-scaling", "weak-scaling"):
            rows = scaling_study(
                _config(args), P_values=tuple(args.p_list),
                weak=args.command == "weak-scaling",
            )
            ok = True
            for row in rows:
                print(_row_line(row) + f" R={row['R']:.2f}")
                ok = ok and row["converged"]
            return 0 if ok else 1

        if args.command == "compare":
            agree, diff, rows = compare_methods(_config(args, method="smg"),
                                                agree_tol=args.agree_tol)
            for row in rows:
                print(_row_line(row))
            print(f"final-time max difference: {diff:.3e} "
                  f"({'agree' if agree else 'DISAGREE'})")
            return 0 if agree else 1
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
