"""Harness: experiment runs, CSV output, studies, CLI protocol."""

import csv
import subprocess
import sys

import pytest

from paradiff import ConfigurationError, ExperimentConfig, run_experiment
from paradiff.cli import main as cli_main
from paradiff.harness import (
    CSV_FIELDS,
    compare_methods,
    order_study,
    scaling_study,
)
from paradiff.harness_util import fit_slope


class TestRunExperiment:
    def test_smg_heat_reference_run(self):
        cfg = ExperimentConfig(problem="heat", method="smg", M=2, Nt=32, Nx=64,
                               L=3, nu=3, P=1)
        report, row = run_experiment(cfg)
        assert report.converged
        assert 2 <= report.iterations <= 10
        assert row["method"] == "smg"
        assert row["converged"] is True

    def test_direct_matches_multigrid(self):
        base = dict(problem="heat", M=2, Nt=8, Nx=32, L=3, nu=3, P=1)
        rep_d, row_d = run_experiment(ExperimentConfig(method="direct", **base))
        rep_m, row_m = run_experiment(ExperimentConfig(method="smg", tol=1e-11, **base))
        assert rep_d.iterations == 1
        assert abs(row_d["end_error"] - row_m["end_error"]) < 1e-8

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigurationError):
            run_experiment(ExperimentConfig(method="jacobi"))

    def test_worker_cap_honored(self, monkeypatch):
        monkeypatch.setenv("PARADIFF_MAX_THREADS", "2")
        cfg = ExperimentConfig(method="pfasst", P=4, Nt=16, Nx=32, L=2, nu=1)
        with pytest.raises(ConfigurationError, match="cap"):
            run_experiment(cfg)

    def test_rerun_is_bitwise_reproducible(self):
        cfg = ExperimentConfig(problem="heat", method="smg", M=2, Nt=16, Nx=32,
                               L=3, nu=3, P=1)
        rep1, row1 = run_experiment(cfg)
        rep2, row2 = run_experiment(cfg)
        assert rep1.iterations == rep2.iterations
        assert row1["end_error"] == row2["end_error"]
        assert rep1.residual_history == rep2.residual_history

    def test_csv_row_appended_with_header(self, tmp_path):
        out = tmp_path / "runs.csv"
        cfg = ExperimentConfig(problem="heat", method="direct", M=1, Nt=4, Nx=16,
                               output=str(out))
        run_experiment(cfg)
        run_experiment(cfg)
        with out.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == list(CSV_FIELDS)
        assert len(rows) == 3  # header + one row per run


class TestOrderStudy:
    def test_low_order_slopes(self, tmp_path):
        rows, slopes = order_study(M_values=(1, 2), Nx=64, out_dir=str(tmp_path))
        assert 0.9 <= slopes[1] <= 1.1
        assert 2.7 <= slopes[2] <= 3.3
        assert (tmp_path / "order_study.csv").exists()
        dat = (tmp_path / "order_heat_M1_vs_semidiscrete.dat").read_text()
        assert all(len(line.split()) == 2 for line in dat.strip().splitlines())

    def test_fit_slope_skips_floor_points(self):
        nts = [2, 4, 8, 16]
        errs = [1e-2, 1.25e-3, 1e-13, 9e-14]  # order 3 then roundoff floor
        slope = fit_slope(nts, errs, floor=5e-13)
        assert 2.5 < slope < 3.5


class TestScalingStudy:
    def test_weak_base_row_has_unit_ratio(self):
        cfg = ExperimentConfig(problem="heat", method="pfasst", M=3, Nt=4,
                               Nx=32, L=2, nu=1, cm=4)
        rows = scaling_study(cfg, P_values=(1, 2), weak=True)
        assert rows[0]["R"] == 1.0
        assert rows[1]["Nt"] == 8

    def test_strong_end_error_identical_across_partitions(self):
        cfg = ExperimentConfig(problem="heat", method="smg", M=2, Nt=16,
                               Nx=32, L=3, nu=3, tol=1e-11)
        rows = scaling_study(cfg, P_values=(1, 2, 4), weak=False)
        errs = [row["end_error"] for row in rows]
        for e in errs[1:]:
            assert abs(e - errs[0]) < 1e-8

    def test_weak_pfasst_ratio_stays_moderate(self):
        cfg = ExperimentConfig(problem="heat", method="pfasst", M=3, Nt=4,
                               Nx=64, L=2, nu=1, cm=4)
        rows = scaling_study(cfg, P_values=(1, 2, 4), weak=True)
        assert all(row["converged"] for row in rows)
        assert all(row["R"] < 3.0 for row in rows)


class TestCompare:
    def test_heat_methods_agree(self):
        cfg = ExperimentConfig(problem="heat", M=2, Nt=16, Nx=64, L=3, nu=3,
                               P=1, tol=1e-11)
        agree, diff, rows = compare_methods(cfg)
        assert agree
        assert diff < 1e-8
        assert {row["method"] for row in rows} == {"smg", "pfasst"}


class TestCli:
    def test_solve_exit_zero(self, capsys):
        rc = cli_main(["solve", "--problem", "heat", "--method", "smg",
                       "-M", "2", "--nt", "32", "--nx", "64", "-L", "3",
                       "--nu", "3", "-P", "1"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "converged" in out

    def test_unknown_method_exit_two(self):
        with pytest.raises(SystemExit) as exc:
            cli_main(["solve", "--method", "sor"])
        assert exc.value.code == 2

    def test_invalid_worker_count_exit_two(self):
        rc = cli_main(["solve", "--method", "pfasst", "--nt", "6", "-P", "4",
                       "--nx", "32", "-L", "2"])
        assert rc == 2

    def test_nonconverged_exit_one(self):
        rc = cli_main(["solve", "--problem", "monodomain", "--method", "pfasst",
                       "--mode", "imex", "-M", "4", "--nt", "4", "--nx", "128",
                       "-L", "2", "--nu", "1", "-P", "4"])
        assert rc == 1

    def test_compare_subcommand(self, capsys):
        rc = cli_main(["compare", "--problem", "heat", "-M", "2", "--nt", "16",
                       "--nx", "32", "-L", "3", "--nu", "3", "-P", "1",
                       "--tol", "1e-11"])
        assert rc == 0
        assert "agree" in capsys.readouterr().out

    def test_weak_scaling_subcommand(self, capsys, tmp_path):
        out = tmp_path / "weak.csv"
        rc = cli_main(["weak-scaling", "--method", "pfasst", "-M", "2",
                       "--nx", "32", "-L", "2", "--nu", "1", "--cm", "4",
                       "--p-list", "1", "2", "-o", str(out)])
        assert rc == 0
        assert out.exists()
        assert "R=1.00" in capsys.readouterr().out

    def test_console_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "paradiff.cli", "solve", "--method",
             "direct", "--nt", "4", "--nx", "16", "-M", "1"],
            capture_output=True, text=True, timeout=300,
        )
        assert proc.returncode == 0
        assert "converged" in proc.stdout
