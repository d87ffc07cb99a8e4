"""End-to-end tests of the rimflow command line."""

from __future__ import annotations

import json

import pytest

from rimflow import __version__
from rimflow.common.errors import SymmetryError
from rimflow.common.output import read_csv
from rimflow.main import main


class TestParser:
    """Top-level parsing and exit codes."""

    def test_no_command(self, capsys):
        """Without a subcommand the usage goes to stderr."""
        assert main([]) == 2
        assert "usage: rimflow" in capsys.readouterr().err

    def test_version(self, capsys):
        """--version prints and exits cleanly."""
        assert main(["--version"]) == 0
        assert __version__ in capsys.readouterr().out

    def test_unparseable_value(self):
        """argparse errors keep their exit code."""
        assert main(["spectrum", "--gamma", "abc"]) == 2

    def test_invalid_value(self, tmp_path, capsys):
        """Values rejected by validation exit with 2."""
        assert main(["spectrum", "--gamma", "-1", "--out", str(tmp_path)]) == 2
        assert "rimflow: error" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        """A missing config file is a usage error."""
        assert main(["spectrum", "--config", str(tmp_path / "none.cfg")]) == 2


class TestSpectrumCommand:
    """rimflow spectrum."""

    def test_constant_state(self, tmp_path, capsys):
        """At delta = 0 the closed-form spectrum is written."""
        out = tmp_path / "run"
        assert main(["spectrum", "-K", "2", "-L", "2", "--out", str(out), "--json", str(out / "s.json")]) == 0
        assert "3 critical" in capsys.readouterr().out
        _, rows = read_csv(out / "spectrum.csv")
        assert rows.shape[0] == 14
        assert (out / "s.json").exists()

    def test_config_file(self, tmp_path):
        """Config values are defaults; command-line flags win."""
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# small lattice\nK = 2\nL = 2\nout = %s\n" % (tmp_path / "a"), encoding="utf-8")
        assert main(["spectrum", "--config", str(cfg)]) == 0
        assert read_csv(tmp_path / "a" / "spectrum.csv")[1].shape[0] == 14
        assert main(["spectrum", "--config", str(cfg), "-K", "3", "--out", str(tmp_path / "b")]) == 0
        assert read_csv(tmp_path / "b" / "spectrum.csv")[1].shape[0] == 20


class TestSolveFailures:
    """Failures inside a solve exit with 3, bad input with 2."""

    def test_positivity_during_solve(self, tmp_path, capsys):
        """A steady-state seed that leaves the positive cone is a numerical failure."""
        assert main(["spectrum", "--delta", "2.0", "-K", "4", "-L", "2", "--out", str(tmp_path)]) == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_symmetry_during_solve(self, tmp_path, monkeypatch):
        """A reality violation raised by the solver is not a usage error."""

        def broken(*args, **kwargs):
            raise SymmetryError("rhs: relative conjugacy defect 1.0e-06")

        monkeypatch.setattr("rimflow.spectrum.router.newton_steady", broken)
        assert main(["spectrum", "--delta", "0.01", "-K", "4", "-L", "2", "--out", str(tmp_path)]) == 3


class TestSteadyCommand:
    """rimflow steady and spectrum away from delta = 0."""

    def test_steady_with_gravity(self, tmp_path):
        """Newton converges at ell = pi / 2 and writes one state per delta."""
        argv = ["steady", "--m", "1", "--gamma", "1", "--ell", "1.5707963", "--delta", "0.01",
                "-K", "6", "-L", "2", "--out", str(tmp_path)]
        assert main(argv) == 0
        _, rows = read_csv(tmp_path / "steady.csv")
        assert rows.shape[0] == 1
        assert (tmp_path / "steady_0.rff").exists()

    def test_spectrum_with_gravity(self, tmp_path, capsys):
        """The spectrum of a steady state below the critical length has no unstable mode."""
        argv = ["spectrum", "--ell", "1.5707963", "--delta", "0.02", "-K", "6", "-L", "2", "--out", str(tmp_path)]
        assert main(argv) == 0
        assert " 0 unstable" in capsys.readouterr().out


class TestSimulateCommand:
    """rimflow simulate."""

    def test_writes_outputs(self, tmp_path):
        """Trajectory CSV, final field and JSON summary."""
        argv = [
            "simulate", "--init", "preset:cos:1,0=0.05", "-K", "4", "-L", "4",
            "--t-end", "0.05", "--dt", "0.01", "--out", str(tmp_path), "--json", str(tmp_path / "run.json"),
        ]
        assert main(argv) == 0
        assert (tmp_path / "trajectory.csv").exists()
        assert (tmp_path / "final.rff").exists()
        summary = json.loads((tmp_path / "run.json").read_text())
        assert summary["reason"] == "completed"
        assert summary["t_last"] == pytest.approx(0.05)

    def test_negative_initial_film(self, tmp_path):
        """Non-positive initial data is refused."""
        argv = ["simulate", "--init", "preset:cos:1,0=1.5", "-K", "4", "-L", "4", "--out", str(tmp_path)]
        assert main(argv) == 2


class TestSlowOdeCommands:
    """rimflow slow-ode."""

    def test_slow_ode(self, tmp_path):
        """A short fixed-step run."""
        argv = ["slow-ode", "--a1", "0.1+0.05j", "-K", "8", "-L", "8", "--tau-end", "0.05",
                "--dtau", "0.05", "--tol", "0", "--out", str(tmp_path)]
        assert main(argv) == 0
        header, rows = read_csv(tmp_path / "slow_ode.csv")
        assert header == ["tau", "re_a1", "im_a1", "b"]
        assert rows.shape == (2, 4)

    def test_requires_critical_length(self, tmp_path):
        """The reduced ODE is defined at ell = pi only."""
        assert main(["slow-ode", "--ell", "1.5", "--out", str(tmp_path)]) == 2


class TestVerifyCommand:
    """rimflow verify."""

    def test_list(self, capsys):
        """--list prints every check."""
        assert main(["verify", "--list"]) == 0
        out = capsys.readouterr().out
        assert "lambda_closed_form" in out
        assert "fig7_exchange" in out

    def test_list_quick(self, capsys):
        """--quick hides slow checks from the listing."""
        assert main(["verify", "--list", "--quick"]) == 0
        assert "fig7_exchange" not in capsys.readouterr().out

    def test_unknown_check(self, tmp_path):
        """Unknown names are a usage error."""
        assert main(["verify", "--only", "nope", "--out", str(tmp_path)]) == 2

    def test_only(self, tmp_path, capsys):
        """Selected checks run and the report is written."""
        report = tmp_path / "verify.json"
        argv = ["verify", "--only", "lambda_closed_form,instability_eigenvalue",
                "--out", str(tmp_path), "--json", str(report)]
        assert main(argv) == 0
        assert "2/2 checks passed" in capsys.readouterr().out
        payload = json.loads(report.read_text())
        assert [c["status"] for c in payload["checks"]] == ["pass", "pass"]
