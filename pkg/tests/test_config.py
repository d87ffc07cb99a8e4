"""Tests for shared run parameters, config files and environment settings."""

from __future__ import annotations

import argparse
import math

import pytest
from pydantic import ValidationError

from rimflow.common.config import (
    RunConfig,
    add_common_arguments,
    expand_config,
    float_list,
    read_config_file,
)
from rimflow.common.settings import log_level, matrix_size_cap, worker_count


def _parse(argv):
    p = argparse.ArgumentParser()
    add_common_arguments(p)
    return p.parse_args(argv)


class TestRunConfig:
    """RunConfig built from parsed flags."""

    def test_defaults(self):
        """Unset flags give m = gamma = 1, ell = pi, no gravity."""
        run = RunConfig.from_args(_parse([]))
        assert (run.gamma, run.delta, run.ell, run.m) == (1.0, 0.0, math.pi, 1.0)
        assert run.json_path is None
        assert run.lattice_size(16, 2) == (16, 2)

    def test_explicit_lattice_wins(self):
        """-K/-L override the command's default truncation."""
        run = RunConfig.from_args(_parse(["-K", "12"]))
        assert run.lattice_size(16, 2) == (12, 2)

    def test_params(self):
        """Physical parameters map onto Params."""
        run = RunConfig.from_args(_parse(["--gamma", "2", "--delta", "0.1", "--m", "0.5"]))
        p = run.params
        assert (p.gamma, p.delta, p.mass) == (2.0, 0.1, 0.5)

    @pytest.mark.parametrize("flags", [["--gamma", "0"], ["--delta", "-1"], ["--m", "-0.5"], ["-K", "1"]])
    def test_invalid_values(self, flags):
        """Out-of-range parameters fail validation."""
        with pytest.raises(ValidationError):
            RunConfig.from_args(_parse(flags))

    def test_frozen(self):
        """Run configurations are immutable."""
        run = RunConfig()
        with pytest.raises(ValidationError):
            run.gamma = 2.0


class TestConfigFile:
    """key=value files spliced in front of the command line."""

    def test_read(self, tmp_path):
        """Comments and blank lines are skipped; underscores become dashes."""
        path = tmp_path / "run.cfg"
        path.write_text("# lab run\ngamma = 2\n\nt_end=5  # long\nK=8\n", encoding="utf-8")
        assert read_config_file(path) == {"gamma": "2", "t-end": "5", "K": "8"}

    def test_bad_line(self, tmp_path):
        """Lines without '=' are reported with their line number."""
        path = tmp_path / "run.cfg"
        path.write_text("gamma 2\n", encoding="utf-8")
        with pytest.raises(ValueError, match=":1:"):
            read_config_file(path)

    def test_command_line_wins(self, tmp_path):
        """File flags come right after the subcommand, before explicit flags."""
        path = tmp_path / "run.cfg"
        path.write_text("gamma=2\nK=8\nverbose=true\nquick=no\n", encoding="utf-8")
        argv = expand_config(["simulate", "--config", str(path), "--gamma", "3"])
        assert argv == ["simulate", "--gamma", "2", "-K", "8", "--verbose", "--config", str(path), "--gamma", "3"]

    def test_no_config(self):
        """Without --config the arguments are untouched."""
        assert expand_config(["spectrum", "-K", "4"]) == ["spectrum", "-K", "4"]

    def test_missing_file(self, tmp_path):
        """A missing config file is an error."""
        with pytest.raises(FileNotFoundError):
            expand_config(["simulate", "--config", str(tmp_path / "nope.cfg")])

    def test_float_list(self):
        """Comma-separated values, empty items ignored."""
        assert float_list("0.01, 0.02,") == [0.01, 0.02]


class TestSettings:
    """Environment-driven knobs."""

    def test_worker_count(self, monkeypatch):
        """RIMFLOW_THREADS caps the pool; junk falls back to one worker."""
        monkeypatch.setenv("RIMFLOW_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("RIMFLOW_THREADS", "many")
        assert worker_count() == 1
        monkeypatch.setenv("RIMFLOW_THREADS", "0")
        assert worker_count() == 1

    def test_matrix_size_cap(self, monkeypatch):
        """Default cap is 6000."""
        monkeypatch.delenv("RIMFLOW_MAX_MATRIX", raising=False)
        assert matrix_size_cap() == 6000
        monkeypatch.setenv("RIMFLOW_MAX_MATRIX", "10")
        assert matrix_size_cap() == 10

    def test_log_level(self, monkeypatch):
        """LOG_LEVEL is upper-cased."""
        monkeypatch.setenv("LOG_LEVEL", "debug")
        assert log_level() == "DEBUG"
