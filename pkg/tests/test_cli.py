"""
Tests for the command-line entry point.
"""

import json

import pytest
from click.testing import CliRunner

from app import cli as cli_module
from app.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_VERIFY, cli, parse_intervals, parse_tolerances
from app.schemas.theory import CheckResult, VerificationReport
from app.services import experiment
from app.utils.errors import ConfigError, IncompleteMorse


@pytest.fixture
def runner():
    return CliRunner()


def _simulate(runner, out, *extra):
    return runner.invoke(
        cli,
        [
            "simulate",
            "--ell", "2",
            "--ell", "5",
            "--replicates", "3",
            "--seed", "11",
            "--out", str(out),
            "--workers", "1",
            "--stats", "crit,h2,h4",
            *extra,
        ],
    )


class TestParsing:
    """Tests for flag parsing helpers."""

    def test_intervals(self):
        intervals = parse_intervals("1,inf;-inf,0.5;-1,1")
        assert intervals[0].lo == 1.0 and intervals[0].hi is None
        assert intervals[1].lo is None and intervals[1].hi == 0.5
        assert (intervals[2].lo, intervals[2].hi) == (-1.0, 1.0)

    def test_malformed_interval(self):
        with pytest.raises(ConfigError):
            parse_intervals("1,2,3")

    def test_tolerances(self):
        assert parse_tolerances(["sigma=1e-10", "integrals=0.2"]) == {"sigma": 1e-10, "integrals": 0.2}

    @pytest.mark.parametrize("item", ["1e-6", "everything=1", "sigma=abc", "sigma=-1"])
    def test_malformed_tolerance(self, item):
        with pytest.raises(ConfigError):
            parse_tolerances([item])


class TestSimulate:
    """Tests for the simulate command."""

    def test_writes_outputs(self, runner, tmp_path):
        result = _simulate(runner, tmp_path / "run")
        assert result.exit_code == 0, result.output
        assert "6 rows written" in result.output
        assert (tmp_path / "run" / "rows.csv").exists()
        assert (tmp_path / "run" / "summary.json").exists()

    def test_config_file(self, runner, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"ells": [3], "replicates": 2, "stats": ["h2"]}))
        result = runner.invoke(
            cli, ["simulate", "--config", str(config), "--out", str(tmp_path / "run"), "--workers", "1"]
        )
        assert result.exit_code == 0, result.output
        assert "2 rows written" in result.output

    def test_single_replicate_is_a_config_error(self, runner, tmp_path):
        result = _simulate(runner, tmp_path / "run", "--replicates", "1")
        assert result.exit_code == EXIT_CONFIG

    def test_bad_interval_is_a_config_error(self, runner, tmp_path):
        result = _simulate(runner, tmp_path / "run", "--intervals", "2,1")
        assert result.exit_code == EXIT_CONFIG

    def test_budget_exit_code(self, runner, tmp_path, monkeypatch):
        def incomplete(field, grid_factor=None):
            raise IncompleteMorse(1, 0, 0, grid_factor or 0)

        monkeypatch.setattr(experiment, "locate_critical_points", incomplete)
        result = _simulate(runner, tmp_path / "run")
        assert result.exit_code == EXIT_BUDGET


class TestCritpoints:
    """Tests for the critpoints command."""

    def test_summary_line(self, runner):
        result = runner.invoke(cli, ["critpoints", "--ell", "2", "--seed", "7"])
        assert result.exit_code == 0
        assert "ell=2 seed=7: 6 critical points" in result.output
        assert "2 minima, 2 saddles, 2 maxima" in result.output

    def test_json_dump(self, runner):
        result = runner.invoke(cli, ["critpoints", "--ell", "2", "--seed", "7", "--dump", "json"])
        assert result.exit_code == 0
        points = json.loads(result.output)
        assert len(points) == 6
        assert {p["kind"] for p in points} == {"minimum", "saddle", "maximum"}

    def test_csv_dump(self, runner):
        result = runner.invoke(cli, ["critpoints", "--ell", "2", "--seed", "7", "--dump", "csv"])
        assert result.exit_code == 0
        assert len(result.output.strip().splitlines()) == 7

    def test_coarse_grid(self, runner):
        result = runner.invoke(cli, ["critpoints", "--ell", "2", "--seed", "7", "--grid-factor", "4"])
        assert result.exit_code == EXIT_CONFIG


class TestVerify:
    """Tests for the verify command."""

    def test_cheap_suites_pass(self, runner):
        result = runner.invoke(cli, ["verify", "sigma", "densities"])
        assert result.exit_code == 0, result.output
        assert "FAIL" not in result.output
        assert result.output.count("PASS") == 10

    def test_failure_exit_code(self, runner, monkeypatch):
        def failing(name, mc_samples=None, tol=None):
            check = CheckResult(
                suite=name, name="forced", expected=0.0, observed=1.0, tolerance=0.0, passed=False
            )
            return VerificationReport(suite=name, checks=[check])

        monkeypatch.setattr(cli_module, "run_suite", failing)
        result = runner.invoke(cli, ["verify", "sigma"])
        assert result.exit_code == EXIT_VERIFY
        assert "FAIL" in result.output

    def test_unknown_suite(self, runner):
        result = runner.invoke(cli, ["verify", "everything"])
        assert result.exit_code != 0

    def test_tolerance_goes_to_its_suite(self, runner, monkeypatch):
        seen = {}

        def recording(name, mc_samples=None, tol=None):
            seen[name] = tol
            return VerificationReport(suite=name, checks=[])

        monkeypatch.setattr(cli_module, "run_suite", recording)
        result = runner.invoke(cli, ["verify", "sigma", "densities", "--tol", "sigma=1e-10"])
        assert result.exit_code == 0, result.output
        assert seen == {"sigma": 1e-10, "densities": None}

    def test_tolerance_is_reported(self, runner):
        result = runner.invoke(cli, ["verify", "sigma", "--tol", "sigma=1e-10"])
        assert result.exit_code == 0, result.output
        assert result.output.count("tol=1e-10") == 5

    def test_bare_tolerance_is_a_config_error(self, runner):
        result = runner.invoke(cli, ["verify", "sigma", "--tol", "1e-10"])
        assert result.exit_code == EXIT_CONFIG


class TestCorrelateAndReport:
    """Tests for commands reading a finished run."""

    @pytest.fixture
    def run_dir(self, runner, tmp_path):
        out = tmp_path / "run"
        assert _simulate(runner, out).exit_code == 0
        return out

    def test_correlate(self, runner, run_dir):
        result = runner.invoke(cli, ["correlate", "--in", str(run_dir), "--pairs", "h4:A"])
        assert result.exit_code == 0, result.output
        lines = result.output.strip().splitlines()
        assert lines[0] == "ell,x,y,rho,rho2,stderr"
        assert len(lines) == 3
        ell, x, y, rho, rho2, stderr = lines[1].split(",")
        assert (ell, x, y) == ("2", "h4", "A_ell")
        assert float(rho) == pytest.approx(-1.0)
        assert stderr == ""

    def test_correlate_constant_column(self, runner, run_dir):
        result = runner.invoke(cli, ["correlate", "--in", str(run_dir), "--pairs", "ncrit:h4"])
        assert result.exit_code == EXIT_CONFIG

    def test_report_json(self, runner, run_dir):
        result = runner.invoke(cli, ["report", "--in", str(run_dir), "--format", "json"])
        assert result.exit_code == 0
        records = json.loads(result.output)
        assert {r["kind"] for r in records} == {"sample", "prediction"}
