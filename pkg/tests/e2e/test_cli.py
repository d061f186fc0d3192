"""End-to-end tests of the plapbranch command line."""

import math
import os
import sys

import pytest
from typer.testing import CliRunner

from plapbranch import __version__
from plapbranch.cli.main import app, main
from plapbranch.pipeline.validate import CheckResult, ValidationReport
from tests.utils.test_helpers import (
    assert_valid_csv_output,
    assert_valid_json_output,
    load_test_fixture,
)

pytestmark = pytest.mark.e2e

PI_SQ = math.pi**2


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def cli_env(clean_environment, temp_dir):
    """Coarse meshes and an output directory under the test's temp dir."""
    os.environ["PLAPBRANCH_OUT_DIR"] = str(temp_dir / "output")
    os.environ["PLAPBRANCH_N"] = "8"
    os.environ["PLAPBRANCH_MAX_ITERS"] = "20000"
    os.environ["PLAPBRANCH_TOL_GRAD"] = "1e-9"
    os.environ["PLAPBRANCH_LOG_LEVEL"] = "WARNING"
    return temp_dir


class TestBasics:
    def test_version(self, runner):
        result = runner.invoke(app, ["version"])
        assert result.exit_code == 0
        assert f"plapbranch {__version__}" in result.output

    def test_help_lists_commands(self, runner):
        result = runner.invoke(app, ["--help"])
        assert result.exit_code == 0
        for command in ("eig1", "branch", "deriv", "numvalues", "crossing", "diagram"):
            assert command in result.output

    def test_config_show_key(self, runner, cli_env):
        result = runner.invoke(app, ["config", "show", "n"])
        assert result.exit_code == 0
        assert "n: 8" in result.output

    def test_config_file(self, runner, cli_env):
        path = load_test_fixture("config.yaml")
        result = runner.invoke(app, ["--config", str(path), "config", "show", "p"])
        assert result.exit_code == 0
        assert "p: 3.0" in result.output

    def test_config_unknown_key(self, runner, cli_env):
        result = runner.invoke(app, ["config", "show", "colour"])
        assert result.exit_code == 1
        assert "not found" in result.output

    def test_invalid_config_file(self, runner, cli_env):
        path = load_test_fixture("invalid_config.yaml")
        result = runner.invoke(app, ["--config", str(path), "config", "show"])
        assert result.exit_code == 1


class TestEig1:
    def test_square(self, runner, cli_env):
        out = cli_env / "eig1.json"
        result = runner.invoke(app, ["eig1", "--p", "2", "--out", str(out)])
        assert result.exit_code == 0, result.output
        data = assert_valid_json_output(out)
        assert data["converged"] is True
        assert data["lambda"] == pytest.approx(2 * PI_SQ, rel=5e-2)
        sidecar = assert_valid_json_output(cli_env / "eig1.manifest.json")
        assert sidecar["hash"] == data["manifest"]
        assert sidecar["solves"][0]["label"] == "lambda1"

    def test_triangle_default_output(self, runner, cli_env):
        result = runner.invoke(app, ["eig1", "--domain", "tri", "--p", "2.5"])
        assert result.exit_code == 0, result.output
        data = assert_valid_json_output(cli_env / "output" / "eig1.json")
        assert data["domain"]["kind"] == "triangle"
        assert list(data["symmetry_defects"]) == ["swap"]

    def test_invalid_exponent(self, runner, cli_env):
        result = runner.invoke(app, ["eig1", "--p", "0.5"])
        assert result.exit_code == 1
        assert "p must exceed 1" in result.output

    def test_richardson_needs_fine_mesh(self, runner, cli_env):
        result = runner.invoke(app, ["eig1", "--richardson"])
        assert result.exit_code == 1
        assert "--richardson needs n >= 16" in result.output

    def test_mesh_dump(self, runner, cli_env):
        dump = cli_env / "square.mesh"
        result = runner.invoke(app, ["eig1", "--dump-mesh", str(dump)])
        assert result.exit_code == 0, result.output
        assert dump.read_text().startswith("# domain: ")

    def test_non_convergence_exit_code(self, runner, cli_env):
        os.environ["PLAPBRANCH_MAX_ITERS"] = "1"
        result = runner.invoke(app, ["-q", "eig1", "--p", "3"])
        assert result.exit_code == 2
        assert "did not converge" in result.output


class TestBranch:
    ARGS = [
        "branch",
        "--label", "boxbar",
        "--label", "boxminus",
        "--a", "1.1",
        "--p-from", "2.0",
        "--p-to", "2.1",
        "--step", "0.1",
    ]

    def test_csv(self, runner, cli_env):
        out = cli_env / "branch.csv"
        result = runner.invoke(app, self.ARGS + ["--out", str(out)])
        assert result.exit_code == 0, result.output
        digest, rows = assert_valid_csv_output(out)
        assert [row.split(",")[0] for row in rows] == ["boxbar"] * 2 + ["boxminus"] * 2
        assert all(row.endswith(",true") for row in rows)
        assert assert_valid_json_output(cli_env / "branch.manifest.json")["hash"] == digest

    def test_identical_runs_give_identical_bytes(self, runner, cli_env):
        first, second = cli_env / "first.csv", cli_env / "second.csv"
        assert runner.invoke(app, self.ARGS + ["--out", str(first)]).exit_code == 0
        assert runner.invoke(app, self.ARGS + ["--out", str(second)]).exit_code == 0
        assert first.read_bytes() == second.read_bytes()

    def test_threads_do_not_change_results(self, runner, cli_env):
        serial, threaded = cli_env / "serial.csv", cli_env / "threaded.csv"
        assert runner.invoke(app, self.ARGS + ["--out", str(serial)]).exit_code == 0
        result = runner.invoke(app, self.ARGS + ["--threads", "2", "--out", str(threaded)])
        assert result.exit_code == 0
        assert serial.read_bytes() == threaded.read_bytes()

    def test_unknown_label(self, runner, cli_env):
        result = runner.invoke(app, ["branch", "--label", "lambda9", "--p-to", "1.6"])
        assert result.exit_code == 1

    def test_decreasing_grid(self, runner, cli_env):
        result = runner.invoke(app, ["branch", "--p-from", "2.0", "--p-to", "1.5"])
        assert result.exit_code == 1


class TestDerivativesAndQuadrature:
    def test_deriv_in_p(self, runner, cli_env):
        out = cli_env / "deriv.json"
        result = runner.invoke(
            app, ["deriv", "--label", "lambda1", "--p", "2.5", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        data = assert_valid_json_output(out)
        assert data["value"] == pytest.approx(data["fd_value"], rel=1e-3)
        assert data["log_bracket"] == pytest.approx(2.5 * data["value"])

    def test_deriv_without_formula(self, runner, cli_env):
        result = runner.invoke(app, ["deriv", "--label", "boxbslash", "--wrt", "a"])
        assert result.exit_code == 1

    def test_numvalues_single(self, runner, cli_env):
        out = cli_env / "numvalues.json"
        result = runner.invoke(
            app, ["numvalues", "--which", "halfsquare", "--tol", "1", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        data = assert_valid_json_output(out)
        assert data["which"] == "halfsquare"
        assert data["value"] == pytest.approx(176.0407, abs=2.0)

    def test_numvalues_budget(self, runner, cli_env):
        result = runner.invoke(
            app, ["numvalues", "--tol", "1e-12", "--max-evaluations", "1000"]
        )
        assert result.exit_code == 2
        assert "budget exhausted" in result.output

    def test_crossing_without_sign_change(self, runner, cli_env):
        result = runner.invoke(
            app,
            [
                "crossing",
                "--branch-a", "boxbar",
                "--branch-b", "boxminus",
                "--bracket", "1.8", "2.2",
            ],
        )
        assert result.exit_code == 2
        assert "No sign change" in result.output


class TestAsymptoticsCommands:
    def test_packing_closed_form(self, runner, cli_env):
        out = cli_env / "packing.json"
        result = runner.invoke(app, ["packing", "--p", "40", "--no-numeric", "--out", str(out)])
        assert result.exit_code == 0, result.output
        data = assert_valid_json_output(out)
        assert data["closed_form"] == pytest.approx(4.66, rel=1e-2)
        assert data["numeric"] is None
        assert len(data["centers"]) == 3

    def test_limit_scan(self, runner, cli_env):
        out = cli_env / "limit.json"
        result = runner.invoke(
            app,
            ["limit", "--a", "1", "--b", "0.5", "--p", "2", "--p", "3", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        data = assert_valid_json_output(out)
        assert data["limit"] == pytest.approx(4.0)
        assert all(row["root"] > row["strip_bound"] for row in data["scan"])

    def test_diagram(self, runner, cli_env):
        out = cli_env / "diagram.svg"
        result = runner.invoke(
            app,
            ["diagram", "--p-from", "2.0", "--p-to", "2.1", "--step", "0.1", "--lin", "2",
             "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert "<svg" in out.read_text()
        digest, rows = assert_valid_csv_output(cli_env / "diagram.csv")
        labels = [row.split(",")[0] for row in rows]
        assert labels == ["boxbar"] * 2 + ["boxminus"] * 2 + ["boxbslash"] * 2 + ["lin-1", "lin-2"]
        assert assert_valid_json_output(cli_env / "diagram.manifest.json")["hash"] == digest


class TestValidate:
    def test_selected_checks(self, runner, cli_env):
        out = cli_env / "validate.json"
        result = runner.invoke(
            app,
            [
                "validate",
                "--check", "homogeneity",
                "--check", "closed-form-norm",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        data = assert_valid_json_output(out)
        assert [c["name"] for c in data["checks"]] == ["homogeneity", "closed-form-norm"]

    def test_failed_check_exit_code(self, runner, cli_env, mocker):
        report = ValidationReport(
            n=8, checks=[CheckResult(name="scaling", passed=False, detail="off by 1e-3")]
        )
        mocker.patch("plapbranch.cli.main.run_validation", return_value=report)
        result = runner.invoke(app, ["validate"])
        assert result.exit_code == 3
        assert "scaling: off by 1e-3" in result.output

    def test_unknown_check(self, runner, cli_env):
        result = runner.invoke(app, ["validate", "--check", "telepathy"])
        assert result.exit_code == 1


class TestEntryPoint:
    def test_unknown_option_is_usage_error(self, monkeypatch, cli_env):
        monkeypatch.setattr(sys, "argv", ["plapbranch", "eig1", "--colour", "red"])
        with pytest.raises(SystemExit) as exc:
            main()
        assert exc.value.code == 1

    def test_success(self, monkeypatch, cli_env):
        monkeypatch.setattr(sys, "argv", ["plapbranch", "version"])
        with pytest.raises(SystemExit) as exc:
            main()
        assert exc.value.code == 0

    def test_numerical_failure(self, monkeypatch, cli_env):
        monkeypatch.setattr(
            sys, "argv", ["plapbranch", "numvalues", "--tol", "1e-12", "--max-evaluations", "1000"]
        )
        with pytest.raises(SystemExit) as exc:
            main()
        assert exc.value.code == 2
