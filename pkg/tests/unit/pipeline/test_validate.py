"""Tests for the invariant check suite."""

import math

import pytest

from plapbranch.models.errors import UnconvergedError, ValidationError
from plapbranch.models.options import SolveOptions
from plapbranch.pipeline import validate
from plapbranch.pipeline.validate import (
    CHECKS,
    CheckResult,
    ValidationReport,
    check_derivative_gap,
    check_gradient,
    check_linear_branches,
    check_sandwich,
    check_side_derivative_sign,
    check_square_orderings,
    check_symmetry,
    run_validation,
)


@pytest.mark.unit
class TestChecks:
    def test_cheap_checks_pass(self, fast_options):
        report = run_validation(
            n=8,
            opts=fast_options,
            only=["homogeneity", "closed-form-norm", "comparison-identity", "packing"],
        )
        assert [c.name for c in report.checks] == [
            "homogeneity",
            "closed-form-norm",
            "comparison-identity",
            "packing",
        ]
        assert report.passed, report.failures

    def test_gradient_check(self, fast_options):
        result = check_gradient(8, fast_options, fields=8)
        assert result.passed
        assert result.value < 1e-5

    def test_threads_keep_order(self, fast_options):
        names = ["closed-form-norm", "homogeneity"]
        report = run_validation(n=8, opts=fast_options, only=names, threads=2)
        assert [c.name for c in report.checks] == names

    def test_unknown_check(self):
        with pytest.raises(ValidationError, match="Unknown checks"):
            run_validation(only=["homogeneity", "telepathy"])

    def test_all_checks_registered(self):
        assert set(CHECKS) == {
            "homogeneity",
            "gradient",
            "closed-form-norm",
            "packing",
            "linear-square",
            "linear-branches",
            "scaling",
            "comparison-identity",
            "descent",
            "sandwich",
            "symmetry",
            "side-derivative-sign",
            "derivative-gap",
            "square-orderings",
            "crossing",
            "limit-scan",
        }


@pytest.mark.unit
class TestReport:
    def test_errors_become_failures(self, monkeypatch):
        def exploding(n: int, opts: SolveOptions) -> CheckResult:
            raise UnconvergedError("no luck")

        monkeypatch.setitem(validate.CHECKS, "homogeneity", exploding)
        report = run_validation(n=8, only=["homogeneity"])
        assert not report.passed
        assert report.failures[0].detail == "UNCONVERGED: no luck"

    def test_failures(self):
        report = ValidationReport(
            n=8,
            checks=[
                CheckResult(name="a", passed=True),
                CheckResult(name="b", passed=False, detail="off"),
            ],
        )
        assert not report.passed
        assert [c.name for c in report.failures] == ["b"]
        assert ValidationReport(n=8).passed


@pytest.mark.unit
class TestInvariantChecks:
    def test_sandwich(self, fast_options):
        result = check_sandwich(8, fast_options)
        assert result.passed, result.detail

    def test_symmetry(self, fast_options):
        result = check_symmetry(8, fast_options)
        assert result.passed, result.detail
        assert result.value <= 1e-6

    def test_side_derivatives_negative(self, fast_options):
        result = check_side_derivative_sign(8, fast_options)
        assert result.passed
        assert result.value < 0

    def test_derivative_gap_detects_drift(self, monkeypatch, fast_options):
        monkeypatch.setattr(validate, "derivative_gap", lambda target_err: 3.9)
        result = check_derivative_gap(8, fast_options)
        assert not result.passed
        assert result.value == 3.9

    def test_orderings_detect_swapped_branches(self, monkeypatch, fast_options):
        values = {"boxbar": 50.0, "boxbslash": 49.0}

        class Fixed:
            def __init__(self, label):
                self.lambda_ = values[label]

        monkeypatch.setattr(
            validate, "branch_value", lambda label, p, a, n, opts: Fixed(label)
        )
        result = check_square_orderings(8, fast_options)
        assert not result.passed
        assert "p=1.8" in result.detail

    def test_failed_invariant_fails_report(self, monkeypatch, fast_options):
        monkeypatch.setattr(validate, "derivative_gap", lambda target_err: 0.0)
        report = run_validation(
            n=8, opts=fast_options, only=["homogeneity", "derivative-gap"]
        )
        assert not report.passed
        assert [c.name for c in report.failures] == ["derivative-gap"]

    def test_linear_branches_uses_flat_tolerance(self, monkeypatch, fast_options):
        exact = {"boxbar": math.pi**2 * (4 / 1.05**2 + 1)}
        exact["boxminus"] = math.pi**2 * (1 / 1.05**2 + 4)

        class Off:
            def __init__(self, label):
                self.lambda_ = exact[label] * (1 + 1.5e-3)

        monkeypatch.setattr(
            validate, "branch_value", lambda label, p, a, n, opts: Off(label)
        )
        result = check_linear_branches(64, fast_options)
        assert result.value == pytest.approx(1.5e-3, rel=1e-6)
        assert not result.passed


@pytest.mark.slow
class TestSlowInvariants:
    @pytest.mark.parametrize(
        "name", ["square-orderings", "crossing", "limit-scan", "derivative-gap"]
    )
    def test_passes(self, fast_options, name):
        report = run_validation(n=32, opts=fast_options, only=[name])
        assert report.passed, report.failures


@pytest.mark.slow
def test_full_suite(fast_options):
    report = run_validation(n=32, opts=fast_options)
    assert report.passed, report.failures
