"""Fine-mesh reproductions of the reference values (slow)."""

import math

import numpy as np
import pytest

from plapbranch.models.domain import DomainSpec
from plapbranch.models.options import SolveOptions
from plapbranch.numerics.asymptotics import (
    closed_form_bound,
    infinity_limit_scan,
    packing_bound,
    strip_bound,
)
from plapbranch.numerics.calculus import (
    branch_dp,
    branch_fd_derivative,
    dboxbar_da,
    dboxminus_da,
    dcomparison_gap_da,
    derivative_gap,
    dlambda1_da,
    log_bracket,
    numvalues_quadrature,
)
from plapbranch.numerics.eigsolve import extrapolate_lambda1, solve_domain
from plapbranch.numerics.spectra import (
    branch_value,
    comparison_gap,
    detect_crossing,
    lambda2_upper,
)

pytestmark = [pytest.mark.integration, pytest.mark.slow]

PI_SQ = math.pi**2
FINE = 128


@pytest.fixture(scope="module")
def opts():
    return SolveOptions(max_iters=50_000, tol_lambda=1e-12, tol_grad=1e-10)


class TestQuadratureConstants:
    def test_log_brackets(self):
        half = numvalues_quadrature("halfsquare", 1e-3)
        tri = numvalues_quadrature("triangle", 1e-3)
        assert half.value == pytest.approx(176.0407, abs=1e-2)
        assert tri.value == pytest.approx(171.8571, abs=1e-2)
        assert half.value - tri.value == pytest.approx(4.18, abs=0.02)

    def test_gap_helper(self):
        assert derivative_gap(1e-3) == pytest.approx(4.18, abs=0.02)


class TestLinearOracles:
    def test_extrapolated_square(self, opts):
        value, order, _ = extrapolate_lambda1(
            DomainSpec.rectangle(1.0, 1.0), 2.0, (32, 64, FINE), opts
        )
        assert value == pytest.approx(2 * PI_SQ, rel=1e-3)
        assert order == pytest.approx(2.0, abs=0.3)

    @pytest.mark.parametrize("a", [1.0, 1.05, 1.2])
    def test_half_domain_branches(self, opts, a):
        bar = branch_value("boxbar", 2.0, a, FINE, opts).lambda_
        minus = branch_value("boxminus", 2.0, a, FINE, opts).lambda_
        assert bar == pytest.approx(PI_SQ * (4 / a**2 + 1), rel=1e-3)
        assert minus == pytest.approx(PI_SQ * (1 / a**2 + 4), rel=1e-3)

    def test_second_eigenvalue_bound(self, opts):
        value = lambda2_upper(2.0, 1.0, FINE, opts=opts, scan_points=3)
        assert value == pytest.approx(5 * PI_SQ, rel=1e-3)


class TestDerivatives:
    @pytest.mark.parametrize("p,a", [(2.0, 1.0), (2.0, 1.2), (2.5, 1.0), (2.5, 1.2)])
    def test_formula_against_difference(self, opts, p, a):
        value, _ = branch_dp("lambda1", p, a, FINE, opts)
        fd = branch_fd_derivative("lambda1", p, a, FINE, step=1e-3, opts=opts)
        assert value == pytest.approx(fd, rel=1e-2)

    def test_log_bracket_on_carriers(self, opts):
        _, bar = branch_dp("boxbar", 2.0, 1.0, FINE, opts)
        _, tri = branch_dp("boxbslash", 2.0, 1.0, FINE, opts)
        assert log_bracket(None, bar) == pytest.approx(176.0, abs=2.0)
        assert log_bracket(None, tri) == pytest.approx(171.9, abs=2.0)

    def test_boxbar_difference_oracle(self, opts):
        fd = branch_fd_derivative("boxbar", 2.0, 1.0, 64, step=1e-2, opts=opts)
        assert fd == pytest.approx(176.04 / 2, rel=3e-2)

    def test_side_derivatives(self, opts):
        res = solve_domain(DomainSpec.rectangle(1.0, 1.0), 2.0, FINE, opts)
        assert dlambda1_da(res) == pytest.approx(-2 * PI_SQ, rel=3e-2)
        assert dboxbar_da(2.0, 1.0, FINE, opts) == pytest.approx(-8 * PI_SQ, rel=3e-2)
        assert dboxminus_da(2.0, 1.0, FINE, opts) == pytest.approx(-2 * PI_SQ, rel=3e-2)
        assert dcomparison_gap_da(2.0, 1.0, FINE, opts) == pytest.approx(6 * PI_SQ, rel=3e-2)


class TestOrderings:
    def test_square_branches_swap_at_two(self, opts):
        below = {p: branch_value("boxbslash", p, 1.0, FINE, opts).lambda_ for p in (1.8, 2.2)}
        bar = {p: branch_value("boxbar", p, 1.0, FINE, opts).lambda_ for p in (1.8, 2.2)}
        assert below[2.2] < bar[2.2]
        assert below[1.8] > bar[1.8]

    @pytest.mark.parametrize("p", [1.8, 2.0, 2.2])
    def test_comparison_positive(self, opts, p):
        assert comparison_gap(p, 1.05, 64, opts) > 0

    def test_comparison_vanishes_on_square(self, opts):
        bar = branch_value("boxbar", 2.7, 1.0, 32, opts).lambda_
        assert abs(comparison_gap(2.7, 1.0, 32, opts)) <= 1e-10 * bar

    def test_crossing_at_two(self, opts):
        report = detect_crossing("boxbar", "boxbslash", 1.0, (1.8, 2.2), 1e-3, FINE, opts)
        assert report.p_star == pytest.approx(2.0, abs=0.05)
        assert report.gap < 1e-2 * report.values_at_p_star[0]


class TestScaling:
    def test_monotonicity_sandwich(self, opts):
        p = 2.5
        square = solve_domain(DomainSpec.rectangle(1.0, 1.0), p, 64, opts).lambda_
        taller = solve_domain(DomainSpec.rectangle(1.0, 1.2), p, 64, opts).lambda_
        assert 1.2 ** (-p) * square < taller < square


class TestAsymptotics:
    def test_half_strip_scan(self, opts):
        d = DomainSpec.rectangle(1.0, 0.5)
        scan = infinity_limit_scan(d, [10.0, 20.0, 40.0], FINE, opts)
        roots = [point.root for point in scan]
        assert all(point.converged for point in scan)
        assert np.all(np.diff(roots) < 0)
        for point in scan:
            assert point.root > strip_bound(point.p, d) > 4.0
        assert roots[-1] == pytest.approx(4.0, rel=0.2)

    def test_packing_bound(self):
        assert closed_form_bound(1e4) == pytest.approx(3.9318, rel=1e-2)
        bound = packing_bound(4.0, n=256)
        assert bound.relative_gap < 2e-2
