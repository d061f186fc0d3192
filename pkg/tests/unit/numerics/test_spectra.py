"""Tests for named branches, closed-form spectra, partition bounds and crossings."""

import math

import pytest

from plapbranch.models.domain import DomainKind
from plapbranch.models.errors import (
    InvalidExponentError,
    NoSignChangeError,
    UnsupportedError,
    ValidationError,
)
from plapbranch.numerics.spectra import (
    BranchEvaluator,
    carrier_domain,
    comparison_gap,
    detect_crossing,
    interval_spectrum,
    lambda1_rect,
    lambda2_partition,
    lambda2_upper,
    lambda_boxbar,
    lambda_boxminus,
    linear_branches,
    linear_spectrum,
    pi_p,
    sample_branch,
)

PI_SQ = math.pi**2


@pytest.mark.unit
class TestClosedForms:
    def test_linear_spectrum_square(self):
        values = linear_spectrum(1.0, 4)
        assert [(i, j) for _, i, j in values] == [(1, 1), (1, 2), (2, 1), (2, 2)]
        assert [v / PI_SQ for v, _, _ in values] == pytest.approx([2.0, 5.0, 5.0, 8.0])

    def test_linear_spectrum_long_rectangle(self):
        values = linear_spectrum(3.0, 3)
        # the first modes vary along the long side only
        assert [(i, j) for _, i, j in values] == [(1, 1), (2, 1), (3, 1)]

    def test_linear_spectrum_errors(self):
        with pytest.raises(ValidationError):
            linear_spectrum(0.0, 2)
        with pytest.raises(ValidationError):
            linear_spectrum(1.0, 0)

    def test_pi_p(self):
        assert pi_p(2.0) == pytest.approx(math.pi)
        assert pi_p(1e6) == pytest.approx(2.0, rel=1e-5)
        with pytest.raises(InvalidExponentError):
            pi_p(1.0)

    @pytest.mark.parametrize("p", [1.5, 3.0, 7.0])
    def test_pi_p_conjugate_relation(self, p):
        assert pi_p(p / (p - 1.0)) == pytest.approx((p - 1.0) * pi_p(p), rel=1e-12)

    def test_interval_spectrum(self):
        assert interval_spectrum(2.0, 1.0) == pytest.approx(PI_SQ)
        assert interval_spectrum(2.0, 1.0, k=2) == pytest.approx(4 * PI_SQ)
        p = 3.5
        assert interval_spectrum(p, 2.0) == pytest.approx(2.0 ** (-p) * interval_spectrum(p, 1.0))

    def test_interval_spectrum_errors(self):
        with pytest.raises(ValidationError):
            interval_spectrum(2.0, 0.0)
        with pytest.raises(ValidationError):
            interval_spectrum(2.0, 1.0, k=0)


@pytest.mark.unit
class TestCarriers:
    def test_carrier_shapes(self):
        assert (carrier_domain("lambda1", 1.3).a, carrier_domain("lambda1", 1.3).b) == (1.3, 1.0)
        assert (carrier_domain("boxbar", 1.3).a, carrier_domain("boxbar", 1.3).b) == (0.65, 1.0)
        assert (carrier_domain("boxminus", 1.3).a, carrier_domain("boxminus", 1.3).b) == (0.5, 1.3)
        assert carrier_domain("boxbslash", 1.0).kind is DomainKind.TRIANGLE

    def test_diagonal_branch_needs_square(self):
        with pytest.raises(UnsupportedError, match="only on the square"):
            carrier_domain("boxbslash", 1.1)

    def test_unknown_label(self):
        with pytest.raises(UnsupportedError, match="Unknown branch"):
            carrier_domain("boxslash", 1.0)

    def test_square_branches_share_mesh(self, fast_options):
        bar = lambda_boxbar(2.5, 1.0, 8, fast_options)
        minus = lambda_boxminus(2.5, 1.0, 8, fast_options)
        assert bar.lambda_ == minus.lambda_
        assert comparison_gap(2.5, 1.0, 8, fast_options) == 0.0

    def test_boxminus_is_scaled_rectangle(self, fast_options):
        p, a = 3.0, 1.25
        minus = lambda_boxminus(p, a, 16, fast_options)
        # (0, a) x (0, 1/2) is half of (0, 2a) x (0, 1)
        doubled = lambda1_rect(p, 1.0, 2 * a, 8, fast_options)
        assert minus.lambda_ == pytest.approx(2.0**p * doubled.lambda_, rel=1e-7)

    def test_linear_boxbar(self, fast_options):
        res = lambda_boxbar(2.0, 1.0, 16, fast_options)
        assert res.lambda_ == pytest.approx(5 * PI_SQ, rel=3e-2)
        assert "boxbar" in res.note

    def test_evaluator_warm_starts(self, fast_options):
        evaluator = BranchEvaluator("boxbar", 1.0, 8, fast_options)
        first = evaluator(2.0)
        second = evaluator(2.2)
        assert evaluator.calls == 2
        assert second.lambda_ != first.lambda_


@pytest.mark.unit
class TestPartitionBound:
    def test_square_linear_bound(self, fast_options):
        bound = lambda2_partition(2.0, 1.0, 8, opts=fast_options, scan_points=3)
        # discrete pieces overestimate their continuous eigenvalue
        assert bound.value >= 5 * PI_SQ
        assert bound.value == pytest.approx(5 * PI_SQ, rel=0.1)
        assert bound.family in ("vertical", "horizontal", "diagonal")

    def test_upper_returns_value(self, fast_options):
        value = lambda2_upper(2.0, 1.0, 8, family="diagonal", opts=fast_options)
        assert value == lambda2_partition(2.0, 1.0, 8, "diagonal", fast_options).value

    def test_vertical_cut_near_middle(self, fast_options):
        bound = lambda2_partition(
            2.0, 1.0, 8, family="vertical", opts=fast_options, scan_points=3, golden_iters=0
        )
        assert bound.cut == pytest.approx(0.5)
        assert bound.evaluations >= 2

    def test_family_errors(self):
        with pytest.raises(UnsupportedError, match="Unknown partition family"):
            lambda2_partition(2.0, 1.0, 8, family="radial")
        with pytest.raises(UnsupportedError, match="only on the square"):
            lambda2_partition(2.0, 1.2, 8, family="diagonal")
        with pytest.raises(ValidationError):
            lambda2_partition(2.0, 1.0, 8, scan_points=0)

    def test_too_coarse(self):
        with pytest.raises(UnsupportedError, match="too coarse"):
            lambda2_partition(2.0, 1.0, 4, family="vertical", scan_points=2)


@pytest.mark.unit
class TestCrossing:
    def test_identical_branches_have_no_sign_change(self, fast_options):
        with pytest.raises(NoSignChangeError) as exc:
            detect_crossing("boxbar", "boxminus", 1.0, (1.8, 2.2), 1e-3, 8, fast_options)
        assert exc.value.details["bracket"] == [1.8, 2.2]

    def test_argument_errors(self):
        with pytest.raises(ValidationError, match="cannot cross itself"):
            detect_crossing("boxbar", "boxbar", 1.0, (1.5, 2.5), 1e-3, 8)
        with pytest.raises(InvalidExponentError):
            detect_crossing("boxbar", "boxminus", 1.0, (1.0, 2.5), 1e-3, 8)
        with pytest.raises(ValidationError, match="increasing"):
            detect_crossing("boxbar", "boxminus", 1.0, (2.5, 1.5), 1e-3, 8)
        with pytest.raises(ValidationError):
            detect_crossing("boxbar", "boxminus", 1.0, (1.5, 2.5), 0.0, 8)


@pytest.mark.unit
class TestSampling:
    def test_lambda1_branch(self, fast_options):
        br = sample_branch("lambda1", 1.2, [1.8, 2.0], 8, fast_options)
        assert br.label == "lambda1"
        assert br.a == 1.2
        assert br.ps == [1.8, 2.0]
        assert all(s.converged for s in br.samples)

    def test_carrier_branch_reports_rectangle_side(self, fast_options):
        br = sample_branch("boxbar", 1.2, [2.0], 8, fast_options)
        assert br.a == 1.2
        assert br.samples[0].lambda_ == pytest.approx(
            lambda_boxbar(2.0, 1.2, 8, fast_options).lambda_, rel=1e-9
        )

    def test_partition_branch(self, fast_options):
        br = sample_branch("lambda2-ub", 1.0, [2.0], 8, fast_options, scan_points=3)
        sample = br.samples[0]
        assert sample.converged
        assert sample.iterations >= 1
        assert sample.lambda_ >= 5 * PI_SQ

    def test_partition_branch_checks_grid(self):
        with pytest.raises(ValidationError):
            sample_branch("lambda2-ub", 1.0, [2.0, 1.9], 8)

    def test_diagonal_branch_on_rectangle(self):
        with pytest.raises(UnsupportedError):
            sample_branch("boxbslash", 1.2, [2.0], 8)

    def test_linear_branches(self):
        branches = linear_branches(1.0, 3)
        assert [b.label for b in branches] == ["lin-1", "lin-2", "lin-3"]
        assert [b.samples[0].lambda_ / PI_SQ for b in branches] == pytest.approx([2, 5, 5])
        assert all(b.ps == [2.0] for b in branches)
