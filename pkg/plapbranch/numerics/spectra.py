"""Named eigenvalue branches of rectangles and the square.

The branches whose eigenfunctions are odd across a midline or the diagonal
are first eigenvalues of a half-domain:

* ``boxbar``    - lambda_1 of the half-rectangle (0, a/2) x (0, 1),
* ``boxminus``  - lambda_1 of the half-rectangle (0, a) x (0, 1/2), solved on
  its transpose (0, 1/2) x (0, a) so that a = 1 shares the ``boxbar`` mesh,
* ``boxbslash`` - lambda_1 of the unit right triangle (square only).

Also here: the closed-form p = 2 spectrum of rectangles, the closed-form
spectrum of an interval for every p, upper bounds for lambda_2 over
two-piece partitions, and bisection for branch crossings.
"""

import logging
import math
import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from plapbranch.core.parallel import ordered_map
from plapbranch.models.domain import DomainSpec
from plapbranch.models.errors import (
    InvalidExponentError,
    NoSignChangeError,
    UnsupportedError,
    ValidationError,
)
from plapbranch.models.options import SolveOptions
from plapbranch.models.results import Branch, BranchSample, CrossingReport, EigenResult
from plapbranch.numerics.eigsolve import check_grid, continue_branch, solve_lambda1
from plapbranch.numerics.mesh import FloatArray, TriMesh, build_mesh

logger = logging.getLogger("plapbranch.spectra")

SOLVED_BRANCHES = ("lambda1", "boxbar", "boxminus", "boxbslash")
PARTITION_FAMILIES = ("vertical", "horizontal", "diagonal", "all")
SCAN_POINTS = 33
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def linear_spectrum(a: float, count: int) -> List[Tuple[float, int, int]]:
    """The ``count`` smallest Dirichlet Laplacian eigenvalues of (0,a)x(0,1).

    Values pi^2 (i^2/a^2 + j^2) with multiplicity; ties are ordered by (i, j).
    """
    if not a > 0:
        raise ValidationError("a must be positive", field="a")
    if count < 1:
        raise ValidationError("count must be at least 1", field="count")
    # i <= count and j <= count cover the count smallest values
    entries = [
        (math.pi**2 * (i * i / (a * a) + j * j), i, j)
        for i in range(1, count + 1)
        for j in range(1, count + 1)
    ]
    entries.sort(key=lambda e: (round(e[0] / math.pi**2, 9), e[1], e[2]))
    return entries[:count]


def pi_p(p: float) -> float:
    """Half-period of the p-sine: 2 pi / (p sin(pi/p))."""
    if not p > 1:
        raise InvalidExponentError(p)
    return 2.0 * math.pi / (p * math.sin(math.pi / p))


def interval_spectrum(p: float, length: float, k: int = 1) -> float:
    """k-th Dirichlet eigenvalue of the one-dimensional p-Laplacian on (0, length)."""
    if not length > 0:
        raise ValidationError("length must be positive", field="length")
    if k < 1:
        raise ValidationError("k must be at least 1", field="k")
    return (p - 1.0) * (k * pi_p(p) / length) ** p


def carrier_domain(label: str, a: float) -> DomainSpec:
    """Region whose first eigenvalue is the named branch of R_a."""
    if label == "lambda1":
        return DomainSpec.rectangle(a, 1.0)
    if label == "boxbar":
        return DomainSpec.rectangle(0.5 * a, 1.0)
    if label == "boxminus":
        return DomainSpec.rectangle(0.5, a)
    if label == "boxbslash":
        if a != 1.0:
            raise UnsupportedError("The diagonal branch exists only on the square", a=a)
        return DomainSpec.triangle()
    raise UnsupportedError(f"Unknown branch {label!r}; use one of {SOLVED_BRANCHES}")


class BranchEvaluator:
    """lambda_1 solves for one named branch on a fixed carrier mesh.

    Each call warm-starts from the previous eigenfunction of this evaluator.
    Calls are serialized; distinct evaluators can run concurrently.
    """

    def __init__(
        self,
        label: str,
        a: float,
        n: int,
        opts: Optional[SolveOptions] = None,
    ):
        self.label = label
        self.a = a
        self.n = n
        self.opts = opts
        self.domain = carrier_domain(label, a)
        self.mesh: TriMesh = build_mesh(self.domain, n)
        self._warm: Optional[FloatArray] = None
        self._lock = threading.Lock()
        self.calls = 0

    def __call__(self, p: float) -> EigenResult:
        with self._lock:
            res = solve_lambda1(self.mesh, p, self.opts, self._warm)
            self._warm = res.field
            self.calls += 1
        if self.label == "lambda1":
            return res
        note = f"{self.label}(R[{self.a:g}]) from lambda1({self.domain.label})"
        return res.relabeled(res.lambda_, note)


def branch_value(
    label: str,
    p: float,
    a: float,
    n: int,
    opts: Optional[SolveOptions] = None,
) -> EigenResult:
    """One cold-started solve of a named branch."""
    return BranchEvaluator(label, a, n, opts)(p)


def lambda1_rect(
    p: float,
    a: float,
    b: float = 1.0,
    n: int = 64,
    opts: Optional[SolveOptions] = None,
    warm: Optional[FloatArray] = None,
) -> EigenResult:
    return solve_lambda1(build_mesh(DomainSpec.rectangle(a, b), n), p, opts, warm)


def lambda_boxbar(
    p: float, a: float, n: int, opts: Optional[SolveOptions] = None
) -> EigenResult:
    """Branch odd across x = a/2: lambda_1 of (0, a/2) x (0, 1)."""
    return branch_value("boxbar", p, a, n, opts)


def lambda_boxminus(
    p: float, a: float, n: int, opts: Optional[SolveOptions] = None
) -> EigenResult:
    """Branch odd across y = 1/2: lambda_1 of (0, a) x (0, 1/2), equal to 2^p lambda_1(R_2a)."""
    return branch_value("boxminus", p, a, n, opts)


def lambda_boxbslash(p: float, n: int, opts: Optional[SolveOptions] = None) -> EigenResult:
    """Branch of the square odd across the diagonal: lambda_1 of the unit right triangle."""
    return branch_value("boxbslash", p, 1.0, n, opts)


def comparison_gap(
    p: float,
    a: float,
    n: int,
    opts: Optional[SolveOptions] = None,
    threads: int = 1,
) -> float:
    """f(p, a) = lambda_boxminus - lambda_boxbar."""
    minus, bar = ordered_map(
        lambda label: branch_value(label, p, a, n, opts).lambda_,
        ["boxminus", "boxbar"],
        threads,
    )
    return minus - bar


@dataclass(frozen=True)
class PartitionBound:
    """Best two-piece partition found for the lambda_2 upper bound."""

    value: float
    family: str
    cut: float
    evaluations: int


def _golden_refine(
    cost: Callable[[float], float], lo: float, hi: float, iterations: int
) -> Tuple[float, float]:
    """Golden-section search on [lo, hi]; returns the best (t, cost) seen."""
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = cost(x1), cost(x2)
    best = min((f1, x1), (f2, x2))
    for _ in range(iterations):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = cost(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = cost(x2)
        best = min(best, (f1, x1), (f2, x2))
    return best[1], best[0]


def _cut_family(
    family: str,
    p: float,
    a: float,
    n: int,
    opts: Optional[SolveOptions],
    scan_points: int,
    golden_iters: int,
    threads: int,
) -> PartitionBound:
    length = a if family == "vertical" else 1.0

    def piece_domain(t: float) -> DomainSpec:
        if family == "vertical":
            return DomainSpec.rectangle(t, 1.0)
        return DomainSpec.rectangle(a, t)

    pieces: Dict[float, float] = {}

    def solve_piece(t: float) -> float:
        return solve_lambda1(build_mesh(piece_domain(t), n), p, opts).lambda_

    def piece(t: float) -> float:
        key = round(t, 12)
        if key not in pieces:
            pieces[key] = solve_piece(t)
        return pieces[key]

    def cost(t: float) -> float:
        return max(piece(t), piece(length - t))

    # both pieces need at least two cells across
    min_width = 2.0 / n
    cuts = [
        length * k / (scan_points + 1)
        for k in range(1, scan_points + 1)
        if min(length * k / (scan_points + 1), length * (1 - k / (scan_points + 1))) >= min_width
    ]
    if not cuts:
        raise UnsupportedError("Resolution too coarse for any cut of the family", n=n)

    widths = sorted({round(t, 12) for t in cuts} | {round(length - t, 12) for t in cuts})
    for width, value in zip(widths, ordered_map(solve_piece, widths, threads)):
        pieces[width] = value
    costs = [cost(t) for t in cuts]
    k = int(np.argmin(costs))
    best_t, best = cuts[k], costs[k]

    if golden_iters > 0 and len(cuts) >= 3:
        lo = cuts[max(k - 1, 0)]
        hi = cuts[min(k + 1, len(cuts) - 1)]
        t, value = _golden_refine(cost, lo, hi, golden_iters)
        if value < best:
            best_t, best = t, value

    logger.debug("%s cut family at p=%g: best cut %.6g, value %.10g", family, p, best_t, best)
    return PartitionBound(value=best, family=family, cut=best_t, evaluations=len(pieces))


def lambda2_partition(
    p: float,
    a: float,
    n: int,
    family: str = "all",
    opts: Optional[SolveOptions] = None,
    scan_points: int = SCAN_POINTS,
    golden_iters: int = 12,
    threads: int = 1,
) -> PartitionBound:
    """Smallest max(lambda_1(piece 1), lambda_1(piece 2)) over a partition family."""
    if family not in PARTITION_FAMILIES:
        raise UnsupportedError(
            f"Unknown partition family {family!r}; use one of {PARTITION_FAMILIES}"
        )
    if family == "diagonal" and a != 1.0:
        raise UnsupportedError("The diagonal cut is defined only on the square", a=a)
    if scan_points < 1:
        raise ValidationError("scan_points must be at least 1", field="scan_points")

    members = ["vertical", "horizontal"] if family == "all" else [family]
    if family == "all" and a == 1.0:
        members.append("diagonal")

    bounds: List[PartitionBound] = []
    for member in members:
        if member == "diagonal":
            # both pieces are congruent to the unit right triangle
            value = solve_lambda1(build_mesh(DomainSpec.triangle(), n), p, opts).lambda_
            bounds.append(PartitionBound(value=value, family="diagonal", cut=1.0, evaluations=1))
        else:
            bounds.append(
                _cut_family(member, p, a, n, opts, scan_points, golden_iters, threads)
            )
    return min(bounds, key=lambda b: (b.value, members.index(b.family)))


def lambda2_upper(
    p: float,
    a: float,
    n: int,
    family: str = "all",
    opts: Optional[SolveOptions] = None,
    scan_points: int = SCAN_POINTS,
    threads: int = 1,
) -> float:
    """Upper bound for lambda_2(p; R_a) from two-piece partitions.

    Exact at p = 2 for the families used here; only a bound otherwise.
    """
    return lambda2_partition(
        p, a, n, family, opts, scan_points=scan_points, threads=threads
    ).value


def detect_crossing(
    branch_a: str,
    branch_b: str,
    a: float,
    bracket: Tuple[float, float],
    tol: float,
    n: int,
    opts: Optional[SolveOptions] = None,
    threads: int = 1,
) -> CrossingReport:
    """Bisect on p for the point where two named branches meet."""
    if branch_a == branch_b:
        raise ValidationError("A branch cannot cross itself", field="branch_b")
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo > 1:
        raise InvalidExponentError(lo)
    if not hi > lo:
        raise ValidationError("bracket must be increasing", field="bracket")
    if not tol > 0:
        raise ValidationError("tol must be positive", field="tol")

    evaluators = [BranchEvaluator(branch_a, a, n, opts), BranchEvaluator(branch_b, a, n, opts)]
    evaluations = 0

    def values(p: float) -> Tuple[float, float]:
        nonlocal evaluations
        evaluations += 1
        first, second = ordered_map(lambda ev: ev(p).lambda_, evaluators, threads)
        return first, second

    va, vb = values(lo)
    d_lo = va - vb
    va, vb = values(hi)
    d_hi = va - vb
    if d_lo * d_hi >= 0:
        raise NoSignChangeError((lo, hi), (d_lo, d_hi))

    left, right = lo, hi
    while right - left > tol:
        mid = 0.5 * (left + right)
        va, vb = values(mid)
        d_mid = va - vb
        if d_mid == 0:
            left = right = mid
            d_lo = d_hi = 0.0
            break
        if (d_mid < 0) == (d_lo < 0):
            left, d_lo = mid, d_mid
        else:
            right, d_hi = mid, d_mid

    p_star = 0.5 * (left + right)
    at_star = values(p_star)
    function_tol = max(abs(d_lo), abs(d_hi))
    logger.info(
        "%s and %s cross at p=%.6g on [%g, %g] (a=%g)", branch_a, branch_b, p_star, lo, hi, a
    )
    return CrossingReport(
        branch_a=branch_a,
        branch_b=branch_b,
        a=a,
        bracket=(lo, hi),
        p_star=p_star,
        tol=tol,
        values_at_p_star=at_star,
        function_tol=function_tol,
        evaluations=evaluations,
    )


def sample_branch(
    label: str,
    a: float,
    p_grid: Sequence[float],
    n: int,
    opts: Optional[SolveOptions] = None,
    b: float = 1.0,
    scan_points: int = SCAN_POINTS,
    threads: int = 1,
) -> Branch:
    """Named branch of R_a along an increasing p grid.

    ``b`` only applies to ``lambda1`` (the rectangle (0,a) x (0,b)). The
    ``lambda2-ub`` samples are partition bounds, recomputed at every p.
    """
    if label == "lambda2-ub":
        check_grid(p_grid)
        samples = []
        for p in p_grid:
            bound = lambda2_partition(
                p, a, n, opts=opts, scan_points=scan_points, threads=threads
            )
            samples.append(
                BranchSample(
                    p=p,
                    lambda_=bound.value,
                    n=n,
                    converged=True,
                    iterations=bound.evaluations,
                    residual=0.0,
                )
            )
        return Branch(label=label, a=a, samples=samples)
    d = DomainSpec.rectangle(a, b) if label == "lambda1" else carrier_domain(label, a)
    return continue_branch(d, p_grid, n, opts, label=label).model_copy(update={"a": a})


def linear_branches(a: float, count: int) -> List[Branch]:
    """Closed-form p = 2 eigenvalues of R_a as single-sample ``lin-k`` branches."""
    return [
        Branch(
            label=f"lin-{k}",
            a=a,
            samples=[BranchSample(p=2.0, lambda_=value, n=0, converged=True)],
        )
        for k, (value, _, _) in enumerate(linear_spectrum(a, count), 1)
    ]
