"""Invariant suite: identities the discretization must reproduce, run as named checks."""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from plapbranch.core.parallel import ordered_map
from plapbranch.models.domain import DomainSpec
from plapbranch.models.errors import PLapError, ValidationError
from plapbranch.models.options import EnergyOptions, SolveOptions
from plapbranch.numerics.asymptotics import (
    closed_form_bound,
    family_rayleigh,
    infinity_limit_scan,
    strip_bound,
    three_disk_packing,
)
from plapbranch.numerics.calculus import closed_form_norm, derivative_gap, dlambda1_da
from plapbranch.numerics.eigsolve import (
    extrapolate_lambda1,
    richardson,
    solve_lambda1,
    symmetry_defect,
)
from plapbranch.numerics.functional import (
    dirichlet_energy,
    p_mass,
    rayleigh,
    rayleigh_gradient,
)
from plapbranch.numerics.mesh import build_disk_masked_mesh, build_mesh, scale_mesh
from plapbranch.numerics.spectra import branch_value, detect_crossing

logger = logging.getLogger("plapbranch.validate")

PI_SQ = math.pi**2


class CheckResult(BaseModel):
    """Outcome of one named invariant check."""

    name: str
    passed: bool
    detail: str = ""
    value: Optional[float] = None
    expected: Optional[float] = None


class ValidationReport(BaseModel):
    n: int = Field(..., description="Mesh resolution the solver checks ran at")
    checks: List[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]


CheckFn = Callable[[int, SolveOptions], CheckResult]


def _relative(value: float, expected: float) -> float:
    return abs(value - expected) / abs(expected)


def _random_field(rng: np.random.Generator, m) -> np.ndarray:
    u = rng.standard_normal(m.n_vertices)
    u[m.dirichlet] = 0.0
    return u


def check_homogeneity(n: int, opts: SolveOptions) -> CheckResult:
    m = build_mesh(DomainSpec.rectangle(1.0, 1.0), n)
    rng = np.random.default_rng(7)
    worst = 0.0
    for p in (1.5, 2.0, 2.5, 3.0):
        energy = EnergyOptions(p=p)
        u = _random_field(rng, m)
        for t in (-2.0, 0.5, 3.0):
            worst = max(
                worst,
                _relative(
                    dirichlet_energy(m, t * u, energy),
                    abs(t) ** p * dirichlet_energy(m, u, energy),
                ),
                _relative(p_mass(m, t * u, p), abs(t) ** p * p_mass(m, u, p)),
                _relative(rayleigh(m, t * u, energy), rayleigh(m, u, energy)),
            )
    return CheckResult(
        name="homogeneity",
        passed=worst <= 1e-12,
        detail=f"worst relative defect {worst:.2e}",
        value=worst,
    )


def check_gradient(n: int, opts: SolveOptions, fields: int = 100) -> CheckResult:
    m = build_mesh(DomainSpec.rectangle(1.0, 1.0), min(n, 16))
    rng = np.random.default_rng(11)
    worst = 0.0
    for k in range(fields):
        p = (1.5, 2.0, 2.5, 3.0)[k % 4]
        energy = EnergyOptions(p=p, eps=1e-3 if p < 2 else 0.0)
        u = _random_field(rng, m)
        v = _random_field(rng, m)
        step = 1e-6
        fd = (rayleigh(m, u + step * v, energy) - rayleigh(m, u - step * v, energy)) / (2 * step)
        g = rayleigh_gradient(m, u, energy)
        analytic = float(np.dot(g, v))
        scale = max(abs(analytic), 1e-3 * float(np.linalg.norm(g) * np.linalg.norm(v)))
        worst = max(worst, abs(fd - analytic) / scale)
    return CheckResult(
        name="gradient",
        passed=worst <= 1e-5,
        detail=f"worst relative gap to central differences over {fields} fields: {worst:.2e}",
        value=worst,
    )


def check_linear_square(n: int, opts: SolveOptions) -> CheckResult:
    value, _, _ = extrapolate_lambda1(DomainSpec.rectangle(1.0, 1.0), 2.0, (n // 2, n), opts)
    expected = 2.0 * PI_SQ
    return CheckResult(
        name="linear-square",
        passed=_relative(value, expected) <= 1e-3,
        detail="Richardson-extrapolated lambda_1(2; unit square)",
        value=value,
        expected=expected,
    )


def check_scaling(n: int, opts: SolveOptions) -> CheckResult:
    m = build_mesh(DomainSpec.rectangle(1.0, 1.0), min(n, 32))
    worst = 0.0
    for p in (1.5, 3.0):
        base = solve_lambda1(m, p, opts)
        for s in (0.5, 2.0):
            scaled = solve_lambda1(scale_mesh(m, s), p, opts)
            worst = max(worst, _relative(scaled.lambda_, s ** (-p) * base.lambda_))
    return CheckResult(
        name="scaling",
        passed=worst <= 1e-10,
        detail=f"worst relative defect of lambda(s m) = s^-p lambda(m): {worst:.2e}",
        value=worst,
    )


def check_descent(n: int, opts: SolveOptions) -> CheckResult:
    """Accepted values never increase, and the eigenfunction keeps one sign."""
    bad: List[str] = []
    for d, p in (
        (DomainSpec.rectangle(1.0, 1.0), 1.5),
        (DomainSpec.rectangle(1.0, 1.2), 3.0),
        (DomainSpec.triangle(), 2.5),
    ):
        res = solve_lambda1(build_mesh(d, min(n, 32)), p, opts)
        history = np.asarray(res.history)
        if np.any(np.diff(history) > 1e-12 * history[:-1]):
            bad.append(f"{d.label} p={p:g}: value increased")
        if not res.sign_constant:
            bad.append(f"{d.label} p={p:g}: sign change")
        if not res.converged:
            bad.append(f"{d.label} p={p:g}: not converged")
    return CheckResult(
        name="descent",
        passed=not bad,
        detail="; ".join(bad) or "monotone, sign-constant and converged",
    )


def check_comparison_identity(n: int, opts: SolveOptions) -> CheckResult:
    bar = branch_value("boxbar", 2.5, 1.0, n, opts).lambda_
    minus = branch_value("boxminus", 2.5, 1.0, n, opts).lambda_
    gap = _relative(minus, bar)
    return CheckResult(
        name="comparison-identity",
        passed=gap <= 1e-10,
        detail=f"f(2.5, 1) relative to lambda_boxbar: {gap:.2e}",
        value=minus - bar,
        expected=0.0,
    )


def check_linear_branches(n: int, opts: SolveOptions) -> CheckResult:
    """boxbar and boxminus at p = 2 on R_1.05 against pi^2 (4/a^2 + 1) and pi^2 (1/a^2 + 4).

    Values are Richardson-extrapolated from n/2 and n, like ``linear-square``.
    """
    a = 1.05
    ns = (n // 2, n)
    worst = 0.0
    for label, expected in (
        ("boxbar", PI_SQ * (4.0 / a**2 + 1.0)),
        ("boxminus", PI_SQ * (1.0 / a**2 + 4.0)),
    ):
        values = [branch_value(label, 2.0, a, k, opts).lambda_ for k in ns]
        value, _ = richardson(values, ns, order=2.0)
        worst = max(worst, _relative(value, expected))
    return CheckResult(
        name="linear-branches",
        passed=worst <= 1e-3,
        detail=f"worst relative error {worst:.2e} after extrapolation from n={ns}",
        value=worst,
    )


def check_quadrature_norm(n: int, opts: SolveOptions) -> CheckResult:
    worst = max(abs(closed_form_norm(w).value - 2.0) for w in ("halfsquare", "triangle"))
    return CheckResult(
        name="closed-form-norm",
        passed=worst <= 1e-9,
        detail=f"integral of u^2 over the square, worst defect {worst:.2e}",
        value=worst,
        expected=0.0,
    )


def check_packing(n: int, opts: SolveOptions, triples: int = 50) -> CheckResult:
    packing = three_disk_packing()
    packing.check()
    limit = 1.0 / packing.radius
    far = closed_form_bound(1e4)
    m = build_disk_masked_mesh(1.0, 1.0, packing.disks, max(n, 64))
    rng = np.random.default_rng(3)
    p = 4.0
    singles = [family_rayleigh(p, c, mesh=m) for c in np.eye(3)]
    worst = 0.0
    for _ in range(triples):
        coeffs = rng.standard_normal(3)
        worst = max(worst, family_rayleigh(p, coeffs, mesh=m) / max(singles) - 1.0)
    ok = _relative(far, limit) <= 1e-2 and worst <= 1e-12
    return CheckResult(
        name="packing",
        passed=ok,
        detail=(
            f"bound at p=1e4: {far:.6g} (limit {limit:.6g}); "
            f"family quotient above its largest single-disk value by at most {worst:.2e}"
        ),
        value=far,
        expected=limit,
    )


def check_square_orderings(n: int, opts: SolveOptions) -> CheckResult:
    """On the unit square boxbslash lies above boxbar just below p = 2, below it just above."""
    n = max(n, 32)
    gaps = {
        p: branch_value("boxbslash", p, 1.0, n, opts).lambda_
        - branch_value("boxbar", p, 1.0, n, opts).lambda_
        for p in (1.8, 2.2)
    }
    return CheckResult(
        name="square-orderings",
        passed=gaps[1.8] > 0 > gaps[2.2],
        detail=(
            f"lambda_boxbslash - lambda_boxbar: {gaps[1.8]:.4g} at p=1.8, "
            f"{gaps[2.2]:.4g} at p=2.2"
        ),
    )


def check_sandwich(n: int, opts: SolveOptions) -> CheckResult:
    """(b/a)^p lambda(R_b) >= lambda(R_a) >= lambda(R_b) for 1 <= a < b."""
    a, b = 1.0, 1.2
    n = min(n, 32)
    bad: List[str] = []
    for p in (1.5, 2.5, 3.5):
        small = solve_lambda1(build_mesh(DomainSpec.rectangle(a, 1.0), n), p, opts).lambda_
        large = solve_lambda1(build_mesh(DomainSpec.rectangle(b, 1.0), n), p, opts).lambda_
        slack = 1e-8 * small
        if not (b / a) ** p * large + slack >= small >= large - slack:
            bad.append(f"p={p:g}: {large:.6g} <= {small:.6g} <= {(b / a) ** p * large:.6g}")
    return CheckResult(
        name="sandwich",
        passed=not bad,
        detail="; ".join(bad) or f"holds for R_{a:g} inside R_{b:g}",
    )


def check_derivative_gap(n: int, opts: SolveOptions) -> CheckResult:
    gap = derivative_gap(1e-3)
    return CheckResult(
        name="derivative-gap",
        passed=abs(gap - 4.18) <= 0.05,
        detail="half-square bracket minus triangle bracket",
        value=gap,
        expected=4.18,
    )


def check_side_derivative_sign(n: int, opts: SolveOptions) -> CheckResult:
    """Growing a side lowers lambda_1."""
    n = min(n, 32)
    worst = -math.inf
    for d in (DomainSpec.rectangle(1.0, 1.0), DomainSpec.rectangle(1.2, 1.0)):
        m = build_mesh(d, n)
        for p in (1.5, 2.0, 3.0):
            res = solve_lambda1(m, p, opts)
            worst = max(worst, dlambda1_da(res, "x"), dlambda1_da(res, "y"))
    return CheckResult(
        name="side-derivative-sign",
        passed=worst < 0,
        detail=f"largest side derivative {worst:.4g}",
        value=worst,
    )


def check_crossing(n: int, opts: SolveOptions) -> CheckResult:
    report = detect_crossing("boxbar", "boxbslash", 1.0, (1.8, 2.2), 1e-3, max(n, 32), opts)
    return CheckResult(
        name="crossing",
        passed=abs(report.p_star - 2.0) <= 0.05,
        detail=f"boxbar and boxbslash meet at p={report.p_star:.4f} on the unit square",
        value=report.p_star,
        expected=2.0,
    )


def check_symmetry(n: int, opts: SolveOptions) -> CheckResult:
    """Eigenfunctions on symmetric meshes equal their reflections."""
    n = min(n, 32)
    worst = 0.0
    for d, p in (
        (DomainSpec.rectangle(1.0, 1.0), 2.5),
        (DomainSpec.rectangle(1.2, 1.0), 3.0),
        (DomainSpec.triangle(), 2.5),
    ):
        m = build_mesh(d, n)
        defects = symmetry_defect(m, solve_lambda1(m, p, opts).field)
        worst = max([worst, *defects.values()])
    return CheckResult(
        name="symmetry",
        passed=worst <= 1e-6,
        detail=f"worst relative reflection defect {worst:.2e}",
        value=worst,
    )


def check_limit_scan(n: int, opts: SolveOptions) -> CheckResult:
    """lambda_1^(1/p) of the half-strip R_1^(1/2) decreases toward 1/inradius = 4."""
    d = DomainSpec.rectangle(1.0, 0.5)
    scan = infinity_limit_scan(d, [4.0, 8.0, 16.0], min(n, 32), opts)
    roots = [point.root for point in scan]
    bad: List[str] = []
    if not all(point.converged for point in scan):
        bad.append("unconverged solve")
    if np.any(np.diff(roots) >= 0):
        bad.append("not decreasing")
    if any(point.root <= strip_bound(point.p, d) for point in scan):
        bad.append("below the strip bound")
    return CheckResult(
        name="limit-scan",
        passed=not bad,
        detail="; ".join(bad) or "roots " + ", ".join(f"{r:.4f}" for r in roots),
        value=roots[-1],
        expected=4.0,
    )


CHECKS: Dict[str, CheckFn] = {
    "homogeneity": check_homogeneity,
    "gradient": check_gradient,
    "closed-form-norm": check_quadrature_norm,
    "packing": check_packing,
    "linear-square": check_linear_square,
    "linear-branches": check_linear_branches,
    "scaling": check_scaling,
    "comparison-identity": check_comparison_identity,
    "descent": check_descent,
    "sandwich": check_sandwich,
    "symmetry": check_symmetry,
    "side-derivative-sign": check_side_derivative_sign,
    "derivative-gap": check_derivative_gap,
    "square-orderings": check_square_orderings,
    "crossing": check_crossing,
    "limit-scan": check_limit_scan,
}


def _run_one(item: Tuple[str, CheckFn, int, SolveOptions]) -> CheckResult:
    name, fn, n, opts = item
    try:
        result = fn(n, opts)
    except PLapError as exc:
        detail = f"{exc.error_code.value}: {exc.message}"
        result = CheckResult(name=name, passed=False, detail=detail)
    logger.info("check %s: %s", name, "pass" if result.passed else "FAIL")
    return result


def run_validation(
    n: int = 32,
    opts: Optional[SolveOptions] = None,
    only: Optional[Sequence[str]] = None,
    threads: int = 1,
) -> ValidationReport:
    """Run the named checks (all by default) and collect their results in order."""
    opts = opts or SolveOptions()
    names = list(only) if only else list(CHECKS)
    unknown = [name for name in names if name not in CHECKS]
    if unknown:
        raise ValidationError(
            f"Unknown checks {unknown}; available: {', '.join(CHECKS)}", field="only"
        )
    items = [(name, CHECKS[name], n, opts) for name in names]
    return ValidationReport(n=n, checks=ordered_map(_run_one, items, threads))
