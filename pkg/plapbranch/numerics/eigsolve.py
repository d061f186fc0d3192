"""First eigenpair of the discrete p-Laplacian and its continuation in p.

The solver minimizes the Rayleigh quotient over fields of unit p-mass. Each
step preconditions the Rayleigh gradient with the Hessian of the regularized
energy, takes an Armijo-safeguarded step starting from length 1, and projects
back onto the unit p-mass sphere. At p = 2 this is inverse iteration.
"""

import logging
import math
import weakref
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.linalg import splu

from plapbranch.models.domain import DomainKind, DomainSpec, MaskMode
from plapbranch.models.errors import InvalidDomainError, InvalidExponentError, ValidationError
from plapbranch.models.options import EnergyOptions, SolveOptions
from plapbranch.models.results import Branch, BranchSample, EigenResult
from plapbranch.numerics.functional import (
    energy_hessian,
    normalize,
    rayleigh,
    rayleigh_gradient,
    rms_gradient,
)
from plapbranch.numerics.mesh import (
    FloatArray,
    IntArray,
    TriMesh,
    build_mesh,
    domain_symmetries,
    interpolate,
    is_symmetric,
    symmetry_permutation,
)

logger = logging.getLogger("plapbranch.eigsolve")

DEFAULT_STEP = 0.05
LARGE_P = 10.0
MAX_P = 60.0
SIGN_TOL = 1e-8
SYMMETRY_WARN = 1e-6
HALVING_FACTOR = 10.0

_symmetry_cache: "weakref.WeakKeyDictionary[TriMesh, Dict[str, IntArray]]" = (
    weakref.WeakKeyDictionary()
)


def cold_start(m: TriMesh) -> FloatArray:
    """Positive Dirichlet-compatible starting field with the mesh's symmetries."""
    lo = m.vertices.min(axis=0)
    hi = m.vertices.max(axis=0)
    domain = m.domain

    if domain.kind is DomainKind.TRIANGLE:
        side = hi[0] - lo[0]
        return interpolate(m, lambda x, y: (x - lo[0]) * (y - lo[1]) * (side - x - y))

    if domain.kind is DomainKind.MASKED_RECTANGLE and domain.mode is MaskMode.INCLUDE:
        s = m.scale

        def bumps(x: FloatArray, y: FloatArray) -> FloatArray:
            total = np.zeros_like(x)
            for disk in domain.disks:
                rho2 = (x - s * disk.cx) ** 2 + (y - s * disk.cy) ** 2
                total += np.maximum((s * disk.r) ** 2 - rho2, 0.0)
            return total

        return interpolate(m, bumps)

    return interpolate(m, lambda x, y: (x - lo[0]) * (hi[0] - x) * (y - lo[1]) * (hi[1] - y))


def _symmetries(m: TriMesh) -> Dict[str, IntArray]:
    cached = _symmetry_cache.get(m)
    if cached is None:
        cached = {}
        for transform in domain_symmetries(m):
            if is_symmetric(m, transform):
                perm = symmetry_permutation(m, transform)
                if perm is not None:
                    cached[transform] = perm
        _symmetry_cache[m] = cached
    return cached


def symmetry_defect(m: TriMesh, u: FloatArray) -> Dict[str, float]:
    """Relative sup-distance between u and its image under each mesh reflection."""
    scale = float(np.abs(u).max())
    if scale == 0:
        return {name: 0.0 for name in _symmetries(m)}
    return {
        name: float(np.abs(u[perm] - u).max() / scale) for name, perm in _symmetries(m).items()
    }


def _sign_constant(m: TriMesh, u: FloatArray) -> bool:
    free = u[m.interior]
    tol = SIGN_TOL * float(np.abs(free).max())
    return bool(np.all(free >= -tol) or np.all(free <= tol))


@dataclass
class _Preconditioner:
    """Factored free-vertex block of the energy Hessian."""

    free: IntArray
    solve: Callable[[FloatArray], FloatArray]


def _factor(
    m: TriMesh, u: FloatArray, p: float, eps: float, opts: SolveOptions
) -> _Preconditioner:
    free = np.flatnonzero(m.interior)
    hess = energy_hessian(m, u, EnergyOptions(p=p, eps=eps), weight_floor=opts.weight_floor)
    block = hess[free][:, free].tocsc()
    lu = splu(block)
    return _Preconditioner(free=free, solve=lu.solve)


def _direction(
    grad: FloatArray,
    value: float,
    pc: Optional[_Preconditioner],
) -> FloatArray:
    if pc is None:
        return -grad / value
    d = np.zeros_like(grad)
    d[pc.free] = -pc.solve(grad[pc.free])
    return d


def solve_lambda1(
    m: TriMesh,
    p: float,
    opts: Optional[SolveOptions] = None,
    warm: Optional[FloatArray] = None,
) -> EigenResult:
    """First eigenpair of the Dirichlet p-Laplacian on the mesh.

    Non-convergence is reported through ``converged=False``, never raised.
    """
    if not p > 1:
        raise InvalidExponentError(p)
    if not m.interior.any():
        raise InvalidDomainError("Mesh has no interior vertex", label=m.domain.label)
    opts = opts or SolveOptions()
    if p >= LARGE_P:
        opts = opts.for_large_p()

    start = cold_start(m)
    if warm is not None:
        m.check_field(warm)
        if np.any(warm[m.interior] != 0):
            start = warm
    try:
        u = normalize(m, start, p)
    except ArithmeticError as exc:
        raise InvalidDomainError("Starting field vanishes on every free vertex") from exc

    grad_scale = (m.h / m.diameter) * rms_gradient(m, u)
    # at p = 2 a nonzero eps only shifts the quotient
    eps_rel = 0.0 if p == 2.0 else opts.eps_factor
    eps = eps_rel * grad_scale
    energy = EnergyOptions(p=p, eps=eps)
    value = rayleigh(m, u, energy)
    history: List[float] = [value]

    use_pc = opts.preconditioner == "hessian"
    pc: Optional[_Preconditioner] = None
    pc_age = 0

    iterations = 0
    residual = math.inf
    change = math.inf
    converged = False

    while iterations < opts.max_iters:
        if use_pc and (pc is None or (p != 2.0 and pc_age >= opts.precond_every)):
            pc = _factor(m, u, p, max(eps, opts.eps_floor * grad_scale), opts)
            pc_age = 0

        grad = rayleigh_gradient(m, u, energy, value=value)
        d = _direction(grad, value, pc)
        slope = float(np.dot(grad, d))
        residual = -slope / value

        step = 1.0
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = u + step * d
            try:
                trial = normalize(m, trial, p)
                trial_value = rayleigh(m, trial, energy)
            except ArithmeticError:
                step *= opts.armijo_shrink
                continue
            if trial_value <= value + opts.armijo_c * step * slope:
                accepted = True
                break
            step *= opts.armijo_shrink

        iterations += 1
        pc_age += 1

        if accepted:
            change = (value - trial_value) / value
            u, value = trial, trial_value
            history.append(value)
            if logger.isEnabledFor(logging.DEBUG):
                logger.debug(
                    "iteration %d: R=%.12g step=%.3g eps=%.3g",
                    iterations,
                    value,
                    step,
                    eps,
                    extra={"iteration": iterations, "rayleigh": value, "step": step, "eps": eps},
                )

        stage_tol = max(opts.tol_lambda, eps_rel)
        stalled = not accepted or change < stage_tol
        if not stalled:
            continue

        if eps_rel > 0:
            eps_rel *= opts.eps_decay
            if eps_rel < opts.eps_floor:
                eps_rel = 0.0
            eps = eps_rel * grad_scale
            energy = EnergyOptions(p=p, eps=eps)
            value = rayleigh(m, u, energy)
            history.append(value)
            change = math.inf
            pc = None
            logger.debug("Descent stalled; eps lowered to %.3g", eps)
            continue

        if not accepted:
            converged = residual < opts.tol_grad
            break
        if residual < opts.tol_grad:
            converged = True
            break

    if not converged and iterations >= opts.max_iters:
        logger.warning(
            "Solve on %s at p=%g stopped after %d iterations (residual %.3e)",
            m.domain.label,
            p,
            iterations,
            residual,
        )

    if u[m.interior].sum() < 0:
        u = -u
    exact = EnergyOptions(p=p, eps=0.0)
    lam = rayleigh(m, u, exact)
    grad_norm = float(np.linalg.norm(rayleigh_gradient(m, u, exact, value=lam)))
    sign_ok = _sign_constant(m, u)
    if not sign_ok:
        logger.warning("First eigenfunction on %s at p=%g changes sign", m.domain.label, p)
    defects = symmetry_defect(m, u) if opts.check_symmetry else {}
    for name, defect in defects.items():
        if defect > SYMMETRY_WARN:
            logger.warning(
                "Reflection %s defect %.3e on %s at p=%g", name, defect, m.domain.label, p
            )

    u.setflags(write=False)
    result = EigenResult(
        p=p,
        domain=m.domain,
        n=m.n,
        lambda_=lam,
        field=u,
        iterations=iterations,
        grad_norm=grad_norm,
        residual=residual,
        converged=converged,
        sign_constant=sign_ok,
        scale=m.scale,
        history=tuple(history),
        symmetry_defects=defects,
        mesh=m,
    )
    logger.info(
        "lambda1(p=%g; %s, n=%d) = %.10g after %d iterations%s",
        p,
        m.domain.label,
        m.n,
        lam,
        iterations,
        "" if converged else " (not converged)",
    )
    return result


def solve_domain(
    d: DomainSpec,
    p: float,
    n: int,
    opts: Optional[SolveOptions] = None,
    warm: Optional[FloatArray] = None,
) -> EigenResult:
    """Build the mesh of ``d`` at resolution n and solve on it."""
    return solve_lambda1(build_mesh(d, n), p, opts, warm)


def default_grid(p_from: float, p_to: float, step: float = DEFAULT_STEP) -> List[float]:
    """Increasing grid from p_from to p_to inclusive, rounded to 12 digits."""
    if not p_from > 1:
        raise InvalidExponentError(p_from)
    if p_to < p_from:
        raise ValidationError("p_to must not be smaller than p_from", field="p_to")
    if not step > 0:
        raise ValidationError("step must be positive", field="step")
    count = int(math.floor((p_to - p_from) / step + 1e-9))
    grid = [round(p_from + k * step, 12) for k in range(count + 1)]
    if p_to - grid[-1] > 1e-9 * step:
        grid.append(p_to)
    return grid


def check_grid(p_grid: Sequence[float]) -> None:
    for p in p_grid:
        if not p > 1:
            raise InvalidExponentError(p)
    if any(q <= p for p, q in zip(p_grid, p_grid[1:])):
        raise ValidationError("p grid must be strictly increasing", field="p_grid")


def continue_eigenpairs(
    m: TriMesh,
    p_grid: Sequence[float],
    opts: Optional[SolveOptions] = None,
) -> List[EigenResult]:
    """Warm-started solves along an increasing p grid on one mesh.

    When a solve needs more than ten times the median iteration count of the
    earlier ones, the step is halved: a solve at the midpoint supplies the
    warm start for a repeated solve at the grid point.
    """
    check_grid(p_grid)
    results: List[EigenResult] = []
    warm: Optional[FloatArray] = None
    for p in p_grid:
        res = solve_lambda1(m, p, opts, warm)
        if len(results) >= 2 and warm is not None:
            median = float(np.median([r.iterations for r in results]))
            if res.iterations > HALVING_FACTOR * max(median, 1.0):
                mid = 0.5 * (results[-1].p + p)
                logger.info("Halving continuation step at p=%g (midpoint %g)", p, mid)
                mid_res = solve_lambda1(m, mid, opts, warm)
                retry = solve_lambda1(m, p, opts, mid_res.field)
                if retry.lambda_ <= res.lambda_ or not res.converged:
                    res = retry
        results.append(res)
        warm = res.field
    return results


def continue_branch(
    d: DomainSpec,
    p_grid: Sequence[float],
    n: int,
    opts: Optional[SolveOptions] = None,
    label: str = "lambda1",
) -> Branch:
    """Sample lambda_1(p; d) along p_grid, warm-starting each solve from the previous one."""
    if len(p_grid) == 0:
        return Branch(label=label, a=d.a, samples=[])
    m = build_mesh(d, n)
    results = continue_eigenpairs(m, p_grid, opts)
    return Branch(
        label=label,
        a=d.a,
        samples=[
            BranchSample(
                p=r.p,
                lambda_=r.lambda_,
                n=r.n,
                converged=r.converged,
                iterations=r.iterations,
                residual=r.residual,
            )
            for r in results
        ],
    )


def richardson(
    values: Sequence[float],
    ns: Sequence[int],
    order: Optional[float] = None,
) -> Tuple[float, float]:
    """Extrapolate mesh-dependent values to n -> infinity.

    With three values on geometrically refined meshes and no order given, the
    order is fitted from the successive differences; with two values the
    order defaults to 2. Returns ``(extrapolated, order)``.
    """
    if len(values) != len(ns) or len(values) < 2:
        raise ValidationError("richardson needs matching values and ns, at least two", field="ns")
    if any(q <= p for p, q in zip(ns, ns[1:])):
        raise ValidationError("ns must be strictly increasing", field="ns")

    v = [float(x) for x in values]
    if order is None:
        if len(v) >= 3:
            ratio = ns[-1] / ns[-2]
            if not math.isclose(ns[-2] / ns[-3], ratio, rel_tol=1e-9):
                raise ValidationError("order fit needs a constant refinement ratio", field="ns")
            d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
            if d1 == 0 or d2 == 0 or d1 * d2 < 0:
                logger.warning("Non-monotone refinement sequence; falling back to order 2")
                order = 2.0
            else:
                order = math.log(abs(d1 / d2)) / math.log(ratio)
        else:
            order = 2.0
    if not order > 0:
        raise ValidationError("order must be positive", field="order")

    factor = (ns[-1] / ns[-2]) ** order
    extrapolated = v[-1] + (v[-1] - v[-2]) / (factor - 1.0)
    return extrapolated, float(order)


def extrapolate_lambda1(
    d: DomainSpec,
    p: float,
    ns: Sequence[int] = (32, 64, 128),
    opts: Optional[SolveOptions] = None,
) -> Tuple[float, float, List[EigenResult]]:
    """Richardson-extrapolated lambda_1 from solves at every resolution in ns.

    Order 2 is assumed at p = 2; otherwise the order is fitted.
    """
    results = [solve_domain(d, p, n, opts) for n in ns]
    value, order = richardson(
        [r.lambda_ for r in results], ns, order=2.0 if p == 2.0 else None
    )
    return value, order, results
