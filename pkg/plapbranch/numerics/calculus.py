"""Derivatives of first eigenvalues in the exponent p and in the rectangle sides.

Two independent routes to the p-derivative are kept apart:

* the discrete route evaluates the log-weighted integrals on a solved
  eigenpair (``dlambda1_dp``, ``log_bracket``);
* the closed-form route integrates the p = 2 eigenfunctions of the square's
  half-domains with adaptive Gauss-Legendre quadrature and never touches
  the mesh or the solver (``numvalues_quadrature``).

For a unit p-mass eigenfunction u the envelope theorem gives

    d lambda_1 / dp = int |grad u|^p ln|grad u| - lambda_1 int |u|^p ln|u|

and ``log_bracket`` returns p times this quantity.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import xlogy

from plapbranch.models.domain import DomainKind, DomainSpec
from plapbranch.models.errors import (
    UnconvergedError,
    UnsupportedError,
    ValidationError,
)
from plapbranch.models.options import SolveOptions
from plapbranch.models.results import EigenResult, QuadResult
from plapbranch.numerics.eigsolve import solve_lambda1
from plapbranch.numerics.functional import p_mass
from plapbranch.numerics.mesh import FloatArray, TriMesh, build_mesh
from plapbranch.numerics.quadrature import adaptive_gauss_legendre
from plapbranch.numerics.spectra import BranchEvaluator

logger = logging.getLogger("plapbranch.calculus")

MASS_TOL = 1e-8
SQRT8 = math.sqrt(8.0)
FIVE_PI_SQ = 5.0 * math.pi**2


class ClosedFormKind(str, Enum):
    """Second Dirichlet eigenfunctions of the unit square at p = 2."""

    HALFSQUARE = "halfsquare"  # odd across x = 1/2
    TRIANGLE = "triangle"  # odd across x + y = 1


_ALIASES = {
    "halfsquare": ClosedFormKind.HALFSQUARE,
    "half-square": ClosedFormKind.HALFSQUARE,
    "half-square-u1": ClosedFormKind.HALFSQUARE,
    "u1": ClosedFormKind.HALFSQUARE,
    "triangle": ClosedFormKind.TRIANGLE,
    "triangle-u2": ClosedFormKind.TRIANGLE,
    "u2": ClosedFormKind.TRIANGLE,
}


@dataclass(frozen=True)
class ClosedFormEigenfunction:
    """Eigenfunction for 5 pi^2 on the square with unit L2 norm on its nodal half.

    u1 = sqrt(8) sin(2 pi x) sin(pi y)
    u2 = 2 (sin(2 pi x) sin(pi y) + sin(pi x) sin(2 pi y))
    """

    which: ClosedFormKind
    eigenvalue: float = FIVE_PI_SQ

    @classmethod
    def from_name(cls, name: str) -> "ClosedFormEigenfunction":
        key = name.strip().lower()
        if key not in _ALIASES:
            raise ValidationError(
                f"Unknown eigenfunction {name!r}; use 'halfsquare' or 'triangle'",
                field="which",
            )
        return cls(_ALIASES[key])

    def value(self, x: FloatArray, y: FloatArray) -> FloatArray:
        pi = math.pi
        if self.which is ClosedFormKind.HALFSQUARE:
            return SQRT8 * np.sin(2 * pi * x) * np.sin(pi * y)
        return 2.0 * (
            np.sin(2 * pi * x) * np.sin(pi * y) + np.sin(pi * x) * np.sin(2 * pi * y)
        )

    def gradient(self, x: FloatArray, y: FloatArray) -> Tuple[FloatArray, FloatArray]:
        pi = math.pi
        if self.which is ClosedFormKind.HALFSQUARE:
            gx = SQRT8 * 2 * pi * np.cos(2 * pi * x) * np.sin(pi * y)
            gy = SQRT8 * pi * np.sin(2 * pi * x) * np.cos(pi * y)
            return gx, gy
        gx = 2.0 * (
            2 * pi * np.cos(2 * pi * x) * np.sin(pi * y)
            + pi * np.cos(pi * x) * np.sin(2 * pi * y)
        )
        gy = 2.0 * (
            pi * np.sin(2 * pi * x) * np.cos(pi * y)
            + 2 * pi * np.sin(pi * x) * np.cos(2 * pi * y)
        )
        return gx, gy

    def log_integrand(self, x: FloatArray, y: FloatArray) -> FloatArray:
        """|grad u|^2 ln|grad u| - lambda u^2 ln|u|, with t^2 ln t = 0 at t = 0."""
        gx, gy = self.gradient(x, y)
        grad_sq = gx * gx + gy * gy
        u_sq = self.value(x, y) ** 2
        return 0.5 * xlogy(grad_sq, grad_sq) - self.eigenvalue * 0.5 * xlogy(u_sq, u_sq)


def numvalues_quadrature(
    which: str,
    target_err: float = 1e-3,
    max_evaluations: Optional[int] = None,
) -> QuadResult:
    """Log bracket of a closed-form eigenfunction, integrated over the unit square."""
    cf = ClosedFormEigenfunction.from_name(which)
    kwargs = {} if max_evaluations is None else {"max_evaluations": max_evaluations}
    result = adaptive_gauss_legendre(
        cf.log_integrand, (0.0, 1.0), (0.0, 1.0), target_err, **kwargs
    )
    logger.info(
        "Log bracket of %s: %.10g (error estimate %.2e, %d evaluations)",
        cf.which.value,
        result.value,
        result.err_estimate,
        result.evaluations,
    )
    return result


def closed_form_norm(which: str, target_err: float = 1e-12) -> QuadResult:
    """Integral of u^2 over the unit square (2 for both eigenfunctions)."""
    cf = ClosedFormEigenfunction.from_name(which)
    return adaptive_gauss_legendre(
        lambda x, y: cf.value(x, y) ** 2, (0.0, 1.0), (0.0, 1.0), target_err
    )


def derivative_gap(target_err: float = 1e-3) -> float:
    """Half-square bracket minus triangle bracket."""
    return (
        numvalues_quadrature("halfsquare", target_err).value
        - numvalues_quadrature("triangle", target_err).value
    )


def _require_eigenpair(m: TriMesh, res: EigenResult) -> None:
    if not res.converged:
        raise UnconvergedError(
            "Derivative formulas need a converged eigenpair",
            p=res.p,
            domain=res.domain.label,
        )
    m.check_field(res.field)
    mass = p_mass(m, res.field, res.p)
    if abs(mass - 1.0) > MASS_TOL:
        raise ValidationError(f"Eigenfunction is not normalized (p-mass {mass:.12g})")


def _mesh_of(res: EigenResult, m: Optional[TriMesh]) -> TriMesh:
    mesh = m if m is not None else res.mesh
    if mesh is None:
        raise ValidationError("No mesh attached to the eigenpair", field="m")
    return mesh


def dlambda1_dp(m: Optional[TriMesh], res: EigenResult) -> float:
    """Derivative of lambda_1 in p from a converged, unit p-mass eigenpair."""
    m = _mesh_of(res, m)
    _require_eigenpair(m, res)
    p, u = res.p, res.field
    grads = m.gradients(u)
    norms = np.sqrt(np.einsum("td,td->t", grads, grads))
    energy_log = float(np.dot(m.areas, xlogy(norms**p, norms)))
    mids = np.abs(m.edge_midpoint_values(u))
    mass_log = float(np.dot(m.areas, xlogy(mids**p, mids).mean(axis=1)))
    return energy_log - res.lambda_ * mass_log


def log_bracket(m: Optional[TriMesh], res: EigenResult) -> float:
    """p times the p-derivative; at p = 2 comparable with ``numvalues_quadrature``."""
    return res.p * dlambda1_dp(m, res)


def dlambda1_da(
    res: EigenResult, axis: str = "x", m: Optional[TriMesh] = None
) -> float:
    """Shape derivative of lambda_1 of a rectangle in its width (or height).

    -(p-1) times the integral of |du/dn|^p over the moving side, with the
    normal derivative taken from the elements that own an edge on that side.
    """
    if res.domain.kind is not DomainKind.RECTANGLE:
        raise UnsupportedError(
            "Side derivatives are defined for rectangles only", domain=res.domain.label
        )
    if axis not in ("x", "y"):
        raise ValidationError("axis must be 'x' or 'y'", field="axis")
    m = _mesh_of(res, m)
    _require_eigenpair(m, res)

    coord = 0 if axis == "x" else 1
    side = m.vertices[:, coord].max()
    on_side = np.abs(m.vertices[:, coord] - side) <= 1e-9 * m.h
    flags = on_side[m.triangles]
    owners = flags.sum(axis=1) == 2

    normal = m.gradients(res.field)[owners, coord]
    along = m.vertices[m.triangles[owners], 1 - coord]
    along = np.where(flags[owners], along, np.nan)
    lengths = np.nanmax(along, axis=1) - np.nanmin(along, axis=1)

    flux = float(np.dot(np.abs(normal) ** res.p, lengths))
    return -(res.p - 1.0) * flux


def _side_derivative(
    d: DomainSpec, axis: str, p: float, n: int, opts: Optional[SolveOptions]
) -> float:
    res = solve_lambda1(build_mesh(d, n), p, opts)
    return dlambda1_da(res, axis)


def dboxbar_da(p: float, a: float, n: int, opts: Optional[SolveOptions] = None) -> float:
    """a-derivative of lambda_boxbar(p; R_a) = lambda_1(p; R_{a/2})."""
    return 0.5 * _side_derivative(DomainSpec.rectangle(0.5 * a, 1.0), "x", p, n, opts)


def dboxminus_da(p: float, a: float, n: int, opts: Optional[SolveOptions] = None) -> float:
    """a-derivative of lambda_boxminus(p; R_a), the height derivative on (0,1/2)x(0,a)."""
    return _side_derivative(DomainSpec.rectangle(0.5, a), "y", p, n, opts)


def dcomparison_gap_da(
    p: float, a: float, n: int, opts: Optional[SolveOptions] = None
) -> float:
    """a-derivative of f(p, a) = lambda_boxminus - lambda_boxbar."""
    return dboxminus_da(p, a, n, opts) - dboxbar_da(p, a, n, opts)


def fd_derivative(fn: Callable[[float], float], at_p: float, step: float) -> float:
    """Central difference (fn(p + h) - fn(p - h)) / 2h."""
    if not step > 0:
        raise ValidationError("step must be positive", field="step")
    return (fn(at_p + step) - fn(at_p - step)) / (2.0 * step)


def branch_fd_derivative(
    label: str,
    p: float,
    a: float,
    n: int,
    step: float = 1e-3,
    opts: Optional[SolveOptions] = None,
) -> float:
    """Central difference of a named branch in p, with warm starts from p."""
    evaluator = BranchEvaluator(label, a, n, opts)
    evaluator(p)
    return fd_derivative(lambda q: evaluator(q).lambda_, p, step)


def branch_dp(
    label: str,
    p: float,
    a: float,
    n: int,
    opts: Optional[SolveOptions] = None,
) -> Tuple[float, EigenResult]:
    """p-derivative of a named branch from the formula on its carrier mesh."""
    res = BranchEvaluator(label, a, n, opts)(p)
    return dlambda1_dp(None, res), res
