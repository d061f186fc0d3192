"""Large-p behavior: inradius limits and the three-disk test family of the square."""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from plapbranch.models.domain import Disk, DomainKind, DomainSpec, MaskMode
from plapbranch.models.errors import UnsupportedError, ValidationError
from plapbranch.models.options import SolveOptions
from plapbranch.models.results import EigenResult
from plapbranch.numerics.eigsolve import MAX_P, continue_eigenpairs, solve_lambda1
from plapbranch.numerics.mesh import FloatArray, TriMesh, build_disk_masked_mesh, build_mesh
from plapbranch.numerics.spectra import BranchEvaluator, interval_spectrum

logger = logging.getLogger("plapbranch.asymptotics")

GEOMETRY_TOL = 1e-12


def inradius(d: DomainSpec) -> float:
    """Radius of the largest disk inside a rectangle or the unit right triangle."""
    if d.kind is DomainKind.RECTANGLE:
        return 0.5 * min(d.a, d.b)
    if d.kind is DomainKind.TRIANGLE:
        # (leg + leg - hypotenuse) / 2
        return 1.0 - math.sqrt(2.0) / 2.0
    raise UnsupportedError("Inradius is not computed for masked domains", domain=d.label)


def strip_bound(p: float, d: DomainSpec) -> float:
    """lambda_1(p; (0, w))^(1/p) with w the smaller side: a lower bound for the rectangle."""
    if d.kind is not DomainKind.RECTANGLE:
        raise UnsupportedError("Strip bound is defined for rectangles", domain=d.label)
    return interval_spectrum(p, min(d.a, d.b)) ** (1.0 / p)


@dataclass(frozen=True)
class ScanPoint:
    p: float
    root: float
    lambda_: float
    converged: bool
    iterations: int


def infinity_limit_scan(
    d: DomainSpec,
    p_list: Sequence[float],
    n: int,
    opts: Optional[SolveOptions] = None,
) -> List[ScanPoint]:
    """lambda_1^(1/p) along an increasing list of exponents, warm-started."""
    if len(p_list) and max(p_list) > MAX_P:
        raise ValidationError(f"p above {MAX_P:g} is not solved", field="p_list")
    results = continue_eigenpairs(build_mesh(d, n), list(p_list), opts)
    scan = [
        ScanPoint(
            p=r.p,
            root=r.lambda_ ** (1.0 / r.p),
            lambda_=r.lambda_,
            converged=r.converged,
            iterations=r.iterations,
        )
        for r in results
    ]
    if scan:
        try:
            limit = 1.0 / inradius(d)
            logger.info(
                "lambda_1^(1/p) on %s at p=%g: %.6g (limit %.6g)",
                d.label,
                scan[-1].p,
                scan[-1].root,
                limit,
            )
        except UnsupportedError:
            pass
    return scan


@dataclass(frozen=True)
class DiskPacking:
    """Three equal disjoint disks in the unit square with the largest radius."""

    centers: Tuple[Tuple[float, float], ...]
    radius: float

    @property
    def disks(self) -> List[Disk]:
        return [Disk(cx=cx, cy=cy, r=self.radius) for cx, cy in self.centers]

    def check(self, tol: float = GEOMETRY_TOL) -> None:
        """Raise ValidationError unless the disks are disjoint and inside the square."""
        r = self.radius
        for cx, cy in self.centers:
            if min(cx, cy, 1.0 - cx, 1.0 - cy) < r - tol:
                raise ValidationError(f"Disk at ({cx}, {cy}) leaves the square")
        for i, (x1, y1) in enumerate(self.centers):
            for x2, y2 in self.centers[i + 1 :]:
                if math.hypot(x1 - x2, y1 - y2) < 2 * r - tol:
                    raise ValidationError("Packed disks overlap")


def three_disk_packing() -> DiskPacking:
    """Radius 1 / (2 + sqrt(2)/2 + sqrt(6)/2) with mutually tangent disks.

    Centers live in the inner square of side s = 1 - 2r: one in a corner, the
    other two on the far sides at offset s (2 - sqrt 3), forming an
    equilateral triangle of side 2r.
    """
    r = 1.0 / (2.0 + math.sqrt(2.0) / 2.0 + math.sqrt(6.0) / 2.0)
    s = 1.0 - 2.0 * r
    offset = s * (2.0 - math.sqrt(3.0))
    packing = DiskPacking(
        centers=((r, r), (r + s, r + offset), (r + offset, r + s)),
        radius=r,
    )
    packing.check()
    return packing


def closed_form_bound(p: float, radius: Optional[float] = None) -> float:
    """R_p^(1/p) of the distance-to-circle bump of a disk, in closed form.

    1 / (r (2 / ((p+1)(p+2)))^(1/p)); decreases to 1/r as p grows.
    """
    if not p > 1:
        raise ValidationError("p must exceed 1", field="p")
    r = three_disk_packing().radius if radius is None else radius
    return 1.0 / (r * (2.0 / ((p + 1.0) * (p + 2.0))) ** (1.0 / p))


def _bump_values(
    m: TriMesh, disks: Sequence[Disk], coeffs: Sequence[float], p: float
) -> Tuple[float, float]:
    """Energy and p-mass of sum c_i delta_i evaluated at the edge midpoints of m."""
    mids = m.edge_midpoints()
    x, y = mids[..., 0], mids[..., 1]
    grad_p = np.zeros(x.shape)
    value_p = np.zeros(x.shape)
    for disk, c in zip(disks, coeffs):
        rho = np.hypot(x - disk.cx, y - disk.cy)
        inside = rho < disk.r
        # |grad delta| = 1 inside the disk
        grad_p += np.where(inside, abs(c) ** p, 0.0)
        value_p += np.where(inside, (abs(c) * (disk.r - rho)) ** p, 0.0)
    energy = float(np.dot(m.areas, grad_p.mean(axis=1)))
    mass = float(np.dot(m.areas, value_p.mean(axis=1)))
    return energy, mass


def family_rayleigh(
    p: float,
    coeffs: Sequence[float],
    n: int = 128,
    mesh: Optional[TriMesh] = None,
) -> float:
    """Rayleigh quotient of c_1 delta_1 + c_2 delta_2 + c_3 delta_3 on the packed disks."""
    if len(coeffs) != 3:
        raise ValidationError("The family has three coefficients", field="coeffs")
    if not any(coeffs):
        raise ValidationError("At least one coefficient must be nonzero", field="coeffs")
    packing = three_disk_packing()
    m = mesh or build_disk_masked_mesh(1.0, 1.0, packing.disks, n)
    energy, mass = _bump_values(m, packing.disks, coeffs, p)
    return energy / mass


@dataclass(frozen=True)
class PackingBound:
    p: float
    closed_form: float
    numeric: Optional[float]
    radius: float

    @property
    def limit(self) -> float:
        return 1.0 / self.radius

    @property
    def relative_gap(self) -> Optional[float]:
        if self.numeric is None:
            return None
        return abs(self.numeric - self.closed_form) / self.closed_form


def packing_bound(p: float, n: int = 256, numeric: bool = True) -> PackingBound:
    """Closed-form and masked-mesh values of the single-bump bound R_p^(1/p)[delta_i]."""
    packing = three_disk_packing()
    closed = closed_form_bound(p, packing.radius)
    value = None
    if numeric:
        m = build_disk_masked_mesh(1.0, 1.0, packing.disks, n)
        per_disk = [
            _bump_values(m, [disk], [1.0], p) for disk in packing.disks
        ]
        roots = [(energy / mass) ** (1.0 / p) for energy, mass in per_disk]
        value = float(np.mean(roots))
    return PackingBound(p=p, closed_form=closed, numeric=value, radius=packing.radius)


def disk_lambda1(
    p: float,
    n: int,
    opts: Optional[SolveOptions] = None,
    radius: Optional[float] = None,
    warm: Optional[FloatArray] = None,
) -> EigenResult:
    """First eigenpair of a packed-radius disk, carried by a masked square mesh.

    Three disjoint copies bound lambda_3 of the unit square from above.
    """
    r = three_disk_packing().radius if radius is None else radius
    side = 2.0 * r
    m = build_disk_masked_mesh(side, side, [Disk(cx=r, cy=r, r=r)], n, MaskMode.INCLUDE)
    return solve_lambda1(m, p, opts, warm)


@dataclass(frozen=True)
class CrossoverRow:
    p: float
    boxbar_root: float
    bound: float
    disk_root: Optional[float]

    @property
    def below(self) -> bool:
        return self.bound < self.boxbar_root


@dataclass(frozen=True)
class CrossoverReport:
    rows: Tuple[CrossoverRow, ...]

    @property
    def first_below(self) -> Optional[float]:
        """Smallest scanned p where the packing bound drops below lambda_boxbar^(1/p)."""
        for row in self.rows:
            if row.below:
                return row.p
        return None


def bound_crossover(
    p_list: Sequence[float],
    n: int,
    opts: Optional[SolveOptions] = None,
    with_disk: bool = False,
) -> CrossoverReport:
    """Compare lambda_boxbar(p; R_1)^(1/p) with the genus-3 packing bounds along p_list."""
    if len(p_list) and max(p_list) > MAX_P:
        raise ValidationError(f"p above {MAX_P:g} is not solved", field="p_list")
    boxbar = BranchEvaluator("boxbar", 1.0, n, opts)
    rows = []
    disk_warm: Optional[FloatArray] = None
    for p in p_list:
        bar = boxbar(p)
        disk_root = None
        if with_disk:
            disk = disk_lambda1(p, n, opts, warm=disk_warm)
            disk_warm = disk.field
            disk_root = disk.lambda_ ** (1.0 / p)
        rows.append(
            CrossoverRow(
                p=p,
                boxbar_root=bar.lambda_ ** (1.0 / p),
                bound=closed_form_bound(p),
                disk_root=disk_root,
            )
        )
    report = CrossoverReport(rows=tuple(rows))
    if report.first_below is None:
        logger.info("Packing bound stays above lambda_boxbar^(1/p) on the scanned range")
    return report
