"""Discrete p-Dirichlet energy, p-mass, Rayleigh quotient and their gradients.

Fields are piecewise linear: one value per mesh vertex. The energy is exact
for P1 fields (constant element gradients); the p-mass uses the edge-midpoint
rule on every element.
"""

from typing import Optional, Tuple

import numpy as np
from scipy import sparse

from plapbranch.models.errors import InvalidExponentError, ZeroDenominatorError
from plapbranch.models.options import EnergyOptions
from plapbranch.numerics.mesh import FloatArray, TriMesh


def _check_p(p: float) -> None:
    if not p > 1:
        raise InvalidExponentError(p)


def _scatter(m: TriMesh, local: FloatArray) -> FloatArray:
    """Sum per-element vertex contributions (T, 3) into a vertex vector."""
    return np.bincount(m.triangles.ravel(), weights=local.ravel(), minlength=m.n_vertices)


def _regularized_sq(m: TriMesh, u: FloatArray, eps: float) -> Tuple[FloatArray, FloatArray]:
    grads = m.gradients(u)
    return grads, np.einsum("td,td->t", grads, grads) + eps * eps


def dirichlet_energy(m: TriMesh, u: FloatArray, opts: EnergyOptions) -> float:
    """sum_T |T| (|grad u|_T^2 + eps^2)^(p/2)."""
    _check_p(opts.p)
    _, sq = _regularized_sq(m, u, opts.eps)
    return float(np.dot(m.areas, sq ** (0.5 * opts.p)))


def p_mass(m: TriMesh, u: FloatArray, p: float) -> float:
    """sum_T |T| * mean of |u|^p over the three edge midpoints."""
    _check_p(p)
    m.check_field(u)
    mids = np.abs(m.edge_midpoint_values(u))
    return float(np.dot(m.areas, (mids**p).mean(axis=1)))


def rayleigh(m: TriMesh, u: FloatArray, opts: EnergyOptions) -> float:
    mass = p_mass(m, u, opts.p)
    if mass <= 0:
        raise ZeroDenominatorError()
    return dirichlet_energy(m, u, opts) / mass


def energy_gradient(m: TriMesh, u: FloatArray, opts: EnergyOptions) -> FloatArray:
    """Derivative of the energy with respect to every vertex value."""
    _check_p(opts.p)
    grads, sq = _regularized_sq(m, u, opts.eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(sq > 0, sq ** (0.5 * opts.p - 1.0), 0.0)
    flux = (opts.p * m.areas * coef)[:, None] * grads
    local = np.einsum("tkd,td->tk", m.grad_ops, flux)
    return _scatter(m, local)


def mass_gradient(m: TriMesh, u: FloatArray, p: float) -> FloatArray:
    """Derivative of the p-mass with respect to every vertex value."""
    _check_p(p)
    mids = m.edge_midpoint_values(u)
    dmid = p * np.sign(mids) * np.abs(mids) ** (p - 1.0)
    # edge k joins local vertices k and k+1; each endpoint gets half the derivative
    weighted = (m.areas / 3.0)[:, None] * dmid * 0.5
    local = weighted + np.roll(weighted, 1, axis=1)
    return _scatter(m, local)


def rayleigh_gradient(
    m: TriMesh,
    u: FloatArray,
    opts: EnergyOptions,
    value: Optional[float] = None,
) -> FloatArray:
    """Gradient of the (regularized) Rayleigh quotient; zero on Dirichlet vertices.

    This is the discrete residual of the weak eigenvalue equation divided by
    the p-mass.
    """
    mass = p_mass(m, u, opts.p)
    if mass <= 0:
        raise ZeroDenominatorError()
    r = dirichlet_energy(m, u, opts) / mass if value is None else value
    grad = (energy_gradient(m, u, opts) - r * mass_gradient(m, u, opts.p)) / mass
    grad[m.dirichlet] = 0.0
    return grad


def energy_hessian(
    m: TriMesh, u: FloatArray, opts: EnergyOptions, weight_floor: float = 0.0
) -> sparse.csr_matrix:
    """Hessian of the regularized p-energy, assembled as a sparse matrix.

    Element blocks are p |T| w G (I + (p-2) g g^T / s) G^T with
    s = |grad u|^2 + eps^2 and w = s^((p-2)/2); w is clipped below at
    ``weight_floor * max(w)``. The matrix is positive semidefinite for every
    p > 1 and equals 2K (K the stiffness matrix) at p = 2.
    """
    _check_p(opts.p)
    p = opts.p
    grads, sq = _regularized_sq(m, u, opts.eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        if p == 2.0:
            w = np.ones_like(sq)
        else:
            w = np.where(sq > 0, sq ** (0.5 * p - 1.0), 0.0)
        unit = np.where(sq[:, None] > 0, grads / np.sqrt(sq)[:, None], 0.0)
    if weight_floor > 0 and w.size:
        w = np.maximum(w, weight_floor * w.max())
    coef = p * m.areas * w
    gg = np.einsum("tid,tjd->tij", m.grad_ops, m.grad_ops)
    if p != 2.0:
        proj = np.einsum("tid,td->ti", m.grad_ops, unit)
        gg = gg + (p - 2.0) * np.einsum("ti,tj->tij", proj, proj)
    local = coef[:, None, None] * gg
    rows = np.repeat(m.triangles, 3, axis=1).ravel()
    cols = np.tile(m.triangles, (1, 3)).ravel()
    mat = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(m.n_vertices, m.n_vertices))
    return mat.tocsr()


def rms_gradient(m: TriMesh, u: FloatArray) -> float:
    """Area-weighted root mean square of |grad u|."""
    grads = m.gradients(u)
    sq = np.einsum("td,td->t", grads, grads)
    return float(np.sqrt(np.dot(m.areas, sq) / m.total_area))


def normalize(m: TriMesh, u: FloatArray, p: float) -> FloatArray:
    """Zero the Dirichlet entries and rescale to unit p-mass."""
    v = np.array(u, dtype=float)
    v[m.dirichlet] = 0.0
    mass = p_mass(m, v, p)
    if mass <= 0:
        raise ZeroDenominatorError()
    return v / mass ** (1.0 / p)
