"""Structured symmetric triangulations of rectangles, the unit right triangle
and disk-masked rectangles.

Rectangles use the crisscross (union-jack) split: every grid cell gets a
center vertex and four triangles, so the mesh inherits both axis reflections
and, on squares, the diagonal swap. ``n`` is a resolution per unit length.
"""

from dataclasses import dataclass, field, replace
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pydantic
from scipy.spatial import cKDTree

from plapbranch.models.domain import Disk, DomainKind, DomainSpec, MaskMode
from plapbranch.models.errors import (
    DimensionMismatchError,
    InvalidDomainError,
    MeshResolutionError,
    ValidationError,
)

logger = logging.getLogger("plapbranch.mesh")

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]
BoolArray = npt.NDArray[np.bool_]

MIN_RESOLUTION = 4

# Local triangles of a crisscross cell, as indices into (v1, v2, v3, v4, center)
# with v1=(i,j+1), v2=(i,j), v3=(i+1,j+1), v4=(i+1,j).
_LEFT, _BOTTOM, _RIGHT, _TOP = 0, 1, 2, 3
_CELL_TRIANGLES = ((1, 4, 0), (3, 4, 1), (2, 4, 3), (0, 4, 2))

TRANSFORMS = ("flip_x", "flip_y", "swap")


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable P1 triangulation with per-element gradient operators.

    ``grad_ops[t, k]`` is the gradient of the k-th barycentric function of
    triangle t, so the element gradient of a field u is
    ``sum_k u[triangles[t, k]] * grad_ops[t, k]``.
    """

    vertices: FloatArray
    triangles: IntArray
    dirichlet: BoolArray
    areas: FloatArray
    grad_ops: FloatArray
    domain: DomainSpec
    n: int
    h: float
    scale: float = 1.0
    disk_vertices: Tuple[IntArray, ...] = field(default=())

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def interior(self) -> BoolArray:
        return ~self.dirichlet

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def diameter(self) -> float:
        extent = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.hypot(extent[0], extent[1]))

    def gradients(self, u: FloatArray) -> FloatArray:
        """Constant element gradients, shape (T, 2)."""
        self.check_field(u)
        return np.einsum("tk,tkd->td", u[self.triangles], self.grad_ops)

    def edge_midpoint_values(self, u: FloatArray) -> FloatArray:
        """Values at the three edge midpoints of every element, shape (T, 3)."""
        local = u[self.triangles]
        return 0.5 * (local + np.roll(local, -1, axis=1))

    def edge_midpoints(self) -> FloatArray:
        """Coordinates of the edge midpoints, shape (T, 3, 2)."""
        local = self.vertices[self.triangles]
        return 0.5 * (local + np.roll(local, -1, axis=1))

    def check_field(self, u: FloatArray) -> None:
        if u.ndim != 1 or u.shape[0] != self.n_vertices:
            raise DimensionMismatchError(self.n_vertices, int(u.size))

    def zero_field(self) -> FloatArray:
        return np.zeros(self.n_vertices)


def _finalize(
    vertices: FloatArray,
    triangles: IntArray,
    dirichlet: BoolArray,
    domain: DomainSpec,
    n: int,
    h: float,
    disk_vertices: Tuple[IntArray, ...] = (),
) -> TriMesh:
    """Compute areas and gradient operators; freeze the arrays."""
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    twice = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (
        p1[:, 1] - p0[:, 1]
    )
    if np.any(twice <= 0):
        raise InvalidDomainError("Triangulation has degenerate or clockwise elements")

    grad_ops = np.empty((triangles.shape[0], 3, 2))
    grad_ops[:, 0, 0] = p1[:, 1] - p2[:, 1]
    grad_ops[:, 0, 1] = p2[:, 0] - p1[:, 0]
    grad_ops[:, 1, 0] = p2[:, 1] - p0[:, 1]
    grad_ops[:, 1, 1] = p0[:, 0] - p2[:, 0]
    grad_ops[:, 2, 0] = p0[:, 1] - p1[:, 1]
    grad_ops[:, 2, 1] = p1[:, 0] - p0[:, 0]
    grad_ops /= twice[:, None, None]

    arrays = (vertices, triangles, dirichlet, grad_ops)
    for arr in arrays:
        arr.setflags(write=False)
    areas = 0.5 * twice
    areas.setflags(write=False)
    for arr in disk_vertices:
        arr.setflags(write=False)

    return TriMesh(
        vertices=vertices,
        triangles=triangles,
        dirichlet=dirichlet,
        areas=areas,
        grad_ops=grad_ops,
        domain=domain,
        n=n,
        h=h,
        disk_vertices=disk_vertices,
    )


def _check_resolution(n: int) -> None:
    if n < MIN_RESOLUTION:
        raise MeshResolutionError(n, MIN_RESOLUTION)


def _make_domain(**kwargs: object) -> DomainSpec:
    try:
        return DomainSpec(**kwargs)  # type: ignore[arg-type]
    except pydantic.ValidationError as exc:
        message = exc.errors()[0]["msg"].removeprefix("Value error, ")
        raise InvalidDomainError(message) from exc


def _crisscross(
    nx: int, ny: int, a: float, b: float
) -> Tuple[FloatArray, IntArray, BoolArray, npt.NDArray[np.int64]]:
    """Crisscross grid on (0,a)x(0,b).

    Returns vertices, triangles (cell-major, four per cell in the order
    left/bottom/right/top), the boundary flag and the (i, j) cell index of
    every triangle.
    """
    n_grid = (nx + 1) * (ny + 1)
    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    grid_xy = np.column_stack([a * ii.ravel() / nx, b * jj.ravel() / ny])
    ci, cj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ci, cj = ci.ravel(), cj.ravel()
    center_xy = np.column_stack([a * (2 * ci + 1) / (2 * nx), b * (2 * cj + 1) / (2 * ny)])
    vertices = np.vstack([grid_xy, center_xy])

    def gid(i: npt.NDArray[np.int64], j: npt.NDArray[np.int64]) -> npt.NDArray[np.int64]:
        return i * (ny + 1) + j

    corners = np.column_stack(
        [
            gid(ci, cj + 1),
            gid(ci, cj),
            gid(ci + 1, cj + 1),
            gid(ci + 1, cj),
            n_grid + ci * ny + cj,
        ]
    )
    local = np.asarray(_CELL_TRIANGLES)
    triangles = corners[:, local].reshape(-1, 3).astype(np.int64)

    boundary_grid = (ii == 0) | (ii == nx) | (jj == 0) | (jj == ny)
    dirichlet = np.concatenate([boundary_grid.ravel(), np.zeros(nx * ny, dtype=bool)])
    cells = np.repeat(np.column_stack([ci, cj]), 4, axis=0)
    return vertices, triangles, dirichlet, cells


def build_rectangle_mesh(a: float, b: float, n: int) -> TriMesh:
    """Crisscross triangulation of (0,a)x(0,b) with about n cells per unit length."""
    if not (a > 0 and b > 0):
        raise InvalidDomainError("Rectangle dimensions must be positive", a=a, b=b)
    _check_resolution(n)
    nx, ny = round(a * n), round(b * n)
    if nx < 1 or ny < 1:
        raise MeshResolutionError(n, MIN_RESOLUTION)
    vertices, triangles, dirichlet, _ = _crisscross(nx, ny, a, b)
    domain = _make_domain(kind=DomainKind.RECTANGLE, a=a, b=b)
    mesh = _finalize(vertices, triangles, dirichlet, domain, n, max(a / nx, b / ny))
    logger.debug(
        "Built rectangle mesh %gx%g: %d vertices, %d triangles",
        a,
        b,
        mesh.n_vertices,
        mesh.n_triangles,
    )
    return mesh


def build_triangle_mesh(n: int) -> TriMesh:
    """Triangulation of the unit right triangle symmetric under (x,y) -> (y,x).

    Cells strictly below the hypotenuse keep all four crisscross triangles;
    cells cut by it keep the left and bottom ones, whose hypotenuse-side edges
    lie exactly on x + y = 1.
    """
    _check_resolution(n)
    vertices, triangles, _, cells = _crisscross(n, n, 1.0, 1.0)
    diag = cells.sum(axis=1)
    position = np.tile(np.arange(4), n * n)
    keep = (diag < n - 1) | ((diag == n - 1) & ((position == _LEFT) | (position == _BOTTOM)))
    triangles = triangles[keep]

    used = np.unique(triangles)
    remap = np.full(vertices.shape[0], -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    vertices = vertices[used]
    triangles = remap[triangles]

    # Integer half-step coordinates make the boundary test exact.
    half = np.rint(vertices * 2 * n).astype(np.int64)
    dirichlet = (half[:, 0] == 0) | (half[:, 1] == 0) | (half.sum(axis=1) == 2 * n)

    domain = _make_domain(kind=DomainKind.TRIANGLE)
    return _finalize(vertices, triangles, dirichlet, domain, n, 1.0 / n)


def mesh_from_arrays(
    vertices: FloatArray,
    triangles: IntArray,
    dirichlet: BoolArray,
    domain: DomainSpec,
    n: int,
    h: float,
    scale: float = 1.0,
    disk_vertices: Sequence[IntArray] = (),
) -> TriMesh:
    """Rebuild a mesh from raw arrays (e.g. a text dump)."""
    vertices = np.array(vertices, dtype=float).reshape(-1, 2)
    triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    dirichlet = np.array(dirichlet, dtype=bool).reshape(-1)
    if dirichlet.shape[0] != vertices.shape[0]:
        raise DimensionMismatchError(vertices.shape[0], dirichlet.shape[0])
    if triangles.size and (triangles.min() < 0 or triangles.max() >= vertices.shape[0]):
        raise InvalidDomainError("Triangle refers to a missing vertex")
    disks = tuple(np.array(d, dtype=np.int64).reshape(-1) for d in disk_vertices)
    for d in disks:
        if d.size and (d.min() < 0 or d.max() >= vertices.shape[0]):
            raise InvalidDomainError("Disk vertex list refers to a missing vertex")
    mesh = _finalize(vertices, triangles, dirichlet, domain, n, h, disks)
    return mesh if scale == 1.0 else replace(mesh, scale=scale)


def scale_mesh(m: TriMesh, s: float) -> TriMesh:
    """Image of the mesh under z -> s z."""
    if not s > 0:
        raise ValidationError(f"Scale factor must be positive (got {s})", field="s")
    if s == 1.0:
        return m
    vertices = m.vertices * s
    areas = m.areas * (s * s)
    grad_ops = m.grad_ops / s
    for arr in (vertices, areas, grad_ops):
        arr.setflags(write=False)
    return replace(
        m,
        vertices=vertices,
        areas=areas,
        grad_ops=grad_ops,
        h=m.h * s,
        scale=m.scale * s,
    )


def _shared_with_other_disk(
    triangles: IntArray, inside: BoolArray, dirichlet: BoolArray
) -> BoolArray:
    """Free vertices that share a triangle with a free vertex of another disk.

    Flagging them keeps the disks' free sets in separate components even where
    disks touch. One pass suffices: flagging never makes a triangle mixed.
    """
    owner = np.where(inside.any(axis=0), inside.argmax(axis=0), -1)
    owner[dirichlet] = -1
    local = owner[triangles]
    hi = local.max(axis=1)
    lo = np.where(local >= 0, local, hi[:, None]).min(axis=1)
    mixed = triangles[lo != hi]
    shared = np.zeros(owner.shape[0], dtype=bool)
    shared[mixed.ravel()] = True
    return shared & (owner >= 0)


def build_disk_masked_mesh(
    a: float,
    b: float,
    disks: Sequence[Disk],
    n: int,
    mode: MaskMode = MaskMode.INCLUDE,
) -> TriMesh:
    """Rectangle mesh whose Dirichlet flags restrict fields to (or away from) disks.

    With ``mode=INCLUDE`` every vertex that is not strictly inside some disk is
    flagged, so admissible fields are supported in the union of the disks.
    The free vertex set of each disk is reported in ``disk_vertices``.
    """
    domain = _make_domain(
        kind=DomainKind.MASKED_RECTANGLE, a=a, b=b, disks=tuple(disks), mode=mode
    )
    base = build_rectangle_mesh(a, b, n)
    if not disks:
        return base

    xy = base.vertices
    inside = np.zeros((len(disks), base.n_vertices), dtype=bool)
    for k, disk in enumerate(disks):
        inside[k] = np.hypot(xy[:, 0] - disk.cx, xy[:, 1] - disk.cy) < disk.r

    dirichlet = base.dirichlet.copy()
    if mode is MaskMode.INCLUDE:
        dirichlet |= ~inside.any(axis=0)
        dirichlet |= _shared_with_other_disk(base.triangles, inside, dirichlet)
    else:
        on_or_in = np.zeros(base.n_vertices, dtype=bool)
        for disk in disks:
            on_or_in |= np.hypot(xy[:, 0] - disk.cx, xy[:, 1] - disk.cy) <= disk.r
        dirichlet |= on_or_in
    dirichlet.setflags(write=False)

    disk_vertices = tuple(
        np.flatnonzero(inside[k] & ~dirichlet).astype(np.int64) for k in range(len(disks))
    )
    for arr in disk_vertices:
        arr.setflags(write=False)
    logger.debug(
        "Masked mesh: %d free vertices in %d disks",
        int((~dirichlet).sum()),
        len(disks),
    )
    return replace(base, dirichlet=dirichlet, domain=domain, disk_vertices=disk_vertices)


def build_mesh(domain: DomainSpec, n: int) -> TriMesh:
    """Dispatch on the domain kind."""
    if domain.kind is DomainKind.TRIANGLE:
        return build_triangle_mesh(n)
    if domain.kind is DomainKind.MASKED_RECTANGLE:
        return build_disk_masked_mesh(domain.a, domain.b, list(domain.disks), n, domain.mode)
    return build_rectangle_mesh(domain.a, domain.b, n)


def interpolate(
    m: TriMesh,
    fn: Callable[[FloatArray, FloatArray], FloatArray],
    enforce_dirichlet: bool = True,
) -> FloatArray:
    """Nodal interpolant of fn(x, y); Dirichlet entries zeroed unless disabled."""
    values = np.asarray(fn(m.vertices[:, 0], m.vertices[:, 1]), dtype=float)
    values = np.broadcast_to(values, (m.n_vertices,)).copy()
    if enforce_dirichlet:
        values[m.dirichlet] = 0.0
    return values


def _transform(m: TriMesh, transform: str) -> FloatArray:
    x, y = m.vertices[:, 0], m.vertices[:, 1]
    lo, hi = m.vertices.min(axis=0), m.vertices.max(axis=0)
    if transform == "flip_x":
        return np.column_stack([lo[0] + hi[0] - x, y])
    if transform == "flip_y":
        return np.column_stack([x, lo[1] + hi[1] - y])
    if transform == "swap":
        return np.column_stack([y, x])
    raise ValidationError(f"Unknown transform {transform!r}; use one of {TRANSFORMS}")


def symmetry_permutation(m: TriMesh, transform: str) -> Optional[IntArray]:
    """Vertex permutation realizing a reflection, or None if the vertex set is not invariant."""
    image = _transform(m, transform)
    tree = cKDTree(m.vertices)
    dist, idx = tree.query(image)
    if np.any(dist > 1e-9 * max(m.diameter, 1.0)):
        return None
    if np.unique(idx).size != m.n_vertices:
        return None
    return idx.astype(np.int64)


def is_symmetric(m: TriMesh, transform: str) -> bool:
    """True if the reflection maps the triangle set and the Dirichlet flags to themselves."""
    perm = symmetry_permutation(m, transform)
    if perm is None:
        return False
    if not np.array_equal(m.dirichlet[perm], m.dirichlet):
        return False
    original = {tuple(t) for t in np.sort(m.triangles, axis=1).tolist()}
    mapped = {tuple(t) for t in np.sort(perm[m.triangles], axis=1).tolist()}
    return original == mapped


def domain_symmetries(m: TriMesh) -> List[str]:
    """Reflections the domain itself admits."""
    kind = m.domain.kind
    if kind is DomainKind.TRIANGLE:
        return ["swap"]
    if kind is DomainKind.MASKED_RECTANGLE:
        return []
    transforms = ["flip_x", "flip_y"]
    if m.domain.a == m.domain.b:
        transforms.append("swap")
    return transforms


def connected_free_components(m: TriMesh) -> int:
    """Number of connected components of the graph of free vertices."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    free = np.flatnonzero(m.interior)
    if free.size == 0:
        return 0
    index: Dict[int, int] = {int(v): k for k, v in enumerate(free)}
    rows: List[int] = []
    cols: List[int] = []
    for tri in m.triangles.tolist():
        local = [index[v] for v in tri if v in index]
        for i in local:
            for j in local:
                rows.append(i)
                cols.append(j)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(free.size, free.size))
    count, _ = connected_components(graph.tocsr(), directed=False)
    return int(count)
