"""Container, initial body, anchoring set and the uniform node grid.

Nodes are stored as ``(nx, ny)`` arrays indexed ``[i, j]`` with
``x = i*h`` and ``y = j*h``; flattened indices use C order
(``k = i*ny + j``), which is also the lexicographic tie-break order used
by the eikonal solver.  Vector fields have shape ``(nx, ny, 2)``,
gradients ``(nx, ny, 2, 2)`` with ``F[..., a, b] = d y_a / d x_b`` and
second gradients ``(nx, ny, 2, 2, 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

INTERIOR = 1
BOUNDARY = 2
OMEGA0 = 4
ANCHOR = 8

MIN_RESOLUTION = 17


class GeometryError(ValueError):
    """Raised when a domain description violates a standing hypothesis."""


# ---------------------------------------------------------------------------
# region descriptors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError(f"disk radius must be positive, got {self.radius}")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(np.asarray(pts, float) - np.asarray(self.center), axis=-1)
        return d < self.radius

    def distance(self, pts: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(np.asarray(pts, float) - np.asarray(self.center), axis=-1)
        return np.maximum(d - self.radius, 0.0)

    def bounds(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        r = self.radius
        return cx - r, cy - r, cx + r, cy + r

    def inside_margin(self, other: "Region") -> float:
        """Largest ``m`` such that ``self + B_m`` lies inside ``other`` (negative if not inside)."""
        if isinstance(other, Disk):
            return other.radius - self.radius - float(
                np.hypot(self.center[0] - other.center[0], self.center[1] - other.center[1])
            )
        if isinstance(other, DiskUnion):
            return max(self.inside_margin(d) for d in other.disks)
        # conservative for polygons: sample the disk boundary
        ang = np.linspace(0.0, 2 * np.pi, 721)
        ring = np.c_[self.center[0] + self.radius * np.cos(ang), self.center[1] + self.radius * np.sin(ang)]
        if not np.all(other.contains(ring)):
            return -1.0
        return float(np.min(other.boundary_distance(ring)))


@dataclass(frozen=True)
class DiskUnion:
    disks: tuple[Disk, ...]

    def __post_init__(self):
        if not self.disks:
            raise GeometryError("empty disk union")

    def contains(self, pts):
        return np.any([d.contains(pts) for d in self.disks], axis=0)

    def distance(self, pts):
        return np.min([d.distance(pts) for d in self.disks], axis=0)

    def bounds(self):
        b = np.array([d.bounds() for d in self.disks])
        return b[:, 0].min(), b[:, 1].min(), b[:, 2].max(), b[:, 3].max()

    def inside_margin(self, other: "Region") -> float:
        return min(d.inside_margin(other) for d in self.disks)


@dataclass(frozen=True)
class Polygon:
    """Simple polygon given by its vertices (either orientation)."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise GeometryError("polygon needs at least three vertices")

    @property
    def _v(self) -> np.ndarray:
        return np.asarray(self.vertices, float)

    def contains(self, pts):
        pts = np.asarray(pts, float)
        x, y = pts[..., 0], pts[..., 1]
        v = self._v
        inside = np.zeros(x.shape, bool)
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            crosses = (a[1] > y) != (b[1] > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            inside ^= crosses & (x < xint)
        return inside

    def boundary_distance(self, pts):
        pts = np.asarray(pts, float)
        v = self._v
        best = np.full(pts.shape[:-1], np.inf)
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            ab = b - a
            s = np.clip(((pts - a) @ ab) / (ab @ ab), 0.0, 1.0)
            proj = a + s[..., None] * ab
            best = np.minimum(best, np.linalg.norm(pts - proj, axis=-1))
        return best

    def distance(self, pts):
        d = self.boundary_distance(pts)
        return np.where(self.contains(pts), 0.0, d)

    def bounds(self):
        v = self._v
        return v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max()

    def inside_margin(self, other: "Region") -> float:
        v = self._v
        # densify edges so that containment in a disk/polygon is checked along the boundary
        t = np.linspace(0.0, 1.0, 65)[:-1, None]
        ring = np.concatenate([a + t * (b - a) for a, b in zip(v, np.roll(v, -1, axis=0))])
        if not np.all(other.contains(ring)):
            return -1.0
        if isinstance(other, Polygon):
            return float(np.min(other.boundary_distance(ring)))
        # disk or union: distance from ring to the complement
        if isinstance(other, Disk):
            disks = (other,)
        else:
            disks = other.disks
        per_disk = [d.radius - np.linalg.norm(ring - np.asarray(d.center), axis=-1) for d in disks]
        return float(np.min(np.max(per_disk, axis=0)))


Region = Union[Disk, DiskUnion, Polygon]


def as_region(desc) -> Region:
    """Build a region from a descriptor: a region, a disk tuple, or a list of disk tuples."""
    if isinstance(desc, (Disk, DiskUnion, Polygon)):
        return desc
    if isinstance(desc, dict):
        if "vertices" in desc:
            return Polygon(tuple(map(tuple, desc["vertices"])))
        return Disk(tuple(desc["center"]), float(desc["radius"]))
    seq = list(desc)
    if len(seq) == 2 and np.ndim(seq[1]) == 0:
        return Disk(tuple(map(float, seq[0])), float(seq[1]))
    disks = tuple(as_region(d) for d in seq)
    return disks[0] if len(disks) == 1 else DiskUnion(disks)


# ---------------------------------------------------------------------------
# domain + grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainSpec:
    Lx: float
    Ly: float
    omega0: Region
    omega_anchor: Region
    T: float
    c_gamma: float
    C_gamma: float

    def __post_init__(self):
        object.__setattr__(self, "omega0", as_region(self.omega0))
        object.__setattr__(self, "omega_anchor", as_region(self.omega_anchor))

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.Lx, self.Ly))

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    def boundary_clearance(self, region: Region | None = None) -> float:
        """dist(region, dU) for a region contained in the container."""
        region = self.omega0 if region is None else region
        if isinstance(region, Disk):
            parts = [region]
        elif isinstance(region, DiskUnion):
            parts = list(region.disks)
        else:
            parts = [region]
        out = np.inf
        for r in parts:
            x0, y0, x1, y1 = r.bounds()
            out = min(out, x0, y0, self.Lx - x1, self.Ly - y1)
        return float(out)

    def validate(self, h: float = 0.0) -> None:
        """Check the inclusion chain and the no-contact condition with a ``2h`` safety band."""
        if self.Lx <= 0 or self.Ly <= 0:
            raise GeometryError("hypothesis (H1) violated: container must have positive extent")
        if self.T <= 0:
            raise GeometryError("hypothesis (H1) violated: final time T must be positive")
        if not 0 < self.c_gamma <= self.C_gamma:
            raise GeometryError(
                f"hypothesis (H14) violated: need 0 < c_gamma <= C_gamma, got {self.c_gamma}, {self.C_gamma}"
            )
        margin = 2.0 * h
        clearance = self.boundary_clearance()
        if clearance <= margin:
            raise GeometryError(
                f"hypothesis (H1) violated: initial body not strictly inside container "
                f"(clearance {clearance:.6g} <= {margin:.6g})"
            )
        if self.omega_anchor.inside_margin(self.omega0) <= margin:
            raise GeometryError("hypothesis (H1) violated: anchor not inside initial body")
        reach = self.C_gamma * self.T
        if clearance <= reach + margin:
            raise GeometryError(
                f"hypothesis (H15) violated: dist(Omega0, dU) = {clearance:.6g} must exceed "
                f"C_gamma*T + 2h = {reach + margin:.6g}"
            )


@dataclass(frozen=True)
class Grid:
    spec: DomainSpec
    nx: int
    ny: int
    h: float
    masks: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nx, self.ny

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @cached_property
    def coords(self) -> np.ndarray:
        """Node positions, shape ``(nx, ny, 2)``."""
        x = np.arange(self.nx) * self.h
        y = np.arange(self.ny) * self.h
        X, Y = np.meshgrid(x, y, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def mask(self, flag: int) -> np.ndarray:
        return (self.masks & flag) != 0

    @property
    def boundary(self) -> np.ndarray:
        return self.mask(BOUNDARY)

    @property
    def omega0(self) -> np.ndarray:
        return self.mask(OMEGA0)

    @property
    def anchor(self) -> np.ndarray:
        return self.mask(ANCHOR)

    @cached_property
    def fixed(self) -> np.ndarray:
        """Dirichlet nodes: anchor and container boundary."""
        return self.anchor | self.boundary

    @cached_property
    def weights(self) -> np.ndarray:
        """Nodal quadrature weights (area units); they sum to ``Lx*Ly``.

        The boundary-layer weights (1/4, 5/4) are the unique tensor weights
        for which a constant stress has zero discrete divergence at every
        non-boundary node under the one-sided boundary stencils.
        """
        return np.outer(_weights_1d(self.nx), _weights_1d(self.ny)) * self.h**2

    # sparse difference operators acting on flattened nodal scalars
    @cached_property
    def Dx(self) -> sp.csr_matrix:
        return sp.kron(_first_1d(self.nx, self.h), sp.identity(self.ny), format="csr")

    @cached_property
    def Dy(self) -> sp.csr_matrix:
        return sp.kron(sp.identity(self.nx), _first_1d(self.ny, self.h), format="csr")

    @cached_property
    def Dxx(self) -> sp.csr_matrix:
        return sp.kron(_second_1d(self.nx, self.h), sp.identity(self.ny), format="csr")

    @cached_property
    def Dyy(self) -> sp.csr_matrix:
        return sp.kron(sp.identity(self.nx), _second_1d(self.ny, self.h), format="csr")

    @cached_property
    def Dxy(self) -> sp.csr_matrix:
        return sp.kron(_first_1d(self.nx, self.h), _first_1d(self.ny, self.h), format="csr")


def _first_1d(n: int, h: float) -> sp.csr_matrix:
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1], D[i, i + 1] = -0.5, 0.5
    D[0, :3] = [-1.5, 2.0, -0.5]
    D[n - 1, n - 3 :] = [0.5, -2.0, 1.5]
    return (D / h).tocsr()


def _second_1d(n: int, h: float) -> sp.csr_matrix:
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1 : i + 2] = [1.0, -2.0, 1.0]
    D[0, :4] = [2.0, -5.0, 4.0, -1.0]
    D[n - 1, n - 4 :] = [-1.0, 4.0, -5.0, 2.0]
    return (D / h**2).tocsr()


def _weights_1d(n: int) -> np.ndarray:
    w = np.ones(n)
    w[[0, -1]] = 0.25
    w[[1, -2]] = 1.25
    return w


def build_grid(spec: DomainSpec, resolution: int) -> Grid:
    """Discretize the container with ``resolution`` nodes along x (square cells)."""
    if resolution < MIN_RESOLUTION:
        raise GeometryError(f"resolution must be >= {MIN_RESOLUTION}, got {resolution}")
    nx = int(resolution)
    h = spec.Lx / (nx - 1)
    ny_f = spec.Ly / h + 1
    ny = int(round(ny_f))
    if abs(ny - ny_f) > 1e-9 or ny < MIN_RESOLUTION:
        raise GeometryError(f"Ly={spec.Ly} is not a multiple of h={h} with >= {MIN_RESOLUTION} nodes")
    spec.validate(h)

    x = np.arange(nx) * h
    y = np.arange(ny) * h
    pts = np.stack(np.meshgrid(x, y, indexing="ij"), axis=-1)
    masks = np.zeros((nx, ny), dtype=np.int8)
    bnd = np.zeros((nx, ny), bool)
    bnd[[0, -1], :] = True
    bnd[:, [0, -1]] = True
    masks[bnd] |= BOUNDARY
    masks[~bnd] |= INTERIOR
    om0 = spec.omega0.contains(pts) & ~bnd
    masks[om0] |= OMEGA0
    masks[spec.omega_anchor.contains(pts) & om0] |= ANCHOR
    if not om0.any():
        raise GeometryError("initial body contains no grid node; refine the grid")
    if not (masks & ANCHOR).any():
        raise GeometryError("anchor set contains no grid node; refine the grid")
    return Grid(spec=spec, nx=nx, ny=ny, h=h, masks=masks)


# ---------------------------------------------------------------------------
# stencils
# ---------------------------------------------------------------------------


def _apply(D: sp.csr_matrix, f: np.ndarray, grid: Grid) -> np.ndarray:
    flat = f.reshape(grid.size, -1)
    return (D @ flat).reshape(f.shape)


def gradient(field: np.ndarray, grid: Grid) -> np.ndarray:
    """Nodal gradient of a vector field: central inside, one-sided 2nd order on the boundary."""
    out = np.empty(field.shape + (2,))
    out[..., 0] = _apply(grid.Dx, field, grid)
    out[..., 1] = _apply(grid.Dy, field, grid)
    return out


def hessian(field: np.ndarray, grid: Grid) -> np.ndarray:
    """Nodal second gradient ``G[..., a, b, c] = d^2 y_a / dx_b dx_c``."""
    fxx = _apply(grid.Dxx, field, grid)
    fyy = _apply(grid.Dyy, field, grid)
    fxy = _apply(grid.Dxy, field, grid)
    out = np.empty(field.shape + (2, 2))
    out[..., 0, 0] = fxx
    out[..., 0, 1] = fxy
    out[..., 1, 0] = fxy
    out[..., 1, 1] = fyy
    return out


def scalar_gradient(f: np.ndarray, grid: Grid) -> np.ndarray:
    return np.stack([_apply(grid.Dx, f, grid), _apply(grid.Dy, f, grid)], axis=-1)


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


def dist_to_region(x: Sequence[float] | np.ndarray, region, grid: Grid | None = None) -> np.ndarray:
    """Euclidean distance from point(s) ``x`` to a region.

    ``region`` is either a descriptor (exact distance) or a boolean node mask,
    in which case the distance is the minimum over the mask's boundary nodes
    (zero for points at mask nodes).
    """
    pts = np.asarray(x, float)
    if not isinstance(region, np.ndarray):
        d = as_region(region).distance(pts)
        return d if d.ndim else float(d)
    if grid is None:
        raise ValueError("a node mask needs its grid")
    if not region.any():
        raise GeometryError("distance to an empty region")
    # boundary nodes of the mask: members with a 4-neighbour outside it
    pad = np.pad(region, 1, constant_values=False)
    interior = pad[2:, 1:-1] & pad[:-2, 1:-1] & pad[1:-1, 2:] & pad[1:-1, :-2]
    edge = grid.coords[region & ~interior]
    flat = pts.reshape(-1, 2)
    d = np.min(np.linalg.norm(flat[:, None, :] - edge[None, :, :], axis=-1), axis=1)
    node = np.round(flat / grid.h).astype(int)
    ok = (np.abs(flat / grid.h - node) < 1e-9).all(axis=1)
    ok &= (node[:, 0] >= 0) & (node[:, 0] < grid.nx) & (node[:, 1] >= 0) & (node[:, 1] < grid.ny)
    on_mask = np.zeros(len(flat), bool)
    on_mask[ok] = region[node[ok, 0], node[ok, 1]]
    d[on_mask] = 0.0
    d = d.reshape(pts.shape[:-1])
    return d if d.ndim else float(d)
