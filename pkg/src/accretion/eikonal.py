"""Arrival-time field of the growing body.

``solve_fmm`` computes the viscosity solution of ``speed(x) |grad theta| = 1``
outside the initial body with a first-order Godunov fast-marching sweep;
``dijkstra_oracle`` minimizes the travel time over 16-neighbour lattice
paths instead and serves as an independent witness.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .geometry import Grid, dist_to_region


class EikonalError(RuntimeError):
    pass


@dataclass(frozen=True)
class ThetaField:
    values: np.ndarray
    source: np.ndarray = field(repr=False)
    #: flat node indices in acceptance order (fast marching only)
    order: np.ndarray | None = field(default=None, repr=False)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def max(self) -> float:
        return float(self.values.max())


def check_speed(speed: np.ndarray, c_gamma: float, C_gamma: float) -> None:
    if np.any(~np.isfinite(speed)) or speed.min() < c_gamma or speed.max() > C_gamma:
        raise EikonalError(
            f"speed field outside [{c_gamma}, {C_gamma}]: range [{speed.min():.6g}, {speed.max():.6g}]"
        )


def solve_fmm(speed: np.ndarray, grid: Grid, source: np.ndarray | None = None) -> ThetaField:
    """Fast marching from ``source`` (default: the initial-body nodes) with per-node speed."""
    nx, ny, h = grid.nx, grid.ny, grid.h
    src = grid.omega0 if source is None else source
    if not src.any():
        raise EikonalError("no source nodes")
    if np.any(speed <= 0):
        raise EikonalError("speed must be positive")

    inf = math.inf
    theta = [inf] * (nx * ny)
    known = [False] * (nx * ny)
    slow = (h / np.asarray(speed, float)).ravel().tolist()
    order: list[int] = []
    heap: list[tuple[float, int]] = []

    for k in np.flatnonzero(src.ravel()):
        theta[k] = 0.0
        heap.append((0.0, int(k)))
    heapq.heapify(heap)

    def local_solve(k: int) -> float:
        i, j = divmod(k, ny)
        a = inf
        if i > 0 and known[k - ny]:
            a = theta[k - ny]
        if i < nx - 1 and known[k + ny] and theta[k + ny] < a:
            a = theta[k + ny]
        b = inf
        if j > 0 and known[k - 1]:
            b = theta[k - 1]
        if j < ny - 1 and known[k + 1] and theta[k + 1] < b:
            b = theta[k + 1]
        f = slow[k]
        if a > b:
            a, b = b, a
        if b - a >= f:
            return a + f
        return 0.5 * (a + b + math.sqrt(2.0 * f * f - (a - b) ** 2))

    while heap:
        t, k = heapq.heappop(heap)
        if known[k] or t > theta[k]:
            continue
        known[k] = True
        order.append(k)
        i, j = divmod(k, ny)
        for nb, ok in ((k - ny, i > 0), (k + ny, i < nx - 1), (k - 1, j > 0), (k + 1, j < ny - 1)):
            if ok and not known[nb]:
                cand = local_solve(nb)
                if cand < theta[nb]:
                    theta[nb] = cand
                    heapq.heappush(heap, (cand, nb))

    if len(order) != nx * ny:
        raise EikonalError(f"fast marching reached only {len(order)} of {nx * ny} nodes")
    return ThetaField(np.array(theta).reshape(nx, ny), src.copy(), np.array(order))


_OFFSETS_16 = [
    (di, dj)
    for di in range(-2, 3)
    for dj in range(-2, 3)
    if (di, dj) != (0, 0) and math.gcd(abs(di), abs(dj)) == 1
]


def dijkstra_oracle(speed: np.ndarray, grid: Grid, source: np.ndarray | None = None) -> ThetaField:
    """Travel time minimized over paths on the 16-neighbour lattice (king + knight moves).

    Edge cost is the edge length times the mean slowness of its end nodes,
    i.e. length over the harmonic-mean speed.
    """
    nx, ny, h = grid.nx, grid.ny, grid.h
    src = grid.omega0 if source is None else source
    if not src.any():
        raise EikonalError("no source nodes")
    slowness = 1.0 / np.asarray(speed, float)
    idx = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, vals = [], [], []
    for di, dj in _OFFSETS_16:
        if di < 0 or (di == 0 and dj < 0):
            continue  # undirected: each pair once
        i0, i1 = max(0, -di), nx - max(0, di)
        j0, j1 = max(0, -dj), ny - max(0, dj)
        a = idx[i0:i1, j0:j1]
        b = idx[i0 + di : i1 + di, j0 + dj : j1 + dj]
        length = h * math.hypot(di, dj)
        w = length * 0.5 * (slowness.ravel()[a.ravel()] + slowness.ravel()[b.ravel()])
        rows.append(a.ravel())
        cols.append(b.ravel())
        vals.append(w)
    graph = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nx * ny, nx * ny)
    )
    dist = dijkstra(graph, directed=False, indices=np.flatnonzero(src.ravel()), min_only=True)
    if not np.all(np.isfinite(dist)):
        raise EikonalError("graph search did not reach every node")
    return ThetaField(dist.reshape(nx, ny), src.copy())


# ---------------------------------------------------------------------------
# bound checks
# ---------------------------------------------------------------------------


@dataclass
class BoundReport:
    lower_violations: int
    upper_violations: int
    gradient_violations: int
    worst_lower: float
    worst_upper: float
    worst_gradient: float
    tol_theta: float
    tol_gradient: float
    flagged: list[tuple[int, int]]

    @property
    def ok(self) -> bool:
        return self.lower_violations == self.upper_violations == self.gradient_violations == 0

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["flagged"] = [list(map(int, ij)) for ij in self.flagged[:20]]
        d["ok"] = self.ok
        return d


def upwind_gradient_norm(theta: np.ndarray, h: float) -> np.ndarray:
    """Godunov upwind |grad theta| at every non-boundary node (NaN on the boundary)."""
    t = np.asarray(theta, float)
    c = t[1:-1, 1:-1]
    gx = np.maximum.reduce([c - t[:-2, 1:-1], c - t[2:, 1:-1], np.zeros_like(c)])
    gy = np.maximum.reduce([c - t[1:-1, :-2], c - t[1:-1, 2:], np.zeros_like(c)])
    out = np.full(t.shape, np.nan)
    out[1:-1, 1:-1] = np.hypot(gx, gy) / h
    return out


def check_bounds(theta: ThetaField | np.ndarray, grid: Grid, c_gamma: float, C_gamma: float) -> BoundReport:
    """Two-sided distance bounds and upwind gradient bounds, with ``3h/c_gamma`` slack."""
    t = np.asarray(theta, float)
    h = grid.h
    dist = dist_to_region(grid.coords, grid.spec.omega0)
    tol = 3.0 * h / c_gamma
    low = dist / C_gamma - t
    up = t - dist / c_gamma
    lower_bad = low > tol
    upper_bad = up > tol

    # gradient bounds away from the initial body and the container edge
    g = upwind_gradient_norm(t, h)
    length = min(grid.spec.Lx, grid.spec.Ly)
    tol_g = h / (c_gamma * length)
    far = (dist > 2 * h) & ~grid.boundary
    lo_g, hi_g = 1.0 / C_gamma - tol_g, 1.0 / c_gamma + tol_g
    grad_bad = far & ((g < lo_g) | (g > hi_g))
    gdev = np.where(far, np.maximum(lo_g - g, g - hi_g), -np.inf)

    flagged = sorted(map(tuple, np.argwhere(lower_bad | upper_bad | grad_bad)))
    return BoundReport(
        lower_violations=int(lower_bad.sum()),
        upper_violations=int(upper_bad.sum()),
        gradient_violations=int(grad_bad.sum()),
        worst_lower=float(low.max()),
        worst_upper=float(up.max()),
        worst_gradient=float(gdev.max()),
        tol_theta=tol,
        tol_gradient=tol_g,
        flagged=flagged,
    )


def sublevel(theta: ThetaField | np.ndarray, t: float) -> np.ndarray:
    """Nodes of the body at time ``t``: ``{theta < t}``."""
    return np.asarray(theta, float) < t


def front_clearance(theta: ThetaField | np.ndarray, grid: Grid, t: float) -> float:
    """Distance from the ``theta < t`` nodes to the container edge."""
    m = sublevel(theta, t)
    if not m.any():
        return float(min(grid.spec.Lx, grid.spec.Ly) / 2)
    xy = grid.coords[m]
    return float(
        min(xy[:, 0].min(), xy[:, 1].min(), grid.spec.Lx - xy[:, 0].max(), grid.spec.Ly - xy[:, 1].max())
    )
