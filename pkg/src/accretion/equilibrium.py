"""Per-step incremental minimization of the viscoelastic equilibrium.

The unknown is the displacement ``u = y - id`` at free nodes (neither
anchor nor container boundary); fixed nodes keep ``u = 0`` bit-exactly.
The discrete energy of step ``i`` is

    sum_nodes w * [ h(theta - t_i) * ( W(F A^{-1}) + tau R(F_prev, (F - F_prev)/tau) - f.y )
                    + VJ(F) + H(G) ]

with ``F = grad y`` and ``G = grad^2 y`` from the nodal difference stencils
and ``w`` the nodal quadrature weights of the grid.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import constitutive as cm
from .constitutive import MaterialParams, det2
from .geometry import Grid

log = logging.getLogger(__name__)

EPS_DET = 1e-8


class InadmissibleState(ValueError):
    pass


class NonconvergedStep(RuntimeError):
    def __init__(self, msg: str, residual: float, state=None, row=None):
        super().__init__(msg)
        self.residual = residual
        self.state = state
        self.row = row


# ---------------------------------------------------------------------------
# discrete operators shared by all states of one grid
# ---------------------------------------------------------------------------


class Operators:
    """Stacked difference operators and their transposes, plus the free-DOF map."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.N = grid.size
        self.B1 = sp.vstack([grid.Dx, grid.Dy], format="csr")
        self.B2 = sp.vstack([grid.Dxx, grid.Dxy, grid.Dyy], format="csr")
        self.B1T = self.B1.T.tocsr()
        self.B2T = self.B2.T.tocsr()
        self.w = grid.weights.ravel()
        self.free_nodes = ~grid.fixed.ravel()
        # DOF k = 2*node + component
        self.free = np.repeat(self.free_nodes, 2)
        self.n_free = int(self.free.sum())

    def grad(self, u: np.ndarray) -> np.ndarray:
        """``grad u`` as ``(N, 2, 2)``."""
        out = (self.B1 @ u).reshape(2, self.N, 2)
        return np.transpose(out, (1, 2, 0))

    def hess(self, u: np.ndarray) -> np.ndarray:
        out = (self.B2 @ u).reshape(3, self.N, 2)
        G = np.empty((self.N, 2, 2, 2))
        G[:, :, 0, 0] = out[0]
        G[:, :, 0, 1] = out[1]
        G[:, :, 1, 0] = out[1]
        G[:, :, 1, 1] = out[2]
        return G

    def grad_T(self, P: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`grad`: ``(N,2,2) -> (N,2)``."""
        return self.B1T @ np.transpose(P, (2, 0, 1)).reshape(2 * self.N, 2)

    def hess_T(self, Q: np.ndarray) -> np.ndarray:
        stacked = np.stack([Q[:, :, 0, 0], Q[:, :, 0, 1] + Q[:, :, 1, 0], Q[:, :, 1, 1]])
        return self.B2T @ stacked.reshape(3 * self.N, 2)

    @cached_property
    def S1(self) -> sp.csr_matrix:
        """Map from DOF vector (2N) to the 4N entries ``F_ab`` ordered ``(a, b, node)``."""
        e = [sp.csr_matrix(([1.0], ([0], [a])), shape=(1, 2)) for a in range(2)]
        D = [self.grid.Dx, self.grid.Dy]
        return sp.vstack([sp.kron(D[b], e[a]) for a in range(2) for b in range(2)], format="csr")

    @cached_property
    def S2(self) -> sp.csr_matrix:
        """DOF vector to the 6N unique second-gradient entries ``(a, {xx, xy, yy}, node)``."""
        e = [sp.csr_matrix(([1.0], ([0], [a])), shape=(1, 2)) for a in range(2)]
        D = [self.grid.Dxx, self.grid.Dxy, self.grid.Dyy]
        return sp.vstack([sp.kron(D[c], e[a]) for a in range(2) for c in range(3)], format="csr")


_OPS_CACHE: dict[int, Operators] = {}


def operators(grid: Grid) -> Operators:
    ops = _OPS_CACHE.get(id(grid))
    if ops is None or ops.grid is not grid:
        ops = Operators(grid)
        _OPS_CACHE.clear()
        _OPS_CACHE[id(grid)] = ops
    return ops


# ---------------------------------------------------------------------------
# state and problem
# ---------------------------------------------------------------------------


@dataclass
class DeformationState:
    grid: Grid = field(repr=False)
    u: np.ndarray  # (nx, ny, 2) displacement

    @classmethod
    def identity(cls, grid: Grid) -> "DeformationState":
        return cls(grid, np.zeros(grid.shape + (2,)))

    @classmethod
    def from_y(cls, grid: Grid, y: np.ndarray) -> "DeformationState":
        u = np.asarray(y, float) - grid.coords
        u[grid.fixed] = 0.0
        return cls(grid, u)

    @property
    def y(self) -> np.ndarray:
        return self.grid.coords + self.u

    @cached_property
    def F(self) -> np.ndarray:
        ops = operators(self.grid)
        return (ops.grad(self.u.reshape(-1, 2)) + np.eye(2)).reshape(self.grid.shape + (2, 2))

    @cached_property
    def G(self) -> np.ndarray:
        ops = operators(self.grid)
        return ops.hess(self.u.reshape(-1, 2)).reshape(self.grid.shape + (2, 2, 2))

    @property
    def min_det(self) -> float:
        return float(det2(self.F).min())

    def with_free(self, x: np.ndarray) -> "DeformationState":
        ops = operators(self.grid)
        u = np.zeros(2 * ops.N)
        u[ops.free] = x
        return DeformationState(self.grid, u.reshape(self.grid.shape + (2,)))

    def free_vector(self) -> np.ndarray:
        return self.u.reshape(-1)[operators(self.grid).free].copy()

    def is_admissible(self, eps: float = 0.0) -> bool:
        fixed_ok = not np.any(self.u[self.grid.fixed])
        return fixed_ok and self.min_det > eps


@dataclass
class IncrementalProblem:
    step: int
    t: float
    tau: float
    theta: np.ndarray
    A: np.ndarray  # backstrain for this step, (nx, ny, 2, 2)
    y_prev: DeformationState
    force: np.ndarray  # force density at t, 2-vector (or per-node field)
    mp: MaterialParams

    @property
    def grid(self) -> Grid:
        return self.y_prev.grid

    @cached_property
    def hw(self) -> np.ndarray:
        """Phase weight ``h(theta - t_i)`` per node (flat)."""
        return cm.h_switch(np.asarray(self.theta, float) - self.t, self.mp.delta).ravel()

    @cached_property
    def A_inv(self) -> np.ndarray:
        return cm.inv2(self.A.reshape(-1, 2, 2))

    @cached_property
    def f_nodes(self) -> np.ndarray:
        f = np.asarray(self.force, float)
        return np.broadcast_to(f, self.grid.shape + (2,)).reshape(-1, 2)

    @cached_property
    def F_prev(self) -> np.ndarray:
        return self.y_prev.F.reshape(-1, 2, 2)


@dataclass
class EnergyParts:
    elastic: float
    dissipation: float
    work: float
    volumetric: float
    second_grade: float

    @property
    def total(self) -> float:
        return self.elastic + self.dissipation + self.work + self.volumetric + self.second_grade


# ---------------------------------------------------------------------------
# energy, gradient, tangent
# ---------------------------------------------------------------------------


def _kinematics(state: DeformationState, prob: IncrementalProblem):
    F = state.F.reshape(-1, 2, 2)
    d = det2(F)
    if np.any(~(d > 0)):
        raise InadmissibleState(f"inadmissible state: min det grad y = {d.min():.3e}")
    return F, state.G.reshape(-1, 2, 2, 2), d


def energy_parts(state: DeformationState, prob: IncrementalProblem) -> EnergyParts:
    mp, w, hw = prob.mp, operators(state.grid).w, prob.hw
    F, G, _ = _kinematics(state, prob)
    Fd = (F - prob.F_prev) / prob.tau
    y = state.y.reshape(-1, 2)
    return EnergyParts(
        elastic=float(np.sum(w * hw * cm.W(F @ prob.A_inv, mp))),
        dissipation=float(np.sum(w * hw * prob.tau * cm.R(prob.F_prev, Fd, mp))),
        work=float(-np.sum(w * hw * np.sum(prob.f_nodes * y, axis=1))),
        volumetric=float(np.sum(w * cm.VJ(F, mp))),
        second_grade=float(np.sum(w * cm.H2nd(G, mp))),
    )


def _full_gradient(state: DeformationState, prob: IncrementalProblem) -> np.ndarray:
    """Derivative of the step energy w.r.t. every nodal displacement, shape ``(N, 2)``."""
    mp, ops, hw = prob.mp, operators(state.grid), prob.hw
    w = ops.w
    F, G, _ = _kinematics(state, prob)
    Fd = (F - prob.F_prev) / prob.tau
    Ainv = prob.A_inv
    P = hw[:, None, None] * (cm.DW(F @ Ainv, mp) @ cm.mT(Ainv) + cm.dRdFdot(prob.F_prev, Fd, mp))
    P += cm.DVJ(F, mp)
    P *= w[:, None, None]
    Q = w[:, None, None, None] * cm.DH(G, mp)
    return ops.grad_T(P) + ops.hess_T(Q) - (w * hw)[:, None] * prob.f_nodes


def incremental_energy(state: DeformationState, prob: IncrementalProblem) -> tuple[float, np.ndarray]:
    """Step energy and its gradient with respect to the free DOFs."""
    value = energy_parts(state, prob).total
    g = _full_gradient(state, prob).reshape(-1)[operators(state.grid).free]
    return value, g


def tangent(state: DeformationState, prob: IncrementalProblem, stabilize: float = 0.0) -> sp.csr_matrix:
    """Free-DOF block of the energy Hessian.

    ``stabilize > 0`` adds ``stabilize * sum w |grad^2 v|^2`` to the quadratic
    form, which is positive definite on the free DOFs; used only for the
    minimizer's seed metric.
    """
    mp, ops, hw = prob.mp, operators(state.grid), prob.hw
    w = ops.w
    F, G, _ = _kinematics(state, prob)
    Ainv = prob.A_inv
    C = hw[:, None, None, None, None] * (
        np.einsum("nIeKf,nbe,ndf->nIbKd", cm.D2W(F @ Ainv, mp), Ainv, Ainv) + cm.D2R(prob.F_prev, mp) / prob.tau
    )
    C += cm.D2VJ(F, mp)
    C *= w[:, None, None, None, None]
    C = C.reshape(-1, 4, 4)
    M1 = sp.bmat([[sp.diags(C[:, r, s]) for s in range(4)] for r in range(4)], format="csr")
    K = ops.S1.T @ M1 @ ops.S1

    # second-grade part on the 6 unique entries per node: g = (G_a00, G_a01, G_a11)_a
    g6 = np.stack([G[:, a, i, j] for a in range(2) for (i, j) in ((0, 0), (0, 1), (1, 1))], axis=1)
    lam = np.array([1.0, 2.0, 1.0, 1.0, 2.0, 1.0])
    s = mp.eps_H**2 + g6**2 @ lam
    lg = g6 * lam
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = np.where(s > 0, s ** ((mp.p - 2) / 2), 0.0)
        s2 = np.where(s > 0, (mp.p - 2) * s ** ((mp.p - 4) / 2), 0.0)
    H6 = mp.c_H * (s1[:, None, None] * np.diag(lam) + s2[:, None, None] * np.einsum("ni,nj->nij", lg, lg))
    if stabilize:
        H6 += 2.0 * stabilize * np.diag(lam)
    H6 *= w[:, None, None]
    M2 = sp.bmat([[sp.diags(H6[:, r, c]) for c in range(6)] for r in range(6)], format="csr")
    K = K + ops.S2.T @ M2 @ ops.S2
    free = np.flatnonzero(ops.free)
    return K.tocsr()[free][:, free]


def el_residual(state: DeformationState, prob: IncrementalProblem) -> float:
    """Sup-norm of the discrete Euler-Lagrange residual, as a force density.

    Each free-DOF gradient entry is divided by its node's quadrature weight.
    """
    ops = operators(state.grid)
    g = _full_gradient(state, prob) / ops.w[:, None]
    return float(np.abs(g.reshape(-1)[ops.free]).max()) if ops.n_free else 0.0


def dissipation_increment(y_i: DeformationState, y_prev: DeformationState, theta, t_i: float, tau: float,
                          mp: MaterialParams) -> float:
    """``tau * sum w h(theta - t_i) R(F_prev, (F - F_prev)/tau)``."""
    w = operators(y_i.grid).w
    F = y_i.F.reshape(-1, 2, 2)
    Fp = y_prev.F.reshape(-1, 2, 2)
    hw = cm.h_switch(np.asarray(theta, float).ravel() - t_i, mp.delta)
    return float(tau * np.sum(w * hw * cm.R(Fp, (F - Fp) / tau, mp)))


def stress_scale(mp: MaterialParams) -> float:
    return mp.c_W + mp.q * mp.c_J


# ---------------------------------------------------------------------------
# minimizer
# ---------------------------------------------------------------------------


@dataclass
class SolverOptions:
    tol_EL: float | None = None  # absolute; default 1e-7 * stress_scale
    max_iter: int = 500
    memory: int = 10
    c1: float = 1e-4
    eps_det: float = EPS_DET
    refresh_every: int = 25
    #: second-grade stabilizer of the seed metric, in units of delta*c_W*h^2
    stabilize: float = 0.1


@dataclass
class LedgerRow:
    step: int
    t: float
    energy: float
    energy_prev: float
    elastic: float
    dissipation: float
    work: float
    volumetric: float
    second_grade: float
    min_det: float
    residual: float
    iterations: int
    cumulative_dissipation: float = 0.0
    hessian_p_sum: float = 0.0
    det_q_sum: float = 0.0


@dataclass
class EnergyLedger:
    rows: list[LedgerRow] = field(default_factory=list)

    def append(self, row: LedgerRow) -> None:
        prev = self.rows[-1].cumulative_dissipation if self.rows else 0.0
        row.cumulative_dissipation = prev + row.dissipation
        self.rows.append(row)

    @property
    def columns(self) -> list[str]:
        return [f.name for f in fields(LedgerRow)]

    def as_array(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for r in self.rows:
                fh.write(",".join(repr(v) for v in asdict(r).values()) + "\n")

    def summary(self) -> dict:
        if not self.rows:
            return {}
        return {
            "steps": len(self.rows),
            "min_det": float(self.as_array("min_det").min()),
            "max_residual": float(self.as_array("residual").max()),
            "cumulative_dissipation": self.rows[-1].cumulative_dissipation,
            "max_hessian_p_sum": float(self.as_array("hessian_p_sum").max()),
            "max_det_q_sum": float(self.as_array("det_q_sum").max()),
            "minimality_holds": bool(np.all(self.as_array("energy") <= self.as_array("energy_prev"))),
        }


def _factorize(K: sp.csr_matrix, shift: float = 0.0):
    """Sparse LU of ``K + shift*I``; returns a solve callable (None if singular)."""
    if shift:
        K = K + shift * sp.identity(K.shape[0], format="csr")
    try:
        lu = spla.splu(K.tocsc(), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError:
        return None
    return lu.solve


def minimize_step(prob: IncrementalProblem, opts: SolverOptions | None = None,
                  start: DeformationState | None = None) -> tuple[DeformationState, LedgerRow]:
    """Minimize the step energy from ``y_prev`` (or ``start``) with a limited-memory secant method.

    The secant pairs are applied on top of the factorized tangent at the
    starting state (refreshed periodically); trial states with
    ``min det grad y <= eps_det`` are rejected before evaluation, and steps
    must satisfy the Armijo decrease condition.
    """
    opts = opts or SolverOptions()
    mp = prob.mp
    tol = opts.tol_EL if opts.tol_EL is not None else 1e-7 * stress_scale(mp)
    ops = operators(prob.grid)
    y0 = prob.y_prev if start is None else start
    if not y0.is_admissible(opts.eps_det):
        raise InadmissibleState("starting state is not admissible")

    x = y0.free_vector()
    state = y0
    f, g = incremental_energy(state, prob)
    f_start = f if start is None else incremental_energy(prob.y_prev, prob)[0]
    w_free = np.repeat(ops.w, 2)[ops.free]

    def resid(g):
        return float(np.abs(g / w_free).max()) if g.size else 0.0

    mu = opts.stabilize * mp.delta * mp.c_W * prob.grid.h**2
    S: deque = deque(maxlen=opts.memory)
    solve = None
    it = 0
    r = resid(g)
    while r > tol and it < opts.max_iter:
        if solve is None or (it > 0 and it % opts.refresh_every == 0):
            K = tangent(state, prob, mu)
            solve = _factorize(K)
            S.clear()
        d = _two_loop(g, S, solve)
        gd = float(g @ d)
        if not gd < 0:
            # indefinite tangent: shift until the seeded direction descends
            S.clear()
            K = tangent(state, prob, mu)
            scale = float(np.abs(K.diagonal()).mean()) or 1.0
            for shift in scale * 10.0 ** np.arange(-6, 3):
                solve = _factorize(K, shift)
                d = _two_loop(g, S, solve)
                gd = float(g @ d)
                if gd < 0:
                    break
            else:
                solve, d, gd = None, -g, -float(g @ g)

        alpha, accepted = 1.0, False
        for _ in range(60):
            trial = state.with_free(x + alpha * d)
            if trial.min_det > opts.eps_det:
                ft, gt = incremental_energy(trial, prob)
                # tiny slack for round-off once decrease falls below machine resolution
                if ft <= f + opts.c1 * alpha * gd or (ft <= f + 1e-15 * abs(f) and resid(gt) < r):
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            break
        s_vec = alpha * d
        y_vec = gt - g
        if s_vec @ y_vec > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            S.append((s_vec, y_vec))
        x = x + s_vec
        state, f, g = trial, ft, gt
        r = resid(g)
        it += 1

    parts = energy_parts(state, prob)
    row = LedgerRow(
        step=prob.step,
        t=prob.t,
        energy=parts.total,
        energy_prev=f_start,
        elastic=parts.elastic,
        dissipation=parts.dissipation,
        work=parts.work,
        volumetric=parts.volumetric,
        second_grade=parts.second_grade,
        min_det=state.min_det,
        residual=r,
        iterations=it,
        hessian_p_sum=float(np.sum(ops.w * np.sum(state.G.reshape(ops.N, -1) ** 2, axis=1) ** (mp.p / 2))),
        det_q_sum=float(np.sum(ops.w * det2(state.F.reshape(-1, 2, 2)) ** (-mp.q))),
    )
    if r > tol:
        raise NonconvergedStep(
            f"nonconverged step {prob.step}: residual {r:.3e} > tol {tol:.3e} after {it} iterations",
            r, state, row,
        )
    return state, row


def _two_loop(g, S, solve):
    q = g.copy()
    alphas = []
    for s, y in reversed(S):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append((a, rho, s, y))
        q -= a * y
    r = solve(q) if solve is not None else q
    for a, rho, s, y in reversed(alphas):
        b = rho * (y @ r)
        r += s * (a - b)
    return -r
