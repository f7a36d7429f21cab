"""Outer fixed-point iteration between the arrival-time field and the trajectory.

Iterate ``k`` solves the whole trajectory ``y^k`` with the arrival times
``theta^{k-1}`` frozen, then rebuilds the growth speed from ``y^k`` sampled
at ``min(theta^{k-1}(x), T)`` and solves for ``theta^k``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import constitutive as cm
from .backstrain import BackstrainField, init_backstrain
from .config import RunConfig
from .eikonal import BoundReport, ThetaField, check_bounds, front_clearance, solve_fmm
from .equilibrium import (
    DeformationState,
    EnergyLedger,
    IncrementalProblem,
    NonconvergedStep,
    SolverOptions,
    minimize_step,
)
from .geometry import Grid, build_grid

log = logging.getLogger(__name__)


class CouplingNonconverged(RuntimeError):
    def __init__(self, msg, state: "CoupledState", report: "ConvergenceReport"):
        super().__init__(msg)
        self.state = state
        self.report = report


@dataclass
class DeformationHistory:
    """States ``y^0 .. y^N`` on the uniform partition ``t_i = i*tau``."""

    states: list[DeformationState]
    tau: float

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1

    def _locate(self, t):
        """Knot index ``i`` and weight ``lam`` with ``t = (i + lam) tau``; exact at knots."""
        r = np.asarray(t, float) / self.tau
        k = np.rint(r)
        at_knot = np.abs(r - k) <= 1e-12 * np.maximum(1.0, np.abs(r))
        i = np.where(at_knot, k, np.floor(r)).astype(int)
        lam = np.where(at_knot, 0.0, r - np.floor(r))
        i = np.clip(i, 0, self.n_steps)
        lam = np.where(i == self.n_steps, 0.0, lam)
        return i, lam

    def backward(self, t: float) -> DeformationState:
        """Backward-constant interpolant: ``y^i`` on ``(t_{i-1}, t_i]``."""
        i = int(np.ceil(t / self.tau - 1e-12))
        return self.states[min(max(i, 0), self.n_steps)]

    def forward(self, t: float) -> DeformationState:
        """Forward-constant interpolant: ``y^{i-1}`` on ``[t_{i-1}, t_i)``."""
        i = int(np.floor(t / self.tau + 1e-12))
        return self.states[min(max(i, 0), self.n_steps)]

    def affine(self, t: float) -> np.ndarray:
        """Piecewise-affine interpolant of ``y`` at a single time."""
        i, lam = self._locate(t)
        i, lam = int(i), float(lam)
        if lam == 0.0:
            return self.states[i].y
        return (1 - lam) * self.states[i].y + lam * self.states[i + 1].y

    def grad_at(self, s: np.ndarray) -> np.ndarray:
        """``grad y`` of the affine interpolant, each node sampled at its own time ``s(x)``."""
        i, lam = self._locate(s)
        Fs = np.stack([st.F for st in self.states])  # (N+1, nx, ny, 2, 2)
        nx, ny = i.shape
        I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        lo = Fs[i, I, J]
        hi = Fs[np.minimum(i + 1, self.n_steps), I, J]
        lam = lam[..., None, None]
        return np.where(lam == 0.0, lo, (1 - lam) * lo + lam * hi)

    def sup_distance(self, other: "DeformationHistory") -> float:
        return float(max(np.abs(a.u - b.u).max() for a, b in zip(self.states, other.states)))


# ---------------------------------------------------------------------------
# speeds
# ---------------------------------------------------------------------------


def initial_speed(y0: DeformationState, mp: cm.MaterialParams) -> np.ndarray:
    return cm.gamma(y0.F, mp)


def speed_from_trajectory(traj: DeformationHistory, theta_prev, mp: cm.MaterialParams, T: float) -> np.ndarray:
    s = np.minimum(np.asarray(theta_prev, float), T)
    F = traj.grad_at(s)
    return np.clip(cm.gamma(F, mp), mp.c_gamma, mp.C_gamma)


# ---------------------------------------------------------------------------
# trajectory
# ---------------------------------------------------------------------------


def initial_deformation(cfg: RunConfig, grid: Grid) -> DeformationState:
    if cfg.y0 == "identity" or cfg.y0_amplitude == 0:
        return DeformationState.identity(grid)
    # smooth bump vanishing on the container edge and on the anchor disk(s)
    xy = grid.coords
    s = np.sin(np.pi * xy[..., 0] / cfg.domain.Lx) * np.sin(np.pi * xy[..., 1] / cfg.domain.Ly)
    r = cfg.domain.omega_anchor.distance(xy)
    bump = s * r**2 / (r**2 + 0.01 * cfg.domain.diameter**2)
    u = np.zeros(grid.shape + (2,))
    u[..., 0] = cfg.y0_amplitude * bump
    u[..., 1] = 0.5 * cfg.y0_amplitude * bump
    u[grid.fixed] = 0.0
    return DeformationState(grid, u)


@dataclass
class TrajectoryResult:
    history: DeformationHistory
    backstrain: BackstrainField
    ledger: EnergyLedger
    max_attachment_W: float
    attachment_events: int


def solve_trajectory(theta, cfg: RunConfig, grid: Grid, y0: DeformationState,
                     opts: SolverOptions | None = None) -> TrajectoryResult:
    """All ``n_steps`` incremental problems for a frozen arrival-time field."""
    mp = cfg.material
    opts = opts or SolverOptions(tol_EL=cfg.solver.tol_EL, max_iter=cfg.solver.max_iter, memory=cfg.solver.memory)
    th = np.asarray(theta, float)
    bs = init_backstrain(cfg.A0_matrix(), grid, th, cfg.tau, cfg.n_steps)
    ledger = EnergyLedger()
    states = [y0]
    worst_W, events = 0.0, 0
    for i in range(1, cfg.n_steps + 1):
        t_i = i * cfg.tau
        prob = IncrementalProblem(
            step=i, t=t_i, tau=cfg.tau, theta=th, A=bs.A.copy(), y_prev=states[-1],
            force=cfg.force_at(t_i), mp=mp,
        )
        try:
            y_i, row = minimize_step(prob, opts)
        except NonconvergedStep as e:
            if cfg.solver.on_nonconverged == "abort" or e.state is None:
                raise
            log.warning("%s; continuing", e)
            y_i, row = e.state, e.row
        ledger.append(row)
        fresh = bs.record_arrivals(i, y_i.F)
        if fresh.any():
            events += 1
            Fe = y_i.F[fresh] @ cm.inv2(bs.A[fresh])
            worst_W = max(worst_W, float(cm.W(Fe, mp).max()))
        states.append(y_i)
    return TrajectoryResult(DeformationHistory(states, cfg.tau), bs, ledger, worst_W, events)


# ---------------------------------------------------------------------------
# outer loop
# ---------------------------------------------------------------------------


@dataclass
class IterateRecord:
    k: int
    theta_metric: float
    y_metric: float | None
    speed_change: float
    speed_change_bound: float
    min_det: float
    max_residual: float
    bounds_ok: bool
    front_clearance: float
    max_attachment_W: float
    seconds: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ConvergenceReport:
    converged: bool
    iterations: int
    tol_theta: float
    tol_y: float
    history: list[IterateRecord] = field(default_factory=list)
    bound_reports: list[dict] = field(default_factory=list)

    @property
    def theta_metrics(self) -> list[float]:
        return [r.theta_metric for r in self.history]

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "tol_theta": self.tol_theta,
            "tol_y": self.tol_y,
            "history": [r.as_dict() for r in self.history],
            "bound_reports": self.bound_reports,
        }


@dataclass
class CoupledState:
    grid: Grid
    theta: ThetaField
    theta0: ThetaField
    trajectory: DeformationHistory
    backstrain: BackstrainField
    ledger: EnergyLedger
    speed: np.ndarray
    k: int
    thetas: list[np.ndarray] = field(default_factory=list)
    #: arrival times the final trajectory was solved with
    theta_used: ThetaField | None = None


def _lipschitz_bound(F0: np.ndarray, F1: np.ndarray, mp: cm.MaterialParams, samples: int = 9) -> np.ndarray:
    """Node-wise bound on ``|gamma(F1) - gamma(F0)|`` from the gradient norm along the segment."""
    worst = np.zeros(F0.shape[:-2])
    for s in np.linspace(0.0, 1.0, samples):
        worst = np.maximum(worst, np.linalg.norm(cm.Dgamma((1 - s) * F0 + s * F1, mp), axis=(-2, -1)))
    # curvature slack between samples
    return 1.05 * worst * np.linalg.norm(F1 - F0, axis=(-2, -1)) + 1e-15


def run_coupled(cfg: RunConfig, raise_on_nonconvergence: bool = False) -> tuple[CoupledState, ConvergenceReport]:
    cfg.validate()
    grid = build_grid(cfg.domain, cfg.nx)
    mp = cfg.material
    T = cfg.T
    y0 = initial_deformation(cfg, grid)

    speed = initial_speed(y0, mp)
    theta_prev = solve_fmm(speed, grid)
    theta0 = theta_prev
    report = ConvergenceReport(False, 0, cfg.tol_theta, cfg.tol_y)
    b0 = check_bounds(theta0, grid, mp.c_gamma, mp.C_gamma)
    report.bound_reports.append(b0.as_dict())

    prev_traj = None
    prev_F_sampled = y0.F
    thetas = [theta0.values]
    result = None
    for k in range(1, cfg.solver.K_max + 1):
        t0 = time.perf_counter()
        result = solve_trajectory(theta_prev, cfg, grid, y0)
        traj = result.history
        F_sampled = traj.grad_at(np.minimum(theta_prev.values, T))
        new_speed = speed_from_trajectory(traj, theta_prev, mp, T)
        theta = solve_fmm(new_speed, grid)

        dtheta = float(np.abs(theta.values - theta_prev.values).max())
        dy = traj.sup_distance(prev_traj) if prev_traj is not None else None
        bound = _lipschitz_bound(prev_F_sampled, F_sampled, mp)
        dspeed = np.abs(new_speed - speed)
        br = check_bounds(theta, grid, mp.c_gamma, mp.C_gamma)
        report.bound_reports.append(br.as_dict())
        rec = IterateRecord(
            k=k,
            theta_metric=dtheta,
            y_metric=dy,
            speed_change=float(dspeed.max()),
            speed_change_bound=float(np.max(dspeed - bound)),
            min_det=float(result.ledger.as_array("min_det").min()),
            max_residual=float(result.ledger.as_array("residual").max()),
            bounds_ok=br.ok,
            front_clearance=front_clearance(theta, grid, T),
            max_attachment_W=result.max_attachment_W,
            seconds=time.perf_counter() - t0,
        )
        report.history.append(rec)
        log.info(
            "iterate %d: |dtheta|=%.3e |dy|=%s min det=%.4f (%.1fs)",
            k, dtheta, "n/a" if dy is None else f"{dy:.3e}", rec.min_det, rec.seconds,
        )
        thetas.append(theta.values)
        speed, prev_F_sampled = new_speed, F_sampled
        prev_traj = traj
        # with theta unchanged bit-for-bit, the next trajectory would repeat this one exactly
        y_ok = dy <= cfg.tol_y if dy is not None else dtheta == 0.0
        theta_used = theta_prev
        theta_prev = theta
        report.iterations = k
        if dtheta <= cfg.tol_theta and y_ok:
            report.converged = True
            break

    state = CoupledState(
        grid=grid,
        theta=theta_prev,
        theta0=theta0,
        trajectory=result.history,
        backstrain=result.backstrain,
        ledger=result.ledger,
        speed=speed,
        k=report.iterations,
        thetas=thetas,
        theta_used=theta_used,
    )
    if not report.converged and raise_on_nonconvergence:
        raise CouplingNonconverged(
            f"coupling nonconverged after {report.iterations} iterates: theta metrics {report.theta_metrics}",
            state, report,
        )
    return state, report
