"""Verification suites: constitutive property checks, eikonal oracles, equilibrium monitors.

Every check yields one :class:`Check` row with the measured value, its
tolerance and a kind: ``hypothesis`` for model assumptions, ``numeric`` for
measured oracles, ``identity`` for exact construction identities.  Random
samples come from one seeded generator whose seed is stored in the report.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import constitutive as cm
from .backstrain import init_backstrain
from .config import RunConfig
from .coupling import solve_trajectory
from .eikonal import check_bounds, dijkstra_oracle, solve_fmm
from .equilibrium import (
    DeformationState,
    IncrementalProblem,
    incremental_energy,
    operators,
)
from .geometry import Disk, DomainSpec, build_grid

DEFAULT_SEED = 20240611


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float | str
    kind: str
    detail: str = ""

    def as_dict(self) -> dict:
        v = self.value
        return {
            "passed": bool(self.passed),
            "value": float(v) if np.isfinite(v) else str(v),
            "tolerance": self.tolerance,
            "kind": self.kind,
            "detail": self.detail,
        }


@dataclass
class VerificationReport:
    suite: str
    seed: int
    checks: list[Check] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    seconds: float = 0.0

    def add(self, name, passed, value, tolerance, kind, detail="") -> Check:
        if any(c.name == name for c in self.checks):
            raise ValueError(f"duplicate check {name}")
        c = Check(name, bool(passed), float(value), tolerance, kind, detail)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def merge(self, other: "VerificationReport") -> "VerificationReport":
        for c in other.checks:
            self.add(c.name, c.passed, c.value, c.tolerance, c.kind, c.detail)
        self.extra.update(other.extra)
        self.seconds += other.seconds
        return self

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "passed": self.passed,
            "n_checks": len(self.checks),
            "n_failed": len(self.failures),
            "seconds": self.seconds,
            "checks": {c.name: c.as_dict() for c in self.checks},
            "extra": self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, default=_jsonable)

    def to_text(self) -> str:
        lines = [f"suite {self.suite}  seed {self.seed}  ({len(self.checks)} checks, {self.seconds:.1f}s)"]
        w = max((len(c.name) for c in self.checks), default=10)
        for c in self.checks:
            tol = c.tolerance if isinstance(c.tolerance, str) else f"{c.tolerance:.3g}"
            lines.append(f"  {'PASS' if c.passed else 'FAIL'}  {c.name:<{w}}  value={c.value:.6g}  tol={tol}  [{c.kind}]")
        lines.append("ALL PASS" if self.passed else f"FAILED: {', '.join(c.name for c in self.failures)}")
        return "\n".join(lines)


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


# ---------------------------------------------------------------------------
# constitutive properties
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Densities:
    """The pluggable constitutive functions; negative controls swap single entries."""

    W: Callable = cm.W
    DW: Callable = cm.DW
    VJ: Callable = cm.VJ
    DVJ: Callable = cm.DVJ
    H: Callable = cm.H2nd
    DH: Callable = cm.DH
    R: Callable = cm.R
    dRdFdot: Callable = cm.dRdFdot
    D: Callable = cm.D_tensor
    gamma: Callable = cm.gamma
    Dgamma: Callable = cm.Dgamma
    h: Callable = cm.h_switch


def rotations(rng, n: int) -> np.ndarray:
    a = rng.uniform(0, 2 * np.pi, n)
    c, s = np.cos(a), np.sin(a)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def random_F(rng, n: int, det_range=(0.2, 5.0)) -> np.ndarray:
    """Random matrices with determinant log-uniform in ``det_range``."""
    F = rng.normal(size=(n, 2, 2))
    F[cm.det2(F) < 0, :, 0] *= -1
    target = np.exp(rng.uniform(*np.log(det_range), n))
    return F * np.sqrt(target / cm.det2(F))[:, None, None]


def _fd_rel(f, df, X, step=1e-6) -> float:
    """Worst relative error of ``df`` against central differences of ``f``, per sample."""
    worst = 0.0
    an = df(X)
    for idx in np.ndindex(*X.shape[1:]):
        E = np.zeros_like(X)
        E[(slice(None),) + idx] = step
        num = (f(X + E) - f(X - E)) / (2 * step)
        an_c = an[(slice(None),) + idx]
        scale = np.sqrt(np.sum(an.reshape(len(X), -1) ** 2, axis=1))
        worst = max(worst, float(np.max(np.abs(num - an_c) / np.maximum(scale, 1e-300))))
    return worst


FD_TOL = 1e-5
FRAME_TOL = 1e-12


def _rel(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def _sym(X):
    return 0.5 * (X + cm.mT(X))


def check_H1(d: Densities, mp, rng):
    return mp.p > cm.DIM, mp.p, f"> {cm.DIM}", "hypothesis", "p > d"


def check_H6(d: Densities, mp, rng):
    return mp.q > mp.q_min, mp.q, f"> {mp.q_min:g}", "hypothesis", "q > pd/(p-d)"


def check_moduli(d: Densities, mp, rng):
    m = min(mp.c_W, mp.c_J, mp.c_H, mp.c_R)
    return m > 0, m, "> 0", "identity", "positive moduli"


def check_h_range(d: Densities, mp, rng):
    s = np.concatenate([rng.normal(size=200), [0.0, -0.0, 1e-15, -1e-15]])
    vals = d.h(s, mp.delta)
    exact = np.all(vals == np.where(s <= 0, 1.0, mp.delta))
    ok = 0 < mp.delta < 1 and exact and d.h(-0.1, mp.delta) == 1 and d.h(0.0, mp.delta) == 1 and d.h(1e-15, mp.delta) == mp.delta
    return ok, mp.delta, "(0, 1)", "hypothesis", "h in {delta, 1}, sharp switch"


def check_W_identity(d: Densities, mp, rng):
    I = np.eye(2)
    v = max(abs(float(d.W(I, mp))), float(np.abs(d.DW(I, mp)).max()))
    return v == 0.0, v, 0.0, "hypothesis", "W(I) = 0, DW(I) = 0"


def check_W_min(d: Densities, mp, rng):
    F = rng.normal(scale=1.0, size=(10_000, 2, 2))
    w = d.W(F, mp)
    wI = float(d.W(np.eye(2), mp))
    m = float(w.min())
    return m >= wI and wI == 0.0, m, ">= W(I) = 0", "hypothesis", "0 = W(I) <= W(F) on 1e4 samples"


def check_W_growth(d: Densities, mp, rng):
    F = rng.normal(scale=3.0, size=(10_000, 2, 2))
    ratio = float(np.max(d.W(F, mp) / (np.sum(F**2, axis=(1, 2)) ** 2 + 1)))
    return ratio <= mp.c_W, ratio, mp.c_W, "hypothesis", "W <= c_W (|F|^4 + 1)"


def check_DW_fd(d: Densities, mp, rng):
    v = _fd_rel(lambda X: d.W(X, mp), lambda X: d.DW(X, mp), rng.normal(size=(50, 2, 2)))
    return v <= FD_TOL, v, FD_TOL, "numeric", "DW vs central differences, 50 samples"


def check_W_frame(d: Densities, mp, rng):
    F, Q = rng.normal(size=(20, 2, 2)), rotations(rng, 20)
    v = _rel(d.W(Q @ F, mp), d.W(F, mp))
    return v <= FRAME_TOL, v, FRAME_TOL, "hypothesis", "W(QF) = W(F)"


def check_W_isotropy(d: Densities, mp, rng):
    F, Q = rng.normal(size=(20, 2, 2)), rotations(rng, 20)
    v = _rel(d.W(F @ Q, mp), d.W(F, mp))
    return v <= FRAME_TOL, v, FRAME_TOL, "hypothesis", "W(FQ) = W(F)"


def check_VJ_coercivity(d: Densities, mp, rng):
    F = random_F(rng, 1000)
    v = _rel(d.VJ(F, mp) * cm.det2(F) ** mp.q, np.full(len(F), mp.c_J)) / mp.c_J * max(1.0, mp.c_J)
    ident = abs(float(d.VJ(np.eye(2), mp)) - mp.c_J)
    v = max(v, ident)
    return v <= 1e-12, v, 1e-12, "hypothesis", "VJ(F) det(F)^q = c_J"


def check_DVJ_fd(d: Densities, mp, rng):
    v = _fd_rel(lambda X: d.VJ(X, mp), lambda X: d.DVJ(X, mp), random_F(rng, 50), step=1e-7)
    return v <= FD_TOL, v, FD_TOL, "numeric", "DVJ vs central differences, det in [0.2, 5]"


def check_VJ_orientation(d: Densities, mp, rng):
    F = np.diag([1.0, -1.0])
    try:
        d.VJ(F, mp)
    except cm.OrientationError:
        return True, 0.0, "raises", "identity", "VJ refuses det F <= 0"
    return False, 1.0, "raises", "identity", "VJ refuses det F <= 0"


def check_H_zero(d: Densities, mp, rng):
    Z = np.zeros((2, 2, 2))
    v = max(abs(float(d.H(Z, mp))), float(np.abs(d.DH(Z, mp)).max()))
    return v == 0.0, v, 0.0, "identity", "H(0) = 0, DH(0) = 0"


def check_H_lower(d: Densities, mp, rng):
    G = rng.normal(scale=2.0, size=(10_000, 2, 2, 2))
    n2 = np.sum(G**2, axis=(1, 2, 3))
    gap = d.H(G, mp) - mp.c_H / mp.p * n2 ** (mp.p / 2)
    v = float(gap.min() / mp.c_H)
    return v >= -1e-12, v, ">= 0", "hypothesis", "H(G) >= c_H |G|^p / p"


def check_H_convex(d: Densities, mp, rng):
    G1 = rng.normal(size=(1000, 2, 2, 2))
    G2 = rng.normal(size=(1000, 2, 2, 2))
    gap = 0.5 * (d.H(G1, mp) + d.H(G2, mp)) - d.H(0.5 * (G1 + G2), mp)
    v = float(gap.min() / mp.c_H)
    return v >= -1e-12, v, ">= 0", "hypothesis", "midpoint convexity of H, 1000 pairs"


def _mono(d, mp, G1, G2):
    return np.sum((d.DH(G1, mp) - d.DH(G2, mp)) * (G1 - G2), axis=(1, 2, 3))


def check_H_monotone(d: Densities, mp, rng):
    G1 = rng.normal(size=(100, 2, 2, 2))
    G2 = rng.normal(size=(100, 2, 2, 2))
    m = _mono(d, mp, G1, G2)
    n = np.sqrt(np.sum((G1 - G2) ** 2, axis=(1, 2, 3)))
    c_prime = mp.c_H * 2.0 ** (2 - mp.p)
    ratio = float(np.min(m / (c_prime * n**mp.p)))
    return ratio >= 1 - 1e-12, ratio, ">= 1", "hypothesis", "(DH(G)-DH(G')):(G-G') >= c_H 2^(2-p) |G-G'|^p"


def check_H_monotone_slope(d: Densities, mp, rng):
    G1 = rng.normal(size=(2, 2, 2))
    G2 = rng.normal(size=(2, 2, 2))
    s = np.logspace(1, 3, 9)
    m = np.array([_mono(d, mp, si * G1[None], si * G2[None])[0] for si in s])
    if np.any(m <= 0):
        return False, float("nan"), f"{mp.p} +- 0.05", "numeric", "log-log slope of monotonicity"
    slope = float(np.polyfit(np.log(s), np.log(m), 1)[0])
    return abs(slope - mp.p) <= 0.05, slope, f"{mp.p} +- 0.05", "numeric", "log-log slope of monotonicity"


def check_DH_fd(d: Densities, mp, rng):
    v = _fd_rel(lambda X: d.H(X, mp), lambda X: d.DH(X, mp), rng.normal(size=(50, 2, 2, 2)))
    return v <= FD_TOL, v, FD_TOL, "numeric", "DH vs central differences"


def check_H_frame(d: Densities, mp, rng):
    G, Q = rng.normal(size=(20, 2, 2, 2)), rotations(rng, 20)
    v = _rel(d.H(np.einsum("nab,nbcd->nacd", Q, G), mp) / mp.c_H, d.H(G, mp) / mp.c_H)
    return v <= FRAME_TOL, v, FRAME_TOL, "hypothesis", "H(QG) = H(G), Q on the first index"


def check_D_symmetry(d: Densities, mp, rng):
    C = _sym(rng.normal(size=(20, 2, 2)))
    D = np.asarray(d.D(C, mp))
    v = max(
        float(np.abs(D - np.swapaxes(D, -4, -3)).max()),
        float(np.abs(D - np.swapaxes(D, -2, -1)).max()),
        float(np.abs(D - np.moveaxis(D, (-4, -3), (-2, -1))).max()),
    )
    return v == 0.0, v, 0.0, "hypothesis", "D_ijkl = D_jikl = D_ijlk = D_klij"


def check_D_coercive(d: Densities, mp, rng):
    C = cm.mT(F := random_F(rng, 200)) @ F
    X = _sym(rng.normal(size=(200, 2, 2)))
    D = np.asarray(d.D(C, mp))
    q = np.einsum("nij,nijkl,nkl->n", X, D, X) / np.sum(X**2, axis=(1, 2))
    ratio = float(q.min() / (0.5 * mp.c_R))
    return ratio >= 1 - 1e-12, ratio, ">= 1", "hypothesis", "Cdot:D:Cdot >= (c_R/2)|Cdot|^2"


def check_R_zero(d: Densities, mp, rng):
    F = rng.normal(size=(50, 2, 2))
    S = rng.normal(size=(50, 2, 2))
    S = S - cm.mT(S)
    v = max(float(np.abs(d.R(F, np.zeros_like(F), mp)).max()), float(np.abs(d.R(np.broadcast_to(np.eye(2), S.shape), S, mp)).max()))
    return v <= 1e-14 * mp.c_R, v, 1e-14 * mp.c_R, "identity", "R(F,0) = 0, R(I,S) = 0 for skew S"


def check_R_frame(d: Densities, mp, rng):
    F, Fd, Q = rng.normal(size=(20, 2, 2)), rng.normal(size=(20, 2, 2)), rotations(rng, 20)
    v = _rel(d.R(Q @ F, Q @ Fd, mp) / mp.c_R, d.R(F, Fd, mp) / mp.c_R)
    return v <= FRAME_TOL, v, FRAME_TOL, "hypothesis", "R(QF, QFdot) = R(F, Fdot)"


def check_dR_fd(d: Densities, mp, rng):
    F = rng.normal(size=(50, 2, 2))
    v = _fd_rel(lambda X: d.R(F, X, mp), lambda X: d.dRdFdot(F, X, mp), rng.normal(size=(50, 2, 2)))
    # stress formula dR/dFdot = 2 F (D : Cdot)
    Fd = rng.normal(size=(50, 2, 2))
    D = np.asarray(d.D(cm.mT(F) @ F, mp))
    alt = 2 * F @ np.einsum("nijkl,nkl->nij", D, cm.Cdot(F, Fd))
    v = max(v, _rel(d.dRdFdot(F, Fd, mp) / mp.c_R, alt / mp.c_R))
    return v <= FD_TOL, v, FD_TOL, "numeric", "dR/dFdot vs differences and 2F(D:Cdot)"


def check_gamma_range(d: Densities, mp, rng):
    F = random_F(rng, 10_000, det_range=(1e-3, 10.0))
    g = d.gamma(F, mp)
    lo, hi = float(g.min()), float(g.max())
    gI = float(d.gamma(np.eye(2), mp))
    ok = mp.c_gamma <= lo and hi <= mp.C_gamma and gI == mp.C_gamma and mp.c_gamma <= mp.gamma0 <= mp.C_gamma
    return ok, hi - lo, f"[{mp.c_gamma}, {mp.C_gamma}]", "hypothesis", "c_gamma <= gamma <= C_gamma, gamma(I) = C_gamma"


def check_gamma_saturation(d: Densities, mp, rng):
    if mp.kappa == 0:
        v = float(np.abs(d.gamma(random_F(rng, 100), mp) - mp.C_gamma).max())
        return v == 0.0, v, 0.0, "identity", "kappa = 0 gives constant C_gamma"
    # F = s I with |F^T F - I|^2 = 2 (s^2 - 1)^2 = 50 / kappa
    s = np.sqrt(1 + np.sqrt(25.0 / mp.kappa))
    v = abs(float(d.gamma(s * np.eye(2), mp)) - mp.c_gamma)
    return v <= 1e-9, v, 1e-9, "numeric", "gamma -> c_gamma at large strain"


def check_Dgamma(d: Densities, mp, rng):
    # sample where the strain exponent is O(1), so gamma actually varies
    F = np.eye(2) + 0.3 / np.sqrt(max(mp.kappa, 1.0)) * rng.normal(size=(50, 2, 2))
    v = _fd_rel(lambda X: d.gamma(X, mp), lambda X: d.Dgamma(X, mp), F) if mp.kappa > 0 else float(
        np.abs(d.Dgamma(F, mp)).max()
    )
    return v <= FD_TOL, v, FD_TOL, "numeric", "Dgamma vs central differences"


def check_gamma_lipschitz(d: Densities, mp, rng):
    F = random_F(rng, 10_000, det_range=(1e-3, 10.0))
    L = float(np.linalg.norm(d.Dgamma(F, mp), axis=(1, 2)).max())
    # |Dgamma| <= 4 kappa (C-c) |F| |E| e^{-kappa|E|^2}, bounded on bounded sets
    return np.isfinite(L), L, "finite", "hypothesis", "sampled Lipschitz constant of gamma"


CONSTITUTIVE_CHECKS: dict[str, Callable] = {
    "H1.p_exceeds_dimension": check_H1,
    "H6.determinant_exponent": check_H6,
    "moduli.positive": check_moduli,
    "h.range": check_h_range,
    "H3.W_identity": check_W_identity,
    "H3.W_minimum": check_W_min,
    "H3.W_growth": check_W_growth,
    "H2.DW_fd": check_DW_fd,
    "H4.W_frame_indifference": check_W_frame,
    "H5.W_isotropy": check_W_isotropy,
    "H7.VJ_coercivity": check_VJ_coercivity,
    "H7.DVJ_fd": check_DVJ_fd,
    "H7.VJ_orientation_guard": check_VJ_orientation,
    "H9.H_zero": check_H_zero,
    "H9.H_lower_growth": check_H_lower,
    "H8.H_convexity": check_H_convex,
    "H9.H_monotonicity": check_H_monotone,
    "H9.H_monotonicity_slope": check_H_monotone_slope,
    "H8.DH_fd": check_DH_fd,
    "H10.H_frame_indifference": check_H_frame,
    "H11.D_symmetry": check_D_symmetry,
    "H12.D_coercivity": check_D_coercive,
    "R.rigid_rates": check_R_zero,
    "R.frame_indifference": check_R_frame,
    "R.dRdFdot_fd": check_dR_fd,
    "H14.gamma_range": check_gamma_range,
    "H14.gamma_saturation": check_gamma_saturation,
    "H14.Dgamma_fd": check_Dgamma,
    "H14.gamma_lipschitz": check_gamma_lipschitz,
}


def _mutations(mp: cm.MaterialParams) -> dict[str, tuple[Densities, cm.MaterialParams]]:
    """One deliberately broken density (or parameter set) per check."""
    base = Densities()

    def aniso_W(F, m):
        C = cm.mT(F) @ F
        return cm.W(F, m) + (C[..., 0, 0] - C[..., 1, 1]) ** 2

    def gamma_wide(F, m):
        return cm.gamma(F, m) + 0.75 * (m.C_gamma - m.c_gamma)

    def H_concave(G, m):
        return -m.c_H * np.sum(G**2, axis=(-3, -2, -1))

    def D_skewed(C, m):
        D = np.array(cm.D_tensor(C, m))
        D[..., 0, 0, 0, 1] += 0.1 * m.c_R
        return D

    def D_degenerate(C, m):
        D = np.array(cm.D_tensor(C, m))
        D[..., 0, 1, 0, 1] = D[..., 1, 0, 1, 0] = D[..., 0, 1, 1, 0] = D[..., 1, 0, 0, 1] = 0.0
        return D

    def R_stretchy(F, Fd, m):
        return 0.25 * m.c_R * np.sum((Fd + cm.mT(Fd)) ** 2, axis=(-2, -1)) + 0.1 * m.c_R * np.sum(Fd[..., 0, :] ** 2, axis=-1)

    def smooth_h(s, delta):
        return delta + (1 - delta) / (1 + np.exp(np.asarray(s) / 1e-3))

    def H_shifted(G, m):
        return cm.H2nd(G, m) + m.c_H * 1e-3

    def H_anisotropic(G, m):
        return cm.H2nd(G, m) + m.c_H * G[..., 0, 0, 0] ** 2

    def H_weak(G, m):
        return 0.5 * cm.H2nd(G, m)

    def DH_weak(G, m):
        return 0.5 * cm.DH(G, m)

    def Dgamma_bad(F, m):
        return 1.1 * cm.Dgamma(F, m) + 1e-3

    def gamma_flat(F, m):
        return cm.gamma(F, replace(m, kappa=0.0))

    def Dgamma_unbounded(F, m):
        return F * np.exp(np.sum(F**2, axis=(-2, -1)))[..., None, None] * 1e300

    def DH_linear(G, m):
        return m.c_H * G

    def VJ_orientation_blind(F, m):
        return m.c_J * np.abs(cm.det2(F)) ** (-m.q)

    def DW_scaled(F, m):
        return 1.01 * cm.DW(F, m)

    def W_shift(F, m):
        return cm.W(F, m) + 0.1 * m.c_W

    def W_frame(F, m):
        return cm.W(F, m) + m.c_W * (F[..., 0, 0] - 1.0) ** 2

    def W_below(F, m):
        return cm.W(F, m) - 0.5 * m.c_W * np.exp(-np.sum((F - 1.2 * np.eye(2)) ** 2, axis=(-2, -1)) * 50)

    def W_steep(F, m):
        return cm.W(F, m) * (1 + np.sum(F**2, axis=(-2, -1)))

    def VJ_wrong(F, m):
        return m.c_J * cm.det2(F) ** (-(m.q - 0.5))

    def DVJ_flip(F, m):
        return -cm.DVJ(F, m)

    def DH_scaled(G, m):
        return 1.01 * cm.DH(G, m)

    def dR_half(F, Fd, m):
        return 0.5 * cm.dRdFdot(F, Fd, m)

    R = replace
    return {
        "H1.p_exceeds_dimension": (base, R(mp, p=2.0)),
        "H6.determinant_exponent": (base, R(mp, p=4.0, q=3.0)),
        "moduli.positive": (base, R(mp, c_R=-mp.c_R)),
        "h.range": (R(base, h=smooth_h), R(mp, delta=1.5)),
        "H3.W_identity": (R(base, W=W_shift), mp),
        "H3.W_minimum": (R(base, W=W_below), mp),
        "H3.W_growth": (R(base, W=W_steep), mp),
        "H2.DW_fd": (R(base, DW=DW_scaled), mp),
        "H4.W_frame_indifference": (R(base, W=W_frame), mp),
        "H5.W_isotropy": (R(base, W=aniso_W), mp),
        "H7.VJ_coercivity": (R(base, VJ=VJ_wrong), mp),
        "H7.DVJ_fd": (R(base, DVJ=DVJ_flip), mp),
        "H7.VJ_orientation_guard": (R(base, VJ=VJ_orientation_blind), mp),
        "H9.H_zero": (R(base, H=H_shifted), mp),
        "H9.H_lower_growth": (R(base, H=H_weak), mp),
        "H8.H_convexity": (R(base, H=H_concave), mp),
        "H9.H_monotonicity": (R(base, DH=DH_weak), mp),
        "H9.H_monotonicity_slope": (R(base, DH=DH_linear), mp),
        "H8.DH_fd": (R(base, DH=DH_scaled), mp),
        "H10.H_frame_indifference": (R(base, H=H_anisotropic), mp),
        "H11.D_symmetry": (R(base, D=D_skewed), mp),
        "H12.D_coercivity": (R(base, D=D_degenerate), mp),
        "R.rigid_rates": (R(base, R=R_stretchy), mp),
        "R.frame_indifference": (R(base, R=R_stretchy), mp),
        "R.dRdFdot_fd": (R(base, dRdFdot=dR_half), mp),
        "H14.gamma_range": (R(base, gamma=gamma_wide), mp),
        "H14.gamma_saturation": (R(base, gamma=gamma_flat), R(mp, kappa=max(mp.kappa, 1.0))),
        "H14.Dgamma_fd": (R(base, Dgamma=Dgamma_bad), R(mp, kappa=max(mp.kappa, 1.0))),
        "H14.gamma_lipschitz": (R(base, Dgamma=Dgamma_unbounded), mp),
    }


def _run_check(fn, dens, mp, rng):
    try:
        ok, value, tol, kind, detail = fn(dens, mp, rng)
    except (FloatingPointError, ValueError, ZeroDivisionError) as e:
        return False, float("nan"), "n/a", "numeric", f"raised {type(e).__name__}: {e}"
    ok = bool(ok) and bool(np.isfinite(value))
    return ok, value, tol, kind, detail


def verify_hypotheses(params: cm.MaterialParams | None = None, seed: int = DEFAULT_SEED,
                      controls: bool = True) -> VerificationReport:
    """All constitutive property checks on ``params``; optionally each check's negative control."""
    mp = params or cm.MaterialParams()
    rep = VerificationReport("hypotheses", seed)
    t0 = time.perf_counter()
    dens = Densities()
    with np.errstate(all="ignore"):
        for i, (name, fn) in enumerate(CONSTITUTIVE_CHECKS.items()):
            rng = np.random.default_rng([seed, i])
            ok, value, tol, kind, detail = _run_check(fn, dens, mp, rng)
            rep.add(name, ok, value, tol, kind, detail)
        if controls:
            # a control passes when its mutated ingredient makes the check fail
            good = cm.MaterialParams()
            for i, (name, (mdens, mmp)) in enumerate(_mutations(good).items()):
                rng = np.random.default_rng([seed, i])
                ok, value, _, _, _ = _run_check(CONSTITUTIVE_CHECKS[name], mdens, mmp, rng)
                rep.add(f"control.{name}", not ok, value, "check must fail", "identity", "negative control")
    rep.seconds = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# eikonal
# ---------------------------------------------------------------------------


def eikonal_domain(c_gamma=0.5, C_gamma=1.0, T=0.25) -> DomainSpec:
    return DomainSpec(1.0, 1.0, Disk((0.5, 0.5), 0.1), Disk((0.5, 0.5), 0.02), T, c_gamma, C_gamma)


def random_speed(grid, rng, c_gamma: float, C_gamma: float, modes: int = 4) -> np.ndarray:
    """Smooth random field spanning ``[c_gamma, C_gamma]`` (a few random Fourier modes)."""
    x, y = grid.coords[..., 0] / grid.spec.Lx, grid.coords[..., 1] / grid.spec.Ly
    s = np.zeros(grid.shape)
    for _ in range(modes):
        kx, ky = rng.integers(1, 4, size=2)
        ph = rng.uniform(0, 2 * np.pi, size=2)
        s += rng.normal() * np.cos(2 * np.pi * kx * x + ph[0]) * np.cos(2 * np.pi * ky * y + ph[1])
    s = (s - s.min()) / max(s.max() - s.min(), 1e-300)
    return c_gamma + (C_gamma - c_gamma) * s


def random_speed_continuous(rng, c_gamma: float, C_gamma: float, modes: int = 4):
    """Random smooth speed as a function of position, for sampling at several resolutions."""
    k = rng.integers(1, 4, size=(modes, 2))
    ph = rng.uniform(0, 2 * np.pi, size=(modes, 2))
    a = rng.normal(size=modes)

    def raw(xy):
        x, y = xy[..., 0], xy[..., 1]
        return sum(a[m] * np.cos(2 * np.pi * k[m, 0] * x + ph[m, 0]) * np.cos(2 * np.pi * k[m, 1] * y + ph[m, 1])
                   for m in range(modes))

    # normalize on a fine reference grid so every resolution sees the same field
    g = np.stack(np.meshgrid(np.linspace(0, 1, 257), np.linspace(0, 1, 257), indexing="ij"), -1)
    r = raw(g)
    lo, hi = r.min(), r.max()

    def speed(xy):
        s = np.clip((raw(xy) - lo) / (hi - lo), 0.0, 1.0)
        return c_gamma + (C_gamma - c_gamma) * s

    return speed


def analytic_disk_error(n: int, gamma0: float = 1.0) -> float:
    grid = build_grid(eikonal_domain(gamma0, gamma0), n)
    th = solve_fmm(np.full(grid.shape, gamma0), grid)
    exact = grid.spec.omega0.distance(grid.coords) / gamma0
    return float(np.abs(th.values - exact).max())


def oracle_distance(grid, speed) -> float:
    a = solve_fmm(speed, grid).values
    b = dijkstra_oracle(speed, grid).values
    return float(np.abs(a - b).max() / np.abs(b).max())


def verify_eikonal(sizes=(33, 65, 129), n_random: int = 20, seed: int = DEFAULT_SEED,
                   c_gamma: float = 0.5, C_gamma: float = 1.0) -> VerificationReport:
    sizes = sorted(int(s) for s in sizes)
    rep = VerificationReport("eikonal", seed)
    t0 = time.perf_counter()

    # analytic constant-speed solution and observed order
    errs = {n: analytic_disk_error(n) for n in sizes}
    rep.extra["analytic_errors"] = {str(n): e for n, e in errs.items()}
    for n in sizes:
        h = 1.0 / (n - 1)
        rep.add(f"analytic.sup_error_{n}", errs[n] <= 2 * h, errs[n], 2 * h, "identity",
                "constant speed, distance to disk")
    for a, b in zip(sizes, sizes[1:]):
        r = errs[a] / errs[b]
        rep.add(f"analytic.order_{a}_{b}", 1.4 <= r <= 2.6, r, "[1.4, 2.6]", "numeric",
                f"error ratio (observed order {np.log2(r):.2f})")

    n_mid = 65 if 65 in sizes else sizes[len(sizes) // 2]
    grid = build_grid(eikonal_domain(c_gamma, C_gamma), n_mid)
    h = grid.h
    one = solve_fmm(np.ones(grid.shape), grid).values
    two = solve_fmm(np.full(grid.shape, 2.0), grid).values
    v = float(np.max(np.abs(two - 0.5 * one)))
    rep.add("fmm.speed_scaling", v <= 1e-15 * one.max(), v, 1e-15 * one.max(), "identity", "speed 2 halves theta")

    # graph metric against Euclidean distance from a single node
    c = (grid.nx // 2, grid.ny // 2)
    src = np.zeros(grid.shape, bool)
    src[c] = True
    gm = dijkstra_oracle(np.ones(grid.shape), grid, source=src).values
    eu = np.linalg.norm(grid.coords - grid.coords[c], axis=-1)
    m = eu > 0
    ratio = gm[m] / eu[m]
    rep.add("oracle.metrication", ratio.min() >= 1 - 1e-12 and ratio.max() <= 1.03, float(ratio.max()),
            "[1, 1.03]", "numeric", "16-neighbour graph metric / Euclidean")

    # two-valued speed
    sp2 = np.where(grid.coords[..., 0] < 0.5, 1.0, 2.0)
    g2 = build_grid(eikonal_domain(1.0, 2.0, T=0.1), n_mid)
    d2 = float(np.abs(solve_fmm(sp2, g2).values - dijkstra_oracle(sp2, g2).values).max())
    rep.add("oracle.two_valued", d2 <= 3 * h / 1.0, d2, 3 * h, "numeric", "speed 1 | 2 halves")

    # random admissible fields: oracle distance, refinement, bounds, causality
    rng = np.random.default_rng(seed)
    fields_ = [random_speed_continuous(rng, c_gamma, C_gamma) for _ in range(n_random)]
    big = [n for n in sizes if n >= 65]
    dist = {n: [] for n in big}
    bound_fail, worst_bound, causal_bad = 0, -np.inf, 0
    for n in big:
        g = build_grid(eikonal_domain(c_gamma, C_gamma), n)
        for f in fields_:
            sp = f(g.coords)
            th = solve_fmm(sp, g)
            b = dijkstra_oracle(sp, g).values
            dist[n].append(float(np.abs(th.values - b).max() / b.max()))
            br = check_bounds(th, g, c_gamma, C_gamma)
            bound_fail += not br.ok
            worst_bound = max(worst_bound, br.worst_lower - br.tol_theta, br.worst_upper - br.tol_theta)
            causal_bad += int(np.any(np.diff(th.values.ravel()[th.order]) < 0))
    rep.extra["oracle_distances"] = {str(n): d for n, d in dist.items()}
    for n in big:
        mx = max(dist[n]) if dist[n] else 0.0
        rep.add(f"oracle.random_{n}", mx <= 0.05, mx, 0.05, "numeric",
                f"max relative sup-distance over {n_random} fields")
    if 65 in dist and 129 in dist:
        dec = np.array(dist[129]) < np.array(dist[65])
        rep.add("oracle.refinement_65_129", bool(dec.all()), float(dec.mean()), "all fields", "numeric",
                "oracle distance strictly decreases from 65 to 129")
    rep.add("bounds.random_fields", bound_fail == 0, float(bound_fail), 0, "hypothesis",
            f"two-sided distance and gradient bounds (worst excess {worst_bound:.3g})")
    rep.add("fmm.causality", causal_bad == 0, float(causal_bad), 0, "identity",
            "acceptance order non-decreasing in theta")

    # corrupted field is flagged
    th = solve_fmm(fields_[0](grid.coords), grid).values.copy() if fields_ else one.copy()
    ij = np.unravel_index(np.argmax(th), th.shape)
    th[ij] *= 0.5
    br = check_bounds(th, grid, c_gamma, C_gamma)
    rep.add("bounds.corrupted_flagged", tuple(ij) in br.flagged, float(len(br.flagged)), ">= 1", "identity",
            "halving one node is reported")

    # monotonicity and stability under speed perturbations
    mono_bad, stab_excess = 0, -np.inf
    for i in range(5):
        s1 = random_speed(grid, rng, c_gamma, C_gamma)
        bump = rng.uniform(0, 0.1, size=grid.shape) * (C_gamma - c_gamma)
        s2 = np.minimum(s1 + bump, C_gamma)
        t1, t2 = solve_fmm(s1, grid).values, solve_fmm(s2, grid).values
        mono_bad += int(np.any(t2 > t1 + 1e-14))
        eps = float(np.abs(s2 - s1).max())
        bound = eps * t1.max() / c_gamma**2 * C_gamma + h / c_gamma
        stab_excess = max(stab_excess, float(np.abs(t2 - t1).max() - bound))
    rep.add("fmm.speed_monotonicity", mono_bad == 0, float(mono_bad), 0, "hypothesis",
            "larger speed gives smaller arrival times")
    rep.add("fmm.stability", stab_excess <= 0, stab_excess, "<= 0", "numeric",
            "|d theta| <= eps theta_max C/c^2 + h/c")

    # nested sublevel sets
    thr = solve_fmm(random_speed(grid, rng, c_gamma, C_gamma), grid).values
    ts = np.linspace(0, thr.max(), 9)
    nested = all(np.all((thr < a) <= (thr < b)) for a, b in zip(ts, ts[1:]))
    rep.add("sublevel.nesting", nested, 0.0 if nested else 1.0, 0, "identity", "{theta < t} grows with t")
    rep.seconds = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# equilibrium
# ---------------------------------------------------------------------------


def default_equilibrium_config() -> RunConfig:
    domain = DomainSpec(1.0, 1.0, Disk((0.5, 0.5), 0.1), Disk((0.5, 0.5), 0.05), 0.25, 0.5, 1.0)
    mp = cm.MaterialParams(kappa=1000.0, eps_H=1.0)
    return RunConfig(domain=domain, material=mp, nx=65, n_steps=16, force=(0.0, -0.5), ramp_time=0.0625)


def fd_assembly_check(cfg: RunConfig, rng, n_states: int = 3, n_dofs: int = 20, step: float = 1e-5) -> float:
    """Worst relative error of the analytic step-energy gradient against 4th-order central differences."""
    grid = build_grid(cfg.domain, cfg.nx)
    ops = operators(grid)
    mp = cfg.material
    th = solve_fmm(np.full(grid.shape, mp.C_gamma), grid)
    worst = 0.0
    for s in range(n_states):
        A0 = np.eye(2) + 0.05 * rng.normal(size=(2, 2))
        bs = init_backstrain(A0, grid, th.values, cfg.tau, cfg.n_steps)
        y_prev = DeformationState.identity(grid).with_free(1e-3 * rng.normal(size=ops.n_free))
        x = y_prev.free_vector() + 1e-3 * rng.normal(size=ops.n_free)
        i = int(rng.integers(1, cfg.n_steps + 1))
        prob = IncrementalProblem(i, i * cfg.tau, cfg.tau, th.values, bs.A, y_prev,
                                  rng.normal(size=2), mp)
        st = y_prev.with_free(x)
        if not st.is_admissible(1e-8):
            raise RuntimeError("random state is not admissible")
        _, g = incremental_energy(st, prob)
        f = lambda z: incremental_energy(y_prev.with_free(z), prob)[0]  # noqa: E731
        for k in rng.choice(ops.n_free, n_dofs, replace=False):
            e = np.zeros_like(x)
            e[k] = step
            fd = (8 * (f(x + e) - f(x - e)) - (f(x + 2 * e) - f(x - 2 * e))) / (12 * step)
            worst = max(worst, abs(fd - g[k]) / max(abs(g[k]), 1e-300))
    return worst


def verify_equilibrium(cfg: RunConfig | None = None, seed: int = DEFAULT_SEED) -> VerificationReport:
    cfg = (cfg or default_equilibrium_config()).validate()
    rep = VerificationReport("equilibrium", seed)
    t0 = time.perf_counter()
    grid = build_grid(cfg.domain, cfg.nx)
    mp = cfg.material
    y0 = DeformationState.identity(grid)
    theta0 = solve_fmm(np.full(grid.shape, mp.C_gamma), grid)

    # stationarity of the identity with no load
    idle = replace(cfg, force=(0.0, 0.0), A0=(1.0, 0.0, 0.0, 1.0))
    tr = solve_trajectory(theta0, idle, grid, y0)
    dev = max(float(np.abs(s.u).max()) for s in tr.history.states)
    rep.add("equilibrium.identity_stationarity", dev <= 1e-8, dev, 1e-8, "identity", "f = 0 keeps y = id")

    rng = np.random.default_rng(seed)
    fd = fd_assembly_check(cfg, rng)
    rep.add("equilibrium.gradient_fd", fd <= 1e-5, fd, 1e-5, "numeric",
            "3 random admissible states, 20 random free DOFs each")

    tr = solve_trajectory(theta0, cfg, grid, y0)
    led = tr.ledger
    e, ep = led.as_array("energy"), led.as_array("energy_prev")
    rep.add("equilibrium.minimality", bool(np.all(e <= ep)), float(np.max(e - ep)), "<= 0", "hypothesis",
            "step energy of y^i not above that of y^(i-1)")
    md = float(led.as_array("min_det").min())
    rep.add("equilibrium.min_det", md >= 0.5, md, 0.5, "numeric", "min node det grad y over the run")
    diss = led.as_array("dissipation")
    rep.add("equilibrium.dissipation_nonnegative", bool(np.all(diss >= 0)), float(diss.min()), ">= 0",
            "identity", "dissipation increments")
    cum = led.rows[-1].cumulative_dissipation
    fin = all(np.isfinite(led.as_array(k)).all() for k in ("hessian_p_sum", "det_q_sum", "cumulative_dissipation"))
    rep.add("equilibrium.ledger_bounded", fin, float(cum), "finite", "hypothesis",
            "second-gradient, determinant and dissipation monitors")
    fixed_dev = max(float(np.abs(s.u[grid.fixed]).max()) for s in tr.history.states)
    rep.add("equilibrium.dirichlet_exact", fixed_dev == 0.0, fixed_dev, 0.0, "identity", "y = id on anchor and edge")
    rep.add("equilibrium.unstressed_attachment", tr.max_attachment_W <= 1e-12, tr.max_attachment_W, 1e-12,
            "hypothesis", f"W(F_e) at {tr.attachment_events} recording events")
    res = float(led.as_array("residual").max())
    tol = cfg.solver.tol_EL if cfg.solver.tol_EL is not None else 1e-7 * (mp.c_W + mp.q * mp.c_J)
    rep.add("equilibrium.el_residual", res <= tol, res, tol, "numeric", "discrete Euler-Lagrange residual")
    rep.extra["ledger"] = led.summary()
    rep.seconds = time.perf_counter() - t0
    return rep


def verify_all(params: cm.MaterialParams | None = None, sizes=(33, 65, 129), seed: int = DEFAULT_SEED,
               cfg: RunConfig | None = None) -> VerificationReport:
    rep = VerificationReport("all", seed)
    rep.merge(verify_hypotheses(params, seed))
    rep.merge(verify_eikonal(sizes, seed=seed))
    rep.merge(verify_equilibrium(cfg, seed))
    return rep
