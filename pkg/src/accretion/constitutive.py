"""Material densities of the two-phase (accreting + fictitious) medium.

All functions are vectorized over leading axes: ``F`` has shape
``(..., 2, 2)`` and the second gradient ``G`` has shape ``(..., 2, 2, 2)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

DIM = 2


class MaterialError(ValueError):
    pass


class OrientationError(ValueError):
    """Evaluation at a deformation gradient with ``det F <= 0``."""


@dataclass(frozen=True)
class MaterialParams:
    p: float = 4.0
    q: float = 5.0
    c_W: float = 1.0
    c_J: float = 0.05
    c_H: float = 1e-4
    c_R: float = 0.1
    delta: float = 1e-3
    c_gamma: float = 0.5
    C_gamma: float = 1.0
    gamma0: float = 1.0
    kappa: float = 0.0
    eps_H: float = 0.0

    @property
    def q_min(self) -> float:
        """Lower bound ``p*d/(p-d)`` the determinant exponent must exceed."""
        return self.p * DIM / (self.p - DIM) if self.p > DIM else np.inf

    def violations(self) -> list[str]:
        out = []
        if not self.p > DIM:
            out.append(f"hypothesis (H1) violated: p={self.p} must exceed d={DIM}")
        if not self.q > self.q_min:
            out.append(f"hypothesis (H6) violated: q={self.q} must exceed pd/(p-d)={self.q_min:g}")
        for name in ("c_W", "c_J", "c_H", "c_R"):
            if not getattr(self, name) > 0:
                out.append(f"modulus {name} must be positive")
        if not 0 < self.delta < 1:
            out.append(f"fictitious compliance delta={self.delta} must lie in (0, 1)")
        if not 0 < self.c_gamma <= self.C_gamma:
            out.append("hypothesis (H14) violated: need 0 < c_gamma <= C_gamma")
        if not self.c_gamma <= self.gamma0 <= self.C_gamma:
            out.append("gamma0 must lie in [c_gamma, C_gamma]")
        if self.kappa < 0:
            out.append("kappa must be nonnegative")
        if self.eps_H < 0:
            out.append("eps_H must be nonnegative")
        return out

    def validate(self) -> "MaterialParams":
        bad = self.violations()
        if bad:
            raise MaterialError("; ".join(bad))
        return self

    def as_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# small tensor helpers
# ---------------------------------------------------------------------------

_I = np.eye(DIM)


def det2(F: np.ndarray) -> np.ndarray:
    return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]


def inv2(F: np.ndarray) -> np.ndarray:
    d = det2(F)
    out = np.empty_like(F)
    out[..., 0, 0] = F[..., 1, 1]
    out[..., 1, 1] = F[..., 0, 0]
    out[..., 0, 1] = -F[..., 0, 1]
    out[..., 1, 0] = -F[..., 1, 0]
    return out / d[..., None, None]


def cof2(F: np.ndarray) -> np.ndarray:
    """Cofactor matrix ``det(F) F^{-T}`` (polynomial, safe at det = 0)."""
    out = np.empty_like(F)
    out[..., 0, 0] = F[..., 1, 1]
    out[..., 1, 1] = F[..., 0, 0]
    out[..., 0, 1] = -F[..., 1, 0]
    out[..., 1, 0] = -F[..., 0, 1]
    return out


def mT(F: np.ndarray) -> np.ndarray:
    return np.swapaxes(F, -1, -2)


def green(F: np.ndarray) -> np.ndarray:
    """``F^T F - I``."""
    return mT(F) @ F - _I


def _sq(X: np.ndarray, axes: int = 2) -> np.ndarray:
    return np.sum(X * X, axis=tuple(range(-axes, 0)))


def _require_positive_det(F: np.ndarray, what: str) -> np.ndarray:
    d = det2(F)
    if np.any(~(d > 0)):
        raise OrientationError(f"orientation violated in {what}: min det F = {np.min(d):.3e}")
    return d


# ---------------------------------------------------------------------------
# stored energy
# ---------------------------------------------------------------------------


def W(F, mp: MaterialParams):
    return 0.25 * mp.c_W * _sq(green(F))


def DW(F, mp: MaterialParams):
    return mp.c_W * F @ green(F)


def VJ(F, mp: MaterialParams):
    d = _require_positive_det(F, "VJ")
    return mp.c_J * d ** (-mp.q)


def DVJ(F, mp: MaterialParams):
    d = _require_positive_det(F, "DVJ")
    # det^{-q} F^{-T} = det^{-q-1} cof F
    return (-mp.q * mp.c_J * d ** (-mp.q - 1))[..., None, None] * cof2(F)


def H2nd(G, mp: MaterialParams):
    s = mp.eps_H**2 + _sq(G, 3)
    return (mp.c_H / mp.p) * (s ** (mp.p / 2) - mp.eps_H**mp.p)


def DH(G, mp: MaterialParams):
    s = mp.eps_H**2 + _sq(G, 3)
    return (mp.c_H * s ** ((mp.p - 2) / 2))[..., None, None, None] * G


# ---------------------------------------------------------------------------
# dissipation
# ---------------------------------------------------------------------------


def D_tensor(C, mp: MaterialParams):
    """Viscosity tensor: ``(c_R/2)`` times the identity on symmetric matrices."""
    I4 = 0.5 * (np.einsum("ik,jl->ijkl", _I, _I) + np.einsum("il,jk->ijkl", _I, _I))
    shape = np.shape(C)[:-2]
    return np.broadcast_to(0.5 * mp.c_R * I4, shape + I4.shape)


def Cdot(F, Fdot):
    return mT(Fdot) @ F + mT(F) @ Fdot


def R(F, Fdot, mp: MaterialParams):
    return 0.25 * mp.c_R * _sq(Cdot(F, Fdot))


def dRdFdot(F, Fdot, mp: MaterialParams):
    return mp.c_R * F @ Cdot(F, Fdot)


# ---------------------------------------------------------------------------
# growth law and phase switch
# ---------------------------------------------------------------------------


def gamma(F, mp: MaterialParams):
    """Normal growth speed; ``C_gamma`` at the identity, decaying towards ``c_gamma`` with strain."""
    _require_positive_det(F, "gamma")
    return mp.c_gamma + (mp.C_gamma - mp.c_gamma) * np.exp(-mp.kappa * _sq(green(F)))


def Dgamma(F, mp: MaterialParams):
    _require_positive_det(F, "Dgamma")
    E = green(F)
    scale = -4.0 * mp.kappa * (mp.C_gamma - mp.c_gamma) * np.exp(-mp.kappa * _sq(E))
    return scale[..., None, None] * (F @ E)


def h_switch(sigma, delta: float):
    """1 on the accreting side (``sigma <= 0``), ``delta`` in the fictitious medium."""
    return np.where(np.asarray(sigma) <= 0, 1.0, delta)


# ---------------------------------------------------------------------------
# second derivatives (tangent moduli), used to seed the step minimizer
# ---------------------------------------------------------------------------

# d cof(F)_ab / d F_cd
_DCOF = np.zeros((2, 2, 2, 2))
_DCOF[0, 0, 1, 1] = _DCOF[1, 1, 0, 0] = 1.0
_DCOF[0, 1, 1, 0] = _DCOF[1, 0, 0, 1] = -1.0


def D2W(F, mp: MaterialParams):
    """``d^2 W / dF_ab dF_cd``."""
    E = green(F)
    FFt = F @ mT(F)
    return mp.c_W * (
        np.einsum("ac,...db->...abcd", _I, E)
        + np.einsum("...ad,...cb->...abcd", F, F)
        + np.einsum("...ac,bd->...abcd", FFt, _I)
    )


def D2VJ(F, mp: MaterialParams):
    d = _require_positive_det(F, "D2VJ")
    cf = cof2(F)
    a = mp.q * (mp.q + 1) * mp.c_J * d ** (-mp.q - 2)
    b = -mp.q * mp.c_J * d ** (-mp.q - 1)
    return a[..., None, None, None, None] * np.einsum("...ab,...cd->...abcd", cf, cf) + b[
        ..., None, None, None, None
    ] * _DCOF


def D2R(F, mp: MaterialParams):
    """``d^2 R / dFdot_ab dFdot_cd`` (independent of ``Fdot``)."""
    FFt = F @ mT(F)
    return mp.c_R * (np.einsum("...ad,...cb->...abcd", F, F) + np.einsum("...ac,bd->...abcd", FFt, _I))
