"""Attachment-recorded backstrain.

A node reached by the front during step ``k`` (``theta in (t_{k-1}, t_k]``)
stores the deformation gradient of the converged state ``y^k`` and keeps
it for the rest of the run; initial-body nodes carry ``A0``; nodes not yet
reached carry the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constitutive import det2, inv2
from .geometry import Grid

NEVER = np.iinfo(np.int32).max


class BackstrainError(RuntimeError):
    pass


def slab_index(theta: np.ndarray, tau: float, n_steps: int) -> np.ndarray:
    """``k`` with ``theta in (t_{k-1}, t_k]`` for ``t_k = k*tau``; 0 where ``theta == 0``; NEVER past ``T``."""
    th = np.asarray(theta, float)
    k = np.ceil(th / tau).astype(np.int64)
    # guard the division against rounding at the partition points
    k = np.where(th > k * tau, k + 1, k)
    k = np.where((k > 0) & (th <= (k - 1) * tau), k - 1, k)
    k = np.where(th <= 0, 0, k)
    k = np.where(k > n_steps, NEVER, k)
    return k.astype(np.int64)


@dataclass
class BackstrainField:
    A: np.ndarray
    slab: np.ndarray
    frozen: np.ndarray
    tau: float
    n_steps: int
    recorded_steps: set = field(default_factory=set)

    def record_arrivals(self, step: int, grad_y: np.ndarray) -> np.ndarray:
        """Freeze ``A = grad y^step`` on nodes whose slab is ``step``; return the newly frozen mask."""
        fresh = (self.slab == step) & ~self.frozen
        if fresh.any():
            d = det2(grad_y[fresh])
            if np.any(~(d > 0)):
                raise BackstrainError(
                    f"step {step}: arriving node with det grad y = {d.min():.3e} <= 0"
                )
            self.A[fresh] = grad_y[fresh]
            self.frozen |= fresh
        self.recorded_steps.add(step)
        return fresh

    def elastic_strain(self, grad_y: np.ndarray) -> np.ndarray:
        return elastic_strain(self, grad_y)

    def copy(self) -> "BackstrainField":
        return BackstrainField(
            self.A.copy(), self.slab.copy(), self.frozen.copy(), self.tau, self.n_steps, set(self.recorded_steps)
        )


def init_backstrain(A0, grid: Grid, theta, tau: float, n_steps: int) -> BackstrainField:
    """``A0`` on the initial body, identity elsewhere; slabs from ``theta`` and ``tau``."""
    th = np.asarray(theta, float)
    om0 = grid.omega0
    A0 = np.asarray(A0, float)
    if A0.shape == (2, 2):
        A0 = np.broadcast_to(A0, grid.shape + (2, 2))
    if A0.shape != grid.shape + (2, 2):
        raise BackstrainError(f"A0 must be a 2x2 matrix or a per-node field, got shape {A0.shape}")
    d0 = det2(A0[om0])
    if not np.all(np.isfinite(A0[om0])) or np.any(~(d0 > 0)):
        raise BackstrainError("hypothesis (H13) violated: A0 must have positive determinant on Omega0")

    A = np.broadcast_to(np.eye(2), grid.shape + (2, 2)).copy()
    A[om0] = A0[om0]
    slab = slab_index(th, tau, n_steps)
    slab[om0] = 0
    return BackstrainField(A=A, slab=slab, frozen=om0.copy(), tau=tau, n_steps=n_steps)


def elastic_strain(field: BackstrainField, grad_y: np.ndarray) -> np.ndarray:
    """``F_e = grad y A^{-1}`` node-wise."""
    return grad_y @ inv2(field.A)
