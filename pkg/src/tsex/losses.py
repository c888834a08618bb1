"""Training objectives over estimated masks and their analytic gradients.

Three losses, all normalized by the frame count T:

  mal   — squared Frobenius distance between the mask and the ideal binary
          mask.
  msal  — squared Frobenius distance between the masked mixture magnitude
          M * |Y| and the phase-sensitive target |X| * cos(theta_y - theta_x).
  mtsal — msal plus weighted squared distances between the delta and
          acceleration dynamics of the two magnitudes (defaults w_d = 4.5,
          w_a = 10.0, context window L = 2).

The phase-sensitive target is used raw (it may be negative); clamping is a
construction-time option on the target, not part of the loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .temporal import accel, accel_adjoint, delta, delta_adjoint


@dataclass(frozen=True)
class LossWeights:
    """Weights of the temporal terms and the delta context window."""

    w_d: float = 4.5
    w_a: float = 10.0
    L: int = 2

    def __post_init__(self):
        if self.w_d < 0 or self.w_a < 0:
            raise ValueError("temporal weights must be nonnegative")
        if self.L < 1:
            raise ValueError("context window L must be >= 1")


def _as_tf(*arrays):
    out = [np.asarray(a, dtype=np.float64) for a in arrays]
    shape = out[0].shape
    if len(shape) != 2 or shape[0] < 1:
        raise ShapeMismatchError("expected non-empty T x F matrices")
    for a in out[1:]:
        if a.shape != shape:
            raise ShapeMismatchError(f"shape {a.shape} != {shape}")
    return out


def mal(M, M_ibm) -> float:
    """Mask approximation loss (1/T) * ||M - M_ibm||_F^2."""
    M, M_ibm = _as_tf(M, M_ibm)
    return float(np.sum((M - M_ibm) ** 2) / M.shape[0])


def mal_grad(M, M_ibm) -> np.ndarray:
    """Gradient of mal with respect to M."""
    M, M_ibm = _as_tf(M, M_ibm)
    return 2.0 / M.shape[0] * (M - M_ibm)


def msal(M, mix_mag, psm_tgt) -> float:
    """Magnitude spectrum approximation loss (1/T) * ||M*|Y| - target||_F^2."""
    M, mix_mag, psm_tgt = _as_tf(M, mix_mag, psm_tgt)
    return float(np.sum((M * mix_mag - psm_tgt) ** 2) / M.shape[0])


def msal_grad(M, mix_mag, psm_tgt) -> np.ndarray:
    """Gradient of msal with respect to M."""
    M, mix_mag, psm_tgt = _as_tf(M, mix_mag, psm_tgt)
    return 2.0 / M.shape[0] * mix_mag * (M * mix_mag - psm_tgt)


def mtsal(M, mix_mag, psm_tgt, w: LossWeights = LossWeights()) -> float:
    """Magnitude and temporal spectrum approximation loss.

    msal term plus w_d and w_a weighted Frobenius distances between the
    delta and acceleration trajectories of M*|Y| and the target.
    """
    M, mix_mag, psm_tgt = _as_tf(M, mix_mag, psm_tgt)
    t = M.shape[0]
    est = M * mix_mag
    loss = np.sum((est - psm_tgt) ** 2)
    if w.w_d != 0.0:
        loss += w.w_d * np.sum((delta(est, w.L) - delta(psm_tgt, w.L)) ** 2)
    if w.w_a != 0.0:
        loss += w.w_a * np.sum((accel(est, w.L) - accel(psm_tgt, w.L)) ** 2)
    return float(loss / t)


def mtsal_grad(M, mix_mag, psm_tgt, w: LossWeights = LossWeights()) -> np.ndarray:
    """Gradient of mtsal with respect to M.

    The delta/acceleration terms contribute through the exact adjoints of
    the linear dynamics operators.
    """
    M, mix_mag, psm_tgt = _as_tf(M, mix_mag, psm_tgt)
    t = M.shape[0]
    residual = M * mix_mag - psm_tgt
    total = residual.copy()
    if w.w_d != 0.0:
        total += w.w_d * delta_adjoint(delta(residual, w.L), w.L)
    if w.w_a != 0.0:
        total += w.w_a * accel_adjoint(accel(residual, w.L), w.L)
    return 2.0 / t * mix_mag * total
