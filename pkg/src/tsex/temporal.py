"""Delta and acceleration dynamics of a T x F magnitude trajectory.

delta(v)(t) = sum_{l=1..L} l * (v(t+l) - v(t-l)) / sum_{l=1..L} 2*l^2,
with boundary frames replicated (v(t<0) := v(0), v(t>=T) := v(T-1)).
Acceleration is delta applied twice. The adjoint is the exact transpose of
the delta operator under the same edge policy, for gradient propagation.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyInputError


def _check(m, L: int) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise EmptyInputError("expected a non-empty T x F matrix")
    if L < 1:
        raise ValueError("context window L must be >= 1")
    return m


def delta_denominator(L: int = 2) -> float:
    """Normalizer of the delta regression: sum of 2*l^2 for l = 1..L."""
    return float(sum(2 * l * l for l in range(1, L + 1)))


def delta(m, L: int = 2) -> np.ndarray:
    """First-order dynamics along the frame axis with replicated edges."""
    m = _check(m, L)
    t = m.shape[0]
    idx = np.arange(t)
    out = np.zeros_like(m)
    for l in range(1, L + 1):
        fwd = np.clip(idx + l, 0, t - 1)
        bwd = np.clip(idx - l, 0, t - 1)
        out += l * (m[fwd] - m[bwd])
    return out / delta_denominator(L)


def accel(m, L: int = 2) -> np.ndarray:
    """Second-order dynamics: delta applied twice."""
    return delta(delta(m, L), L)


def delta_adjoint(g, L: int = 2) -> np.ndarray:
    """Transpose of the delta operator: <delta(m), g> == <m, delta_adjoint(g)>."""
    g = _check(g, L)
    t = g.shape[0]
    idx = np.arange(t)
    out = np.zeros_like(g)
    for l in range(1, L + 1):
        fwd = np.clip(idx + l, 0, t - 1)
        bwd = np.clip(idx - l, 0, t - 1)
        np.add.at(out, fwd, l * g)
        np.add.at(out, bwd, -l * g)
    return out / delta_denominator(L)


def accel_adjoint(g, L: int = 2) -> np.ndarray:
    """Transpose of the acceleration operator (adjoint of delta, twice)."""
    return delta_adjoint(delta_adjoint(g, L), L)
