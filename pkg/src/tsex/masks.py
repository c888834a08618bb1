"""Oracle masks, mask application, and masked-signal reconstruction.

The estimated magnitude is M * |Y|; the mixture phase is reused to rebuild
the time-domain signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import Waveform
from .errors import ShapeMismatchError
from .stft import Spectrogram, istft, magnitude, phase


@dataclass(frozen=True)
class Mask:
    """Real T x F mask. Network outputs lie in [0, 1]; oracle targets may not."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise ValueError("mask must be a T x F matrix")
        if not np.all(np.isfinite(values)):
            raise ValueError("mask contains non-finite entries")


def _check_shapes(*arrays):
    shape = np.asarray(arrays[0]).shape
    for a in arrays[1:]:
        if np.asarray(a).shape != shape:
            raise ShapeMismatchError(f"shape {np.asarray(a).shape} != {shape}")


def ibm(target_mag, interf_mag) -> Mask:
    """Ideal binary mask: 1 where the target magnitude strictly dominates.

    Ties go to 0 (interference wins) so the mask is deterministic.
    """
    target_mag = np.asarray(target_mag, dtype=np.float64)
    interf_mag = np.asarray(interf_mag, dtype=np.float64)
    _check_shapes(target_mag, interf_mag)
    return Mask((target_mag > interf_mag).astype(np.float64))


def psm_target(mix_mag, tgt_mag, theta_y, theta_x, clamp_cos: bool = False):
    """Phase-sensitive magnitude target |X| * cos(theta_y - theta_x).

    This is what the spectrum-approximation losses compare M * |Y| against.
    It can be negative; `clamp_cos` clips the cosine to [0, 1] for
    experiments with the clamped variant.
    """
    mix_mag = np.asarray(mix_mag, dtype=np.float64)
    tgt_mag = np.asarray(tgt_mag, dtype=np.float64)
    theta_y = np.asarray(theta_y, dtype=np.float64)
    theta_x = np.asarray(theta_x, dtype=np.float64)
    _check_shapes(mix_mag, tgt_mag, theta_y, theta_x)
    cos = np.cos(theta_y - theta_x)
    if clamp_cos:
        cos = np.clip(cos, 0.0, 1.0)
    return tgt_mag * cos


def oracle_psm_mask(mix_mag, psm_tgt, eps: float = 1e-8) -> Mask:
    """Diagnostic oracle mask: clamp(psm_tgt / max(|Y|, eps), 0, 1)."""
    mix_mag = np.asarray(mix_mag, dtype=np.float64)
    psm_tgt = np.asarray(psm_tgt, dtype=np.float64)
    _check_shapes(mix_mag, psm_tgt)
    return Mask(np.clip(psm_tgt / np.maximum(mix_mag, eps), 0.0, 1.0))


def apply_mask(mix: Spectrogram, m: Mask) -> Waveform:
    """Mask the mixture magnitude, reuse the mixture phase, and invert."""
    values = m.values
    if values.shape != mix.values.shape:
        raise ShapeMismatchError(
            f"mask shape {values.shape} != spectrogram shape {mix.values.shape}"
        )
    est = values * magnitude(mix) * np.exp(1j * phase(mix))
    return istft(Spectrogram(values=est, config=mix.config, original_len=mix.original_len))
