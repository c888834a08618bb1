"""Mono 16-bit PCM WAV reading and writing.

Samples are exchanged as float64 in [-1, 1]; the scaling divisor is 32768
in both directions so that -1.0 round-trips exactly.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .errors import CorruptHeaderError, UnsupportedFormatError

_SCALE = 32768.0
_MAX_SAMPLE = 1.0 - 2.0 ** -15


@dataclass(frozen=True)
class Waveform:
    """A mono time-domain signal with its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")

    def __len__(self):
        return self.samples.size


def read_wav(path) -> Waveform:
    """Read a mono 16-bit PCM WAV file into a Waveform in [-1, 1]."""
    try:
        with wave.open(str(path), "rb") as f:
            n_channels = f.getnchannels()
            samp_width = f.getsampwidth()
            comp_type = f.getcomptype()
            rate = f.getframerate()
            n_frames = f.getnframes()
            if comp_type != "NONE":
                raise UnsupportedFormatError(f"compressed WAV not supported: {path}")
            if n_channels != 1:
                raise UnsupportedFormatError(
                    f"expected mono, got {n_channels} channels: {path}"
                )
            if samp_width != 2:
                raise UnsupportedFormatError(
                    f"expected 16-bit PCM, got {8 * samp_width}-bit: {path}"
                )
            raw = f.readframes(n_frames)
    except wave.Error as exc:
        raise CorruptHeaderError(f"not a valid RIFF/WAVE file: {path}") from exc
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / _SCALE
    return Waveform(samples=data, sample_rate_hz=rate)


def write_wav(path, w: Waveform) -> None:
    """Write a Waveform as mono 16-bit PCM, clamping to [-1, 1 - 2^-15]."""
    clamped = np.clip(w.samples, -1.0, _MAX_SAMPLE)
    quantized = np.rint(clamped * _SCALE).astype("<i2")
    with open(path, "wb") as raw, wave.open(raw, "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(w.sample_rate_hz)
        f.writeframes(quantized.tobytes())
