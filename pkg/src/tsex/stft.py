"""STFT analysis/synthesis with a COLA-normalized square-root Hamming window.

The window is sqrt(Hamming) divided per-position by the square root of the
Hamming overlap sum, so that the squared window tiles to exactly 1 under
50% overlap. Analysis and synthesis use the same window; masking a
spectrogram and inverting is then well-posed, and istft(stft(x)) == x to
floating-point accuracy.

Edge policy: the input is reflect-padded by (win_len - hop) samples on the
left and up to win_len on the right so that every original sample is
covered by a full complement of windows; inversion truncates the padding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio_io import Waveform
from .errors import SignalTooShortError


@dataclass(frozen=True)
class StftConfig:
    """Framing parameters. Defaults: 32 ms window / 16 ms hop at 8 kHz."""

    win_len: int = 256
    hop: int = 128
    sample_rate_hz: int = 8000

    def __post_init__(self):
        if self.win_len <= 0 or self.hop <= 0:
            raise ValueError("win_len and hop must be positive")
        if self.win_len % self.hop != 0:
            raise ValueError("hop must divide win_len")

    @property
    def fft_size(self) -> int:
        return self.win_len

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass(frozen=True)
class Spectrogram:
    """Complex T x F matrix with the framing metadata needed to invert it."""

    values: np.ndarray
    config: StftConfig
    original_len: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[1] != self.config.n_bins:
            raise ValueError("spectrogram must be T x n_bins")
        if not np.all(np.isfinite(values)):
            raise ValueError("spectrogram contains non-finite entries")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


def make_window(cfg: StftConfig) -> np.ndarray:
    """Square-root Hamming window normalized so overlapping squares sum to 1.

    With h the Hamming window and c(p) the sum of h over all hop-shifted
    copies covering position p, the window is sqrt(h(n) / c(n mod hop)):
    symmetric, strictly positive, and exactly constant-overlap-add in power.
    """
    n = np.arange(cfg.win_len)
    h = 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (cfg.win_len - 1))
    overlap = h.reshape(cfg.win_len // cfg.hop, cfg.hop).sum(axis=0)
    c = np.tile(overlap, cfg.win_len // cfg.hop)
    return np.sqrt(h / c)


def frame_count(signal_len: int, cfg: StftConfig) -> int:
    """Number of frames produced for a signal of the given length."""
    ratio = cfg.win_len // cfg.hop
    return (signal_len - 1) // cfg.hop + ratio


def stft(w: Waveform, cfg: StftConfig | None = None) -> Spectrogram:
    """Analyze a waveform into a complex T x n_bins spectrogram."""
    cfg = cfg or StftConfig()
    x = np.asarray(w.samples, dtype=np.float64)
    if x.size < cfg.win_len:
        raise SignalTooShortError(
            f"signal of {x.size} samples is shorter than one {cfg.win_len}-sample window"
        )
    t = frame_count(x.size, cfg)
    pad_left = cfg.win_len - cfg.hop
    pad_right = t * cfg.hop - x.size
    padded = np.pad(x, (pad_left, pad_right), mode="reflect")
    window = make_window(cfg)
    starts = np.arange(t) * cfg.hop
    frames = padded[starts[:, None] + np.arange(cfg.win_len)] * window
    values = np.fft.rfft(frames, n=cfg.fft_size, axis=1)
    return Spectrogram(values=values, config=cfg, original_len=x.size)


def istft(s: Spectrogram) -> Waveform:
    """Invert a spectrogram by windowed overlap-add, truncating the padding."""
    cfg = s.config
    window = make_window(cfg)
    frames = np.fft.irfft(s.values, n=cfg.fft_size, axis=1) * window
    t = s.n_frames
    out_len = (t - 1) * cfg.hop + cfg.win_len
    out = np.zeros(out_len)
    wsum = np.zeros(out_len)
    for i in range(t):
        lo = i * cfg.hop
        out[lo : lo + cfg.win_len] += frames[i]
        wsum[lo : lo + cfg.win_len] += window ** 2
    # interior window-square sum is exactly 1; guard only the padded edges
    np.divide(out, wsum, out=out, where=wsum > 1e-10)
    pad_left = cfg.win_len - cfg.hop
    samples = out[pad_left : pad_left + s.original_len]
    if samples.size == 0:
        samples = np.zeros(s.original_len)
    return Waveform(samples=samples, sample_rate_hz=cfg.sample_rate_hz)


def magnitude(s: Spectrogram) -> np.ndarray:
    """Elementwise modulus, T x F, nonnegative."""
    return np.abs(s.values)


def phase(s: Spectrogram) -> np.ndarray:
    """Elementwise argument in radians, range (-pi, pi]."""
    return np.angle(s.values)
