"""Synthetic demo corpus: harmonic "speakers" with distinct source spectra.

Real speech corpora are licensed, so tests and demos mix synthetic
speakers instead: each speaker is a harmonic source with its own
fundamental frequency and spectral envelope; utterances vary in phase,
slight pitch jitter, and amplitude modulation. Low-pitched speakers are
labeled M, high-pitched F, purely so gender-partitioned evaluation has
both conditions.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio_io import Waveform, write_wav

_F0_CHOICES = (95.0, 118.0, 147.0, 172.0, 205.0, 243.0, 288.0, 336.0, 382.0, 428.0)


def synth_utterance(speaker_idx: int, rng: np.random.Generator,
                    duration_s: float = 0.8, sample_rate_hz: int = 8000) -> Waveform:
    """One utterance of the given synthetic speaker."""
    f0 = _F0_CHOICES[speaker_idx % len(_F0_CHOICES)]
    spk_rng = np.random.default_rng(speaker_idx + 1)
    n_harm = int(3500.0 // f0)
    center = spk_rng.uniform(1.0, max(2.0, 0.6 * n_harm))
    width = spk_rng.uniform(1.0, 3.0)
    envelope = np.exp(-((np.arange(1, n_harm + 1) - center) ** 2) / (2.0 * width ** 2))
    envelope += 0.05

    n = int(duration_s * sample_rate_hz)
    t = np.arange(n) / sample_rate_hz
    jitter = 1.0 + rng.uniform(-0.01, 0.01)
    x = np.zeros(n)
    for h in range(1, n_harm + 1):
        phi = rng.uniform(0.0, 2.0 * np.pi)
        x += envelope[h - 1] * np.sin(2.0 * np.pi * h * f0 * jitter * t + phi)
    am_rate = rng.uniform(1.5, 4.0)
    am_phase = rng.uniform(0.0, 2.0 * np.pi)
    x *= 0.6 + 0.4 * np.sin(2.0 * np.pi * am_rate * t + am_phase)
    x += 0.001 * rng.standard_normal(n)
    x *= 0.5 / np.max(np.abs(x))
    return Waveform(x, sample_rate_hz)


def build_synthetic_corpus(root, n_speakers: int = 10, utts_per_speaker: int = 8,
                           duration_s: float = 0.8, sample_rate_hz: int = 8000,
                           seed: int = 0):
    """Write a root/<speaker>/<utt>.wav corpus plus gender map; returns paths."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    gender_lines = []
    for k in range(n_speakers):
        spk = f"spk{k:02d}"
        spk_dir = root / spk
        spk_dir.mkdir(exist_ok=True)
        for u in range(utts_per_speaker):
            w = synth_utterance(k, rng, duration_s, sample_rate_hz)
            write_wav(spk_dir / f"utt{u:02d}.wav", w)
        gender_lines.append(f"{spk} {'M' if k % 2 == 0 else 'F'}")
    gender_map = root / "gender_map.txt"
    gender_map.write_text("\n".join(gender_lines) + "\n")
    return root, gender_map
