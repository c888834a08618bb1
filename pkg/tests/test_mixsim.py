import json

import numpy as np
import pytest

from tsex.audio_io import Waveform, read_wav
from tsex.errors import (EmptyCorpusError, InsufficientSpeakersError,
                         MissingGenderError, SilentSignalError)
from tsex.mixsim import (draw_mixture, index_corpus, load_manifest, mix_pair,
                         simulate_set, MANIFEST_FIELDS)
from tsex.synthdata import build_synthetic_corpus


def _rms(x):
    return np.sqrt(np.mean(x ** 2))


def test_index_counts_speakers(corpus):
    assert len(corpus.speakers) == 6
    for entry in corpus.speakers.values():
        assert len(entry.utterances) >= 2
        assert entry.gender in ("M", "F")


def test_index_drops_single_utterance_speaker(tmp_path):
    root, gender_map = build_synthetic_corpus(tmp_path, n_speakers=3,
                                              utts_per_speaker=3, seed=1)
    lonely = root / "spk99"
    lonely.mkdir()
    (root / "spk00" / "utt00.wav").rename(lonely / "only.wav")
    with open(gender_map, "a") as f:
        f.write("spk99 M\n")
    idx = index_corpus(root, gender_map)
    assert "spk99" not in idx.speakers
    assert idx.n_dropped == 1


def test_index_missing_gender(tmp_path):
    root, gender_map = build_synthetic_corpus(tmp_path, n_speakers=2,
                                              utts_per_speaker=2, seed=1)
    gender_map.write_text("spk00 M\n")
    with pytest.raises(MissingGenderError):
        index_corpus(root, gender_map)


def test_index_empty_corpus(tmp_path):
    (tmp_path / "gmap.txt").write_text("")
    with pytest.raises(EmptyCorpusError):
        index_corpus(tmp_path, tmp_path / "gmap.txt")


def test_mix_pair_0db_equal_rms(rng):
    t = Waveform(0.1 * np.sin(np.linspace(0, 100, 4000)), 8000)
    i = Waveform(0.1 * np.cos(np.linspace(0, 173, 4000)), 8000)
    scale = _rms(t.samples) / _rms(i.samples)
    i = Waveform(i.samples * scale, 8000)
    mixture, target, gain = mix_pair(t, i, 0.0)
    beta = (mixture.samples - target.samples) / (i.samples * gain)
    assert np.allclose(beta, 1.0, atol=1e-9)


def test_mix_pair_6db_halves_interferer():
    t = Waveform(0.1 * np.sin(np.linspace(0, 100, 4000)), 8000)
    i = Waveform(0.1 * np.sin(np.linspace(0.5, 170, 4000)), 8000)
    scale = _rms(t.samples) / _rms(i.samples)
    i = Waveform(i.samples * scale, 8000)
    mixture, target, gain = mix_pair(t, i, 6.02)
    beta = np.median((mixture.samples - target.samples) / (i.samples * gain))
    assert beta == pytest.approx(0.5, abs=1e-3)


def test_mix_pair_remeasured_snr(rng):
    for snr in (0.0, 2.5, 5.0):
        t = Waveform(rng.uniform(-0.3, 0.3, 5000), 8000)
        i = Waveform(rng.uniform(-0.4, 0.4, 5000), 8000)
        mixture, target, gain = mix_pair(t, i, snr)
        interf_part = mixture.samples - target.samples
        measured = 20 * np.log10(_rms(target.samples) / _rms(interf_part))
        assert measured == pytest.approx(snr, abs=1e-6)


def test_mix_pair_loops_short_interferer(rng):
    t = Waveform(rng.uniform(-0.3, 0.3, 5000), 8000)
    i = Waveform(rng.uniform(-0.3, 0.3, 1200), 8000)
    mixture, target, _ = mix_pair(t, i, 3.0)
    assert len(mixture) == len(t) == len(target)


def test_mix_pair_peak_normalization(rng):
    t = Waveform(np.clip(rng.uniform(-1, 1, 3000), -0.95, 0.95), 8000)
    i = Waveform(np.clip(rng.uniform(-1, 1, 3000), -0.95, 0.95), 8000)
    mixture, target, gain = mix_pair(t, i, 0.0)
    assert np.max(np.abs(mixture.samples)) <= 0.9 + 1e-12
    if gain < 1.0:
        assert np.allclose(target.samples, t.samples * gain)


def test_mix_pair_silent_target():
    t = Waveform(np.zeros(1000) + 1e-9, 8000)
    i = Waveform(np.ones(1000) * 0.1, 8000)
    with pytest.raises(SilentSignalError):
        mix_pair(t, i, 0.0)


def test_simulate_deterministic_manifest(corpus, tmp_path):
    _, m1 = simulate_set(corpus, 8, tmp_path / "a", seed=7)
    _, m2 = simulate_set(corpus, 8, tmp_path / "b", seed=7)
    assert m1.read_bytes() == m2.read_bytes()


def test_simulate_manifest_schema_and_snr_range(corpus, tmp_path):
    _, manifest = simulate_set(corpus, 10, tmp_path / "m", seed=3)
    for line in manifest.read_text().splitlines():
        row = json.loads(line)
        assert tuple(row) == MANIFEST_FIELDS
        assert 0.0 <= row["snr_db"] <= 5.0
        assert row["target_spk"] != row["interf_spk"]
        assert row["enroll"] != row["target_ref"]


def test_simulate_covers_both_gender_conditions(tmp_path):
    root, gmap = build_synthetic_corpus(tmp_path / "c", n_speakers=4,
                                        utts_per_speaker=2, seed=2)
    idx = index_corpus(root, gmap)
    records, _ = simulate_set(idx, 100, tmp_path / "m", seed=1)
    same = [r for r in records if r.target_gender == r.interf_gender]
    assert 0 < len(same) < len(records)


def test_simulated_mixture_decomposes(corpus, tmp_path):
    records, manifest = simulate_set(corpus, 5, tmp_path / "d", seed=9)
    loaded = load_manifest(manifest)
    for k, rec in enumerate(loaded):
        draw = draw_mixture(corpus, 9, k)
        assert draw["target_ref"] == rec.target_ref
        target = read_wav(rec.target_ref)
        interf = read_wav(draw["interf_utt"])
        mixture, target_aligned, gain = mix_pair(target, interf, draw["snr_db"])
        assert gain == rec.gain
        # rebuild the scaled interferer from the sources and check the sum
        i = np.tile(interf.samples,
                    int(np.ceil(len(target) / len(interf))))[: len(target)]
        beta = (_rms(target.samples) / _rms(i)) * 10 ** (-draw["snr_db"] / 20)
        rebuilt = gain * (target.samples + beta * i)
        assert np.max(np.abs(mixture.samples - rebuilt)) <= 1e-9
        written = read_wav(rec.mixture)
        assert np.max(np.abs(written.samples - mixture.samples)) <= 2 ** -15


def test_insufficient_speakers(tmp_path):
    root, gmap = build_synthetic_corpus(tmp_path, n_speakers=1,
                                        utts_per_speaker=2, seed=1)
    idx = index_corpus(root, gmap)
    with pytest.raises(InsufficientSpeakersError):
        draw_mixture(idx, 0, 0)
