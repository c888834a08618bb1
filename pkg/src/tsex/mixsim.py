"""Two-speaker mixture simulation from a WAV corpus.

A corpus is a directory of root/<speaker-id>/<utt>.wav plus a gender map
file of lines "<speaker-id> <M|F>". Each simulated record mixes a target
and an interferer at a uniformly drawn SNR, selects an enrollment
utterance of the target distinct from its reference, and appends a JSON
line to a manifest. All randomness is a counter-based stream derived from
(seed, record index), so output is reproducible record by record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .audio_io import Waveform, read_wav, write_wav
from .errors import (
    EmptyCorpusError,
    InsufficientSpeakersError,
    MissingGenderError,
    SilentSignalError,
)

PEAK_LIMIT = 0.9
MANIFEST_FIELDS = (
    "mixture",
    "target_ref",
    "enroll",
    "target_spk",
    "interf_spk",
    "target_gender",
    "interf_gender",
    "snr_db",
    "gain",
)


@dataclass(frozen=True)
class SpeakerEntry:
    gender: str
    utterances: tuple


@dataclass(frozen=True)
class CorpusIndex:
    """Speakers with at least two utterances each, plus a dropped-speaker count."""

    speakers: dict
    n_dropped: int = 0

    def speaker_ids(self):
        return sorted(self.speakers)


@dataclass(frozen=True)
class MixtureRecord:
    """One simulated example; field names match the manifest schema."""

    mixture: str
    target_ref: str
    enroll: str
    target_spk: str
    interf_spk: str
    target_gender: str
    interf_gender: str
    snr_db: float
    gain: float


def load_gender_map(path) -> dict:
    genders = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        spk, gender = line.split()
        if gender not in ("M", "F"):
            raise ValueError(f"gender must be M or F, got {gender!r} for {spk}")
        genders[spk] = gender
    return genders


def index_corpus(root, gender_map) -> CorpusIndex:
    """Index root/<speaker>/<utt>.wav; speakers with < 2 utterances are dropped."""
    root = Path(root)
    genders = load_gender_map(gender_map)
    speakers = {}
    dropped = 0
    for spk_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        utts = tuple(sorted(str(p) for p in spk_dir.glob("*.wav")))
        if not utts:
            continue
        spk = spk_dir.name
        if spk not in genders:
            raise MissingGenderError(f"no gender entry for speaker {spk}")
        if len(utts) < 2:
            dropped += 1
            continue
        speakers[spk] = SpeakerEntry(gender=genders[spk], utterances=utts)
    if not speakers:
        raise EmptyCorpusError(f"no usable speakers under {root}")
    return CorpusIndex(speakers=speakers, n_dropped=dropped)


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x ** 2)))


def mix_pair(target: Waveform, interf: Waveform, snr_db: float):
    """Mix an interferer into a target at the requested SNR.

    The interferer is looped/cut to the target length and scaled; only the
    interferer moves to hit the SNR. If the mixture peak exceeds 0.9, a
    shared gain is applied to mixture and target so they stay aligned.

    Returns (mixture, target_aligned, gain).
    """
    if target.sample_rate_hz != interf.sample_rate_hz:
        raise ValueError("target and interferer sample rates differ")
    t = target.samples
    i = interf.samples
    if _rms(t) <= 1e-6:
        raise SilentSignalError("target RMS below 1e-6")
    if _rms(i) <= 1e-6:
        raise SilentSignalError("interferer RMS below 1e-6")
    if i.size < t.size:
        reps = int(np.ceil(t.size / i.size))
        i = np.tile(i, reps)
    i = i[: t.size]
    beta = _rms(t) / _rms(i) * 10.0 ** (-snr_db / 20.0)
    mixture = t + beta * i
    gain = 1.0
    peak = float(np.max(np.abs(mixture)))
    if peak > PEAK_LIMIT:
        gain = PEAK_LIMIT / peak
        mixture = mixture * gain
        t = t * gain
    sr = target.sample_rate_hz
    return Waveform(mixture, sr), Waveform(t, sr), gain


def draw_mixture(index: CorpusIndex, seed: int, record_idx: int,
                 snr_lo: float = 0.0, snr_hi: float = 5.0) -> dict:
    """Deterministically draw the source selection for one record.

    The first drawn speaker is the target; the enrollment utterance is a
    different utterance of the target speaker. The stream depends only on
    (seed, record_idx), so records can be regenerated independently.
    """
    ids = index.speaker_ids()
    if len(ids) < 2:
        raise InsufficientSpeakersError("need at least two speakers to mix")
    rng = np.random.default_rng([seed, record_idx])
    tgt_spk, int_spk = rng.choice(len(ids), size=2, replace=False)
    tgt_spk, int_spk = ids[tgt_spk], ids[int_spk]
    tgt_utts = index.speakers[tgt_spk].utterances
    int_utts = index.speakers[int_spk].utterances
    ref = tgt_utts[rng.integers(len(tgt_utts))]
    interf = int_utts[rng.integers(len(int_utts))]
    enroll_pool = [u for u in tgt_utts if u != ref]
    enroll = enroll_pool[rng.integers(len(enroll_pool))]
    snr_db = float(rng.uniform(snr_lo, snr_hi))
    return {
        "target_spk": tgt_spk,
        "interf_spk": int_spk,
        "target_ref": ref,
        "interf_utt": interf,
        "enroll": enroll,
        "snr_db": snr_db,
    }


def simulate_set(index: CorpusIndex, n: int, out_dir,
                 snr_lo: float = 0.0, snr_hi: float = 5.0,
                 seed: int = 0, manifest_name: str = "manifest.jsonl"):
    """Materialize n mixtures and a JSONL manifest under out_dir.

    Mixture paths in the manifest are relative to out_dir so reruns with
    the same seed and corpus produce byte-identical manifests.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for k in range(n):
        draw = draw_mixture(index, seed, k, snr_lo, snr_hi)
        target = read_wav(draw["target_ref"])
        interf = read_wav(draw["interf_utt"])
        mixture, _, gain = mix_pair(target, interf, draw["snr_db"])
        mix_name = f"mix_{k:06d}.wav"
        write_wav(out_dir / mix_name, mixture)
        records.append(MixtureRecord(
            mixture=mix_name,
            target_ref=draw["target_ref"],
            enroll=draw["enroll"],
            target_spk=draw["target_spk"],
            interf_spk=draw["interf_spk"],
            target_gender=index.speakers[draw["target_spk"]].gender,
            interf_gender=index.speakers[draw["interf_spk"]].gender,
            snr_db=draw["snr_db"],
            gain=gain,
        ))
    manifest_path = out_dir / manifest_name
    with open(manifest_path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(asdict(rec)) + "\n")
    return records, manifest_path


def load_manifest(path):
    """Read a manifest; relative mixture paths resolve against its directory."""
    path = Path(path)
    records = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        mix = Path(row["mixture"])
        if not mix.is_absolute():
            row["mixture"] = str(path.parent / mix)
        records.append(MixtureRecord(**row))
    return records
