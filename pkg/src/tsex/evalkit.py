"""Extraction scoring: SI-SDR per utterance and gender-partitioned aggregates."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import read_wav
from .errors import LengthMismatchError, MissingExtractionError, SilentReferenceError

SI_SDR_CAP_DB = 60.0


def si_sdr(est, ref) -> float:
    """Scale-invariant signal-to-distortion ratio in dB.

    Both signals are mean-removed, the estimate is projected onto the
    reference, and the energy ratio of projection to residual is returned,
    capped at +60 dB when the residual is numerically zero.
    """
    est = np.asarray(getattr(est, "samples", est), dtype=np.float64)
    ref = np.asarray(getattr(ref, "samples", ref), dtype=np.float64)
    if est.shape != ref.shape:
        raise LengthMismatchError(f"lengths {est.size} != {ref.size}")
    est = est - est.mean()
    ref = ref - ref.mean()
    ref_energy = float(np.dot(ref, ref))
    if ref_energy <= 1e-24:
        raise SilentReferenceError("reference has no energy after mean removal")
    target = (np.dot(est, ref) / ref_energy) * ref
    target_energy = float(np.dot(target, target))
    residual = est - target
    residual_energy = float(np.dot(residual, residual))
    if residual_energy <= target_energy * 10.0 ** (-SI_SDR_CAP_DB / 10.0):
        return SI_SDR_CAP_DB
    return min(10.0 * np.log10(target_energy / residual_energy), SI_SDR_CAP_DB)


@dataclass(frozen=True)
class EvalReport:
    per_utt: list
    aggregates: dict

    def to_json(self) -> str:
        return json.dumps({"aggregates": self.aggregates, "per_utt": self.per_utt},
                          indent=2)

    def summary_table(self) -> str:
        """Plain-text table: mean SI-SDR / improvement by gender condition."""
        lines = [f"{'condition':<12}{'n':>6}{'si_sdr_db':>12}{'improve_db':>12}"]
        for cond in ("all", "diff_gender", "same_gender"):
            agg = self.aggregates.get(cond)
            if agg is None:
                lines.append(f"{cond:<12}{0:>6}{'-':>12}{'-':>12}")
            else:
                lines.append(f"{cond:<12}{agg['count']:>6}"
                             f"{agg['si_sdr_db']:>12.2f}{agg['improvement_db']:>12.2f}")
        return "\n".join(lines)


def _aggregate(rows):
    if not rows:
        return None
    return {
        "count": len(rows),
        "si_sdr_db": float(np.mean([r["si_sdr_db"] for r in rows])),
        "improvement_db": float(np.mean([r["improvement_db"] for r in rows])),
    }


def evaluate(records, extracted_dir) -> EvalReport:
    """Score extracted WAVs against their references, aggregated by gender mix.

    Extractions are looked up in extracted_dir by the mixture file name.
    """
    extracted_dir = Path(extracted_dir)
    per_utt = []
    for rec in records:
        rec_id = Path(rec.mixture).name
        est_path = extracted_dir / rec_id
        if not est_path.exists():
            raise MissingExtractionError(f"no extraction for record {rec_id}")
        est = read_wav(est_path)
        ref = read_wav(rec.target_ref)
        mix = read_wav(rec.mixture)
        score = si_sdr(est, ref)
        baseline = si_sdr(mix, ref)
        per_utt.append({
            "record_id": rec_id,
            "si_sdr_db": score,
            "si_sdr_mix_db": baseline,
            "improvement_db": score - baseline,
            "same_gender": rec.target_gender == rec.interf_gender,
        })
    aggregates = {
        "all": _aggregate(per_utt),
        "diff_gender": _aggregate([r for r in per_utt if not r["same_gender"]]),
        "same_gender": _aggregate([r for r in per_utt if r["same_gender"]]),
    }
    return EvalReport(per_utt=per_utt, aggregates=aggregates)
