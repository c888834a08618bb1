"""Scikit-learn style front end for the extraction pipeline.

TargetSpeakerExtractor wraps simulation manifests, training and inference
behind fit/predict with get_params/set_params, so the toolkit composes
with sklearn-style tooling. Inference needs only a mixture and an
enrollment waveform.
"""

from __future__ import annotations

import numpy as np
import torch

from .audio_io import Waveform
from .masks import Mask, apply_mask
from .net import NetConfig, load_checkpoint
from .stft import StftConfig, magnitude, stft
from .trainer import TrainConfig, train

try:
    from sklearn.base import BaseEstimator
except ImportError:  # pragma: no cover
    class BaseEstimator:
        pass


def check_waveform(x, sample_rate_hz: int = 8000) -> Waveform:
    """Coerce array-like or Waveform input, enforcing the pipeline sample rate."""
    if isinstance(x, Waveform):
        if x.sample_rate_hz != sample_rate_hz:
            raise ValueError(
                f"expected {sample_rate_hz} Hz input, got {x.sample_rate_hz} Hz"
            )
        return x
    return Waveform(np.asarray(x, dtype=np.float64), sample_rate_hz)


def extract_waveform(model, mixture: Waveform, enrollment: Waveform,
                     stft_cfg: StftConfig | None = None) -> Waveform:
    """Run one mixture + enrollment through the model and invert the mask."""
    stft_cfg = stft_cfg or StftConfig()
    mix_spec = stft(mixture, stft_cfg)
    enr_spec = stft(enrollment, stft_cfg)
    dtype = next(model.parameters()).dtype
    mix_mag = torch.from_numpy(magnitude(mix_spec)).to(dtype)[None]
    enr_mag = torch.from_numpy(magnitude(enr_spec)).to(dtype)[None]
    with torch.no_grad():
        mask = model(mix_mag, enr_mag)[0].double().numpy()
    return apply_mask(mix_spec, Mask(mask))


class TargetSpeakerExtractor(BaseEstimator):
    """Trainable target-speaker extractor with a fit/predict interface.

    fit() consumes train/dev manifests produced by the simulator; predict()
    maps (mixture, enrollment) waveforms to the extracted waveform.
    """

    def __init__(self, mode="concat", scale_preset="desk", loss="MTSAL",
                 lr0=0.0005, lr_decay=0.7, batch_size=16, min_epochs=30,
                 max_epochs=200, rel_tol=0.01, seed=0, sample_rate_hz=8000):
        self.mode = mode
        self.scale_preset = scale_preset
        self.loss = loss
        self.lr0 = lr0
        self.lr_decay = lr_decay
        self.batch_size = batch_size
        self.min_epochs = min_epochs
        self.max_epochs = max_epochs
        self.rel_tol = rel_tol
        self.seed = seed
        self.sample_rate_hz = sample_rate_hz

    def _net_config(self) -> NetConfig:
        if self.scale_preset == "paper":
            return NetConfig.paper(self.mode)
        return NetConfig.desk(self.mode)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(lr0=self.lr0, lr_decay=self.lr_decay,
                           batch_size=self.batch_size, min_epochs=self.min_epochs,
                           max_epochs=self.max_epochs, rel_tol=self.rel_tol,
                           loss=self.loss, seed=self.seed)

    def fit(self, manifest_train, manifest_dev, out_dir="."):
        ckpt_path, log_rows = train(manifest_train, manifest_dev,
                                    self._net_config(), self._train_config(),
                                    out_dir)
        self.model_, _ = load_checkpoint(ckpt_path)
        self.model_.eval()
        self.checkpoint_path_ = str(ckpt_path)
        self.training_log_ = log_rows
        return self

    @classmethod
    def from_checkpoint(cls, path) -> "TargetSpeakerExtractor":
        model, meta = load_checkpoint(path)
        model.eval()
        est = cls(mode=meta["config"]["mode"],
                  scale_preset=meta["config"]["scale_preset"],
                  seed=meta["seed"])
        est.model_ = model
        est.checkpoint_path_ = str(path)
        return est

    def predict(self, mixture, enrollment) -> np.ndarray:
        """Extracted target waveform samples for one mixture + enrollment."""
        if not hasattr(self, "model_"):
            raise RuntimeError("estimator is not fitted; call fit() or from_checkpoint()")
        mix = check_waveform(mixture, self.sample_rate_hz)
        enr = check_waveform(enrollment, self.sample_rate_hz)
        return extract_waveform(self.model_, mix, enr).samples

    transform = predict
