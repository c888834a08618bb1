"""Training loop: Adam updates, dev-driven learning-rate decay, early stop.

Schedule: the learning rate starts at lr0 and is multiplied by lr_decay
whenever the dev loss after an epoch exceeds the best dev loss seen so far.
Training stops once the epoch count reaches min_epochs and the relative
dev-loss reduction against the previous epoch falls below rel_tol. The
best-dev checkpoint is retained.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from . import net as netmod
from .audio_io import read_wav
from .errors import DataError, DivergedError, NonFiniteGradientError
from .losses import LossWeights
from .masks import ibm, psm_target
from .mixsim import load_manifest
from .net import Extractor, NetConfig, batch_loss, build_model
from .stft import StftConfig, magnitude, phase, stft


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 0.0005
    lr_decay: float = 0.7
    batch_size: int = 16
    min_epochs: int = 30
    max_epochs: int = 200
    rel_tol: float = 0.01
    loss: str = "MTSAL"
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if not 0.0 < self.lr_decay < 1.0:
            raise ValueError("lr_decay must be in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss not in ("MAL", "MSAL", "MTSAL"):
            raise ValueError(f"unknown loss {self.loss!r}")


class AdamState:
    """First/second moment estimates and step count for a named tensor set."""

    def __init__(self, params: dict):
        self.t = 0
        self.m = {k: torch.zeros_like(v) for k, v in params.items()}
        self.v = {k: torch.zeros_like(v) for k, v in params.items()}


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One Adam update with bias correction, in place on `params`."""
    for name, g in grads.items():
        if not torch.isfinite(g).all():
            raise NonFiniteGradientError(f"non-finite gradient in {name}")
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    with torch.no_grad():
        for name, p in params.items():
            g = grads[name]
            state.m[name].mul_(beta1).add_(g, alpha=1.0 - beta1)
            state.v[name].mul_(beta2).addcmul_(g, g, value=1.0 - beta2)
            m_hat = state.m[name] / bc1
            v_hat = state.v[name] / bc2
            p.sub_(lr * m_hat / (torch.sqrt(v_hat) + eps))
    return params, state


def clip_gradients(grads: dict, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = math.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads.values():
            g.mul_(scale)
    return total


@dataclass
class UtteranceFeatures:
    """Precomputed per-utterance tensors used by the loss."""

    mix_mag: torch.Tensor
    enroll_mag: torch.Tensor
    psm_tgt: torch.Tensor
    ibm_tgt: torch.Tensor
    n_frames: int


def compute_features(record, stft_cfg: StftConfig,
                     dtype: torch.dtype = torch.float32) -> UtteranceFeatures:
    """Derive training features for one manifest record.

    The target reference is scaled by the manifest gain so that
    mixture = target + scaled interferer holds; the interferer magnitude
    for the binary mask comes from the mixture/target difference.
    """
    try:
        mix = read_wav(record.mixture)
        tgt = read_wav(record.target_ref)
        enr = read_wav(record.enroll)
    except OSError as exc:
        raise DataError(str(exc)) from exc
    tgt_samples = tgt.samples * record.gain
    mix_spec = stft(mix, stft_cfg)
    tgt_spec = stft(type(tgt)(tgt_samples, tgt.sample_rate_hz), stft_cfg)
    interf = mix.samples - tgt_samples
    interf_spec = stft(type(mix)(interf, mix.sample_rate_hz), stft_cfg) \
        if np.any(interf) else None
    enr_spec = stft(enr, stft_cfg)
    mix_mag, theta_y = magnitude(mix_spec), phase(mix_spec)
    tgt_mag, theta_x = magnitude(tgt_spec), phase(tgt_spec)
    psm = psm_target(mix_mag, tgt_mag, theta_y, theta_x)
    interf_mag = magnitude(interf_spec) if interf_spec is not None else np.zeros_like(mix_mag)
    ibm_tgt = ibm(tgt_mag, interf_mag).values
    as_t = lambda a: torch.from_numpy(np.ascontiguousarray(a)).to(dtype)
    return UtteranceFeatures(
        mix_mag=as_t(mix_mag),
        enroll_mag=as_t(magnitude(enr_spec)),
        psm_tgt=as_t(psm),
        ibm_tgt=as_t(ibm_tgt),
        n_frames=mix_mag.shape[0],
    )


def _pad_stack(tensors, length=None):
    length = length or max(t.shape[0] for t in tensors)
    out = torch.zeros(len(tensors), length, tensors[0].shape[1],
                      dtype=tensors[0].dtype)
    for i, t in enumerate(tensors):
        out[i, : t.shape[0]] = t
    return out


def collate(batch):
    """Zero-pad a list of UtteranceFeatures into batched tensors."""
    mix = _pad_stack([b.mix_mag for b in batch])
    psm = _pad_stack([b.psm_tgt for b in batch], mix.shape[1])
    ibm_t = _pad_stack([b.ibm_tgt for b in batch], mix.shape[1])
    enr = _pad_stack([b.enroll_mag for b in batch])
    enr_len = torch.tensor([b.enroll_mag.shape[0] for b in batch], dtype=torch.long)
    lengths = torch.tensor([b.n_frames for b in batch], dtype=torch.long)
    return mix, enr, enr_len, psm, ibm_t, lengths


def _epoch_batches(n: int, lengths, batch_size: int, rng: np.random.Generator):
    """Length-sorted buckets in seeded-shuffled order."""
    order = sorted(range(n), key=lambda i: (lengths[i], i))
    batches = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    rng.shuffle(batches)
    return batches


def _batch_forward(model, features, idxs, loss_name, weights):
    mix, enr, enr_len, psm, ibm_t, lengths = collate([features[i] for i in idxs])
    mask = model(mix, enr, enr_len)
    return batch_loss(mask, mix, psm, ibm_t, lengths, loss_name, weights)


def evaluate_loss(model: Extractor, features, cfg: TrainConfig) -> float:
    """Mean per-utterance loss over a dataset, no gradients."""
    total = 0.0
    with torch.no_grad():
        for i in range(0, len(features), cfg.batch_size):
            idxs = list(range(i, min(i + cfg.batch_size, len(features))))
            loss = _batch_forward(model, features, idxs, cfg.loss, cfg.weights)
            total += float(loss) * len(idxs)
    return total / len(features)


def train(manifest_train, manifest_dev, net_cfg: NetConfig, train_cfg: TrainConfig,
          out_dir, stft_cfg: StftConfig | None = None, log_name: str = "train_log.jsonl"):
    """Train a model per the schedule; writes best checkpoint and a JSONL log.

    Returns (checkpoint_path, log_rows).
    """
    stft_cfg = stft_cfg or StftConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_recs = load_manifest(manifest_train)
    dev_recs = load_manifest(manifest_dev)
    if not train_recs or not dev_recs:
        raise DataError("empty train or dev manifest")
    train_feats = [compute_features(r, stft_cfg) for r in train_recs]
    dev_feats = [compute_features(r, stft_cfg) for r in dev_recs]
    lengths = [f.n_frames for f in train_feats]

    model = build_model(net_cfg, seed=train_cfg.seed)
    params = dict(model.named_parameters())
    state = AdamState(params)
    rng = np.random.default_rng(train_cfg.seed)
    lr = train_cfg.lr0
    best_dev = math.inf
    prev_dev = None
    ckpt_path = out_dir / "checkpoint_best.npz"
    log_path = out_dir / log_name
    log_rows = []

    with open(log_path, "w", encoding="utf-8") as log_file:
        for epoch in range(1, train_cfg.max_epochs + 1):
            t0 = time.monotonic()
            epoch_loss = 0.0
            n_seen = 0
            for idxs in _epoch_batches(len(train_feats), lengths,
                                       train_cfg.batch_size, rng):
                model.zero_grad(set_to_none=True)
                loss = _batch_forward(model, train_feats, idxs,
                                      train_cfg.loss, train_cfg.weights)
                if not torch.isfinite(loss):
                    raise DivergedError(f"non-finite training loss at epoch {epoch}")
                loss.backward()
                grads = {n: p.grad for n, p in params.items() if p.grad is not None}
                clip_gradients(grads, train_cfg.clip_norm)
                adam_step(params, grads, state, lr,
                          train_cfg.beta1, train_cfg.beta2, train_cfg.eps)
                epoch_loss += float(loss.detach()) * len(idxs)
                n_seen += len(idxs)
            train_loss = epoch_loss / n_seen
            dev_loss = evaluate_loss(model, dev_feats, train_cfg)
            row = {"epoch": epoch, "lr": lr, "train_loss": train_loss,
                   "dev_loss": dev_loss, "wall_sec": time.monotonic() - t0}
            log_rows.append(row)
            log_file.write(json.dumps(row) + "\n")
            log_file.flush()
            if dev_loss < best_dev:
                best_dev = dev_loss
                netmod.save_checkpoint(
                    ckpt_path, model, train_cfg.seed,
                    extra={"epoch": epoch, "dev_loss": dev_loss,
                           "stft": asdict(stft_cfg)})
            elif dev_loss > best_dev:
                lr *= train_cfg.lr_decay
            if prev_dev is not None and epoch >= train_cfg.min_epochs:
                rel_reduction = (prev_dev - dev_loss) / abs(prev_dev)
                if rel_reduction < train_cfg.rel_tol:
                    break
            prev_dev = dev_loss
    save_training_state(out_dir / "training_state.npz", model, state,
                        train_cfg.seed)
    return ckpt_path, log_rows


def schedule_lr(dev_losses, lr0: float = 0.0005, decay: float = 0.7):
    """Learning rates after each epoch of the given dev-loss sequence.

    Decay fires whenever a dev loss exceeds the best value seen so far.
    """
    lrs = []
    lr = lr0
    best = math.inf
    for loss in dev_losses:
        if loss < best:
            best = loss
        elif loss > best:
            lr *= decay
        lrs.append(lr)
    return lrs


def should_stop(dev_losses, min_epochs: int = 30, rel_tol: float = 0.01) -> bool:
    """Stopping rule: after min_epochs, relative dev reduction below rel_tol."""
    if len(dev_losses) < 2 or len(dev_losses) < min_epochs:
        return False
    prev, cur = dev_losses[-2], dev_losses[-1]
    return (prev - cur) / abs(prev) < rel_tol


# ---------------------------------------------------------------------------
# Resumable training state: model params + optimizer moments + step count.
# ---------------------------------------------------------------------------

def save_training_state(path, model: Extractor, state: AdamState, seed: int):
    meta = {"version": netmod.CHECKPOINT_VERSION, "t": state.t, "seed": seed,
            "config": asdict(model.cfg),
            "dtype": str(next(model.parameters()).dtype).replace("torch.", "")}
    arrays = {}
    for name, p in model.named_parameters():
        arrays[f"param/{name}"] = p.detach().cpu().numpy().astype(np.float64)
        arrays[f"adam_m/{name}"] = state.m[name].cpu().numpy().astype(np.float64)
        arrays[f"adam_v/{name}"] = state.v[name].cpu().numpy().astype(np.float64)
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)


def load_training_state(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        cfg = NetConfig(**meta["config"])
        dtype = getattr(torch, meta["dtype"])
        model = Extractor(cfg).to(dtype)
        sd = {n: torch.from_numpy(data[f"param/{n}"]).to(dtype)
              for n, _ in model.named_parameters()}
        model.load_state_dict(sd)
        params = dict(model.named_parameters())
        state = AdamState(params)
        state.t = meta["t"]
        for name in params:
            state.m[name] = torch.from_numpy(data[f"adam_m/{name}"]).to(dtype)
            state.v[name] = torch.from_numpy(data[f"adam_v/{name}"]).to(dtype)
    return model, state, meta
