"""Speaker-conditioned mask estimation networks.

Two conditioning modes share the training machinery:

  concat — an auxiliary BLSTM encodes the enrollment magnitude into a
           mean-pooled embedding that is concatenated to every frame of the
           mask network's first BLSTM activation, followed by a ReLU layer,
           a second BLSTM, another ReLU layer and a sigmoid output.
  adapt  — the auxiliary net is a frame-wise feed-forward stack whose
           mean-pooled linear output weights a bank of affine sub-layers
           applied to the mask BLSTM activation (weighted sum, then ReLU),
           followed by two ReLU layers and a sigmoid output.

Built on torch for the forward/backward machinery; all architecture,
initialization, and loss wiring is explicit here. Gradients are verified
against finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
import torch
from torch import nn

from .errors import ConditioningMismatchError, EmptyInputError
from .losses import LossWeights
from .temporal import delta_denominator

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    """Architecture sizes for the auxiliary and mask-estimation networks."""

    mode: str = "concat"
    scale_preset: str = "desk"
    aux_hidden: int = 32
    mask_hidden: int = 64
    embed_dim: int = 30
    n_bins: int = 129
    n_sublayers: int = 30

    def __post_init__(self):
        if self.mode not in ("concat", "adapt"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "adapt" and self.embed_dim != self.n_sublayers:
            raise ValueError("adapt mode requires embed_dim == n_sublayers")

    @classmethod
    def desk(cls, mode: str = "concat") -> "NetConfig":
        return cls(mode=mode, scale_preset="desk", aux_hidden=32, mask_hidden=64)

    @classmethod
    def paper(cls, mode: str = "concat") -> "NetConfig":
        """Paper-scale sizes; construction and parameter counting only."""
        aux = 256 if mode == "concat" else 512
        return cls(mode=mode, scale_preset="paper", aux_hidden=aux, mask_hidden=512)


def _glorot_(tensor: torch.Tensor, generator: torch.Generator) -> None:
    fan_in, fan_out = tensor.shape[-1], tensor.shape[-2] if tensor.ndim > 1 else 1
    bound = float(np.sqrt(6.0 / (fan_in + fan_out)))
    with torch.no_grad():
        tensor.uniform_(-bound, bound, generator=generator)


def _init_lstm_(lstm: nn.LSTM, generator: torch.Generator) -> None:
    hidden = lstm.hidden_size
    for name, p in lstm.named_parameters():
        if name.startswith("weight"):
            _glorot_(p, generator)
        else:
            with torch.no_grad():
                p.zero_()
                if name.startswith("bias_ih"):
                    p[hidden : 2 * hidden].fill_(1.0)  # forget gate


def _init_linear_(linear: nn.Linear, generator: torch.Generator) -> None:
    _glorot_(linear.weight, generator)
    with torch.no_grad():
        linear.bias.zero_()


def _masked_mean(x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    """Mean over the time axis restricted to the first `lengths` frames."""
    t = x.shape[1]
    valid = (torch.arange(t, device=x.device)[None, :] < lengths[:, None]).to(x.dtype)
    return (x * valid[:, :, None]).sum(dim=1) / lengths[:, None].to(x.dtype)


class AuxiliaryConcat(nn.Module):
    """BLSTM encoder producing a mean-pooled speaker embedding."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.blstm = nn.LSTM(cfg.n_bins, cfg.aux_hidden, batch_first=True,
                             bidirectional=True)
        self.hidden = nn.Linear(2 * cfg.aux_hidden, cfg.aux_hidden)
        self.embed = nn.Linear(cfg.aux_hidden, cfg.embed_dim)

    def forward(self, enroll_mag: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        h, _ = self.blstm(enroll_mag)
        h = torch.relu(self.hidden(h))
        return _masked_mean(self.embed(h), lengths)


class AuxiliaryAdapt(nn.Module):
    """Frame-wise feed-forward encoder producing adaptation weights."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.ff1 = nn.Linear(cfg.n_bins, cfg.aux_hidden)
        self.ff2 = nn.Linear(cfg.aux_hidden, cfg.aux_hidden)
        self.weights_out = nn.Linear(cfg.aux_hidden, cfg.n_sublayers)

    def forward(self, enroll_mag: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        h = torch.relu(self.ff1(enroll_mag))
        h = torch.relu(self.ff2(h))
        return _masked_mean(self.weights_out(h), lengths)


class AdaptationLayer(nn.Module):
    """Bank of affine sub-layers combined with speaker weights, then ReLU."""

    def __init__(self, n_sublayers: int, in_dim: int, out_dim: int):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(n_sublayers, out_dim, in_dim))
        self.bias = nn.Parameter(torch.empty(n_sublayers, out_dim))

    def forward(self, h: torch.Tensor, alpha: torch.Tensor) -> torch.Tensor:
        sub = torch.einsum("btj,khj->btkh", h, self.weight) + self.bias
        return torch.relu(torch.einsum("btkh,bk->bth", sub, alpha))


class MaskNetConcat(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        h = cfg.mask_hidden
        self.blstm1 = nn.LSTM(cfg.n_bins, h, batch_first=True, bidirectional=True)
        self.ff1 = nn.Linear(2 * h + cfg.embed_dim, h)
        self.blstm2 = nn.LSTM(h, h, batch_first=True, bidirectional=True)
        self.ff2 = nn.Linear(2 * h, h)
        self.out = nn.Linear(h, cfg.n_bins)

    def forward(self, mix_mag: torch.Tensor, embedding: torch.Tensor) -> torch.Tensor:
        h, _ = self.blstm1(mix_mag)
        emb = embedding[:, None, :].expand(-1, h.shape[1], -1)
        h = torch.relu(self.ff1(torch.cat([h, emb], dim=2)))
        h, _ = self.blstm2(h)
        h = torch.relu(self.ff2(h))
        return torch.sigmoid(self.out(h))


class MaskNetAdapt(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        h = cfg.mask_hidden
        self.blstm = nn.LSTM(cfg.n_bins, h, batch_first=True, bidirectional=True)
        self.adapt = AdaptationLayer(cfg.n_sublayers, 2 * h, h)
        self.ff1 = nn.Linear(h, h)
        self.ff2 = nn.Linear(h, h)
        self.out = nn.Linear(h, cfg.n_bins)

    def forward(self, mix_mag: torch.Tensor, alpha: torch.Tensor) -> torch.Tensor:
        h, _ = self.blstm(mix_mag)
        h = self.adapt(h, alpha)
        h = torch.relu(self.ff1(h))
        h = torch.relu(self.ff2(h))
        return torch.sigmoid(self.out(h))


class Extractor(nn.Module):
    """Auxiliary network plus mask-estimation network, jointly trainable."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        if cfg.mode == "concat":
            self.aux = AuxiliaryConcat(cfg)
            self.masknet = MaskNetConcat(cfg)
        else:
            self.aux = AuxiliaryAdapt(cfg)
            self.masknet = MaskNetAdapt(cfg)

    def condition(self, enroll_mag: torch.Tensor,
                  enroll_len: torch.Tensor | None = None) -> torch.Tensor:
        if enroll_mag.ndim != 3 or enroll_mag.shape[1] < 1:
            raise EmptyInputError("enrollment magnitude must be B x T x F, T >= 1")
        if enroll_len is None:
            enroll_len = torch.full((enroll_mag.shape[0],), enroll_mag.shape[1],
                                    dtype=torch.long, device=enroll_mag.device)
        return self.aux(enroll_mag, enroll_len)

    def estimate_mask(self, mix_mag: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        if cond.ndim != 2 or cond.shape[1] != self.cfg.embed_dim:
            raise ConditioningMismatchError(
                f"conditioning width {tuple(cond.shape)} does not match "
                f"embed_dim {self.cfg.embed_dim} for mode {self.cfg.mode!r}"
            )
        return self.masknet(mix_mag, cond)

    def forward(self, mix_mag, enroll_mag, enroll_len=None):
        return self.estimate_mask(mix_mag, self.condition(enroll_mag, enroll_len))


def build_model(cfg: NetConfig, seed: int = 0,
                dtype: torch.dtype = torch.float32) -> Extractor:
    """Construct and deterministically initialize an extractor."""
    model = Extractor(cfg).to(dtype)
    generator = torch.Generator().manual_seed(seed)
    for module in model.modules():
        if isinstance(module, nn.LSTM):
            _init_lstm_(module, generator)
        elif isinstance(module, nn.Linear):
            _init_linear_(module, generator)
        elif isinstance(module, AdaptationLayer):
            for k in range(module.weight.shape[0]):
                _glorot_(module.weight[k], generator)
            with torch.no_grad():
                module.bias.zero_()
    return model


def count_parameters(cfg: NetConfig) -> int:
    """Total trainable parameter count for a configuration."""
    model = Extractor(cfg)
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


# ---------------------------------------------------------------------------
# Batched losses on torch tensors (mirror of losses.py, differentiable).
# Zero-padded frames are excluded from every sum via the validity mask.
# ---------------------------------------------------------------------------

def torch_delta(x: torch.Tensor, L: int = 2) -> torch.Tensor:
    """Delta dynamics along dim 1 of a B x T x F tensor, replicated edges."""
    t = x.shape[1]
    idx = torch.arange(t, device=x.device)
    out = torch.zeros_like(x)
    for l in range(1, L + 1):
        fwd = (idx + l).clamp(max=t - 1)
        bwd = (idx - l).clamp(min=0)
        out = out + l * (x.index_select(1, fwd) - x.index_select(1, bwd))
    return out / delta_denominator(L)


def _valid_mask(lengths: torch.Tensor, t: int, dtype) -> torch.Tensor:
    return (torch.arange(t, device=lengths.device)[None, :]
            < lengths[:, None]).to(dtype)[:, :, None]


def batch_loss(mask: torch.Tensor, mix_mag: torch.Tensor, psm_tgt: torch.Tensor,
               ibm_tgt: torch.Tensor, lengths: torch.Tensor,
               loss_name: str, w: LossWeights = LossWeights()) -> torch.Tensor:
    """Mean over the batch of per-utterance frame-normalized losses."""
    valid = _valid_mask(lengths, mask.shape[1], mask.dtype)
    t_valid = lengths.to(mask.dtype)
    if loss_name == "MAL":
        per_utt = ((mask - ibm_tgt) ** 2 * valid).sum(dim=(1, 2)) / t_valid
        return per_utt.mean()
    est = mask * mix_mag
    residual = est - psm_tgt
    per_utt = (residual ** 2 * valid).sum(dim=(1, 2))
    if loss_name == "MTSAL":
        d_res = torch_delta(residual, w.L)
        per_utt = per_utt + w.w_d * (d_res ** 2 * valid).sum(dim=(1, 2))
        a_res = torch_delta(d_res, w.L)
        per_utt = per_utt + w.w_a * (a_res ** 2 * valid).sum(dim=(1, 2))
    elif loss_name != "MSAL":
        raise ValueError(f"unknown loss {loss_name!r}")
    return (per_utt / t_valid).mean()


def backward(model: Extractor, mix_mag, enroll_mag, psm_tgt, ibm_tgt, lengths,
             loss_name: str, w: LossWeights = LossWeights()):
    """Forward the batch, backpropagate the selected loss, return named grads."""
    model.zero_grad(set_to_none=True)
    mask = model(mix_mag, enroll_mag)
    loss = batch_loss(mask, mix_mag, psm_tgt, ibm_tgt, lengths, loss_name, w)
    loss.backward()
    grads = {}
    for name, p in model.named_parameters():
        grads[name] = (torch.zeros_like(p) if p.grad is None else p.grad.detach().clone())
    return loss.detach(), grads


# ---------------------------------------------------------------------------
# Checkpoints: versioned npz container of float64 tensors + config + seed.
# ---------------------------------------------------------------------------

def save_checkpoint(path, model: Extractor, seed: int, extra: dict | None = None):
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.cfg),
        "seed": seed,
        "dtype": str(next(model.parameters()).dtype).replace("torch.", ""),
        "extra": extra or {},
    }
    arrays = {f"param/{name}": p.detach().cpu().numpy().astype(np.float64)
              for name, p in model.named_parameters()}
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)


def load_checkpoint(path):
    """Load a checkpoint, validating every tensor shape against its config."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        cfg = NetConfig(**meta["config"])
        dtype = getattr(torch, meta["dtype"])
        model = Extractor(cfg).to(dtype)
        state = {}
        for name, p in model.named_parameters():
            key = f"param/{name}"
            if key not in data:
                raise ValueError(f"checkpoint missing tensor {name}")
            arr = data[key]
            if tuple(arr.shape) != tuple(p.shape):
                raise ValueError(
                    f"tensor {name}: checkpoint shape {arr.shape} != {tuple(p.shape)}"
                )
            state[name] = torch.from_numpy(arr).to(dtype)
        model.load_state_dict(state)
    return model, meta
