"""Finite-difference verification of loss and network gradients."""

from __future__ import annotations

import numpy as np
import torch

from . import losses
from .losses import LossWeights
from .net import Extractor, NetConfig, backward, batch_loss, build_model


def loss_grad_max_rel_error(loss_name: str, rng: np.random.Generator,
                            shape=(5, 3), h: float = 1e-5,
                            w: LossWeights = LossWeights()) -> float:
    """Max relative error of an analytic loss gradient vs central differences."""
    t, f = shape
    M = rng.uniform(0.0, 1.0, (t, f))
    mix_mag = rng.uniform(0.1, 2.0, (t, f))
    psm_tgt = rng.uniform(-1.0, 1.0, (t, f))
    ibm_tgt = (rng.uniform(size=(t, f)) > 0.5).astype(float)
    if loss_name == "MAL":
        fn = lambda m: losses.mal(m, ibm_tgt)
        analytic = losses.mal_grad(M, ibm_tgt)
    elif loss_name == "MSAL":
        fn = lambda m: losses.msal(m, mix_mag, psm_tgt)
        analytic = losses.msal_grad(M, mix_mag, psm_tgt)
    else:
        fn = lambda m: losses.mtsal(m, mix_mag, psm_tgt, w)
        analytic = losses.mtsal_grad(M, mix_mag, psm_tgt, w)
    numeric = np.zeros_like(M)
    for i in range(t):
        for j in range(f):
            up, down = M.copy(), M.copy()
            up[i, j] += h
            down[i, j] -= h
            numeric[i, j] = (fn(up) - fn(down)) / (2.0 * h)
    scale = np.maximum(np.abs(numeric), np.maximum(np.abs(analytic), 1e-8))
    return float(np.max(np.abs(analytic - numeric) / scale))


def make_toy_batch(cfg: NetConfig, rng: np.random.Generator,
                   t: int = 5, t_enroll: int = 4, batch: int = 1,
                   dtype=torch.float64):
    mix = torch.from_numpy(rng.uniform(0.05, 1.0, (batch, t, cfg.n_bins))).to(dtype)
    enr = torch.from_numpy(rng.uniform(0.05, 1.0, (batch, t_enroll, cfg.n_bins))).to(dtype)
    psm = torch.from_numpy(rng.uniform(-0.5, 1.0, (batch, t, cfg.n_bins))).to(dtype)
    ibm_t = torch.from_numpy(
        (rng.uniform(size=(batch, t, cfg.n_bins)) > 0.5).astype(float)).to(dtype)
    lengths = torch.full((batch,), t, dtype=torch.long)
    return mix, enr, psm, ibm_t, lengths


def net_grad_max_rel_error(cfg: NetConfig, loss_name: str = "MTSAL",
                           n_coords: int = 30, h: float = 1e-4, seed: int = 0,
                           w: LossWeights = LossWeights()) -> float:
    """Compare backpropagated parameter gradients against central differences.

    Samples n_coords random parameter coordinates of a float64 model and
    returns the maximum relative error.
    """
    rng = np.random.default_rng(seed)
    model = build_model(cfg, seed=seed, dtype=torch.float64)
    mix, enr, psm, ibm_t, lengths = make_toy_batch(cfg, rng)
    _, grads = backward(model, mix, enr, psm, ibm_t, lengths, loss_name, w)

    params = dict(model.named_parameters())
    names = sorted(params)

    def loss_value():
        with torch.no_grad():
            mask = model(mix, enr)
            return float(batch_loss(mask, mix, psm, ibm_t, lengths, loss_name, w))

    worst = 0.0
    for _ in range(n_coords):
        name = names[rng.integers(len(names))]
        p = params[name]
        flat = p.detach().view(-1)
        k = int(rng.integers(flat.numel()))
        orig = float(flat[k])
        with torch.no_grad():
            flat[k] = orig + h
        up = loss_value()
        with torch.no_grad():
            flat[k] = orig - h
        down = loss_value()
        with torch.no_grad():
            flat[k] = orig
        numeric = (up - down) / (2.0 * h)
        analytic = float(grads[name].view(-1)[k])
        scale = max(abs(numeric), abs(analytic), 1e-6)
        worst = max(worst, abs(numeric - analytic) / scale)
    return worst
