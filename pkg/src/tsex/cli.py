"""Command-line interface: simulate, train, extract, evaluate, selftest.

Batch operation only. Flag precedence is CLI flag > config file (--config,
JSON object of flag names) > built-in default. All randomness derives from
--seed; --threads bounds torch worker threads.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import gradcheck
from .audio_io import Waveform, read_wav, write_wav
from .errors import TsexError
from .estimator import extract_waveform
from .evalkit import evaluate
from .losses import LossWeights
from .mixsim import index_corpus, load_manifest, simulate_set
from .net import NetConfig, load_checkpoint
from .stft import StftConfig, istft, stft
from .temporal import delta, delta_adjoint
from .trainer import TrainConfig, train


def _apply_config_file(args: argparse.Namespace, parser_defaults: dict):
    """Fill None-valued args from --config JSON, then from defaults."""
    file_values = {}
    if getattr(args, "config", None):
        file_values = json.loads(Path(args.config).read_text())
    for key, default in parser_defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, file_values.get(key, default))
    return args


def _fail(message: str) -> int:
    print(json.dumps({"error": message}), file=sys.stderr)
    return 1


def cmd_simulate(args) -> int:
    index = index_corpus(args.corpus, args.gender_map)
    records, manifest = simulate_set(index, args.n, args.out,
                                     snr_lo=args.snr_lo, snr_hi=args.snr_hi,
                                     seed=args.seed)
    print(f"wrote {len(records)} mixtures and {manifest}")
    return 0


def cmd_train(args) -> int:
    if args.preset == "paper":
        net_cfg = NetConfig.paper(args.mode)
    else:
        net_cfg = NetConfig.desk(args.mode)
    train_cfg = TrainConfig(lr0=args.lr0, lr_decay=args.lr_decay,
                            batch_size=args.batch_size, min_epochs=args.min_epochs,
                            max_epochs=args.max_epochs, rel_tol=args.rel_tol,
                            loss=args.loss, seed=args.seed,
                            weights=LossWeights(w_d=args.w_d, w_a=args.w_a))
    ckpt, log_rows = train(args.train_manifest, args.dev_manifest,
                           net_cfg, train_cfg, args.out)
    last = log_rows[-1]
    print(f"checkpoint {ckpt} after epoch {last['epoch']} "
          f"(dev_loss {last['dev_loss']:.6f})")
    return 0


def cmd_extract(args) -> int:
    model, meta = load_checkpoint(args.checkpoint)
    model.eval()
    stft_cfg = StftConfig(**meta["extra"].get("stft", {})) if meta.get("extra") else StftConfig()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = load_manifest(args.manifest)
    for rec in records:
        rec_id = Path(rec.mixture).name
        try:
            mixture = read_wav(rec.mixture)
            enrollment = read_wav(rec.enroll)
        except (OSError, TsexError) as exc:
            return _fail(f"record {rec_id}: {exc}")
        extracted = extract_waveform(model, mixture, enrollment, stft_cfg)
        write_wav(out_dir / rec_id, extracted)
    print(f"extracted {len(records)} utterances into {out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    records = load_manifest(args.manifest)
    report = evaluate(records, args.extracted)
    if args.out:
        Path(args.out).write_text(report.to_json())
    print(report.summary_table())
    return 0


def cmd_selftest(args) -> int:
    rng = np.random.default_rng(args.seed)
    checks = []

    def run(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, repr(exc)
        checks.append(ok)
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")

    def stft_roundtrip():
        worst = 0.0
        for _ in range(10):
            n = int(rng.integers(2000, 8000))
            x = Waveform(rng.uniform(-0.8, 0.8, n), 8000)
            err = float(np.max(np.abs(istft(stft(x)).samples - x.samples)))
            worst = max(worst, err)
        return worst <= 1e-6, f"max abs err {worst:.2e}"

    def delta_identities():
        ramp = np.tile(np.arange(12.0)[:, None], (1, 4))
        interior = delta(ramp)[2:-2]
        const_zero = float(np.max(np.abs(delta(np.full((9, 3), 2.5)))))
        m = rng.standard_normal((7, 5))
        g = rng.standard_normal((7, 5))
        adjoint_gap = abs(float(np.sum(delta(m) * g) - np.sum(m * delta_adjoint(g))))
        ok = (np.allclose(interior, 1.0) and const_zero == 0.0
              and adjoint_gap <= 1e-10)
        return ok, f"adjoint gap {adjoint_gap:.2e}"

    def loss_gradients():
        worst = max(gradcheck.loss_grad_max_rel_error(name, rng)
                    for name in ("MAL", "MSAL", "MTSAL"))
        return worst <= 1e-5, f"max rel err {worst:.2e}"

    def net_gradients():
        worst = max(
            gradcheck.net_grad_max_rel_error(NetConfig.desk(mode), n_coords=10,
                                             seed=args.seed)
            for mode in ("concat", "adapt"))
        return worst <= 1e-3, f"max rel err {worst:.2e}"

    run("stft round-trip", stft_roundtrip)
    run("delta identities", delta_identities)
    run("loss gradient check", loss_gradients)
    run("network gradient check", net_gradients)
    return 0 if all(checks) else 1


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; CLI flags take precedence")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsex",
                                     description="target-speaker extraction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="materialize two-speaker mixtures")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--gender-map", dest="gender_map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--snr-lo", dest="snr_lo", type=float, default=None)
    p.add_argument("--snr-hi", dest="snr_hi", type=float, default=None)
    p.set_defaults(func=cmd_simulate,
                   defaults={"seed": 0, "threads": 1, "n": 100,
                             "snr_lo": 0.0, "snr_hi": 5.0})

    p = sub.add_parser("train", help="train a mask-estimation model")
    _add_common(p)
    p.add_argument("--train-manifest", dest="train_manifest", required=True)
    p.add_argument("--dev-manifest", dest="dev_manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("concat", "adapt"), default=None)
    p.add_argument("--preset", choices=("desk", "paper"), default=None)
    p.add_argument("--loss", choices=("MAL", "MSAL", "MTSAL"), default=None)
    p.add_argument("--lr0", type=float, default=None)
    p.add_argument("--lr-decay", dest="lr_decay", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--min-epochs", dest="min_epochs", type=int, default=None)
    p.add_argument("--max-epochs", dest="max_epochs", type=int, default=None)
    p.add_argument("--rel-tol", dest="rel_tol", type=float, default=None)
    p.add_argument("--w-d", dest="w_d", type=float, default=None)
    p.add_argument("--w-a", dest="w_a", type=float, default=None)
    p.set_defaults(func=cmd_train,
                   defaults={"seed": 0, "threads": 1, "mode": "concat",
                             "preset": "desk", "loss": "MTSAL", "lr0": 0.0005,
                             "lr_decay": 0.7, "batch_size": 16, "min_epochs": 30,
                             "max_epochs": 200, "rel_tol": 0.01,
                             "w_d": 4.5, "w_a": 10.0})

    p = sub.add_parser("extract", help="extract targets for a manifest")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract, defaults={"seed": 0, "threads": 1})

    p = sub.add_parser("evaluate", help="score extracted WAVs with SI-SDR")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--extracted", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate, defaults={"seed": 0, "threads": 1})

    p = sub.add_parser("selftest", help="run built-in numerical checks")
    _add_common(p)
    p.set_defaults(func=cmd_selftest, defaults={"seed": 0, "threads": 1})
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _apply_config_file(args, args.defaults)
    if args.threads:
        import torch

        torch.set_num_threads(args.threads)
    try:
        return args.func(args)
    except TsexError as exc:
        return _fail(f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
