"""Command-line entry point.

Subcommands: train, eval, sweep-snr, sweep-multipath, sweep-pilots,
papr-report, waterfill, gradcheck. Output locations honor the
OFDMJSCC_OUTPUT_DIR environment variable when set.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import harness
from . import metrics as mx
from . import training as tr
from .config import load_config, save_config, validate_paths
from .gradcheck import TOLERANCE, run_suite
from .precoding import waterfill

__all__ = ["main"]


def _output_dir(cfg, override) -> Path:
    env = os.environ.get("OFDMJSCC_OUTPUT_DIR")
    return Path(override or env or cfg.output_dir)


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok]


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    validate_paths(cfg)
    out_dir = _output_dir(cfg, args.output_dir)
    result = tr.train(cfg, output_dir=out_dir, resume_from=args.resume,
                      quiet=not args.verbose)
    save_config(cfg, out_dir / "config.txt")
    row, _ = harness.eval_checkpoint(cfg, result.checkpoint_path)
    mx.write_metrics_csv(out_dir / "eval.csv", [row])
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"train log:  {result.csv_path}")
    print(f"final: psnr {row.psnr_db:.2f} dB  ssim {row.ssim:.4f}")
    return 0


def _cmd_eval(args) -> int:
    cfg = load_config(args.config)
    row, stats = harness.eval_checkpoint(
        cfg, args.checkpoint, snr_db=args.snr_db, clip_ratio=args.clip_ratio,
        experiment=args.experiment)
    out = args.out or (_output_dir(cfg, None) / "eval.csv")
    mx.write_metrics_csv(out, [row])
    print(mx.METRICS_HEADER)
    print(row.to_csv())
    return 0


def _cmd_sweep_snr(args) -> int:
    cfg = load_config(args.config)
    out = args.out or (_output_dir(cfg, None) / "sweep_snr.csv")
    snrs = _parse_floats(args.snrs) if args.snrs else harness.DEFAULT_SWEEP_SNRS
    rows = harness.sweep_snr(cfg, args.checkpoint, out, snrs=snrs)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def _cmd_sweep_multipath(args) -> int:
    cfg = load_config(args.config)
    out = args.out or (_output_dir(cfg, None) / "sweep_multipath.csv")
    counts = ([int(v) for v in _parse_floats(args.paths)]
              if args.paths else (1, 2, 4, 6, 8, 10, 12, 14))
    rows = harness.sweep_multipath(cfg, args.checkpoint, out,
                                   path_counts=counts)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def _cmd_sweep_pilots(args) -> int:
    cfg = load_config(args.config)
    validate_paths(cfg)
    out_dir = _output_dir(cfg, args.output_dir)
    out = args.out or (out_dir / "sweep_pilots.csv")
    rows = harness.sweep_pilots(cfg, out_dir, out, budget=args.budget)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def _cmd_papr_report(args) -> int:
    cfg = load_config(args.config)
    out = args.out or (_output_dir(cfg, None) / "papr_report.csv")
    ratios = (_parse_floats(args.ratios.replace("inf", "inf"))
              if args.ratios else harness.DEFAULT_CLIP_RATIOS)
    rows = harness.papr_report(cfg, args.checkpoint, out, ratios=ratios)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def _cmd_waterfill(args) -> int:
    gains = np.asarray(_parse_floats(args.gains))
    powers, mu = waterfill(gains, args.noise_var, args.total_power)
    print(f"water level mu = {mu:.12g}")
    print("subcarrier,gain,power")
    for k, (g, p) in enumerate(zip(gains, powers)):
        print(f"{k},{g:.12g},{p:.12g}")
    return 0


def _cmd_gradcheck(args) -> int:
    results = run_suite(verbose=True)
    if all(err < TOLERANCE for err in results.values()):
        print(f"all {len(results)} op checks passed (tolerance {TOLERANCE:g})")
        return 0
    failed = [name for name, err in results.items() if err >= TOLERANCE]
    print(f"FAILED: {', '.join(failed)}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofdmjscc",
        description="Differentiable OFDM link simulator and JSCC toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model variant")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--clip-ratio", type=float, default=None)
    p.add_argument("--experiment", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep-snr", help="evaluate across receiver SNRs")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--snrs", default=None, help="comma-separated dB values")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep_snr)

    p = sub.add_parser("sweep-multipath",
                       help="evaluate across mismatched path counts")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--paths", default=None, help="comma-separated counts")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep_multipath)

    p = sub.add_parser("sweep-pilots",
                       help="trade pilot vs data symbols at fixed budget")
    p.add_argument("--config", required=True)
    p.add_argument("--budget", type=int, default=7)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep_pilots)

    p = sub.add_parser("papr-report",
                       help="PAPR / quality trade-off across clip ratios")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ratios", default=None,
                   help="comma-separated clip ratios, inf for none")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_papr_report)

    p = sub.add_parser("waterfill", help="print a water-filling allocation")
    p.add_argument("--gains", required=True, help="comma-separated |H_k|^2")
    p.add_argument("--noise-var", type=float, required=True)
    p.add_argument("--total-power", type=float, required=True)
    p.set_defaults(func=_cmd_waterfill)

    p = sub.add_parser("gradcheck", help="run the autodiff oracle suite")
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
