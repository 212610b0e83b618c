"""Sweep and report drivers that regenerate the trend experiments at desk
scale: SNR robustness, multipath mismatch, pilot/data trade-off, and the
clipping PAPR/quality trade-off. Every driver emits one metrics CSV.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from . import datasets as ds
from . import metrics as mx
from . import models as md
from . import training as tr
from .channel import exponential_profile, snr_to_noise_var
from .config import ExperimentConfig

__all__ = ["eval_checkpoint", "sweep_snr", "sweep_multipath", "sweep_pilots",
           "papr_report", "DEFAULT_SWEEP_SNRS", "DEFAULT_CLIP_RATIOS"]

DEFAULT_SWEEP_SNRS = (0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0)
DEFAULT_CLIP_RATIOS = (0.8, 1.0, 1.2, 1.4, float("inf"))


def _load_model(cfg: ExperimentConfig, checkpoint_path):
    spec, profile = tr.spec_from_config(cfg)
    params, _ = tr.load_train_state(checkpoint_path,
                                    adversarial=cfg.lambda_g > 0.0)
    return spec, profile, params


def _row(cfg: ExperimentConfig, spec, stats, experiment: str,
         snr_db: float, clip_ratio) -> mx.MetricsRow:
    return mx.MetricsRow(
        experiment=experiment,
        snr_db=snr_db,
        n_data=cfg.n_data,
        n_pilot=cfg.n_pilot,
        clip_ratio=None if clip_ratio is None or np.isinf(clip_ratio)
        else float(clip_ratio),
        psnr_db=stats["psnr_db"],
        ssim=stats["ssim"],
        ce_mse=stats["ce_mse"],
        mean_papr_db=stats["papr_db"],
        cpp=spec.cpp(),
    )


def eval_checkpoint(cfg: ExperimentConfig, checkpoint_path,
                    snr_db: float | None = None,
                    clip_ratio: float | None = None,
                    experiment: str | None = None,
                    profile_override=None) -> tuple[mx.MetricsRow, dict]:
    """Evaluate a trained model, optionally at a different SNR / clip ratio
    / channel profile than it was trained with."""
    spec, profile, params = _load_model(cfg, checkpoint_path)
    if profile_override is not None:
        profile = profile_override
    snr = cfg.snr_db if snr_db is None else snr_db
    images = ds.load_dataset(cfg.val_dataset)
    stats = tr.evaluate(
        params, spec, profile, images, snr_to_noise_var(snr),
        repeats=cfg.eval_repeats, seed=cfg.seed, lambda_c=cfg.lambda_c,
        clip_override=clip_ratio)
    name = experiment or f"{cfg.mode}@{snr:g}dB"
    return _row(cfg, spec, stats, name, snr, clip_ratio
                if clip_ratio is not None else cfg.clip_ratio), stats


def sweep_snr(cfg: ExperimentConfig, checkpoint_path, out_csv,
              snrs=DEFAULT_SWEEP_SNRS) -> list[mx.MetricsRow]:
    """Evaluate one checkpoint across receiver SNRs (robustness protocol)."""
    rows = []
    for snr in snrs:
        row, _ = eval_checkpoint(cfg, checkpoint_path, snr_db=snr,
                                 experiment=f"{cfg.mode}-snr-sweep")
        rows.append(row)
    mx.write_metrics_csv(out_csv, rows)
    return rows


def sweep_multipath(cfg: ExperimentConfig, checkpoint_path, out_csv,
                    path_counts=(1, 2, 4, 6, 8, 10, 12, 14)) -> list[mx.MetricsRow]:
    """Evaluate one checkpoint against channels with mismatched path counts."""
    rows = []
    for n_paths in path_counts:
        profile = exponential_profile(n_paths, cfg.decay)
        row, _ = eval_checkpoint(
            cfg, checkpoint_path, profile_override=profile,
            experiment=f"{cfg.mode}-L{n_paths}")
        rows.append(row)
    mx.write_metrics_csv(out_csv, rows)
    return rows


def _pilot_pairs(budget: int) -> list[tuple[int, int]]:
    pairs = []
    for n_pilot in range(1, budget):
        n_data = budget - n_pilot
        if n_data >= n_pilot:
            pairs.append((n_pilot, n_data))
    return pairs


def sweep_pilots(cfg: ExperimentConfig, out_dir, out_csv,
                 budget: int = 7) -> list[mx.MetricsRow]:
    """Trade pilots against data symbols at a fixed symbol budget.

    Trains one desk-scale model per (n_pilot, n_data) split and evaluates
    it at the configured SNR.
    """
    out_dir = Path(out_dir)
    rows = []
    images = ds.load_dataset(cfg.val_dataset)
    grid_area = (images.shape[-1] // 2 ** cfg.downsamples) ** 2
    for n_pilot, n_data in _pilot_pairs(budget):
        channels = 2 * n_data * cfg.n_fft // grid_area
        sub_cfg = replace(cfg, n_pilot=n_pilot, n_data=n_data,
                          channels=channels,
                          output_dir=str(out_dir / f"np{n_pilot}_ns{n_data}"))
        result = tr.train(sub_cfg)
        spec, profile = tr.spec_from_config(sub_cfg)
        stats = tr.evaluate(
            result.params, spec, profile, images,
            snr_to_noise_var(sub_cfg.snr_db), repeats=sub_cfg.eval_repeats,
            seed=sub_cfg.seed, lambda_c=sub_cfg.lambda_c)
        rows.append(_row(sub_cfg, spec, stats,
                         f"pilots{n_pilot}-data{n_data}", sub_cfg.snr_db,
                         sub_cfg.clip_ratio))
    mx.write_metrics_csv(out_csv, rows)
    return rows


def papr_report(cfg: ExperimentConfig, checkpoint_path, out_csv,
                ratios=DEFAULT_CLIP_RATIOS) -> list[mx.MetricsRow]:
    """Mean PAPR and reconstruction quality across clipping ratios.

    Applies each clip ratio to the given trained model at evaluation time
    (the post-hoc clipping protocol; models trained with clipping in the
    loop are produced by ``train`` with ``clip_ratio`` set).
    """
    rows = []
    for rho in ratios:
        name = (f"{cfg.mode}-unclipped" if np.isinf(rho)
                else f"{cfg.mode}-clip{rho:g}")
        row, _ = eval_checkpoint(cfg, checkpoint_path, clip_ratio=float(rho),
                                 experiment=name)
        rows.append(row)
    mx.write_metrics_csv(out_csv, rows)
    return rows
