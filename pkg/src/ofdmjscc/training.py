"""End-to-end training loop: ADAM optimization of the link variants, per
epoch validation metrics, deterministic seeding, and checkpoint/resume.

Random streams are derived from the master seed and the global step, so a
resumed run draws exactly the same channels, noise, and shuffles as an
uninterrupted one.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import checkpoint as ckpt
from . import datasets as ds
from . import metrics as mx
from . import models as md
from . import receiver as rx
from .channel import (exponential_profile, frequency_response, sample_noise,
                      sample_taps, snr_to_noise_var)
from .config import ExperimentConfig
from .ofdm import OfdmConfig, papr

__all__ = ["Adam", "TrainingDiverged", "spec_from_config", "train",
           "evaluate", "TrainResult", "save_train_state", "load_train_state",
           "learning_rate_at"]

_TAG_INIT, _TAG_PERM, _TAG_CHANNEL, _TAG_NOISE, _TAG_EVAL = range(5)
_EVAL_BATCH = 32


class TrainingDiverged(RuntimeError):
    pass


class Adam:
    """Standard ADAM with bias correction over a dict of parameter Grids."""

    def __init__(self, params: dict, beta1: float = 0.5, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr: float) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.step_count
        bias2 = 1.0 - b2 ** self.step_count
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            p.data -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)


def learning_rate_at(base_lr: float, epoch: int, total_epochs: int) -> float:
    """Constant for the first half, then linear decay to base/(E - E//2)."""
    half = total_epochs // 2
    if total_epochs <= 1 or epoch < half:
        return base_lr
    return base_lr * (total_epochs - epoch) / (total_epochs - half)


def _stream(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def spec_from_config(cfg: ExperimentConfig):
    """ModelSpec plus channel profile; checks the CP covers the delay spread."""
    ofdm_cfg = OfdmConfig(n_fft=cfg.n_fft, n_cp=cfg.n_cp, n_pilot=cfg.n_pilot,
                          n_data=cfg.n_data, pilot_seed=cfg.pilot_seed)
    if cfg.n_cp < cfg.paths - 1:
        raise ValueError(
            f"cyclic prefix {cfg.n_cp} shorter than delay spread "
            f"{cfg.paths - 1}; inter-symbol interference would leak")
    spec = md.ModelSpec(
        mode=cfg.mode,
        channels=cfg.channels,
        downsamples=cfg.downsamples,
        base_width=cfg.base_width,
        subnet_width=cfg.subnet_width,
        clip_ratio=cfg.clip_ratio,
        ofdm=ofdm_cfg,
    )
    profile = exponential_profile(cfg.paths, cfg.decay)
    return spec, profile


@dataclass
class TrainResult:
    params: dict
    rows: list = field(default_factory=list)
    csv_path: Path | None = None
    checkpoint_path: Path | None = None


def _forward_batch(params, spec, profile, x_batch, noise_var, seed, step):
    batch = x_batch.shape[0]
    taps = sample_taps(profile, _stream(seed, _TAG_CHANNEL, step),
                       count=batch, dtype=x_batch.dtype)
    noise = sample_noise((batch, spec.channel_uses, 2), noise_var,
                         _stream(seed, _TAG_NOISE, step), dtype=x_batch.dtype)
    x = ad.Grid(x_batch)
    out = md.link_forward(params, spec, x, taps, noise, noise_var)
    return x, out


def _loss_for(out, x, cfg: ExperimentConfig, params):
    l_gan_d = l_gan_g = None
    if cfg.lambda_g > 0.0:
        l_gan_d, l_gan_g = md.lsgan_losses(params, x, out["x_hat"])
    breakdown = rx.losses(
        x, out["x_hat"],
        out["h_true"] if out["h_hat"] is not None else None,
        out["h_hat"], cfg.lambda_c, cfg.lambda_g, l_gan_g)
    return breakdown, l_gan_d


def train(cfg: ExperimentConfig, output_dir=None,
          resume_from=None, quiet: bool = True) -> TrainResult:
    """Optimize the configured variant; returns params and per-epoch rows.

    Writes train_log.csv and checkpoint.ckpt under the output directory.
    Deterministic for a fixed config seed; resuming reproduces the exact
    trajectory of an uninterrupted run.
    """
    spec, profile = spec_from_config(cfg)
    out_dir = Path(output_dir if output_dir is not None else cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    noise_var = snr_to_noise_var(cfg.snr_db)

    train_images = ds.load_dataset(cfg.dataset).astype(np.float32)
    val_images = ds.load_dataset(cfg.val_dataset).astype(np.float32)
    n_train = train_images.shape[0]
    steps_per_epoch = n_train // cfg.batch_size
    if steps_per_epoch == 0:
        raise ValueError(
            f"dataset of {n_train} images smaller than one batch "
            f"({cfg.batch_size})")

    adversarial = cfg.lambda_g > 0.0
    params = md.init_model(spec, cfg.seed, adversarial=adversarial)
    opt = Adam(params, beta1=0.5, beta2=0.999)
    start_epoch = 0
    rows: list[dict] = []
    if resume_from is not None:
        params, state = load_train_state(Path(resume_from), adversarial)
        opt = Adam(params, beta1=0.5, beta2=0.999)
        opt.m, opt.v = state["m"], state["v"]
        opt.step_count = state["step_count"]
        start_epoch = state["epoch"]

    def log_row(epoch: int) -> dict:
        stats = evaluate(params, spec, profile, val_images, noise_var,
                         repeats=1, seed=cfg.seed, lambda_c=cfg.lambda_c)
        row = {
            "epoch": epoch,
            "l_rec": stats["l_rec"],
            "l_cha": stats["ce_mse"],
            "psnr_db": stats["psnr_db"],
            "ce_mse": stats["ce_mse"],
            "mean_papr_db": stats["papr_db"],
        }
        rows.append(row)
        if not quiet:
            print(f"epoch {epoch:3d}  l_rec {row['l_rec']:.5f}  "
                  f"psnr {row['psnr_db']:.2f} dB")
        return row

    t0 = time.monotonic()
    if start_epoch == 0:
        log_row(0)

    for epoch in range(start_epoch, cfg.epochs):
        lr = learning_rate_at(cfg.learning_rate, epoch, cfg.epochs)
        perm = _stream(cfg.seed, _TAG_PERM, epoch).permutation(n_train)
        for i in range(steps_per_epoch):
            gstep = epoch * steps_per_epoch + i
            idx = perm[i * cfg.batch_size:(i + 1) * cfg.batch_size]
            try:
                x, out = _forward_batch(params, spec, profile,
                                        train_images[idx], noise_var,
                                        cfg.seed, gstep)
                breakdown, l_gan_d = _loss_for(out, x, cfg, params)
                opt.zero_grad()
                if l_gan_d is not None:
                    l_gan_d.backward()
                breakdown.l_total.backward()
            except FloatingPointError as exc:
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} step {i} "
                    f"(global step {gstep}): {exc}") from exc
            if not np.isfinite(breakdown.l_total.item()):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} step {i} "
                    f"(global step {gstep})")
            opt.step(lr)
        log_row(epoch + 1)
        save_train_state(out_dir / "checkpoint.ckpt", params, opt, epoch + 1)

    csv_path = out_dir / "train_log.csv"
    _write_train_csv(csv_path, rows)
    if not quiet:
        print(f"trained {cfg.epochs - start_epoch} epochs in "
              f"{time.monotonic() - t0:.1f}s")
    return TrainResult(params=params, rows=rows, csv_path=csv_path,
                       checkpoint_path=out_dir / "checkpoint.ckpt")


def _write_train_csv(path: Path, rows: list[dict]) -> None:
    lines = [mx.TRAIN_HEADER]
    for row in rows:
        lines.append(",".join([
            str(row["epoch"]),
            repr(float(row["l_rec"])),
            repr(float(row["l_cha"])),
            repr(float(row["psnr_db"])),
            repr(float(row["ce_mse"])),
            repr(float(row["mean_papr_db"])),
        ]))
    path.write_text("\n".join(lines) + "\n")


def save_train_state(path, params: dict, opt: Adam, epoch: int) -> None:
    blocks = md.params_to_blocks(params)
    for name, arr in opt.m.items():
        blocks[f"opt.m.{name}"] = np.asarray(arr, dtype=np.float32)
    for name, arr in opt.v.items():
        blocks[f"opt.v.{name}"] = np.asarray(arr, dtype=np.float32)
    blocks["opt.step_count"] = np.asarray([opt.step_count], dtype=np.float32)
    blocks["opt.epoch"] = np.asarray([epoch], dtype=np.float32)
    ckpt.save_blocks(path, blocks)


def load_train_state(path, adversarial: bool = False):
    blocks = ckpt.load_blocks(path)
    params = {}
    state = {"m": {}, "v": {}, "step_count": 0, "epoch": 0}
    for name, arr in blocks.items():
        if name.startswith("opt.m."):
            state["m"][name[len("opt.m."):]] = arr.copy()
        elif name.startswith("opt.v."):
            state["v"][name[len("opt.v."):]] = arr.copy()
        elif name == "opt.step_count":
            state["step_count"] = int(arr[0])
        elif name == "opt.epoch":
            state["epoch"] = int(arr[0])
        else:
            params[name] = ad.Grid(arr.copy(), requires_grad=True)
    return params, state


def evaluate(params: dict, spec: md.ModelSpec, profile, images: np.ndarray,
             noise_var: float, repeats: int = 5, seed: int = 0,
             lambda_c: float = 0.5, clip_override: float | None = None) -> dict:
    """Average link metrics over the image set and channel realizations.

    Each image is transmitted ``repeats`` times through fresh channel and
    noise draws. Returns PSNR/SSIM averages, reconstruction loss, refined
    and plain-MMSE channel-estimation MSE, and mean PAPR of the TX signal.
    """
    if clip_override is not None:
        spec = md.ModelSpec(**{**spec.__dict__, "clip_ratio": None
                               if np.isinf(clip_override) else clip_override})
    images = images.astype(np.float32)
    n = images.shape[0]
    psnrs, ssims, paprs = [], [], []
    rec_losses, ce_mses, ce_mses_mmse = [], [], []
    with ad.no_grad():
        for rep in range(repeats):
            for lo in range(0, n, _EVAL_BATCH):
                chunk = images[lo:lo + _EVAL_BATCH]
                batch = chunk.shape[0]
                taps = sample_taps(profile, _stream(seed, _TAG_EVAL, rep, lo),
                                   count=batch, dtype=np.float32)
                noise = sample_noise((batch, spec.channel_uses, 2), noise_var,
                                     _stream(seed, _TAG_EVAL, rep, lo, 1),
                                     dtype=np.float32)
                x = ad.Grid(chunk)
                out = md.link_forward(params, spec, x, taps, noise, noise_var)
                x_hat = out["x_hat"].data
                for b in range(batch):
                    psnrs.append(mx.psnr(chunk[b], x_hat[b]))
                    ssims.append(mx.ssim(chunk[b], x_hat[b]))
                rec_losses.append(float(np.mean((x_hat - chunk) ** 2)))
                paprs.append(float(np.mean(papr(out["tx"], batch_dims=1))))
                if out["h_hat"] is not None:
                    h_true = out["h_true"]
                    diff = out["h_hat"].data - h_true
                    ce_mses.append(float(
                        (diff[..., 0] ** 2 + diff[..., 1] ** 2).mean()))
                    diff_m = out["h_mmse"].data - h_true
                    ce_mses_mmse.append(float(
                        (diff_m[..., 0] ** 2 + diff_m[..., 1] ** 2).mean()))
    ce = float(np.mean(ce_mses)) if ce_mses else 0.0
    ce_mmse = float(np.mean(ce_mses_mmse)) if ce_mses_mmse else 0.0
    return {
        "psnr_db": float(np.mean(psnrs)),
        "ssim": float(np.mean(ssims)),
        "l_rec": float(np.mean(rec_losses)),
        "ce_mse": ce,
        "ce_mse_mmse": ce_mmse,
        "papr_db": float(np.mean(paprs)),
        "n_images": n,
        "repeats": repeats,
    }
