"""Receiver-side DSP: per-channel MMSE estimation and equalization, the
residual refinement subnets around them, and the training losses.

Subnet inputs are complex length-n_fft vectors split into real/imag planes
and folded to sqrt(n_fft) x sqrt(n_fft) grids so small 2D kernels cover the
whole signal; three 5x5 conv layers with a zero-initialized head keep the
residual path an exact identity at initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

__all__ = [
    "ChannelEstimate",
    "LossBreakdown",
    "mmse_channel_estimate",
    "mmse_equalize",
    "fold_rows",
    "unfold_rows",
    "subnet_forward",
    "init_subnet",
    "refine_channel",
    "refine_equalized",
    "losses",
]


@dataclass
class ChannelEstimate:
    """Plain per-channel MMSE estimate and its subnet-refined version."""

    h_mmse: ad.Grid    # [..., n_fft, 2]
    h_refined: ad.Grid  # [..., n_fft, 2]


@dataclass
class LossBreakdown:
    l_rec: ad.Grid
    l_cha: ad.Grid | None
    l_gan: ad.Grid | None
    l_total: ad.Grid
    lambda_c: float
    lambda_g: float


def mmse_channel_estimate(pilot_rx: ad.Grid, pilots: np.ndarray,
                          noise_var: float) -> ad.Grid:
    """Per-channel MMSE estimate from unit-power pilots.

    H[k] = sum_i pilot_rx[i,k] * conj(pilots[i,k]) / (n_pilot + sigma^2);
    pilot_rx: [..., n_pilot, n_fft, 2], pilots: [n_pilot, n_fft, 2].
    """
    if noise_var < 0:
        raise ValueError(f"noise_var must be >= 0, got {noise_var}")
    n_pilot = pilots.shape[0]
    prods = ad.cmulc(pilot_rx, ad.constant(np.asarray(pilots, dtype=pilot_rx.dtype)))
    num = ad.reduce_sum(prods, axis=-3)
    return ad.mul(num, 1.0 / (n_pilot + noise_var))


def mmse_equalize(data_rx: ad.Grid, h_hat: ad.Grid, noise_var: float) -> ad.Grid:
    """MMSE equalizer Y[j,k] * conj(H[k]) / (|H[k]|^2 + sigma^2).

    data_rx: [..., n_data, n_fft, 2]; h_hat: [..., n_fft, 2] applied to
    every data row of its packet.
    """
    *lead, n_fft, pair = h_hat.shape
    h_rows = ad.reshape(h_hat, (*lead, 1, n_fft, pair))
    num = ad.cmulc(data_rx, h_rows)
    den = ad.add(ad.cabs2(h_rows), float(noise_var))
    return ad.div(num, ad.reshape(den, den.shape + (1,)))


def fold_rows(x: ad.Grid) -> ad.Grid:
    """Fold complex vectors [..., n, 2] into planes [..., 2, s, s], s=sqrt(n)."""
    *lead, n, pair = x.shape
    s = int(round(np.sqrt(n)))
    if pair != 2 or s * s != n:
        raise ValueError(f"fold_rows: length {n} is not a perfect square")
    re = ad.reshape(x[..., 0], (*lead, 1, s, s))
    im = ad.reshape(x[..., 1], (*lead, 1, s, s))
    return ad.concat([re, im], axis=-3)


def unfold_rows(planes: ad.Grid) -> ad.Grid:
    """Inverse of fold_rows: [..., 2, s, s] -> [..., s*s, 2]."""
    *lead, pair, s, s2 = planes.shape
    if pair != 2 or s != s2:
        raise ValueError(f"unfold_rows: bad shape {planes.shape}")
    re = ad.reshape(planes[..., 0, :, :], (*lead, s * s, 1))
    im = ad.reshape(planes[..., 1, :, :], (*lead, s * s, 1))
    return ad.concat([re, im], axis=-1)


def init_subnet(rng: np.random.Generator, in_channels: int, width: int,
                out_channels: int = 2, kernel: int = 5,
                dtype=np.float32) -> dict:
    """Three-layer conv subnet; the head starts at zero (residual identity)."""
    def he(cin, cout, k):
        std = np.sqrt(2.0 / (cin * k * k))
        return ad.Grid((rng.normal(size=(cout, cin, k, k)) * std).astype(dtype),
                       requires_grad=True)

    def zeros(shape):
        return ad.Grid(np.zeros(shape, dtype=dtype), requires_grad=True)

    return {
        "conv1.w": he(in_channels, width, kernel),
        "conv1.b": zeros((width,)),
        "conv2.w": he(width, width, kernel),
        "conv2.b": zeros((width,)),
        "head.w": zeros((out_channels, width, kernel, kernel)),
        "head.b": zeros((out_channels,)),
    }


def subnet_forward(params: dict, prefix: str, x: ad.Grid,
                   kernel: int = 5) -> ad.Grid:
    pad = kernel // 2
    h = ad.relu(ad.conv2d(x, params[f"{prefix}.conv1.w"],
                          params[f"{prefix}.conv1.b"], stride=1, padding=pad))
    h = ad.relu(ad.conv2d(h, params[f"{prefix}.conv2.w"],
                          params[f"{prefix}.conv2.b"], stride=1, padding=pad))
    return ad.conv2d(h, params[f"{prefix}.head.w"],
                     params[f"{prefix}.head.b"], stride=1, padding=pad)


def _mean_pilot_rows(pilot_rx: ad.Grid) -> ad.Grid:
    """Average the received pilot rows (they carry identical symbols)."""
    return ad.reduce_mean(pilot_rx, axis=-3)


def refine_channel(h_mmse: ad.Grid, pilots: np.ndarray, pilot_rx: ad.Grid,
                   params: dict, prefix: str = "ce") -> ad.Grid:
    """Residual CE refinement: H_hat = H_mmse + subnet(H_mmse, Y_p, Y_p_rx)."""
    pilot_row = ad.constant(np.asarray(pilots[0], dtype=h_mmse.dtype))
    rx_row = _mean_pilot_rows(pilot_rx)
    lead = h_mmse.shape[:-2]
    pilot_planes = fold_rows(ad.constant(np.broadcast_to(
        pilot_row.data, lead + pilot_row.shape).copy()))
    stacked = ad.concat(
        [fold_rows(h_mmse), pilot_planes, fold_rows(rx_row)], axis=-3)
    correction = subnet_forward(params, prefix, stacked)
    return ad.add(h_mmse, unfold_rows(correction))


def refine_equalized(y_eq: ad.Grid, h_hat: ad.Grid, data_rx: ad.Grid,
                     params: dict, prefix: str = "eq") -> ad.Grid:
    """Residual EQ refinement applied per data row.

    y_eq, data_rx: [..., n_data, n_fft, 2]; h_hat: [..., n_fft, 2] shared by
    the rows of its packet.
    """
    *lead, n_data, n_fft, _ = y_eq.shape
    h_rows = ad.concat(
        [ad.reshape(h_hat, (*lead, 1, n_fft, 2))] * n_data, axis=-3)
    flat = (-1, n_fft, 2) if lead else (n_data, n_fft, 2)
    stacked = ad.concat([
        fold_rows(ad.reshape(y_eq, flat)),
        fold_rows(ad.reshape(h_rows, flat)),
        fold_rows(ad.reshape(data_rx, flat)),
    ], axis=-3)
    correction = subnet_forward(params, prefix, stacked)
    residual = ad.reshape(unfold_rows(correction), (*lead, n_data, n_fft, 2))
    return ad.add(y_eq, residual)


def losses(x: ad.Grid, x_hat: ad.Grid, h_true: np.ndarray | None,
           h_hat: ad.Grid | None, lambda_c: float,
           lambda_g: float = 0.0, l_gan: ad.Grid | None = None) -> LossBreakdown:
    """Reconstruction MSE plus weighted channel-estimation MSE (Eq. style:
    complex squared error averaged over subcarriers) and optional
    adversarial term.
    """
    if x.shape != x_hat.shape:
        raise ValueError(f"losses: image shapes differ, {x.shape} vs {x_hat.shape}")
    l_rec = ad.reduce_mean(ad.square(ad.sub(x_hat, x)))
    l_cha = None
    total = l_rec
    if h_hat is not None:
        if h_true is None or tuple(h_true.shape) != h_hat.shape:
            raise ValueError(
                f"losses: channel shapes differ, "
                f"{None if h_true is None else h_true.shape} vs {h_hat.shape}")
        diff = ad.sub(h_hat, ad.constant(np.asarray(h_true, dtype=h_hat.dtype)))
        l_cha = ad.reduce_mean(ad.cabs2(diff))
        if lambda_c != 0.0:
            total = ad.add(total, ad.mul(l_cha, float(lambda_c)))
    if l_gan is not None and lambda_g != 0.0:
        total = ad.add(total, ad.mul(l_gan, float(lambda_g)))
    return LossBreakdown(l_rec=l_rec, l_cha=l_cha, l_gan=l_gan, l_total=total,
                         lambda_c=lambda_c, lambda_g=lambda_g)
