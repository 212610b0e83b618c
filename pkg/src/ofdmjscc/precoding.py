"""CSI-feedback precoding, the frequency-domain average-SNR metric, and a
water-filling reference allocator.

The precoder is a small conv net applied per data row over folded
(symbols, channel response) planes; a softplus head keeps the weights
nonnegative and the weighted symbols are renormalized to unit mean power
so average-SNR comparisons stay fair.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import ofdm
from .receiver import fold_rows, subnet_forward

__all__ = [
    "init_precoder",
    "precode",
    "average_snr",
    "average_snr_mc",
    "waterfill",
]


def init_precoder(rng: np.random.Generator, width: int, kernel: int = 5,
                  dtype=np.float32) -> dict:
    """Conv net mapping 4 planes (Y, H real/imag) to one weight plane."""
    def he(cin, cout, k):
        std = np.sqrt(2.0 / (cin * k * k))
        return ad.Grid((rng.normal(size=(cout, cin, k, k)) * std).astype(dtype),
                       requires_grad=True)

    def zeros(shape):
        return ad.Grid(np.zeros(shape, dtype=dtype), requires_grad=True)

    return {
        "conv1.w": he(4, width, kernel),
        "conv1.b": zeros((width,)),
        "conv2.w": he(width, width, kernel),
        "conv2.b": zeros((width,)),
        "head.w": zeros((1, width, kernel, kernel)),
        "head.b": zeros((1,)),
    }


def precoder_weights(params: dict, symbols: ad.Grid, h_true: np.ndarray,
                     prefix: str = "precoder") -> ad.Grid:
    """Nonnegative per-subcarrier weights W, shape [..., n_data, n_fft]."""
    *lead, n_data, n_fft, _ = symbols.shape
    h = np.broadcast_to(np.asarray(h_true, dtype=symbols.dtype)[..., None, :, :],
                        (*lead, n_data, n_fft, 2)).copy()
    flat = (-1, n_fft, 2) if lead else (n_data, n_fft, 2)
    stacked = ad.concat([
        fold_rows(ad.reshape(symbols, flat)),
        fold_rows(ad.constant(h.reshape(flat))),
    ], axis=-3)
    plane = subnet_forward(params, prefix, stacked)  # [B*n_data, 1, s, s]
    w = ad.softplus(ad.reshape(plane, (*lead, n_data, n_fft)))
    return w


def precode(symbols: ad.Grid, h_true: np.ndarray, params: dict,
            prefix: str = "precoder", batch_dims: int = 0) -> ad.Grid:
    """Reweight symbols per subcarrier and renormalize to unit mean power."""
    w = precoder_weights(params, symbols, h_true, prefix)
    weighted = ad.mul(symbols, ad.reshape(w, w.shape + (1,)))
    return ofdm.power_normalize(weighted, batch_dims=batch_dims)


def average_snr(power: float, noise_var: float) -> float:
    """Frequency-domain average SNR in dB; the normalized profile makes
    E|H|^2 = 1, so this is 10*log10(P / sigma^2)."""
    if noise_var <= 0:
        raise ValueError(f"noise_var must be positive, got {noise_var}")
    if power <= 0:
        raise ValueError(f"power must be positive, got {power}")
    return float(10.0 * np.log10(power / noise_var))


def average_snr_mc(h_pairs: np.ndarray, power: float, noise_var: float) -> float:
    """Monte-Carlo estimate of the average SNR over sampled responses H."""
    if noise_var <= 0:
        raise ValueError(f"noise_var must be positive, got {noise_var}")
    gains = h_pairs[..., 0] ** 2 + h_pairs[..., 1] ** 2
    return float(10.0 * np.log10(power * gains.mean() / noise_var))


def waterfill(gains: np.ndarray, noise_var: float, total_power: float,
              tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Water-filling allocation p_k = max(0, mu - sigma^2/g_k), sum = P_tot.

    Bisection brackets the water level; the exact level on the active set is
    then solved in closed form so the KKT conditions hold to float precision.
    Returns (powers, mu).
    """
    gains = np.asarray(gains, dtype=np.float64)
    if total_power <= 0:
        raise ValueError(f"total_power must be positive, got {total_power}")
    if noise_var <= 0:
        raise ValueError(f"noise_var must be positive, got {noise_var}")
    if gains.ndim != 1 or gains.size == 0 or np.any(gains <= 0):
        raise ValueError("gains must be a non-empty 1-D array of positive values")

    floor = noise_var / gains
    lo = floor.min()
    hi = floor.max() + total_power
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        alloc = np.maximum(0.0, mid - floor).sum()
        if alloc > total_power:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol:
            break
    mu = 0.5 * (lo + hi)
    active = mu > floor
    if not active.any():
        active = floor == floor.min()
    mu = (total_power + floor[active].sum()) / active.sum()
    powers = np.where(active, mu - floor, 0.0)
    return powers, float(mu)
