"""Differentiable OFDM packetization: symbol mapping, pilots, IDFT/CP,
demodulation, power normalization, PAPR, and amplitude clipping.

All frequency-domain grids are [..., rows, n_fft, 2] interleaved pairs and
the DFT convention is unitary in both directions, so power accounting
commutes with (I)DFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

__all__ = [
    "OfdmConfig",
    "OfdmPacket",
    "map_symbols",
    "unmap_symbols",
    "modulate",
    "demodulate",
    "power_normalize",
    "papr",
    "clip",
]

_PILOT_PHASES = 4


@dataclass(frozen=True)
class OfdmConfig:
    """OFDM constants plus the fixed unit-modulus pilot sequence."""

    n_fft: int = 64
    n_cp: int = 16
    n_pilot: int = 1
    n_data: int = 6
    pilot_seed: int = 0x0FD5

    def __post_init__(self):
        if self.n_fft < 1 or self.n_cp < 0:
            raise ValueError(f"bad OFDM extents: n_fft={self.n_fft}, n_cp={self.n_cp}")
        if self.n_pilot < 1 or self.n_data < 1:
            raise ValueError(
                f"need at least one pilot and one data symbol, got "
                f"n_pilot={self.n_pilot}, n_data={self.n_data}")

    @property
    def n_symbols(self) -> int:
        return self.n_pilot + self.n_data

    @property
    def packet_len(self) -> int:
        return self.n_symbols * (self.n_fft + self.n_cp)

    def pilot_symbols(self, dtype=np.float64) -> np.ndarray:
        """Identical four-phase unit-modulus rows, [n_pilot, n_fft, 2]."""
        rng = np.random.default_rng(self.pilot_seed)
        quadrant = rng.integers(0, _PILOT_PHASES, size=self.n_fft)
        phase = (2.0 * np.pi * quadrant + np.pi / 2.0) / _PILOT_PHASES
        row = np.stack([np.cos(phase), np.sin(phase)], axis=-1)
        return np.broadcast_to(row, (self.n_pilot, self.n_fft, 2)).astype(dtype)


@dataclass
class OfdmPacket:
    """One transmitted packet: frequency-domain grids plus serial samples."""

    data_symbols: ad.Grid       # [..., n_data, n_fft, 2]
    pilots: np.ndarray          # [n_pilot, n_fft, 2]
    samples: ad.Grid            # [..., packet_len, 2]
    config: OfdmConfig = field(repr=False, default=None)


def map_symbols(encoded: ad.Grid, cfg: OfdmConfig) -> ad.Grid:
    """Reshape encoder output [..., C, H, W] to complex rows [..., n_data, n_fft, 2].

    The first C/2 channels become real parts and the rest imaginary parts.
    """
    *lead, c, h, w = encoded.shape
    if c % 2 != 0:
        raise ValueError(f"map_symbols: channel count {c} must be even")
    n_complex = c * h * w // 2
    if n_complex != cfg.n_data * cfg.n_fft:
        raise ValueError(
            f"map_symbols: {c}x{h}x{w} gives {n_complex} complex symbols, "
            f"but config needs n_data*n_fft = {cfg.n_data}*{cfg.n_fft} = "
            f"{cfg.n_data * cfg.n_fft}")
    half = c // 2
    re = ad.reshape(encoded[..., :half, :, :], (*lead, cfg.n_data, cfg.n_fft, 1))
    im = ad.reshape(encoded[..., half:, :, :], (*lead, cfg.n_data, cfg.n_fft, 1))
    return ad.concat([re, im], axis=-1)


def unmap_symbols(symbols: ad.Grid, channels: int, height: int,
                  width: int) -> ad.Grid:
    """Inverse of map_symbols; restores [..., channels, height, width]."""
    *lead, n_data, n_fft, pair = symbols.shape
    if pair != 2 or channels * height * width != 2 * n_data * n_fft:
        raise ValueError(
            f"unmap_symbols: cannot fold {n_data}x{n_fft} complex rows into "
            f"{channels}x{height}x{width}")
    half = channels // 2
    re = ad.reshape(symbols[..., 0], (*lead, half, height, width))
    im = ad.reshape(symbols[..., 1], (*lead, half, height, width))
    return ad.concat([re, im], axis=-3)


def modulate(symbols: ad.Grid, cfg: OfdmConfig) -> ad.Grid:
    """Pilots + data rows -> unitary IDFT -> CP -> serialized samples.

    symbols: [..., n_data, n_fft, 2]; output [..., packet_len, 2].
    """
    *lead, n_data, n_fft, _ = symbols.shape
    if n_data != cfg.n_data or n_fft != cfg.n_fft:
        raise ValueError(
            f"modulate: got rows {n_data}x{n_fft}, config says "
            f"{cfg.n_data}x{cfg.n_fft}")
    pilots = np.broadcast_to(
        cfg.pilot_symbols(symbols.dtype),
        tuple(lead) + (cfg.n_pilot, cfg.n_fft, 2)).copy()
    grid = ad.concat([ad.constant(pilots), symbols], axis=-3)
    time = ad.idft_rows(grid)
    cp = time[..., cfg.n_fft - cfg.n_cp:, :]
    with_cp = ad.concat([cp, time], axis=-2)
    return ad.reshape(with_cp, tuple(lead) + (cfg.packet_len, 2))


def demodulate(samples: ad.Grid, cfg: OfdmConfig) -> tuple[ad.Grid, ad.Grid]:
    """Serialized samples -> (pilot rows, data rows) in the frequency domain."""
    *lead, n, pair = samples.shape
    if pair != 2 or n != cfg.packet_len:
        raise ValueError(
            f"demodulate: expected length {cfg.packet_len}, got {n}")
    blocks = ad.reshape(
        samples, tuple(lead) + (cfg.n_symbols, cfg.n_fft + cfg.n_cp, 2))
    no_cp = blocks[..., cfg.n_cp:, :]
    freq = ad.dft_rows(no_cp)
    pilot_rows = freq[..., :cfg.n_pilot, :, :]
    data_rows = freq[..., cfg.n_pilot:, :, :]
    return pilot_rows, data_rows


def _sample_axes(y: ad.Grid, batch_dims: int) -> tuple:
    return tuple(range(batch_dims, y.data.ndim))


def power_normalize(y: ad.Grid, batch_dims: int = 0) -> ad.Grid:
    """Rescale to unit mean complex power over the non-batch axes."""
    if y.shape[-1] != 2:
        raise ValueError(f"power_normalize expects pairs, got {y.shape}")
    power = ad.cabs2(y)
    axes = tuple(range(batch_dims, power.data.ndim))
    mean_p = ad.reduce_mean(power, axis=axes, keepdims=True)
    if np.any(mean_p.data == 0.0):
        raise ValueError("power_normalize: all-zero input")
    scale = ad.div(ad.constant(np.ones_like(mean_p.data)), ad.sqrt(mean_p))
    return ad.mul(y, ad.reshape(scale, scale.shape + (1,)))


def papr(y, batch_dims: int = 0):
    """Peak-to-average power ratio in dB over the non-batch axes."""
    data = y.data if isinstance(y, ad.Grid) else np.asarray(y)
    if data.size == 0:
        raise ValueError("papr: empty input")
    power = data[..., 0] ** 2 + data[..., 1] ** 2
    axes = tuple(range(batch_dims, power.ndim))
    peak = power.max(axis=axes)
    mean = power.mean(axis=axes)
    out = 10.0 * np.log10(peak / mean)
    return float(out) if batch_dims == 0 else out


def _clip_guard(y_pairs: np.ndarray, factor: np.ndarray,
                thresh2: np.ndarray) -> np.ndarray:
    """Per-sample shrink (<= 1) so rounding never lands above the clamp bound.

    Replays the exact float path of the downstream multiply (pair times
    factor, then squared magnitude) and shaves violators by a few ulp.
    """
    guard = np.ones_like(factor)
    shave = 1.0 - 2.0 ** -48
    for _ in range(8):
        eff = factor * guard
        re = y_pairs[..., 0] * eff
        im = y_pairs[..., 1] * eff
        viol = re * re + im * im > thresh2
        if not viol.any():
            break
        guard[viol] *= shave
    return guard


def clip(y: ad.Grid, clip_ratio: float | None, batch_dims: int = 0,
         renormalize: bool = True, signal_power=None) -> ad.Grid:
    """Phase-preserving amplitude clamp at clip_ratio * sqrt(P_s).

    P_s is the mean power of the packet, measured unless ``signal_power``
    pins it (then it is treated as a constant). Samples at or above the
    threshold are projected down with phase kept; the result is rescaled so
    the packet power is P_s again. None or inf clip_ratio is the identity.
    """
    if clip_ratio is None or np.isinf(clip_ratio):
        return y
    if clip_ratio <= 0:
        raise ValueError(f"clip: clip_ratio must be positive, got {clip_ratio}")
    power = ad.cabs2(y)
    axes = tuple(range(batch_dims, power.data.ndim))
    if signal_power is None:
        p_s = ad.reduce_mean(power, axis=axes, keepdims=True)
    else:
        p_s = ad.constant(np.broadcast_to(
            np.asarray(signal_power, dtype=y.dtype),
            power.data.mean(axis=axes, keepdims=True).shape).copy())
    thresh2 = ad.mul(p_s, float(clip_ratio) ** 2)
    mask = power.data >= thresh2.data
    ones = np.ones_like(power.data)
    amp2_safe = ad.where(mask, power, ad.constant(ones))
    factor = ad.sqrt(ad.div(thresh2, amp2_safe))
    factor = ad.where(mask, factor, ad.constant(ones))
    guard = _clip_guard(y.data, factor.data, thresh2.data)
    if not np.all(guard == 1.0):
        factor = ad.mul(factor, ad.constant(guard))
    clipped = ad.mul(y, ad.reshape(factor, factor.shape + (1,)))
    if not renormalize:
        return clipped
    p_c = ad.reduce_mean(ad.cabs2(clipped), axis=axes, keepdims=True)
    scale = ad.sqrt(ad.div(p_s, p_c))
    return ad.mul(clipped, ad.reshape(scale, scale.shape + (1,)))
