"""Multipath Rayleigh fading channel with an exponential power-delay profile.

Tap powers decay as sigma_l^2 = alpha * exp(-l / gamma) and are normalized
so they sum to one; each tap is an independent circular complex Gaussian.
The channel applies a same-length complex convolution plus AWGN and is
differentiable in its input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

__all__ = [
    "ChannelProfile",
    "ChannelRealization",
    "exponential_profile",
    "sample_channel",
    "sample_taps",
    "sample_noise",
    "apply_channel",
    "receiver_snr",
    "snr_to_noise_var",
    "frequency_response",
]


@dataclass(frozen=True)
class ChannelProfile:
    """Exponential power-delay profile over ``path_count`` taps."""

    path_count: int
    decay: float
    path_powers: np.ndarray  # sigma_l^2, sums to 1
    normalizer: float        # alpha

    def __post_init__(self):
        if self.path_count < 1:
            raise ValueError(f"path_count must be >= 1, got {self.path_count}")
        if self.decay <= 0:
            raise ValueError(f"decay must be positive, got {self.decay}")


@dataclass(frozen=True)
class ChannelRealization:
    """One sampled channel: taps as interleaved pairs plus the noise power."""

    taps: np.ndarray        # [L, 2], immutable
    noise_var: float        # sigma^2, linear
    seed: int

    def __post_init__(self):
        self.taps.setflags(write=False)

    @property
    def path_count(self) -> int:
        return self.taps.shape[0]


def exponential_profile(path_count: int, decay: float) -> ChannelProfile:
    """Profile with sigma_l^2 = alpha * exp(-l/decay), normalized to unit sum."""
    if path_count < 1:
        raise ValueError(f"path_count must be >= 1, got {path_count}")
    if decay <= 0:
        raise ValueError(f"decay must be positive, got {decay}")
    raw = np.exp(-np.arange(path_count) / float(decay))
    alpha = 1.0 / raw.sum()
    return ChannelProfile(path_count, float(decay), alpha * raw, float(alpha))


def sample_taps(profile: ChannelProfile, seed, count: int = 1,
                dtype=np.float64) -> np.ndarray:
    """Draw ``count`` i.i.d. tap vectors as [count, L, 2] interleaved pairs."""
    rng = np.random.default_rng(seed)
    scale = np.sqrt(profile.path_powers / 2.0)
    taps = rng.normal(size=(count, profile.path_count, 2)) * scale[None, :, None]
    return taps.astype(dtype)


def sample_channel(profile: ChannelProfile, seed,
                   noise_var: float = 0.0) -> ChannelRealization:
    """Sample one realization; deterministic for a given seed."""
    taps = sample_taps(profile, seed, count=1)[0]
    return ChannelRealization(taps=taps, noise_var=float(noise_var),
                              seed=int(seed) if np.isscalar(seed) else 0)


def sample_noise(shape: tuple, noise_var: float, seed, dtype=np.float64) -> np.ndarray:
    """Circular complex Gaussian noise as interleaved pairs, var sigma^2 total."""
    rng = np.random.default_rng(seed)
    return (rng.normal(size=shape) * np.sqrt(noise_var / 2.0)).astype(dtype)


def apply_channel(y: ad.Grid, ch, noise_seed=None,
                  noise: np.ndarray | None = None) -> ad.Grid:
    """Propagate y through the channel: (h * y) + w, same-length output.

    ch is a ChannelRealization or a raw tap array [..., L, 2] broadcastable
    against y's leading dims (per-example taps in a batch). Noise may be
    supplied directly or drawn from noise_seed.
    """
    if isinstance(ch, ChannelRealization):
        taps = ch.taps
        noise_var = ch.noise_var
    else:
        taps = np.asarray(ch)
        noise_var = 0.0
    if y.size == 0:
        raise ValueError("apply_channel: empty input")
    out = ad.channel_conv(y, taps)
    if noise is None and noise_seed is not None and noise_var > 0.0:
        noise = sample_noise(out.shape, noise_var, noise_seed, dtype=y.dtype)
    if noise is not None:
        out = ad.add(out, ad.constant(np.asarray(noise, dtype=y.dtype)))
    return out


def receiver_snr(y_hat, noise_var: float) -> float:
    """Instantaneous receiver SNR, 10*log10(mean |y|^2 / sigma^2), in dB."""
    if noise_var <= 0.0:
        raise ValueError(f"noise_var must be positive, got {noise_var}")
    data = y_hat.data if isinstance(y_hat, ad.Grid) else np.asarray(y_hat)
    power = (data[..., 0] ** 2 + data[..., 1] ** 2).mean()
    return float(10.0 * np.log10(power / noise_var))


def snr_to_noise_var(snr_db: float) -> float:
    """Noise power giving the target SNR at unit transmit power."""
    return float(10.0 ** (-snr_db / 10.0))


def frequency_response(taps: np.ndarray, n_fft: int) -> np.ndarray:
    """Per-subcarrier response H[k]: plain DFT of the zero-padded taps.

    taps: [..., L, 2] interleaved; returns [..., n_fft, 2].
    """
    z = taps[..., 0] + 1j * taps[..., 1]
    h = np.fft.fft(z, n=n_fft, axis=-1)
    out = np.empty(h.shape + (2,), dtype=taps.dtype)
    out[..., 0] = h.real
    out[..., 1] = h.imag
    return out
