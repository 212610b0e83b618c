"""Desk-scale encoder/generator/discriminator networks and the end-to-end
link variants: direct transmission, OFDM with a blackbox decoder, explicit
MMSE estimation/equalization, the residual-subnet receiver, and
CSI-feedback precoding.

Images enter normalized to [-1, 1]; reconstructions leave through a sigmoid
so pixels live in [0, 1]. All pipeline stages are differentiable, so
gradients reach the encoder through the sampled channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import ofdm as ofdm_mod
from . import precoding as precoding_mod
from . import receiver as rx
from .channel import frequency_response
from .ofdm import OfdmConfig

__all__ = [
    "MODES",
    "ModelSpec",
    "init_model",
    "encode",
    "decode",
    "link_forward",
    "generator_forward",
    "discriminator_forward",
    "lsgan_losses",
    "params_to_blocks",
    "blocks_to_params",
]

MODES = (
    "direct",
    "ofdm-blackbox",
    "ofdm-ce-eq",
    "ofdm-ce-eq-subnets",
    "ofdm-feedback",
)


@dataclass(frozen=True)
class ModelSpec:
    """Structural constants for one model variant."""

    mode: str = "ofdm-ce-eq-subnets"
    image_channels: int = 3
    image_size: int = 32
    downsamples: int = 2
    channels: int = 14          # encoder output channels in OFDM modes
    base_width: int = 16
    subnet_width: int = 32
    clip_ratio: float | None = None
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode '{self.mode}', expected one of {MODES}")
        if self.image_size % (2 ** self.downsamples) != 0:
            raise ValueError(
                f"image size {self.image_size} not divisible by "
                f"2^{self.downsamples}")
        if self.mode != "direct":
            n_complex = self.channels * self.grid_size ** 2 // 2
            if self.channels % 2 or n_complex != self.ofdm.n_data * self.ofdm.n_fft:
                raise ValueError(
                    f"channels={self.channels} with grid {self.grid_size}x"
                    f"{self.grid_size} yields {n_complex} complex symbols; "
                    f"OFDM config needs {self.ofdm.n_data}*{self.ofdm.n_fft}")
        else:
            if (2 * self.ofdm.packet_len) % (self.grid_size ** 2):
                raise ValueError(
                    f"direct mode: packet length {self.ofdm.packet_len} does "
                    f"not fold onto the {self.grid_size}x{self.grid_size} grid")

    @property
    def grid_size(self) -> int:
        return self.image_size // (2 ** self.downsamples)

    @property
    def encoder_channels(self) -> int:
        """Encoder output channels; direct mode matches the OFDM packet's
        channel uses so rates are comparable."""
        if self.mode == "direct":
            return 2 * self.ofdm.packet_len // (self.grid_size ** 2)
        return self.channels

    @property
    def generator_channels(self) -> int:
        if self.mode == "direct":
            return self.encoder_channels
        if self.mode == "ofdm-blackbox":
            return 2 * self.ofdm.n_data + 4
        return self.channels

    @property
    def channel_uses(self) -> int:
        if self.mode == "direct":
            return self.encoder_channels * self.grid_size ** 2 // 2
        return self.ofdm.packet_len

    def cpp(self) -> float:
        return self.channel_uses / (
            self.image_size * self.image_size * self.image_channels)


# ---------------------------------------------------------------------------
# parameter initialization
# ---------------------------------------------------------------------------

def _he(rng, cin, cout, k, dtype):
    std = np.sqrt(2.0 / (cin * k * k))
    return ad.Grid((rng.normal(size=(cout, cin, k, k)) * std).astype(dtype),
                   requires_grad=True)


def _he_t(rng, cin, cout, k, dtype):
    std = np.sqrt(2.0 / (cin * k * k))
    return ad.Grid((rng.normal(size=(cin, cout, k, k)) * std).astype(dtype),
                   requires_grad=True)


def _zeros(shape, dtype):
    return ad.Grid(np.zeros(shape, dtype=dtype), requires_grad=True)


def _stage_widths(spec: ModelSpec) -> list[int]:
    """Channel widths after each down-scaling stage."""
    b = spec.base_width
    return [b] + [2 * b] * (spec.downsamples - 1)


def _init_encoder(rng, spec: ModelSpec, dtype) -> dict:
    widths = _stage_widths(spec)
    params = {}
    cin = spec.image_channels
    for i, width in enumerate(widths, start=1):
        params[f"down{i}.w"] = _he(rng, cin, width, 4, dtype)
        params[f"down{i}.b"] = _zeros((width,), dtype)
        cin = width
    for name in ("res1", "res2"):
        params[f"{name}.c1.w"] = _he(rng, cin, cin, 3, dtype)
        params[f"{name}.c1.b"] = _zeros((cin,), dtype)
        params[f"{name}.c2.w"] = _he(rng, cin, cin, 3, dtype)
        params[f"{name}.c2.b"] = _zeros((cin,), dtype)
    params["out.w"] = _he(rng, cin, spec.encoder_channels, 3, dtype)
    params["out.b"] = _zeros((spec.encoder_channels,), dtype)
    return params


def _init_generator(rng, spec: ModelSpec, dtype) -> dict:
    widths = _stage_widths(spec)
    deep = widths[-1]
    params = {
        "in.w": _he(rng, spec.generator_channels, deep, 3, dtype),
        "in.b": _zeros((deep,), dtype),
    }
    for name in ("res1", "res2"):
        params[f"{name}.c1.w"] = _he(rng, deep, deep, 3, dtype)
        params[f"{name}.c1.b"] = _zeros((deep,), dtype)
        params[f"{name}.c2.w"] = _he(rng, deep, deep, 3, dtype)
        params[f"{name}.c2.b"] = _zeros((deep,), dtype)
    cin = deep
    outs = widths[-2::-1] + [spec.image_channels]
    for i, cout in enumerate(outs, start=1):
        params[f"up{i}.w"] = _he_t(rng, cin, cout, 4, dtype)
        params[f"up{i}.b"] = _zeros((cout,), dtype)
        cin = cout
    return params


def _init_discriminator(rng, spec: ModelSpec, dtype) -> dict:
    b = spec.base_width
    return {
        "c1.w": _he(rng, spec.image_channels, b, 4, dtype),
        "c1.b": _zeros((b,), dtype),
        "c2.w": _he(rng, b, 2 * b, 4, dtype),
        "c2.b": _zeros((2 * b,), dtype),
        "c3.w": _he(rng, 2 * b, 4 * b, 4, dtype),
        "c3.b": _zeros((4 * b,), dtype),
        "head.w": _he(rng, 4 * b, 1, 3, dtype),
        "head.b": _zeros((1,), dtype),
    }


def init_model(spec: ModelSpec, seed: int, adversarial: bool = False,
               dtype=np.float32) -> dict:
    """All trainable blocks for the given variant, keyed by dotted names."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x1397]))
    params: dict[str, ad.Grid] = {}
    for name, g in _init_encoder(rng, spec, dtype).items():
        params[f"encoder.{name}"] = g
    for name, g in _init_generator(rng, spec, dtype).items():
        params[f"generator.{name}"] = g
    if spec.mode == "ofdm-ce-eq-subnets":
        for name, g in rx.init_subnet(rng, 6, spec.subnet_width, dtype=dtype).items():
            params[f"ce.{name}"] = g
        for name, g in rx.init_subnet(rng, 6, spec.subnet_width, dtype=dtype).items():
            params[f"eq.{name}"] = g
    if spec.mode == "ofdm-feedback":
        for name, g in precoding_mod.init_precoder(
                rng, spec.subnet_width, dtype=dtype).items():
            params[f"precoder.{name}"] = g
        for name, g in rx.init_subnet(rng, 6, spec.subnet_width, dtype=dtype).items():
            params[f"eq.{name}"] = g
    if adversarial:
        for name, g in _init_discriminator(rng, spec, dtype).items():
            params[f"disc.{name}"] = g
    return params


# ---------------------------------------------------------------------------
# network forwards
# ---------------------------------------------------------------------------

def _res_block(params, prefix, x):
    h = ad.relu(ad.conv2d(x, params[f"{prefix}.c1.w"], params[f"{prefix}.c1.b"],
                          stride=1, padding=1))
    h = ad.conv2d(h, params[f"{prefix}.c2.w"], params[f"{prefix}.c2.b"],
                  stride=1, padding=1)
    return ad.relu(ad.add(x, h))


def encoder_forward(params: dict, x: ad.Grid) -> ad.Grid:
    """Down-scaling conv stack; input pixels must be in [-1, 1]."""
    h = x
    i = 1
    while f"encoder.down{i}.w" in params:
        h = ad.relu(ad.conv2d(h, params[f"encoder.down{i}.w"],
                              params[f"encoder.down{i}.b"],
                              stride=2, padding=1))
        i += 1
    h = _res_block(params, "encoder.res1", h)
    h = _res_block(params, "encoder.res2", h)
    return ad.conv2d(h, params["encoder.out.w"], params["encoder.out.b"],
                     stride=1, padding=1)


def generator_forward(params: dict, z: ad.Grid) -> ad.Grid:
    """Mirror of the encoder; sigmoid keeps pixels in [0, 1]."""
    h = ad.relu(ad.conv2d(z, params["generator.in.w"], params["generator.in.b"],
                          stride=1, padding=1))
    h = _res_block(params, "generator.res1", h)
    h = _res_block(params, "generator.res2", h)
    i = 1
    while f"generator.up{i + 1}.w" in params:
        h = ad.relu(ad.conv_transpose2d(h, params[f"generator.up{i}.w"],
                                        params[f"generator.up{i}.b"],
                                        stride=2, padding=1))
        i += 1
    h = ad.conv_transpose2d(h, params[f"generator.up{i}.w"],
                            params[f"generator.up{i}.b"], stride=2, padding=1)
    return ad.sigmoid(h)


def discriminator_forward(params: dict, x: ad.Grid) -> ad.Grid:
    """Patch scores averaged to one value per image, shape [B]."""
    h = ad.leaky_relu(ad.conv2d(x, params["disc.c1.w"], params["disc.c1.b"],
                                stride=2, padding=1))
    h = ad.leaky_relu(ad.conv2d(h, params["disc.c2.w"], params["disc.c2.b"],
                                stride=2, padding=1))
    h = ad.leaky_relu(ad.conv2d(h, params["disc.c3.w"], params["disc.c3.b"],
                                stride=2, padding=1))
    h = ad.conv2d(h, params["disc.head.w"], params["disc.head.b"],
                  stride=1, padding=1)
    axes = tuple(range(1, h.data.ndim))
    return ad.reduce_mean(h, axis=axes)


# ---------------------------------------------------------------------------
# TX / RX pipelines
# ---------------------------------------------------------------------------

def encode(params: dict, spec: ModelSpec, x: ad.Grid,
           h_true: np.ndarray | None = None) -> dict:
    """Images [B,C,H,W] in [0,1] -> unit-power channel input.

    Returns a dict with the serialized TX samples ("tx", [B,T,2]) and, for
    OFDM modes, the normalized frequency-domain symbols ("symbols").
    """
    if x.data.ndim != 4:
        raise ValueError(f"encode expects [B,C,H,W] images, got {x.shape}")
    batch = x.shape[0]
    z = encoder_forward(params, ad.sub(ad.mul(x, 2.0), 1.0))
    if spec.mode == "direct":
        half = spec.encoder_channels // 2
        n = spec.channel_uses
        re = ad.reshape(z[:, :half], (batch, n, 1))
        im = ad.reshape(z[:, half:], (batch, n, 1))
        seq = ad.concat([re, im], axis=-1)
        tx = ofdm_mod.power_normalize(seq, batch_dims=1)
        return {"tx": tx, "symbols": None, "encoded": z}
    symbols = ofdm_mod.power_normalize(
        ofdm_mod.map_symbols(z, spec.ofdm), batch_dims=1)
    if spec.mode == "ofdm-feedback":
        if h_true is None:
            raise ValueError("ofdm-feedback mode needs the true channel response")
        symbols = precoding_mod.precode(symbols, h_true, params, "precoder",
                                        batch_dims=1)
    tx = ofdm_mod.modulate(symbols, spec.ofdm)
    tx = ofdm_mod.clip(tx, spec.clip_ratio, batch_dims=1)
    return {"tx": tx, "symbols": symbols, "encoded": z}


def _planes(x: ad.Grid) -> ad.Grid:
    """[B, rows, n_fft, 2] complex rows to [B, 2*rows, s, s] image planes."""
    b, rows, n_fft, _ = x.shape
    flat = ad.reshape(x, (b * rows, n_fft, 2))
    folded = rx.fold_rows(flat)             # [B*rows, 2, s, s]
    s = folded.shape[-1]
    return ad.reshape(folded, (b, rows * 2, s, s))


def decode(params: dict, spec: ModelSpec, *, pilot_rx: ad.Grid | None = None,
           data_rx: ad.Grid | None = None, noise_var: float = 0.0,
           h_true: np.ndarray | None = None,
           time_rx: ad.Grid | None = None) -> tuple[ad.Grid, dict]:
    """Receiver for the configured variant; returns (x_hat, extras).

    extras carries the channel estimates ("h_mmse", "h_hat") and equalized
    symbols when the variant computes them.
    """
    cfg = spec.ofdm
    extras: dict = {"h_mmse": None, "h_hat": None, "y_eq": None}
    if spec.mode == "direct":
        if time_rx is None:
            raise ValueError("direct mode decodes from time-domain samples")
        b, n, _ = time_rx.shape
        half = spec.encoder_channels // 2
        g = spec.grid_size
        re = ad.reshape(time_rx[..., 0], (b, half, g, g))
        im = ad.reshape(time_rx[..., 1], (b, half, g, g))
        z = ad.concat([re, im], axis=1)
        return generator_forward(params, z), extras

    if pilot_rx is None or data_rx is None:
        raise ValueError(f"mode '{spec.mode}' decodes from OFDM symbol grids")
    if spec.mode == "ofdm-blackbox":
        b = data_rx.shape[0]
        pilots = np.broadcast_to(cfg.pilot_symbols(data_rx.dtype),
                                 (b, cfg.n_pilot, cfg.n_fft, 2)).copy()
        mean_rx = ad.reduce_mean(pilot_rx, axis=-3, keepdims=True)
        z = ad.concat([
            _planes(data_rx),
            _planes(mean_rx),
            _planes(ad.constant(pilots[:, :1])),
        ], axis=1)
        return generator_forward(params, z), extras

    pilots = cfg.pilot_symbols(data_rx.dtype)
    if spec.mode in ("ofdm-ce-eq", "ofdm-ce-eq-subnets"):
        h_mmse = rx.mmse_channel_estimate(pilot_rx, pilots, noise_var)
        extras["h_mmse"] = h_mmse
        if spec.mode == "ofdm-ce-eq-subnets":
            h_hat = rx.refine_channel(h_mmse, pilots, pilot_rx, params, "ce")
        else:
            h_hat = h_mmse
        extras["h_hat"] = h_hat
        y_eq = rx.mmse_equalize(data_rx, h_hat, noise_var)
        if spec.mode == "ofdm-ce-eq-subnets":
            y_eq = rx.refine_equalized(y_eq, h_hat, data_rx, params, "eq")
        extras["y_eq"] = y_eq
    elif spec.mode == "ofdm-feedback":
        if h_true is None:
            raise ValueError("ofdm-feedback decoding needs the true channel response")
        h_const = ad.constant(np.asarray(h_true, dtype=data_rx.dtype))
        y_eq = rx.mmse_equalize(data_rx, h_const, noise_var)
        y_eq = rx.refine_equalized(y_eq, h_const, data_rx, params, "eq")
        extras["y_eq"] = y_eq
    else:
        raise ValueError(f"unknown mode '{spec.mode}'")

    z = ofdm_mod.unmap_symbols(y_eq, spec.channels, spec.grid_size,
                               spec.grid_size)
    return generator_forward(params, z), extras


def link_forward(params: dict, spec: ModelSpec, x: ad.Grid,
                 taps: np.ndarray, noise: np.ndarray | None,
                 noise_var: float) -> dict:
    """Full end-to-end pass: encode, channel, decode.

    taps: [B, L, 2] per-example channel realizations; noise: [B, T, 2] or
    None for a noiseless link. Returns x_hat plus TX/RX intermediates.
    """
    h_true = frequency_response(taps, spec.ofdm.n_fft) \
        if spec.mode != "direct" else None
    enc = encode(params, spec, x, h_true=h_true)
    tx = enc["tx"]
    rx_samples = ad.channel_conv(tx, np.asarray(taps, dtype=tx.dtype))
    if noise is not None:
        rx_samples = ad.add(rx_samples,
                            ad.constant(np.asarray(noise, dtype=tx.dtype)))
    if spec.mode == "direct":
        x_hat, extras = decode(params, spec, time_rx=rx_samples,
                               noise_var=noise_var)
    else:
        pilot_rx, data_rx = ofdm_mod.demodulate(rx_samples, spec.ofdm)
        x_hat, extras = decode(params, spec, pilot_rx=pilot_rx,
                               data_rx=data_rx, noise_var=noise_var,
                               h_true=h_true)
    extras.update(tx=tx, rx=rx_samples, h_true=h_true,
                  symbols=enc["symbols"])
    return {"x_hat": x_hat, **extras}


def lsgan_losses(params: dict, x: ad.Grid,
                 x_hat: ad.Grid) -> tuple[ad.Grid, ad.Grid]:
    """Least-squares adversarial losses (labels: 1 real, 0 generated).

    Returns (discriminator loss, generator loss); the discriminator loss
    sees detached reconstructions and the generator loss sees frozen
    discriminator weights, so neither side updates the other.
    """
    scores_real = discriminator_forward(params, x)
    scores_fake = discriminator_forward(params, x_hat.detach())
    l_d = ad.add(
        ad.reduce_mean(ad.square(ad.sub(scores_real, 1.0))),
        ad.reduce_mean(ad.square(scores_fake)))
    frozen = dict(params)
    for key, grid in params.items():
        if key.startswith("disc."):
            frozen[key] = grid.detach()
    scores_gen = discriminator_forward(frozen, x_hat)
    l_g = ad.reduce_mean(ad.square(ad.sub(scores_gen, 1.0)))
    return l_d, l_g


# ---------------------------------------------------------------------------
# checkpoint bridging
# ---------------------------------------------------------------------------

def params_to_blocks(params: dict) -> dict[str, np.ndarray]:
    return {name: np.asarray(grid.data, dtype=np.float32)
            for name, grid in params.items()}


def blocks_to_params(blocks: dict[str, np.ndarray],
                     requires_grad: bool = True) -> dict:
    return {name: ad.Grid(arr.copy(), requires_grad=requires_grad)
            for name, arr in blocks.items()}
