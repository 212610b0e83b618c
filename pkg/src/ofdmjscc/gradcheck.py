"""Finite-difference oracle suite covering every differentiable operation
in the link: run from the CLI (``gradcheck``) and by the acceptance tests.

Each check builds a small random problem with a non-degenerate scalar
objective and compares the analytic backward pass against central
differences at 64-bit, over several seeds.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import ofdm as ofdm_mod
from . import receiver as rx
from .channel import sample_taps, exponential_profile
from .ofdm import OfdmConfig

__all__ = ["run_suite", "TOLERANCE", "SEEDS"]

TOLERANCE = 1e-5
SEEDS = (0, 1, 2, 3, 4)


def _loss_to(target: np.ndarray):
    """Fixed-target quadratic so repeated FD evaluations see one function."""
    anchor = ad.constant(target)

    def loss(out: ad.Grid) -> ad.Grid:
        return ad.reduce_mean(ad.square(ad.sub(out, anchor)))

    return loss


def _check(builder, seeds=SEEDS, step: float = 1e-6) -> float:
    worst = 0.0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        f, inputs = builder(rng)
        worst = max(worst, ad.gradient_check(f, inputs, step=step))
    return worst


def _elementwise_case(op, binary: bool, positive: bool = False):
    def builder(rng):
        vals = rng.normal(size=(3, 4))
        if positive:
            vals = np.abs(vals) + 0.5
        a = ad.Grid(vals)
        loss = _loss_to(rng.normal(size=(3, 4)))
        if binary:
            b = ad.Grid(np.abs(rng.normal(size=(3, 4))) + 0.5)
            return (lambda x, y: loss(op(x, y))), [a, b]
        return (lambda x: loss(op(x))), [a]
    return builder


def _activation_case(op):
    def builder(rng):
        # keep points away from kinks and out of deep saturation, where the
        # tiny true derivative would put the FD oracle at its noise floor
        vals = rng.normal(size=(4, 5)) * 0.75
        vals[np.abs(vals) < 1e-3] += 0.1
        a = ad.Grid(vals)
        loss = _loss_to(rng.normal(size=(4, 5)))
        return (lambda x: loss(op(x))), [a]
    return builder


def _complex_case(op, binary: bool = True):
    def builder(rng):
        a = ad.Grid(rng.normal(size=(3, 4, 2)))
        shape = (3, 4, 2) if op is not ad.cabs2 else (3, 4)
        loss = _loss_to(rng.normal(size=shape))
        if binary:
            b = ad.Grid(rng.normal(size=(4, 2)))
            return (lambda x, y: loss(op(x, y))), [a, b]
        return (lambda x: loss(op(x))), [a]
    return builder


def _conv_case(rng):
    x = ad.Grid(rng.normal(size=(2, 2, 6, 6)))
    w = ad.Grid(rng.normal(size=(3, 2, 4, 4)) * 0.5)
    b = ad.Grid(rng.normal(size=(3,)))
    loss = _loss_to(rng.normal(size=(2, 3, 3, 3)))
    return (lambda xx, ww, bb: loss(
        ad.conv2d(xx, ww, bb, stride=2, padding=1))), [x, w, b]


def _conv_transpose_case(rng):
    x = ad.Grid(rng.normal(size=(2, 3, 3, 3)))
    w = ad.Grid(rng.normal(size=(3, 2, 4, 4)) * 0.5)
    b = ad.Grid(rng.normal(size=(2,)))
    loss = _loss_to(rng.normal(size=(2, 2, 6, 6)))
    return (lambda xx, ww, bb: loss(
        ad.conv_transpose2d(xx, ww, bb, stride=2, padding=1))), [x, w, b]


def _dft_case(rng):
    a = ad.Grid(rng.normal(size=(2, 8, 2)))
    loss = _loss_to(rng.normal(size=(2, 8, 2)))
    return (lambda x: loss(ad.dft_rows(ad.idft_rows(x)))), [a]


def _cp_case(rng):
    cfg = OfdmConfig(n_fft=4, n_cp=2, n_pilot=1, n_data=2, pilot_seed=1)
    symbols = ad.Grid(rng.normal(size=(2, 2, 4, 2)))
    loss = _loss_to(rng.normal(size=(2, 2, 4, 2)))

    def f(s):
        tx = ofdm_mod.modulate(s, cfg)
        _, data = ofdm_mod.demodulate(tx, cfg)
        return loss(data)

    return f, [symbols]


def _channel_conv_case(rng):
    taps = rng.normal(size=(2, 4, 2)) * 0.5
    y = ad.Grid(rng.normal(size=(2, 12, 2)))
    loss = _loss_to(rng.normal(size=(2, 12, 2)))
    return (lambda x: loss(ad.channel_conv(x, taps))), [y]


def _normalize_case(rng):
    y = ad.Grid(rng.normal(size=(2, 8, 2)))
    loss = _loss_to(rng.normal(size=(2, 8, 2)))
    return (lambda x: loss(ofdm_mod.power_normalize(x, batch_dims=1))), [y]


def _clip_case(rng):
    # samples away from the clip threshold (measure-zero kink)
    vals = rng.normal(size=(2, 16, 2))
    y = ad.Grid(vals)
    loss = _loss_to(rng.normal(size=(2, 16, 2)))
    return (lambda x: loss(ofdm_mod.clip(x, 1.0, batch_dims=1))), [y]


def _mmse_ce_case(rng):
    cfg = OfdmConfig(n_fft=16, n_cp=4, n_pilot=2, n_data=1, pilot_seed=3)
    pilots = cfg.pilot_symbols()
    pilot_rx = ad.Grid(rng.normal(size=(2, 2, 16, 2)))
    loss = _loss_to(rng.normal(size=(2, 16, 2)))
    return (lambda x: loss(
        rx.mmse_channel_estimate(x, pilots, 0.3))), [pilot_rx]


def _mmse_eq_case(rng):
    data_rx = ad.Grid(rng.normal(size=(2, 3, 16, 2)))
    h_hat = ad.Grid(rng.normal(size=(2, 16, 2)))
    loss = _loss_to(rng.normal(size=(2, 3, 16, 2)))
    return (lambda d, h: loss(rx.mmse_equalize(d, h, 0.3))), [data_rx, h_hat]


def _subnet_case(rng):
    params = {}
    for name, g in rx.init_subnet(rng, 6, 3, dtype=np.float64).items():
        arr = g.data if "head" not in name else rng.normal(size=g.shape) * 0.3
        params["ce." + name] = ad.Grid(np.asarray(arr))
    pilots = OfdmConfig(n_fft=16, n_cp=4, n_pilot=1, n_data=1,
                        pilot_seed=3).pilot_symbols()
    h_mmse = ad.Grid(rng.normal(size=(2, 16, 2)))
    pilot_rx = ad.Grid(rng.normal(size=(2, 1, 16, 2)))
    w = params["ce.conv1.w"]
    loss = _loss_to(rng.normal(size=(2, 16, 2)))

    def f(h, p, ww):
        params["ce.conv1.w"] = ww
        return loss(rx.refine_channel(h, pilots, p, params, "ce"))

    return f, [h_mmse, pilot_rx, w]


def _losses_case(rng):
    x = ad.Grid(rng.uniform(size=(2, 1, 4, 4)))
    x_hat = ad.Grid(rng.uniform(size=(2, 1, 4, 4)))
    h_true = rng.normal(size=(2, 8, 2))
    h_hat = ad.Grid(rng.normal(size=(2, 8, 2)))

    def f(xh, hh):
        return rx.losses(x, xh, h_true, hh, lambda_c=0.5).l_total

    return f, [x_hat, h_hat]


def _full_graph_case(rng):
    """Tiny encoder -> OFDM -> channel -> MMSE receiver -> decoder graph."""
    from . import models as md
    cfg = OfdmConfig(n_fft=4, n_cp=4, n_pilot=1, n_data=2, pilot_seed=5)
    spec = md.ModelSpec(mode="ofdm-ce-eq", image_channels=1, image_size=4,
                        downsamples=1, channels=4, base_width=4,
                        subnet_width=2, ofdm=cfg)
    params = md.init_model(spec, seed=0, dtype=np.float64)
    profile = exponential_profile(3, 2.0)
    taps = sample_taps(profile, 11, count=2)
    x = ad.Grid(rng.uniform(size=(2, 1, 4, 4)).astype(np.float64))
    w_probe = params["encoder.down1.w"]

    def f(img, w):
        params["encoder.down1.w"] = w
        out = md.link_forward(params, spec, img, taps, None, 0.2)
        return ad.reduce_mean(ad.square(ad.sub(out["x_hat"], img)))

    return f, [x, w_probe]


# (name, builder, FD step); deep composites use a slightly larger step to
# stay above the central-difference cancellation floor
CASES = [
    ("add", _elementwise_case(ad.add, True)),
    ("sub", _elementwise_case(ad.sub, True)),
    ("mul", _elementwise_case(ad.mul, True)),
    ("div", _elementwise_case(ad.div, True)),
    ("square", _elementwise_case(ad.square, False)),
    ("sqrt", _elementwise_case(ad.sqrt, False, positive=True)),
    ("relu", _activation_case(ad.relu)),
    ("leaky_relu", _activation_case(ad.leaky_relu)),
    ("sigmoid", _activation_case(ad.sigmoid)),
    ("tanh", _activation_case(ad.tanh)),
    ("softplus", _activation_case(ad.softplus)),
    ("cmul", _complex_case(ad.cmul)),
    ("cmulc", _complex_case(ad.cmulc)),
    ("conj", _complex_case(ad.conj, binary=False)),
    ("cabs2", _complex_case(ad.cabs2, binary=False)),
    ("conv2d", _conv_case),
    ("conv_transpose2d", _conv_transpose_case),
    ("dft_idft", _dft_case),
    ("cyclic_prefix_chain", _cp_case),
    ("channel_conv", _channel_conv_case),
    ("power_normalize", _normalize_case),
    ("clip", _clip_case),
    ("mmse_channel_estimate", _mmse_ce_case),
    ("mmse_equalize", _mmse_eq_case),
    ("refine_subnet", _subnet_case),
    ("losses", _losses_case),
    ("full_link_graph", _full_graph_case, 1e-5),
]


def run_suite(verbose: bool = False) -> dict[str, float]:
    """Run every case; returns op name -> worst relative error."""
    results = {}
    for case in CASES:
        name, builder = case[0], case[1]
        step = case[2] if len(case) > 2 else 1e-6
        err = _check(builder, step=step)
        results[name] = err
        if verbose:
            status = "ok" if err < TOLERANCE else "FAIL"
            print(f"{name:24s} {err:.3e}  {status}")
    return results
