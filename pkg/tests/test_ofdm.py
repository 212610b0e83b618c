import numpy as np
import pytest

from ofdmjscc import autodiff as ad
from ofdmjscc import channel as ch
from ofdmjscc import ofdm


def random_symbols(rng, cfg, batch=None, dtype=np.float64):
    shape = (cfg.n_data, cfg.n_fft, 2) if batch is None \
        else (batch, cfg.n_data, cfg.n_fft, 2)
    return ad.Grid(rng.normal(size=shape).astype(dtype) / np.sqrt(2.0))


class TestConfig:
    def test_pilots_unit_modulus_and_identical(self):
        cfg = ofdm.OfdmConfig(n_pilot=4)
        pil = cfg.pilot_symbols()
        mag = pil[..., 0] ** 2 + pil[..., 1] ** 2
        assert np.allclose(mag, 1.0, atol=1e-12)
        for row in pil[1:]:
            assert np.array_equal(row, pil[0])

    def test_packet_length(self):
        cfg = ofdm.OfdmConfig(n_fft=64, n_cp=16, n_pilot=1, n_data=6)
        assert cfg.packet_len == 7 * 80


class TestMapSymbols:
    def test_dimension_formula_cpp_0182(self):
        # C=12, 32x32, d=2, L_fft=64 -> N_s = 12288/2048 = 6
        cfg = ofdm.OfdmConfig(n_data=6)
        z = ad.Grid(np.random.default_rng(0).normal(size=(12, 8, 8)))
        y = ofdm.map_symbols(z, cfg)
        assert y.shape == (6, 64, 2)

    def test_dimension_formula_cpp_0208(self):
        # C=14 -> N_s = 7, CPP = 8*80/3072
        cfg = ofdm.OfdmConfig(n_data=7)
        z = ad.Grid(np.random.default_rng(0).normal(size=(14, 8, 8)))
        y = ofdm.map_symbols(z, cfg)
        assert y.shape == (7, 64, 2)
        cpp = (1 + 7) * (64 + 16) / (32 * 32 * 3)
        assert cpp == pytest.approx(0.2083, abs=5e-4)

    def test_non_integral_rows_error_names_dimensions(self):
        cfg = ofdm.OfdmConfig(n_data=6)
        z = ad.Grid(np.zeros((10, 8, 8)))
        with pytest.raises(ValueError, match="10x8x8"):
            ofdm.map_symbols(z, cfg)

    def test_map_unmap_identity(self):
        cfg = ofdm.OfdmConfig(n_data=6)
        rng = np.random.default_rng(3)
        z = ad.Grid(rng.normal(size=(2, 12, 8, 8)))
        y = ofdm.map_symbols(z, cfg)
        back = ofdm.unmap_symbols(y, 12, 8, 8)
        assert np.array_equal(back.data, z.data)


class TestModulate:
    def test_all_ones_row_is_impulse(self):
        cfg = ofdm.OfdmConfig(n_fft=8, n_cp=2, n_pilot=1, n_data=1)
        sym = np.zeros((1, 8, 2))
        sym[..., 0] = 1.0
        tx = ofdm.modulate(ad.Grid(sym), cfg).data
        data_block = tx[10:, :]          # after the pilot symbol's 10 samples
        body = data_block[2:, :]         # strip CP
        assert body[0, 0] == pytest.approx(np.sqrt(8.0), abs=1e-12)
        assert np.allclose(body[1:], 0.0, atol=1e-12)

    def test_cyclic_prefix_is_tail_copy(self):
        cfg = ofdm.OfdmConfig(n_fft=16, n_cp=4, n_pilot=1, n_data=2)
        rng = np.random.default_rng(1)
        tx = ofdm.modulate(random_symbols(rng, cfg), cfg).data
        blocks = tx.reshape(3, 20, 2)
        for blk in blocks:
            assert np.array_equal(blk[:4], blk[-4:])

    def test_roundtrip_identity_channel(self):
        cfg = ofdm.OfdmConfig()
        rng = np.random.default_rng(2)
        sym = random_symbols(rng, cfg)
        pilot_rx, data_rx = ofdm.demodulate(ofdm.modulate(sym, cfg), cfg)
        assert np.abs(data_rx.data - sym.data).max() < 1e-12
        assert np.abs(pilot_rx.data - cfg.pilot_symbols()).max() < 1e-12

    def test_length_mismatch_raises(self):
        cfg = ofdm.OfdmConfig()
        with pytest.raises(ValueError, match="length"):
            ofdm.demodulate(ad.Grid(np.zeros((100, 2))), cfg)


class TestFrequencyDomainIdentity:
    def test_pure_delay_channel(self):
        cfg = ofdm.OfdmConfig(n_fft=64, n_cp=16, n_pilot=1, n_data=2)
        rng = np.random.default_rng(4)
        sym = random_symbols(rng, cfg)
        taps = np.zeros((2, 2))
        taps[1, 0] = 1.0
        rx = ch.apply_channel(ofdm.modulate(sym, cfg), taps)
        _, data_rx = ofdm.demodulate(rx, cfg)
        k = np.arange(64)
        expect = np.exp(-2j * np.pi * k / 64)
        got = data_rx.data[..., 0] + 1j * data_rx.data[..., 1]
        ref = sym.data[..., 0] + 1j * sym.data[..., 1]
        assert np.abs(got - expect[None] * ref).max() < 1e-9

    def test_random_multipath_identity(self):
        # Y_hat[j,k] = H[k] Y[j,k] with H the zero-padded DFT of the taps
        cfg = ofdm.OfdmConfig(n_fft=64, n_cp=16, n_pilot=1, n_data=6)
        profile = ch.exponential_profile(8, 4.0)
        rng = np.random.default_rng(5)
        sym = random_symbols(rng, cfg, batch=4)
        taps = ch.sample_taps(profile, 99, count=4)
        rx = ch.apply_channel(ofdm.modulate(sym, cfg), taps)
        _, data_rx = ofdm.demodulate(rx, cfg)
        h = ch.frequency_response(taps, 64)
        hc = (h[..., 0] + 1j * h[..., 1])[:, None, :]
        got = data_rx.data[..., 0] + 1j * data_rx.data[..., 1]
        ref = sym.data[..., 0] + 1j * sym.data[..., 1]
        assert np.abs(got - hc * ref).max() < 1e-9

    def test_modulate_adjoint_inner_product(self):
        # <A y, z> == <y, A^H z> for the linear part of the packetizer
        cfg = ofdm.OfdmConfig(n_fft=16, n_cp=4, n_pilot=1, n_data=3)
        rng = np.random.default_rng(6)
        y = ad.Grid(rng.normal(size=(3, 16, 2)), requires_grad=True)
        zero = ofdm.modulate(ad.Grid(np.zeros((3, 16, 2))), cfg).data
        z = rng.normal(size=zero.shape)
        tx = ofdm.modulate(y, cfg)
        lhs = np.vdot(tx.data - zero, z)
        loss = ad.reduce_sum(ad.mul(tx, ad.constant(z)))
        loss.backward()
        rhs = np.vdot(y.data, y.grad)
        assert abs(lhs - rhs) < 1e-10


class TestPowerNormalize:
    def test_scales_power_four_by_half(self):
        y = np.zeros((8, 2))
        y[:, 0] = 2.0
        out = ofdm.power_normalize(ad.Grid(y))
        assert np.allclose(out.data[:, 0], 1.0, atol=1e-12)

    def test_unit_power_fixed_point(self):
        rng = np.random.default_rng(7)
        y = rng.normal(size=(64, 2))
        y = y / np.sqrt((y[..., 0] ** 2 + y[..., 1] ** 2).mean())
        out = ofdm.power_normalize(ad.Grid(y.copy()))
        assert np.allclose(out.data, y, atol=1e-12)

    def test_all_zero_raises(self):
        with pytest.raises(ValueError, match="zero"):
            ofdm.power_normalize(ad.Grid(np.zeros((4, 2))))

    def test_gradcheck_through_mse(self):
        rng = np.random.default_rng(8)
        target = rng.normal(size=(12, 2))

        def f(y):
            out = ofdm.power_normalize(y)
            return ad.reduce_mean(ad.square(ad.sub(out, ad.constant(target))))

        assert ad.gradient_check(f, [ad.Grid(rng.normal(size=(12, 2)))]) < 1e-5


class TestPapr:
    def test_constant_amplitude_zero_db(self):
        y = np.ones((16, 2))
        assert ofdm.papr(y) == pytest.approx(0.0, abs=1e-12)

    def test_impulse_six_db(self):
        y = np.zeros((4, 2))
        y[0, 0] = 1.0
        assert ofdm.papr(y) == pytest.approx(10 * np.log10(4), abs=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(9)
        y = rng.normal(size=(100, 2))
        for c in (2.0, 0.125, -8.0):
            # power-of-two scales commute with the ratio bit-exactly
            assert ofdm.papr(c * y) == ofdm.papr(y)
        for c in (-3.0, 0.7, 1e3):
            assert ofdm.papr(c * y) == pytest.approx(ofdm.papr(y), abs=1e-12)

    def test_batched(self):
        rng = np.random.default_rng(10)
        y = rng.normal(size=(5, 64, 2))
        out = ofdm.papr(y, batch_dims=1)
        assert out.shape == (5,)


class TestClip:
    def test_amplitude_clamped_phase_kept(self):
        # unit-power packet, one sample at amplitude 2, rho = 1
        y = np.zeros((4, 2))
        y[0] = [2 * np.cos(np.pi / 4), 2 * np.sin(np.pi / 4)]
        y[1:, 0] = np.sqrt((4.0 * 4 - 4.0) / 3 / 4)  # fill to mean power 1
        ps = (y[:, 0] ** 2 + y[:, 1] ** 2).mean()
        out = ofdm.clip(ad.Grid(y.copy()), 1.0, renormalize=False).data
        amp = np.sqrt(out[0, 0] ** 2 + out[0, 1] ** 2)
        assert amp == pytest.approx(np.sqrt(ps), rel=1e-12)
        assert np.arctan2(out[0, 1], out[0, 0]) == pytest.approx(np.pi / 4)

    def test_infinite_ratio_is_identity(self):
        rng = np.random.default_rng(11)
        y = rng.normal(size=(32, 2))
        out = ofdm.clip(ad.Grid(y.copy()), None)
        assert np.array_equal(out.data, y)
        out = ofdm.clip(ad.Grid(y.copy()), float("inf"))
        assert np.array_equal(out.data, y)

    def test_max_amplitude_bound_exact_many_packets(self):
        rng = np.random.default_rng(12)
        y = rng.normal(size=(10_000, 80, 2))
        packets = ad.Grid(y)
        power = y[..., 0] ** 2 + y[..., 1] ** 2
        ps = power.mean(axis=1)
        clipped = ofdm.clip(packets, 1.0, batch_dims=1,
                            renormalize=False).data
        amp = np.sqrt(clipped[..., 0] ** 2 + clipped[..., 1] ** 2)
        bound = 1.0 * np.sqrt(ps)[:, None]  # rho * sqrt(P_s), rho = 1
        assert np.all(amp <= bound)

    def test_renormalization_restores_power(self):
        rng = np.random.default_rng(13)
        y = rng.normal(size=(3, 100, 2))
        ps = (y[..., 0] ** 2 + y[..., 1] ** 2).mean(axis=1)
        out = ofdm.clip(ad.Grid(y), 0.9, batch_dims=1).data
        pc = (out[..., 0] ** 2 + out[..., 1] ** 2).mean(axis=1)
        assert np.allclose(pc, ps, rtol=1e-12)

    def test_papr_invariant_under_renormalization(self):
        rng = np.random.default_rng(14)
        y = ad.Grid(rng.normal(size=(200, 2)))
        pre = ofdm.clip(y, 1.1, renormalize=False)
        post = ofdm.clip(y, 1.1, renormalize=True)
        assert abs(ofdm.papr(pre) - ofdm.papr(post)) < 1e-12

    def test_idempotent_up_to_renormalization(self):
        # projecting twice against the same signal-power anchor changes
        # nothing; the renormalization factor is the only degree of freedom
        rng = np.random.default_rng(15)
        y = rng.normal(size=(500, 2))
        ps = (y[:, 0] ** 2 + y[:, 1] ** 2).mean()
        once = ofdm.clip(ad.Grid(y), 1.0, signal_power=ps,
                         renormalize=False)
        twice = ofdm.clip(once, 1.0, signal_power=ps, renormalize=False)
        assert np.abs(twice.data - once.data).max() < 1e-12
        renormed = ofdm.clip(ad.Grid(y), 1.0, signal_power=ps)
        scale = renormed.data[0, 0] / once.data[0, 0]
        assert np.allclose(renormed.data, scale * once.data, atol=1e-12)

    def test_invalid_ratio_raises(self):
        with pytest.raises(ValueError):
            ofdm.clip(ad.Grid(np.ones((4, 2))), -1.0)
