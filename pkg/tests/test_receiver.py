import numpy as np
import pytest

from ofdmjscc import autodiff as ad
from ofdmjscc import channel as ch
from ofdmjscc import ofdm
from ofdmjscc import receiver as rx


def pilots_for(n_pilot=1, n_fft=64):
    return ofdm.OfdmConfig(n_pilot=n_pilot, n_data=1,
                           n_fft=n_fft).pilot_symbols()


def as_complex(pairs):
    return pairs[..., 0] + 1j * pairs[..., 1]


def to_pairs(z):
    return np.stack([z.real, z.imag], axis=-1)


class TestMmseEstimate:
    def test_exact_at_zero_noise(self):
        pil = pilots_for(n_pilot=2)
        prof = ch.exponential_profile(8, 4.0)
        taps = ch.sample_taps(prof, 1, count=5)
        h = ch.frequency_response(taps, 64)
        rx_pairs = to_pairs(as_complex(h)[:, None, :] * as_complex(pil)[None])
        est = rx.mmse_channel_estimate(ad.Grid(rx_pairs), pil, 0.0)
        assert np.abs(est.data - h).max() < 1e-12

    def test_single_pilot_direct_value(self):
        # N_p=1, Y_p=1, received 2, sigma^2=1 -> 2/(1+1) = 1
        pil = np.zeros((1, 1, 2))
        pil[..., 0] = 1.0
        seen = np.zeros((1, 1, 1, 2))
        seen[..., 0] = 2.0
        est = rx.mmse_channel_estimate(ad.Grid(seen), pil, 1.0)
        assert est.data[0, 0, 0] == pytest.approx(1.0)
        assert est.data[0, 0, 1] == pytest.approx(0.0)

    def test_mse_decreases_with_pilots(self):
        # Monte-Carlo at 5 dB across N_p in {1,2,4,8}; also matches the
        # closed form sigma^2/(N_p + sigma^2) for unit-modulus pilots
        prof = ch.exponential_profile(8, 4.0)
        noise_var = ch.snr_to_noise_var(5.0)
        reps = 10_000
        taps = ch.sample_taps(prof, 21, count=reps)
        h = ch.frequency_response(taps, 64)
        hc = as_complex(h)
        mses = []
        for n_pilot in (1, 2, 4, 8):
            pil = pilots_for(n_pilot=n_pilot)
            pc = as_complex(pil)
            rng = np.random.default_rng(1000 + n_pilot)
            noise = (rng.normal(size=(reps, n_pilot, 64))
                     + 1j * rng.normal(size=(reps, n_pilot, 64))) \
                * np.sqrt(noise_var / 2.0)
            seen = to_pairs(hc[:, None, :] * pc[None] + noise)
            est = rx.mmse_channel_estimate(ad.Grid(seen), pil, noise_var)
            err = as_complex(est.data) - hc
            mse = float((np.abs(err) ** 2).mean())
            closed = noise_var / (n_pilot + noise_var)
            assert mse == pytest.approx(closed, rel=0.05)
            mses.append(mse)
        assert all(a > b for a, b in zip(mses, mses[1:]))

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError):
            rx.mmse_channel_estimate(ad.Grid(np.ones((1, 1, 2))),
                                     np.ones((1, 1, 2)), -0.1)


class TestMmseEqualize:
    def test_identity_channel(self):
        rng = np.random.default_rng(0)
        data = ad.Grid(rng.normal(size=(3, 16, 2)))
        h = np.zeros((16, 2))
        h[:, 0] = 1.0
        out = rx.mmse_equalize(data, ad.Grid(h), 0.0)
        assert np.abs(out.data - data.data).max() < 1e-12

    def test_zero_forcing_limit(self):
        rng = np.random.default_rng(1)
        ref = rng.normal(size=(2, 16, 2))
        h = np.zeros((16, 2))
        h[:, 0] = 2.0
        seen = ad.Grid(2.0 * ref)
        out = rx.mmse_equalize(seen, ad.Grid(h), 0.0)
        assert np.abs(out.data - ref).max() < 1e-12

    def test_converges_as_noise_vanishes(self):
        rng = np.random.default_rng(2)
        prof = ch.exponential_profile(8, 4.0)
        taps = ch.sample_taps(prof, 3, count=1)[0]
        h = ch.frequency_response(taps, 16)
        ref = rng.normal(size=(4, 16, 2))
        seen = to_pairs(as_complex(h)[None] * as_complex(ref))
        errs = []
        for noise_var in (1e-2, 1e-4, 1e-6):
            out = rx.mmse_equalize(ad.Grid(seen), ad.Grid(h.copy()), noise_var)
            errs.append(np.abs(out.data - ref).max())
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 1e-4

    def test_zero_channel_zero_noise_errors(self):
        data = ad.Grid(np.ones((1, 4, 2)))
        h = ad.Grid(np.zeros((4, 2)))
        with pytest.raises(ZeroDivisionError):
            rx.mmse_equalize(data, h, 0.0)


class TestSubnets:
    def make_params(self, prefix, rng, width=4, zero_head=True):
        params = {}
        for name, g in rx.init_subnet(rng, 6, width, dtype=np.float64).items():
            if not zero_head and "head" in name and name.endswith("w"):
                g = ad.Grid(rng.normal(size=g.shape) * 0.2, requires_grad=True)
            params[f"{prefix}.{name}"] = g
        return params

    def test_refine_channel_identity_at_init(self):
        rng = np.random.default_rng(3)
        params = self.make_params("ce", rng)
        pil = pilots_for()
        h_mmse = ad.Grid(rng.normal(size=(2, 64, 2)))
        seen = ad.Grid(rng.normal(size=(2, 1, 64, 2)))
        out = rx.refine_channel(h_mmse, pil, seen, params, "ce")
        assert np.array_equal(out.data, h_mmse.data)

    def test_refine_equalized_identity_at_init(self):
        rng = np.random.default_rng(4)
        params = self.make_params("eq", rng)
        y_eq = ad.Grid(rng.normal(size=(2, 3, 64, 2)))
        h_hat = ad.Grid(rng.normal(size=(2, 64, 2)))
        seen = ad.Grid(rng.normal(size=(2, 3, 64, 2)))
        out = rx.refine_equalized(y_eq, h_hat, seen, params, "eq")
        assert np.array_equal(out.data, y_eq.data)

    def test_gradient_flows_to_subnet(self):
        rng = np.random.default_rng(5)
        params = self.make_params("ce", rng, zero_head=False)
        pil = pilots_for()
        h_mmse = ad.Grid(rng.normal(size=(2, 64, 2)))
        seen = ad.Grid(rng.normal(size=(2, 1, 64, 2)))
        out = rx.refine_channel(h_mmse, pil, seen, params, "ce")
        ad.reduce_mean(ad.cabs2(out)).backward()
        for name, p in params.items():
            assert p.grad is not None, name
            if name.endswith(".w") and "head" not in name:
                assert np.linalg.norm(p.grad) > 0, name

    def test_refine_chain_gradcheck(self):
        rng = np.random.default_rng(6)
        params = self.make_params("eq", rng, width=3, zero_head=False)
        y_eq = ad.Grid(rng.normal(size=(1, 2, 16, 2)))
        h_hat = ad.Grid(rng.normal(size=(1, 16, 2)))
        seen = ad.Grid(rng.normal(size=(1, 2, 16, 2)))
        target = rng.normal(size=(1, 2, 16, 2))

        def f(a, b):
            out = rx.refine_equalized(a, b, seen, params, "eq")
            return ad.reduce_mean(ad.square(ad.sub(out, ad.constant(target))))

        assert ad.gradient_check(f, [y_eq, h_hat], step=1e-5) < 1e-5

    def test_fold_unfold_roundtrip(self):
        rng = np.random.default_rng(7)
        x = ad.Grid(rng.normal(size=(3, 16, 2)))
        assert np.array_equal(rx.unfold_rows(rx.fold_rows(x)).data, x.data)

    def test_fold_requires_square_length(self):
        with pytest.raises(ValueError, match="square"):
            rx.fold_rows(ad.Grid(np.ones((3, 12, 2))))


class TestLosses:
    def test_zero_when_perfect(self):
        rng = np.random.default_rng(8)
        x = ad.Grid(rng.uniform(size=(2, 3, 4, 4)))
        h = rng.normal(size=(2, 8, 2))
        out = rx.losses(x, x, h, ad.Grid(h.copy()), 0.5)
        assert out.l_total.item() == 0.0

    def test_unit_channel_error(self):
        x = ad.Grid(np.zeros((1, 1, 2, 2)))
        h = np.zeros((1, 8, 2))
        h_hat = h.copy()
        h_hat[..., 0] += 1.0
        out = rx.losses(x, x, h, ad.Grid(h_hat), 0.5)
        assert out.l_cha.item() == pytest.approx(1.0)
        assert out.l_total.item() == pytest.approx(0.5)

    def test_weighted_combination(self):
        # l_rec 0.2 and l_cha 0.1 at lambda_c = 0.5 -> 0.25
        x = ad.Grid(np.zeros((1, 1, 1, 1)))
        x_hat = ad.Grid(np.full((1, 1, 1, 1), np.sqrt(0.2)))
        h = np.zeros((1, 1, 2))
        h_hat = np.zeros((1, 1, 2))
        h_hat[..., 0] = np.sqrt(0.1)
        out = rx.losses(x, x_hat, h, ad.Grid(h_hat), 0.5)
        assert out.l_total.item() == pytest.approx(0.25, abs=1e-12)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError, match="shapes"):
            rx.losses(ad.Grid(np.zeros((1, 2))), ad.Grid(np.zeros((2, 2))),
                      None, None, 0.5)
