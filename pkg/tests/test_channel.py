import numpy as np
import pytest

from ofdmjscc import autodiff as ad
from ofdmjscc import channel as ch


class TestProfile:
    @pytest.mark.parametrize("paths,decay", [(1, 1.0), (3, 0.5), (8, 4.0),
                                             (16, 2.7), (64, 10.0)])
    def test_normalization(self, paths, decay):
        p = ch.exponential_profile(paths, decay)
        assert abs(p.path_powers.sum() - 1.0) < 1e-12

    def test_single_path_unit_power(self):
        p = ch.exponential_profile(1, 4.0)
        assert p.path_powers[0] == pytest.approx(1.0)

    def test_eight_path_decay_constant_four(self):
        # independent oracle: closed-form geometric sum with r = e^(-1/4)
        r = np.exp(-0.25)
        expect = (1.0 - r) / (1.0 - r ** 8)
        p = ch.exponential_profile(8, 4.0)
        assert p.path_powers[0] == pytest.approx(expect, abs=1e-12)
        assert p.path_powers[0] == pytest.approx(0.2558, abs=5e-5)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            ch.exponential_profile(0, 4.0)
        with pytest.raises(ValueError):
            ch.exponential_profile(8, 0.0)


class TestSampling:
    def test_single_path_mean_power(self):
        p = ch.exponential_profile(1, 4.0)
        taps = ch.sample_taps(p, 123, count=100_000)
        power = taps[..., 0] ** 2 + taps[..., 1] ** 2
        assert abs(power.mean() - 1.0) < 0.02

    def test_per_path_variances(self):
        p = ch.exponential_profile(4, 2.0)
        taps = ch.sample_taps(p, 9, count=200_000)
        power = (taps[..., 0] ** 2 + taps[..., 1] ** 2).mean(axis=0)
        assert np.allclose(power, p.path_powers, rtol=0.03)

    def test_deterministic_given_seed(self):
        p = ch.exponential_profile(8, 4.0)
        a = ch.sample_channel(p, 42)
        b = ch.sample_channel(p, 42)
        assert np.array_equal(a.taps, b.taps)

    def test_realization_immutable(self):
        p = ch.exponential_profile(2, 1.0)
        real = ch.sample_channel(p, 0)
        with pytest.raises(ValueError):
            real.taps[0, 0] = 5.0


class TestApplyChannel:
    def test_identity_channel(self):
        rng = np.random.default_rng(0)
        y = ad.Grid(rng.normal(size=(10, 2)))
        taps = np.array([[1.0, 0.0]])
        real = ch.ChannelRealization(taps=taps, noise_var=0.0, seed=0)
        out = ch.apply_channel(y, real)
        assert np.allclose(out.data, y.data)

    def test_pure_delay(self):
        y = ad.Grid(np.array([[1.0, 0], [2.0, 0], [3.0, 0]]))
        taps = np.array([[0.0, 0.0], [1.0, 0.0]])
        out = ch.apply_channel(y, taps)
        assert np.allclose(out.data[:, 0], [0.0, 1.0, 2.0])

    def test_empty_input_raises(self):
        with pytest.raises(ValueError):
            ch.apply_channel(ad.Grid(np.zeros((0, 2))),
                             np.array([[1.0, 0.0]]))

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        taps = rng.normal(size=(3, 2)) * 0.6
        target = rng.normal(size=(8, 2))

        def f(y):
            out = ch.apply_channel(y, taps)
            return ad.reduce_mean(ad.square(ad.sub(out, ad.constant(target))))

        y = ad.Grid(rng.normal(size=(8, 2)))
        assert ad.gradient_check(f, [y]) < 1e-5

    def test_noise_calibration(self):
        # zero input: output power converges to the configured noise power
        y = ad.Grid(np.zeros((1_000_000, 2)))
        real = ch.ChannelRealization(taps=np.array([[1.0, 0.0]]),
                                     noise_var=0.3, seed=0)
        out = ch.apply_channel(y, real, noise_seed=77)
        power = (out.data[..., 0] ** 2 + out.data[..., 1] ** 2).mean()
        assert abs(power - 0.3) / 0.3 < 0.01

    def test_linearity_with_shared_taps(self):
        rng = np.random.default_rng(8)
        p = ch.exponential_profile(4, 2.0)
        taps = ch.sample_taps(p, 3, count=1)[0]
        y1 = rng.normal(size=(20, 2))
        y2 = rng.normal(size=(20, 2))
        a, b = 1.7, -0.4
        lhs = ch.apply_channel(ad.Grid(a * y1 + b * y2), taps).data
        rhs = a * ch.apply_channel(ad.Grid(y1), taps).data \
            + b * ch.apply_channel(ad.Grid(y2), taps).data
        assert np.allclose(lhs, rhs, atol=1e-12)


class TestReceiverSnr:
    def test_direct_evaluation(self):
        y = np.zeros((10, 2))
        y[:, 0] = np.sqrt(10.0)
        assert ch.receiver_snr(y, 1.0) == pytest.approx(10.0)

    def test_equal_powers(self):
        y = np.zeros((10, 2))
        y[:, 0] = np.sqrt(0.25)
        assert ch.receiver_snr(y, 0.25) == pytest.approx(0.0)

    def test_nonpositive_noise_raises(self):
        with pytest.raises(ValueError):
            ch.receiver_snr(np.ones((4, 2)), 0.0)

    def test_monte_carlo_ten_db(self):
        # unit-power TX through the normalized profile at sigma^2 = 0.1:
        # E|h*y|^2 = sum(sigma_l^2) * E|y|^2 = 1, so the signal-to-noise
        # power ratio converges to 10 dB over many realizations
        p = ch.exponential_profile(8, 4.0)
        rng = np.random.default_rng(11)
        n, reps = 256, 10_000
        taps = ch.sample_taps(p, 5, count=reps)
        y = rng.normal(size=(reps, n, 2)) / np.sqrt(2.0)
        out = ad.channel_conv(ad.Grid(y), taps).data
        assert ch.receiver_snr(out, 0.1) == pytest.approx(10.0, abs=0.2)
        # with the noise included, Eq.-style receiver SNR sits at
        # 10*log10((1 + sigma^2)/sigma^2)
        noisy = out + ch.sample_noise((reps, n, 2), 0.1, 123)
        assert ch.receiver_snr(noisy, 0.1) == pytest.approx(
            10.0 * np.log10(11.0), abs=0.2)

    def test_snr_to_noise_var(self):
        assert ch.snr_to_noise_var(10.0) == pytest.approx(0.1)
        assert ch.snr_to_noise_var(0.0) == pytest.approx(1.0)


class TestFrequencyResponse:
    def test_matches_bruteforce_dft(self):
        rng = np.random.default_rng(2)
        taps = rng.normal(size=(8, 2))
        h = ch.frequency_response(taps, 64)
        z = taps[:, 0] + 1j * taps[:, 1]
        k = np.arange(64)
        brute = np.array([np.sum(z * np.exp(-2j * np.pi * kk * np.arange(8) / 64))
                          for kk in k])
        assert np.allclose(h[..., 0] + 1j * h[..., 1], brute, atol=1e-12)
