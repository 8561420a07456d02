"""Channel synthesis, time-varying convolution and mixing tests."""

import numpy as np
import pytest

from fduwa import channel
from fduwa.coding import prbs


def _spec(**kw):
    base = dict(length=8, delays=(0,), gains_db=(0.0,), seed=1)
    base.update(kw)
    return channel.ChannelModelSpec(**base)


class TestSynthesize:
    def test_static_rows_identical(self):
        ch = channel.synthesize_channel(_spec(delays=(0, 3), gains_db=(0.0, -3.0)), 50)
        assert np.all(ch.taps == ch.taps[0])
        assert ch.is_static

    def test_polynomial_explicit_coefficients(self):
        c = (0.5 + 0.1j, 2e-3, -1e-5)
        spec = _spec(variation="polynomial", poly_coeffs=(c,))
        ch = channel.synthesize_channel(spec, 40)
        k = np.arange(40)
        np.testing.assert_allclose(ch.taps[:, 0], c[0] + c[1] * k + c[2] * k**2, rtol=1e-15)

    def test_sparse_inactive_taps_zero(self):
        spec = _spec(length=100, delays=(1, 17, 40, 77, 99),
                     gains_db=(0.0, -1.0, -2.0, -3.0, -4.0))
        ch = channel.synthesize_channel(spec, 10)
        active = np.flatnonzero(np.any(ch.taps != 0, axis=0))
        np.testing.assert_array_equal(active, [1, 17, 40, 77, 99])

    def test_reproducible_from_seed(self):
        spec = _spec(variation="polynomial", poly_depth=0.3)
        a = channel.synthesize_channel(spec, 30).taps
        b = channel.synthesize_channel(spec, 30).taps
        np.testing.assert_array_equal(a, b)

    def test_delay_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            _spec(length=4, delays=(4,))

    def test_sinusoidal_rate(self):
        spec = _spec(variation="sinusoidal", sin_rate_hz=10.0, sin_depth=0.2,
                     rate_hz=1000.0)
        ch = channel.synthesize_channel(spec, 1000)
        traj = np.abs(ch.taps[:, 0])
        # one full period every 100 samples
        np.testing.assert_allclose(traj[:900], traj[100:], atol=1e-9)


class TestApplyChannel:
    def test_identity_channel(self):
        x = prbs(2, 64) + 1j * prbs(3, 64)
        ch = channel.TimeVaryingChannel(taps=np.array([[1.0 + 0j]]))
        np.testing.assert_array_equal(channel.apply_channel(x, ch), x)

    def test_two_tap_static(self):
        x = np.array([1.0, 2.0, 3.0, 4.0], dtype=complex)
        ch = channel.TimeVaryingChannel(taps=np.array([[1.0, 0.5]]))
        expected = np.array([1.0, 2.5, 4.0, 5.5])
        np.testing.assert_allclose(channel.apply_channel(x, ch), expected)

    def test_matches_stationary_convolution_oracle(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(300) + 1j * rng.standard_normal(300)
        h = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        ch = channel.TimeVaryingChannel(taps=h[None, :])
        oracle = np.convolve(x, h)[:300]
        got = channel.apply_channel(x, ch)
        np.testing.assert_allclose(got, oracle, rtol=1e-12, atol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(8)
        spec = _spec(length=6, delays=(0, 2, 5), gains_db=(0.0, -2.0, -6.0),
                     variation="polynomial", poly_depth=0.4)
        ch = channel.synthesize_channel(spec, 128)
        x = rng.standard_normal(128) + 1j * rng.standard_normal(128)
        y = rng.standard_normal(128) + 1j * rng.standard_normal(128)
        lhs = channel.apply_channel(2.0 * x - 1j * y, ch)
        rhs = 2.0 * channel.apply_channel(x, ch) - 1j * channel.apply_channel(y, ch)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_static_commutes_with_shift(self):
        x = prbs(5, 100) + 0j
        ch = channel.TimeVaryingChannel(taps=np.array([[0.8, 0.0, 0.3j]]))
        k = 9
        shifted_in = np.concatenate([np.zeros(k), x])
        y_ref = channel.apply_channel(x, ch)
        y_shift = channel.apply_channel(shifted_in, ch)
        np.testing.assert_allclose(y_shift[k:], y_ref, atol=1e-12)

    def test_too_few_instants_rejected(self):
        ch = channel.TimeVaryingChannel(taps=np.ones((5, 2), dtype=complex))
        with pytest.raises(ValueError):
            channel.apply_channel(np.ones(10, dtype=complex), ch)


class TestNoiseVariance:
    def test_arithmetic_examples(self):
        assert channel.noise_variance_for_snr(2.0, 1.0, 0.5) == pytest.approx(1.0)
        assert channel.noise_variance_for_snr(101.0, 1.0, 10.0) == pytest.approx(9.0)

    def test_boundary_zero(self):
        # requested SNR equal to the intrinsic (P_s - P_n) / P_n
        assert channel.noise_variance_for_snr(3.0, 1.0, 2.0) == pytest.approx(0.0)

    def test_above_intrinsic_refused(self):
        with pytest.raises(ValueError):
            channel.noise_variance_for_snr(3.0, 1.0, 2.1)

    def test_bad_powers_refused(self):
        with pytest.raises(ValueError):
            channel.noise_variance_for_snr(1.0, 2.0, 0.5)


class TestMix:
    def test_target_ratios_met(self):
        n = 100_000
        si = prbs(1, n) + 1j * prbs(2, n)
        far = prbs(3, n) + 1j * prbs(4, n)
        spec = channel.MixSpec(si_to_noise_db=67.0, far_snr_db=16.0)
        out = channel.mix(si, far, spec, seed=5)
        p_n = np.mean(np.abs(out.noise) ** 2)
        si_ratio = 10 * np.log10(np.mean(np.abs(out.si_component) ** 2) / p_n)
        far_ratio = 10 * np.log10(np.mean(np.abs(out.far_component) ** 2) / p_n)
        assert abs(si_ratio - 67.0) < 0.1
        assert abs(far_ratio - 16.0) < 0.1

    def test_noise_only_variance(self):
        n = 100_000
        spec = channel.MixSpec(si_to_noise_db=None, far_snr_db=None, noise_power=2.5)
        out = channel.mix(np.zeros(n), np.zeros(n), spec, seed=1)
        assert abs(np.mean(np.abs(out.received) ** 2) / 2.5 - 1.0) < 0.02

    def test_hd_mode_pure_far_plus_noise(self):
        n = 1000
        far = prbs(1, n) + 0j
        spec = channel.MixSpec(si_to_noise_db=None, far_snr_db=10.0)
        out = channel.mix(np.zeros(n), far, spec, seed=2)
        assert np.all(out.si_component == 0)
        np.testing.assert_allclose(out.received, out.far_component + out.noise)

    def test_deterministic_given_seed(self):
        n = 512
        si = prbs(1, n) + 0j
        far = prbs(2, n) + 0j
        spec = channel.MixSpec()
        a = channel.mix(si, far, spec, seed=9)
        b = channel.mix(si, far, spec, seed=9)
        np.testing.assert_array_equal(a.received, b.received)

    def test_component_powers_add(self):
        n = 50_000
        si = prbs(1, n) + 1j * prbs(2, n)
        far = prbs(3, n) + 1j * prbs(4, n)
        out = channel.mix(si, far, channel.MixSpec(si_to_noise_db=6.0, far_snr_db=3.0), seed=3)
        total = np.mean(np.abs(out.received) ** 2)
        parts = (
            np.mean(np.abs(out.si_component) ** 2)
            + np.mean(np.abs(out.far_component) ** 2)
            + np.mean(np.abs(out.noise) ** 2)
        )
        assert abs(total - parts) / total < 0.005

    def test_sir_derived(self):
        spec = channel.MixSpec(si_to_noise_db=67.0, far_snr_db=16.0)
        assert spec.sir_db == pytest.approx(-51.0)

    def test_pads_shorter_stream(self):
        out = channel.mix(np.ones(10, dtype=complex), np.ones(4, dtype=complex),
                          channel.MixSpec(si_to_noise_db=0.0, far_snr_db=0.0), seed=0)
        assert len(out.received) == 10
        assert np.all(out.far_component[4:] == 0)
