"""Pulse shaping, conversion and loopback tests."""

import numpy as np
import pytest
from scipy import signal as ssig

from fduwa import dsp
from fduwa.coding import prbs


def _loopback(symbols, cfg):
    pb = dsp.shape_and_upconvert(symbols, cfg)
    return dsp.complex_demodulate(pb, cfg).samples


class TestDesignRrc:
    def test_symmetry_and_peak(self):
        taps = dsp.design_rrc(0.2, 8, 4)
        h = taps.coefficients
        assert len(h) == 8 * 4 + 1
        np.testing.assert_allclose(h, h[::-1], rtol=1e-12)
        assert np.argmax(h) == (len(h) - 1) // 2
        assert taps.group_delay_samples == (len(h) - 1) // 2

    def test_unit_energy(self):
        for rolloff in (0.2, 0.35, 1.0):
            h = dsp.design_rrc(rolloff, 10, 6).coefficients
            assert abs(np.sum(h**2) - 1.0) < 1e-9

    def test_nyquist_pair(self):
        # matched pair sampled at symbol spacing is a Nyquist pulse; the
        # truncation ISI drops under 1e-3 per lag from span ~32 at this
        # rolloff (span 16 still leaves 6.4e-3, hence the longer default)
        sps = 8
        span = 32
        h = dsp.design_rrc(0.2, span, sps).coefficients
        rc = np.convolve(h, h)
        center = (len(rc) - 1) // 2
        assert abs(rc[center] - 1.0) < 1e-6
        lag_isi = [abs(rc[center + k * sps]) for k in range(1, span) ]
        lag_isi += [abs(rc[center - k * sps]) for k in range(1, span)]
        assert max(lag_isi) < 1e-3

    def test_rolloff_one_has_finite_singular_points(self):
        # rolloff=1.0 puts |t| = 1/(4a) = 0.25 symbols right on the grid
        h = dsp.design_rrc(1.0, 6, 8).coefficients
        assert np.all(np.isfinite(h))

    @pytest.mark.parametrize("rolloff", [0.0, -0.1, 1.5])
    def test_rolloff_range(self, rolloff):
        with pytest.raises(ValueError):
            dsp.design_rrc(rolloff, 8, 4)


class TestShapeAndUpconvert:
    def test_zero_carrier_impulse_is_rrc(self):
        cfg = dsp.LinkConfig(fc_hz=0.0, fs_hz=16e3, fd_hz=4e3, rrc_span_symbols=8)
        out = dsp.shape_and_upconvert(np.array([1.0]), cfg)
        taps = dsp.design_rrc(cfg.rolloff, cfg.rrc_span_symbols, cfg.sps).coefficients
        np.testing.assert_allclose(out.samples[: len(taps)], taps, atol=1e-12)
        assert np.all(out.samples[len(taps):] == 0)

    def test_all_zero_symbols(self):
        cfg = dsp.LinkConfig()
        out = dsp.shape_and_upconvert(np.zeros(32), cfg)
        assert np.all(out.samples == 0)
        assert len(out) == 32 * cfg.sps + cfg.rrc_span_symbols * cfg.sps

    def test_occupied_bandwidth(self):
        # 36 kHz carrier with 4 kHz bandwidth: -20 dB band inside
        # [34, 38] kHz widened by the RRC excess bandwidth
        cfg = dsp.LinkConfig(fc_hz=36e3, fs_hz=192e3, fd_hz=4e3)
        sym = prbs(17, 4096) + 0j
        pb = dsp.shape_and_upconvert(sym, cfg)
        freqs, psd = ssig.welch(pb.samples, fs=cfg.fs_hz, nperseg=4096)
        band = freqs[psd >= psd.max() * 10 ** (-20 / 10)]
        excess = 0.5 * cfg.rolloff * cfg.fd_hz  # 400 Hz each side
        slack = 300.0  # periodogram resolution
        assert band.min() >= 34e3 - excess - slack
        assert band.max() <= 38e3 + excess + slack

    def test_non_integer_ratio_rejected(self):
        with pytest.raises(ValueError):
            dsp.LinkConfig(fs_hz=10e3, fd_hz=4e3)

    def test_empty_frame_rejected(self):
        with pytest.raises(ValueError):
            dsp.shape_and_upconvert(np.array([]), dsp.LinkConfig())


class TestComplexDemodulate:
    def test_impulse_peaks_at_symbol_zero(self):
        cfg = dsp.LinkConfig()
        sym = np.zeros(32, dtype=complex)
        sym[0] = 1.0
        bb = _loopback(sym, cfg)
        assert np.argmax(np.abs(bb)) == 0
        assert abs(abs(bb[0]) - 1.0) < 0.01

    def test_zero_input(self):
        cfg = dsp.LinkConfig()
        pb = dsp.RealPassband(samples=np.zeros(4096), rate_hz=cfg.fs_hz)
        bb = dsp.complex_demodulate(pb, cfg)
        assert np.all(bb.samples == 0)

    def test_shift_by_k_symbols(self):
        cfg = dsp.LinkConfig()
        k = 7
        sym = prbs(3, 64) + 0j
        ref = _loopback(sym, cfg)
        shifted = _loopback(np.concatenate([np.zeros(k), sym]), cfg)
        n = min(len(ref), len(shifted) - k)
        np.testing.assert_allclose(shifted[k : k + n], ref[:n], atol=1e-9)

    def test_rate_mismatch_rejected(self):
        cfg = dsp.LinkConfig()
        pb = dsp.RealPassband(samples=np.zeros(100), rate_hz=cfg.fs_hz / 2)
        with pytest.raises(ValueError):
            dsp.complex_demodulate(pb, cfg)

    def test_linearity(self):
        cfg = dsp.LinkConfig(rrc_span_symbols=8)
        rng = np.random.default_rng(0)
        x = rng.standard_normal(2048)
        y = rng.standard_normal(2048)
        a, b = 1.7, -0.6
        pbx = dsp.RealPassband(samples=x, rate_hz=cfg.fs_hz)
        pby = dsp.RealPassband(samples=y, rate_hz=cfg.fs_hz)
        pbc = dsp.RealPassband(samples=a * x + b * y, rate_hz=cfg.fs_hz)
        lhs = dsp.complex_demodulate(pbc, cfg).samples
        rhs = a * dsp.complex_demodulate(pbx, cfg).samples + b * dsp.complex_demodulate(
            pby, cfg
        ).samples
        scale = np.max(np.abs(rhs)) + 1e-30
        np.testing.assert_allclose(lhs / scale, rhs / scale, atol=1e-10)


class TestLoopbackEvm:
    def test_qpsk_frame_evm_below_one_percent(self):
        cfg = dsp.LinkConfig()
        sym = prbs(1, 400) + 1j * prbs(2, 400)
        bb = _loopback(sym, cfg)
        n = min(len(sym), len(bb))
        evm = np.sqrt(
            np.mean(np.abs(bb[:n] - sym[:n]) ** 2) / np.mean(np.abs(sym[:n]) ** 2)
        )
        assert evm < 0.01


class TestFirFilter:
    def test_identity(self):
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(dsp.fir_filter(x, [1.0]), x)

    def test_unit_delay(self):
        out = dsp.fir_filter(np.array([1.0, 2.0, 3.0]), [0.0, 1.0])
        np.testing.assert_array_equal(out, [0.0, 1.0, 2.0])

    def test_matches_direct_convolution(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        taps = rng.standard_normal(17) + 1j * rng.standard_normal(17)
        direct = np.array(
            [sum(taps[k] * x[i - k] for k in range(17) if 0 <= i - k) for i in range(256)]
        )
        got = dsp.fir_filter(x, taps)
        np.testing.assert_allclose(got, direct, rtol=1e-12, atol=1e-12)

    def test_empty_taps_rejected(self):
        with pytest.raises(ValueError):
            dsp.fir_filter(np.ones(4), [])

    def test_baseband_type_passthrough(self):
        x = dsp.ComplexBaseband(samples=np.ones(8, dtype=complex), rate_hz=4e3)
        out = dsp.fir_filter(x, [1.0])
        assert isinstance(out, dsp.ComplexBaseband)
        assert out.rate_hz == 4e3


class TestStreamTypes:
    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            dsp.RealPassband(samples=np.array([1.0, np.inf]), rate_hz=1.0)
        with pytest.raises(ValueError):
            dsp.ComplexBaseband(samples=np.array([np.nan + 0j]), rate_hz=1.0)

    def test_positive_rate_required(self):
        with pytest.raises(ValueError):
            dsp.ComplexBaseband(samples=np.zeros(1, dtype=complex), rate_hz=0.0)
