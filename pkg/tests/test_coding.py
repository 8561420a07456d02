"""Coding chain tests: PRBS, encoder, interleaver, Viterbi, frames."""

import numpy as np
import pytest

from fduwa import coding

ALL_CODES = ["1/4", "1/3", "1/2", "2/3"]


class TestPrbs:
    def test_deterministic(self):
        np.testing.assert_array_equal(coding.prbs(42, 1000), coding.prbs(42, 1000))

    def test_values_and_single_element(self):
        seq = coding.prbs(0, 1)
        assert seq[0] in (1.0, -1.0)
        assert set(np.unique(coding.prbs(5, 4096))) <= {1.0, -1.0}

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 17, 99, 1234, 777, 31337, 2**31])
    def test_balanced(self, seed):
        n = 4096
        assert abs(np.mean(coding.prbs(seed, n))) < 3 / np.sqrt(n)

    def test_cross_correlation(self):
        a = coding.prbs(10, 4096)
        b = coding.prbs(11, 4096)
        rho = np.dot(a, b) / 4096
        assert abs(rho) < 0.1

    def test_length_positive(self):
        with pytest.raises(ValueError):
            coding.prbs(0, 0)


class TestConvEncode:
    @pytest.mark.parametrize("name", ALL_CODES)
    def test_all_zero_input(self, name):
        code = coding.get_code(name)
        out = coding.conv_encode(np.zeros(24, dtype=int), code)
        assert np.all(out == 0)

    def test_impulse_response_rate_half(self):
        # octal 53 = 101011, 75 = 111101; impulse response interleaves them
        code = coding.get_code("1/2")
        out = coding.conv_encode([1, 0, 0, 0, 0, 0], code)
        g1 = [1, 0, 1, 0, 1, 1]
        g2 = [1, 1, 1, 1, 0, 1]
        expected = [b for pair in zip(g1, g2) for b in pair]
        np.testing.assert_array_equal(out[:12], expected)
        assert np.all(out[12:] == 0)

    @pytest.mark.parametrize("name", ALL_CODES)
    def test_output_length_is_input_plus_tail_over_rate(self, name):
        code = coding.get_code(name)
        k, n = code.n_inputs, code.n_outputs
        msg = np.ones(20 * k, dtype=int)
        out = coding.conv_encode(msg, code)
        assert len(out) == (20 + code.tail_steps) * n

    def test_rate_two_thirds_step_accounting(self):
        # 2k input bits = k steps; the 4 tail steps flush both registers
        code = coding.get_code("2/3")
        out = coding.conv_encode(np.zeros(2 * 50, dtype=int), code)
        assert len(out) == 3 * (50 + 4)

    def test_linearity_over_gf2(self):
        code = coding.get_code("1/3")
        rng = np.random.default_rng(8)
        a = rng.integers(0, 2, 40)
        b = rng.integers(0, 2, 40)
        lhs = coding.conv_encode((a + b) % 2, code)
        rhs = (coding.conv_encode(a, code) + coding.conv_encode(b, code)) % 2
        np.testing.assert_array_equal(lhs, rhs)

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            coding.conv_encode([0, 2, 1], coding.get_code("1/2"))

    def test_unsupported_code_rejected(self):
        with pytest.raises(ValueError):
            coding.CodeSpec("1/2", 1, 2, (7,), ((0o171, 0o133),))
        with pytest.raises(ValueError):
            coding.get_code("1/5")


class TestInterleaver:
    def test_depth_one_identity(self):
        x = np.arange(10)
        np.testing.assert_array_equal(coding.interleave(x, 1), x)

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        for depth in (2, 3, 8, 64):
            x = rng.standard_normal(depth * 17)
            back = coding.deinterleave(coding.interleave(x, depth), depth)
            np.testing.assert_array_equal(back, x)

    def test_round_trip_with_padding(self):
        x = np.arange(50, dtype=float)
        y = coding.interleave(x, 8)
        assert len(y) == 56
        np.testing.assert_array_equal(coding.deinterleave(y, 8, length=50), x)

    def test_block_12_depth_3_index_formula(self):
        # row-write/column-read: out[j*depth + r] = in[r*cols + j]
        x = np.arange(12)
        y = coding.interleave(x, 3)
        cols = 4
        for r in range(3):
            for j in range(cols):
                assert y[j * 3 + r] == x[r * cols + j]


class TestViterbi:
    @pytest.mark.parametrize("name", ALL_CODES)
    def test_noiseless_exact(self, name):
        code = coding.get_code(name)
        rng = np.random.default_rng(12)
        msg = rng.integers(0, 2, 128 * code.n_inputs)
        soft = 1.0 - 2.0 * coding.conv_encode(msg, code)
        np.testing.assert_array_equal(coding.viterbi_decode(soft, code), msg)

    @pytest.mark.parametrize("length", [10, 100, 1000])
    @pytest.mark.parametrize("name", ALL_CODES)
    def test_noiseless_various_lengths(self, name, length):
        code = coding.get_code(name)
        k = code.n_inputs
        rng = np.random.default_rng(length)
        msg = rng.integers(0, 2, ((length + k - 1) // k) * k)
        soft = 1.0 - 2.0 * coding.conv_encode(msg, code)
        np.testing.assert_array_equal(coding.viterbi_decode(soft, code), msg)

    def test_single_flip_recovered(self):
        code = coding.get_code("1/4")
        rng = np.random.default_rng(9)
        for trial in range(10):
            msg = rng.integers(0, 2, 64)
            coded = coding.conv_encode(msg, code)
            soft = 1.0 - 2.0 * coded
            flip = rng.integers(0, len(soft))
            soft[flip] = -soft[flip]
            np.testing.assert_array_equal(coding.viterbi_decode(soft, code), msg)

    def test_awgn_rate_half_monte_carlo(self):
        # Eb/N0 = 6 dB, rate 1/2 [53 75]: BER well under 1e-4 over 1e5 bits
        code = coding.get_code("1/2")
        rng = np.random.default_rng(2024)
        n_bits = 100_000
        msg = rng.integers(0, 2, n_bits)
        tx = 1.0 - 2.0 * coding.conv_encode(msg, code)
        ebn0 = 10 ** (6 / 10)
        n0 = (1.0 / code.rate) / ebn0
        soft = tx + rng.standard_normal(len(tx)) * np.sqrt(n0 / 2)
        dec = coding.viterbi_decode(soft, code)
        ber = np.mean(dec != msg)
        assert ber < 1e-4

    def test_scaling_invariance(self):
        code = coding.get_code("1/3")
        rng = np.random.default_rng(5)
        msg = rng.integers(0, 2, 200)
        soft = 1.0 - 2.0 * coding.conv_encode(msg, code)
        soft = soft + 0.4 * rng.standard_normal(len(soft))
        ref = coding.viterbi_decode(soft, code)
        np.testing.assert_array_equal(coding.viterbi_decode(37.5 * soft, code), ref)

    def test_bad_length_rejected(self):
        code = coding.get_code("1/3")
        with pytest.raises(ValueError):
            coding.viterbi_decode(np.ones(32), code)


class TestFrames:
    def test_superposition_identity(self):
        rng = np.random.default_rng(1)
        frame = coding.build_far_frame(rng.integers(0, 2, 300), coding.get_code("1/3"), 7)
        np.testing.assert_array_equal(np.real(frame.combined), frame.pilot)
        np.testing.assert_allclose(frame.combined - 1j * frame.data, frame.pilot)
        np.testing.assert_allclose(np.abs(frame.combined), np.sqrt(2.0))

    def test_frame_power(self):
        frame = coding.build_far_frame(np.zeros(100, dtype=int), coding.get_code("1/2"), 3)
        assert abs(np.mean(np.abs(frame.combined) ** 2) - 2.0) < 1e-12

    def test_empty_message_is_pilot_plus_tail(self):
        code = coding.get_code("1/2")
        frame = coding.build_far_frame(np.zeros(0, dtype=int), code, 5)
        # tail-only codeword is all zeros -> data rail all +1
        assert np.all(frame.data[: code.tail_steps * code.n_outputs] == 1.0)

    def test_remodulate_reproduces_frame(self):
        rng = np.random.default_rng(2)
        code = coding.get_code("1/4")
        msg = rng.integers(0, 2, 240)
        a = coding.build_far_frame(msg, code, 11)
        b = coding.remodulate(msg, code, 11)
        np.testing.assert_array_equal(a.combined, b.combined)

    def test_single_bit_flip_spreads_through_interleaver(self):
        code = coding.get_code("1/2")
        depth = 16
        msg = np.zeros(100, dtype=int)
        flipped = msg.copy()
        flipped[40] = 1
        a = coding.build_far_frame(msg, code, 1, interleaver_depth=depth)
        b = coding.build_far_frame(flipped, code, 1, interleaver_depth=depth)
        diff = np.flatnonzero(a.data != b.data)
        # oracle: positions of the changed coded bits after interleaving
        ca = coding.conv_encode(msg, code)
        cb = coding.conv_encode(flipped, code)
        changed = np.flatnonzero(coding.interleave(ca, depth) != coding.interleave(cb, depth))
        np.testing.assert_array_equal(diff, changed)
        assert len(diff) > 1  # spread over several positions

    def test_decode_round_trip_through_format(self):
        rng = np.random.default_rng(3)
        fmt = coding.FrameFormat(code=coding.get_code("2/3"), n_message_bits=400)
        msg = rng.integers(0, 2, 400)
        frame = fmt.build(msg)
        np.testing.assert_array_equal(fmt.decode(frame.data), msg)

    def test_message_bits_for_symbols(self):
        for name in ALL_CODES:
            code = coding.get_code(name)
            n_msg = coding.message_bits_for_symbols(code, 3000)
            fmt = coding.FrameFormat(code=code, n_message_bits=n_msg)
            assert fmt.n_symbols <= 3000
            assert n_msg % code.n_inputs == 0
            # one more message step overflows the budget
            bigger = coding.FrameFormat(code=code, n_message_bits=n_msg + code.n_inputs)
            assert bigger.n_symbols > 3000
