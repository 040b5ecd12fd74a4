import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csmud.codebook import build_codebook, circular_shift, generate_base_sequences
from csmud.phy_tx import (bits_to_symbols, conv_encode, deinterleave,
                          encode_frame, interleave, psk_demodulate,
                          psk_modulate, spread_conventional, spread_direct)
from csmud.rx_mud import symbols_to_bits
from oracles import conv_encode_shift_register, gram


class TestConvEncode:
    def test_zero_maps_to_zero(self):
        out = conv_encode(np.zeros(100, dtype=int))
        assert len(out) == 212
        assert not out.any()

    def test_impulse_response_matches_shift_register_oracle(self):
        for pos in [0, 1, 5, 19]:
            bits = np.zeros(20, dtype=int)
            bits[pos] = 1
            assert np.array_equal(conv_encode(bits), conv_encode_shift_register(bits))

    def test_random_frames_match_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            bits = rng.integers(0, 2, size=rng.integers(1, 60))
            assert np.array_equal(conv_encode(bits), conv_encode_shift_register(bits))

    def test_output_length(self):
        for L in [1, 10, 100]:
            assert len(conv_encode(np.zeros(L, dtype=int))) == 2 * (L + 6)

    def test_framing_arithmetic_m8(self):
        # L=100 -> L_c=212 -> L_d=ceil(212/3)=71 with one pad bit
        coded = conv_encode(np.zeros(100, dtype=int))
        syms = bits_to_symbols(coded, 8)
        assert len(syms) == 71

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            conv_encode([])


class TestInterleaver:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        bits = rng.integers(0, 2, 212)
        assert np.array_equal(deinterleave(interleave(bits, 5), 5), bits)

    def test_same_seed_same_permutation(self):
        bits = np.arange(50)
        assert np.array_equal(interleave(bits, 9), interleave(bits, 9))
        assert not np.array_equal(interleave(bits, 9), interleave(bits, 10))

    def test_multiset_preserved(self):
        rng = np.random.default_rng(1)
        bits = rng.integers(0, 2, 77)
        assert sorted(interleave(bits, 3).tolist()) == sorted(bits.tolist())

    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 300))
    @settings(max_examples=40, deadline=None)
    def test_round_trip_property(self, seed, n):
        bits = (np.arange(n) * 7919) % 2
        assert np.array_equal(deinterleave(interleave(bits, seed), seed), bits)


class TestBitsToSymbols:
    def test_examples(self):
        assert bits_to_symbols([0, 0], 4).tolist() == [0]
        assert bits_to_symbols([1, 1, 0], 8).tolist() == [6]
        assert bits_to_symbols([0, 1], 4).tolist() == [1]

    def test_pads_with_zeros(self):
        assert bits_to_symbols([1, 1], 8).tolist() == [6]  # 110 after padding
        assert bits_to_symbols([1, 0, 1, 1], 8).tolist() == [5, 4]

    def test_rejects_nonpower_of_two(self):
        with pytest.raises(ValueError):
            bits_to_symbols([0, 1], 3)
        with pytest.raises(ValueError):
            bits_to_symbols([0, 1], 1)

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=120),
           st.sampled_from([2, 4, 8, 16]))
    @settings(max_examples=60, deadline=None)
    def test_round_trip_with_pad_stripped(self, bits, M):
        syms = bits_to_symbols(bits, M)
        back = symbols_to_bits(syms, M, n_bits=len(bits))
        assert back.tolist() == bits


class TestPsk:
    def test_bpsk_points(self):
        pts = psk_modulate([0, 1], 2)
        assert np.allclose(pts, [1j, -1j], atol=1e-12)

    def test_unit_modulus(self):
        for M in (2, 4, 8):
            pts = psk_modulate(np.arange(M), M)
            assert np.allclose(np.abs(pts), 1.0, atol=1e-12)

    def test_gray_neighbours_differ_one_bit(self):
        # adjacent constellation angles correspond to symbols one bit apart
        M = 8
        pts = psk_modulate(np.arange(M), M)
        angle_order = np.argsort(np.angle(pts) % (2 * np.pi))
        ring = np.concatenate([angle_order, angle_order[:1]])
        for a, b in zip(ring[:-1], ring[1:]):
            assert bin(int(a) ^ int(b)).count("1") == 1

    def test_demod_inverts_mod(self):
        for M in (2, 4, 8):
            d = np.arange(M)
            assert np.array_equal(psk_demodulate(psk_modulate(d, M), M), d)

    def test_demod_with_noise_margin(self):
        rng = np.random.default_rng(2)
        d = rng.integers(0, 8, 64)
        x = psk_modulate(d, 8) * np.exp(1j * 0.2) * 0.9  # small rotation+scale
        assert np.array_equal(psk_demodulate(x, 8), d)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            psk_modulate([4], 4)


class TestSpreading:
    def test_direct_zero_symbols_give_base(self):
        s = generate_base_sequences(1, 8, seed=3)[:, 0]
        cb = build_codebook(s, [0, 2, 4, 6])
        chips = spread_direct(np.zeros(5, dtype=int), cb)
        assert chips.shape == (8, 5)
        for col in chips.T:
            assert np.array_equal(col, s)

    def test_direct_uses_pattern_indexing(self):
        # symbol d selects pattern entry d (0-based); d=3 on [0,3,15,6] shifts by 6
        s = generate_base_sequences(1, 16, seed=4)[:, 0]
        cb = build_codebook(s, [0, 3, 15, 6])
        chips = spread_direct([3], cb)
        assert np.array_equal(chips[:, 0], circular_shift(s, 6))

    def test_direct_columns_in_codebook(self):
        s = generate_base_sequences(1, 8, seed=5)[:, 0]
        cb = build_codebook(s, [0, 1, 2, 3])
        rng = np.random.default_rng(0)
        syms = rng.integers(0, 4, 20)
        chips = spread_direct(syms, cb)
        rows = {tuple(np.round(r, 12)) for r in cb.codewords}
        for col in chips.T:
            assert tuple(np.round(col, 12)) in rows

    def test_direct_orthogonal_columns(self, cazac4):
        cb = build_codebook(cazac4, [0, 1, 2, 3])
        chips = spread_direct([0, 1], cb)
        G = gram([chips[:, 0], chips[:, 1]])
        assert abs(G[0, 1]) < 1e-12

    def test_direct_rejects_symbol_out_of_range(self):
        s = generate_base_sequences(1, 8, seed=5)[:, 0]
        cb = build_codebook(s, [0, 1])
        with pytest.raises(ValueError):
            spread_direct([2], cb)

    def test_conventional_scaling(self):
        s = generate_base_sequences(1, 8, seed=6)[:, 0]
        chips = spread_conventional(np.array([1.0 + 0j]), s)
        assert np.array_equal(chips[:, 0], s)

    def test_conventional_phase_rotation(self):
        s = generate_base_sequences(1, 8, seed=6)[:, 0]
        x = psk_modulate([0, 3], 4)
        chips = spread_conventional(x, s)
        rot = x[1] / x[0]
        assert np.allclose(chips[:, 1], chips[:, 0] * rot, atol=1e-12)

    def test_unit_energy_both_schemes(self):
        s = generate_base_sequences(1, 16, seed=7)[:, 0]
        cb = build_codebook(s, [0, 1, 2, 3, 4, 5, 6, 7])
        rng = np.random.default_rng(1)
        syms = rng.integers(0, 8, 30)
        for chips in (spread_direct(syms, cb),
                      spread_conventional(psk_modulate(syms, 8), s)):
            assert np.abs(np.linalg.norm(chips, axis=0) - 1.0).max() < 1e-12


class TestEncodeFrame:
    def test_deterministic(self):
        rng = np.random.default_rng(3)
        bits = rng.integers(0, 2, 100)
        a = encode_frame(bits, 8, interleaver_seed=42)
        b = encode_frame(bits, 8, interleaver_seed=42)
        assert np.array_equal(a.symbols, b.symbols)
        assert len(a.coded_bits) == 212
        assert len(a.symbols) == 71
        assert a.symbols.max() < 8
