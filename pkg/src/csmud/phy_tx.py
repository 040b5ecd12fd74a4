"""Per-user transmit chain: coding, interleaving, packing and spreading.

Info bits pass a terminated rate-1/2 convolutional code, a seeded random
interleaver and an MSB-first bit packer.  The packed symbols either select
codewords from the user codebook (direct spreading) or drive a Gray-mapped
M-PSK modulator whose output scales the base sequence (conventional).
Every transmitted column has unit energy in both schemes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import Codebook

__all__ = [
    "CODE_RATE",
    "UserFrame",
    "bits_to_symbols",
    "conv_encode",
    "deinterleave",
    "encode_frame",
    "interleave",
    "psk_demodulate",
    "psk_modulate",
    "spread_conventional",
    "spread_direct",
]

# Rate-1/2 convolutional code, constraint length 7, generators (133, 171)
# octal with the MSB tapping the current input bit.  Terminated with
# CONSTRAINT_LEN - 1 zeros, so L info bits encode to 2*(L + 6) coded bits.
GENERATORS = (0o133, 0o171)
CONSTRAINT_LEN = 7
TAIL = CONSTRAINT_LEN - 1
CODE_RATE = 0.5

_G_TAPS = [
    np.array([(g >> (CONSTRAINT_LEN - 1 - i)) & 1 for i in range(CONSTRAINT_LEN)],
             dtype=np.int64)
    for g in GENERATORS
]


def conv_encode(info_bits) -> np.ndarray:
    """Encode a bit vector with the terminated rate-1/2 code.

    The two generator outputs are interleaved per input bit
    (generator 133 first), giving 2 * (L + 6) coded bits.
    """
    bits = np.asarray(info_bits, dtype=np.int64).ravel()
    if bits.size == 0:
        raise ValueError("info_bits must be non-empty")
    u = np.concatenate([bits, np.zeros(TAIL, dtype=np.int64)])
    n_out = u.size
    out = np.empty(2 * n_out, dtype=np.int64)
    for i, taps in enumerate(_G_TAPS):
        out[i::2] = np.convolve(u, taps)[:n_out] % 2
    return out


def interleave(bits, seed: int) -> np.ndarray:
    """Apply the seeded uniformly-random permutation to a bit vector."""
    bits = np.asarray(bits)
    perm = np.random.default_rng(seed).permutation(bits.size)
    return bits[perm]


def deinterleave(bits, seed: int) -> np.ndarray:
    """Invert interleave() for the same seed and length."""
    bits = np.asarray(bits)
    perm = np.random.default_rng(seed).permutation(bits.size)
    out = np.empty_like(bits)
    out[perm] = bits
    return out


def _bits_per_symbol(M: int) -> int:
    if M < 2 or M & (M - 1):
        raise ValueError(f"M must be a power of two >= 2, got {M}")
    return M.bit_length() - 1


def bits_to_symbols(bits, M: int) -> np.ndarray:
    """Pack bits MSB-first into symbols in [0, M), zero-padding the tail."""
    k = _bits_per_symbol(M)
    b = np.asarray(bits, dtype=np.int64).ravel()
    pad = (-b.size) % k
    if pad:
        b = np.concatenate([b, np.zeros(pad, dtype=np.int64)])
    weights = 1 << np.arange(k - 1, -1, -1)
    return b.reshape(-1, k) @ weights


def psk_modulate(symbols, M: int) -> np.ndarray:
    """Gray-mapped M-PSK, unit energy.

    The point at angle index j (angle 2*pi*j/M + pi/M) carries the label
    gray(j) = j ^ (j >> 1), so neighbouring constellation points differ in
    exactly one bit; symbol d therefore sits at angle index gray_inv(d).
    """
    _bits_per_symbol(M)
    d = np.asarray(symbols, dtype=np.int64)
    if (d < 0).any() or (d >= M).any():
        raise ValueError(f"symbols must lie in [0, {M})")
    j = np.arange(M)
    gray_inv = np.empty(M, dtype=np.int64)
    gray_inv[j ^ (j >> 1)] = j
    return np.exp(1j * (2.0 * np.pi * gray_inv[d] / M + np.pi / M))


def psk_demodulate(points, M: int) -> np.ndarray:
    """Min-distance Gray demapping of complex values back to symbols in [0, M)."""
    _bits_per_symbol(M)
    const = np.exp(1j * (2.0 * np.pi * np.arange(M) / M + np.pi / M))
    x = np.asarray(points, dtype=complex)
    j = np.argmin(np.abs(x[..., None] - const), axis=-1)
    return j ^ (j >> 1)


def spread_direct(symbols, cb: Codebook) -> np.ndarray:
    """Direct symbol-to-sequence spreading: column l is codeword symbols[l].

    Returns the N x L_d chip matrix.
    """
    d = np.asarray(symbols, dtype=np.int64)
    if (d < 0).any() or (d >= cb.M).any():
        raise ValueError(f"symbols must lie in [0, {cb.M})")
    return cb.codewords[d].T


def spread_conventional(psk_symbols, s: np.ndarray) -> np.ndarray:
    """Conventional spreading: column l is psk_symbols[l] times the sequence."""
    x = np.asarray(psk_symbols, dtype=complex)
    return np.outer(np.asarray(s), x)


@dataclass
class UserFrame:
    """One user's frame through the transmit chain."""

    info_bits: np.ndarray   # (L,)
    coded_bits: np.ndarray  # (L_c,) coded and interleaved stream
    symbols: np.ndarray     # (L_d,) ints in [0, M)


def encode_frame(info_bits, M: int, interleaver_seed: int) -> UserFrame:
    """Run code + interleaver + packer for one user."""
    coded = conv_encode(info_bits)
    inter = interleave(coded, interleaver_seed)
    return UserFrame(
        info_bits=np.asarray(info_bits, dtype=np.int64),
        coded_bits=inter,
        symbols=bits_to_symbols(inter, M),
    )
