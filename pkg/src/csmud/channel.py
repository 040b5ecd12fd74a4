"""Sporadic activity, block-fading frequency-selective channels and AWGN.

Users are active i.i.d. Bernoulli(p_a).  Per user and per fading block the
channel draws a short exponential power-delay profile of circular complex
Gaussian taps and takes its N-point DFT, giving frequency-domain
coefficients with E[|H|^2] = 1 that stay constant for block_len OFDM
symbols.  Noise is white complex Gaussian in the frequency domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelState",
    "add_awgn",
    "draw_activity",
    "exponential_tap_powers",
    "flat_unit_states",
    "generate_block_fading",
    "noise_variance",
    "superpose",
]


def draw_activity(K: int, p_a: float, seed: int) -> np.ndarray:
    """Draw K i.i.d. Bernoulli(p_a) activity flags from a seeded generator."""
    if not 0.0 <= p_a <= 1.0:
        raise ValueError(f"p_a must lie in [0, 1], got {p_a}")
    rng = np.random.default_rng(seed)
    return rng.random(K) < p_a


def exponential_tap_powers(taps: int, decay: float = 2.0) -> np.ndarray:
    """Normalized exponential power-delay profile P_l ~ exp(-decay*l/taps)."""
    p = np.exp(-decay * np.arange(taps) / taps)
    return p / p.sum()


@dataclass
class ChannelState:
    """Frequency-domain coefficients for one fading block."""

    H: np.ndarray            # (N, K) complex
    block_len: int           # OFDM symbols covered by this block
    tap_powers: np.ndarray   # normalized power-delay profile used to draw H
    noise_var: float = 0.0   # per-complex-entry sigma^2, filled in by the harness


def generate_block_fading(K: int, N: int, n_blocks: int, taps: int,
                          decay: float, seed: int,
                          block_len: int = 10) -> list[ChannelState]:
    """Draw per-user frequency responses for n_blocks independent fading blocks.

    Taps are i.i.d. circular complex Gaussian with the exponential profile
    (sum of powers = 1); the frequency response is their N-point DFT, so
    E[|H(n, k)|^2] = 1.
    """
    if taps < 1:
        raise ValueError(f"taps must be >= 1, got {taps}")
    if taps > N:
        raise ValueError(f"taps must not exceed N, got taps={taps}, N={N}")
    p = exponential_tap_powers(taps, decay)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n_blocks, K, taps)) + 1j * rng.standard_normal((n_blocks, K, taps))
    g *= np.sqrt(p / 2.0)
    H = np.fft.fft(g, n=N, axis=2)  # (n_blocks, K, N)
    return [ChannelState(H=H[b].T.copy(), block_len=block_len, tap_powers=p)
            for b in range(n_blocks)]


def flat_unit_states(K: int, N: int, n_blocks: int = 1,
                     block_len: int = 10 ** 9) -> list[ChannelState]:
    """All-ones channels (identity fading); handy for noiseless checks."""
    return [ChannelState(H=np.ones((N, K), dtype=complex), block_len=block_len,
                         tap_powers=np.ones(1))
            for _ in range(n_blocks)]


def block_slices(L_d: int, block_len: int) -> list[slice]:
    """Column ranges of the OFDM symbols covered by each fading block."""
    return [slice(b0, min(b0 + block_len, L_d)) for b0 in range(0, L_d, block_len)]


def superpose(frames: dict[int, np.ndarray], states: list[ChannelState],
              activity: np.ndarray) -> np.ndarray:
    """Noiseless multiuser superposition of spread frames through the channel.

    Column l of the output sums H[:, k] * frame_k[:, l] over active users,
    with H taken from the fading block covering OFDM symbol l.  Inactive
    users contribute nothing even if a frame is supplied for them.
    """
    activity = np.asarray(activity, dtype=bool)
    if not frames:
        raise ValueError("superpose needs at least one frame to size the output")
    some = next(iter(frames.values()))
    N, L_d = some.shape
    block_len = states[0].block_len
    if math.ceil(L_d / block_len) > len(states):
        raise ValueError(f"{len(states)} fading blocks cannot cover {L_d} symbols "
                         f"at block_len={block_len}")
    Y = np.zeros((N, L_d), dtype=complex)
    slices = block_slices(L_d, block_len)
    for k, chips in frames.items():
        if chips.shape != (N, L_d):
            raise ValueError(f"frame for user {k} has shape {chips.shape}, "
                             f"expected {(N, L_d)}")
        if not activity[k]:
            continue
        for b, sl in enumerate(slices):
            Y[:, sl] += states[b].H[:, k, None] * chips[:, sl]
    return Y


def noise_variance(ebn0_db: float, rate: float, M: int) -> float:
    """Per-complex-entry sigma^2 at the given Eb/N0.

    Each unit-energy transmitted column carries log2(M) coded bits, i.e.
    rate*log2(M) information bits, so Eb = 1/(rate*log2(M)) and
    sigma^2 = Eb / 10^(ebn0/10).  +inf means noiseless.
    """
    if math.isinf(ebn0_db) and ebn0_db > 0:
        return 0.0
    return 1.0 / (rate * math.log2(M) * 10.0 ** (ebn0_db / 10.0))


def add_awgn(Y: np.ndarray, ebn0_db: float, rate: float, M: int,
             seed: int) -> np.ndarray:
    """Add white complex Gaussian noise at the given Eb/N0 (seeded)."""
    var = noise_variance(ebn0_db, rate, M)
    if var == 0.0:
        return Y.copy()
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(Y.shape) + 1j * rng.standard_normal(Y.shape)
    return Y + noise * math.sqrt(var / 2.0)
