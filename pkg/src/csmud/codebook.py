"""Spreading sequences, shift patterns and per-user codebooks.

Every user owns one random unit-circle base sequence of length N (unit
column norm).  Its codebook holds M circularly shifted copies of the base;
the shift amounts form the user's shift pattern, chosen greedily so the
codewords have small mutual correlations.  A data symbol d transmits
codeword d of the codebook.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Codebook",
    "CoherenceReport",
    "build_codebook",
    "circular_shift",
    "coherence_report",
    "design_shift_pattern",
    "generate_base_sequences",
    "load_matrix",
    "psk_dmin",
    "random_shift_pattern",
    "save_matrix",
]


def generate_base_sequences(K: int, N: int, seed: int) -> np.ndarray:
    """Draw the N x K matrix of random unit-circle spreading sequences.

    Entry (n, k) is exp(2j*pi*u)/sqrt(N) with u uniform on [0, 1), so every
    entry has modulus 1/sqrt(N) and every column has unit norm.  The same
    (K, N, seed) always yields the same matrix.
    """
    if K < 1 or N < 1:
        raise ValueError(f"K and N must be >= 1, got K={K}, N={N}")
    rng = np.random.default_rng(seed)
    mu = rng.random((N, K))
    return np.exp(2j * np.pi * mu) / np.sqrt(N)


def circular_shift(s: np.ndarray, j: int) -> np.ndarray:
    """Right-circular shift by j: out[n] = s[(n - j) mod N]."""
    s = np.asarray(s)
    return np.roll(s, int(j) % s.shape[-1], axis=-1)


def shift_correlation_mags(s: np.ndarray) -> np.ndarray:
    """|<s shifted by a, s shifted by b>| for all lags d = (b - a) mod N.

    Computed by direct inner products rather than FFT so that exactly
    orthogonal constructions come out as exact zeros (tie-breaking in the
    pattern search depends on it).
    """
    s = np.asarray(s)
    N = len(s)
    lags = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
    shifted = s[lags]  # column d = circular_shift(s, d)
    return np.abs(np.conj(s) @ shifted)


def design_shift_pattern(s: np.ndarray, M: int) -> np.ndarray:
    """Greedy minimum-correlation shift pattern; first entry is always 0.

    At each step the candidate shift j in [1, N-1] not yet chosen that
    minimizes the summed correlation magnitude against the already chosen
    shifts is appended.  Ties break to the smallest j; costs within a 1e-12
    relative band count as tied, since lags d and N-d are equal-cost by
    symmetry and only differ by rounding noise.  Entries stay distinct so
    no two codewords coincide.
    """
    s = np.asarray(s)
    N = len(s)
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    if M > N:
        raise ValueError(f"M must not exceed the sequence length, got M={M}, N={N}")
    mags = shift_correlation_mags(s)
    idx = np.arange(N)
    shifts = [0]
    cost = np.zeros(N)
    taken = np.zeros(N, dtype=bool)
    taken[0] = True
    for _ in range(1, M):
        cost = cost + mags[(idx - shifts[-1]) % N]
        cand = np.where(taken, np.inf, cost)
        cmin = cand.min()
        j = int(np.argmax(cand <= cmin + 1e-12 * max(1.0, cmin)))
        shifts.append(j)
        taken[j] = True
    return np.asarray(shifts, dtype=np.int64)


def random_shift_pattern(N: int, M: int, seed: int) -> np.ndarray:
    """Uniformly random distinct shift pattern with first entry 0 (baseline)."""
    if M < 2 or M > N:
        raise ValueError(f"need 2 <= M <= N, got M={M}, N={N}")
    rng = np.random.default_rng(seed)
    rest = rng.choice(np.arange(1, N), size=M - 1, replace=False)
    return np.concatenate([[0], rest]).astype(np.int64)


@dataclass(frozen=True)
class Codebook:
    """One user's base sequence, shift pattern and the M derived codewords."""

    base: np.ndarray       # (N,) complex
    pattern: np.ndarray    # (M,) int shifts
    codewords: np.ndarray  # (M, N) complex, row m = base shifted by pattern[m]

    @property
    def M(self) -> int:
        return self.codewords.shape[0]

    @property
    def N(self) -> int:
        return self.codewords.shape[1]


def build_codebook(s: np.ndarray, pattern: np.ndarray) -> Codebook:
    """Stack the circular shifts named by `pattern` into a codebook."""
    s = np.asarray(s)
    pattern = np.asarray(pattern, dtype=np.int64)
    N = len(s)
    if pattern.ndim != 1 or pattern.size < 1:
        raise ValueError("pattern must be a non-empty 1-D integer vector")
    if (pattern < 0).any() or (pattern >= N).any():
        raise ValueError(f"pattern entries must lie in [0, {N}), got {pattern}")
    rows = s[(np.arange(N)[None, :] - pattern[:, None]) % N]
    return Codebook(base=s, pattern=pattern, codewords=rows)


def psk_dmin(M: int, Es: float = 1.0) -> float:
    """Minimum Euclidean distance of an M-PSK constellation at symbol energy Es."""
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    if Es <= 0:
        raise ValueError(f"Es must be positive, got {Es}")
    return 2.0 * np.sqrt(Es) * np.sin(np.pi / M)


@dataclass
class CoherenceReport:
    """Correlation statistics within and across user codebooks."""

    n_users: int
    N: int
    M: int
    intra_max: np.ndarray   # (K,) max |corr| between distinct codewords of user k
    intra_mean: np.ndarray  # (K,) mean of the same
    inter_max: float | None   # max |corr| across codewords of distinct users
    inter_mean: float | None  # mean of the same; None when only one codebook


def coherence_report(codebooks: list[Codebook], chunk: int = 64) -> CoherenceReport:
    """Max/mean correlation magnitudes inside and between codebooks.

    Inter-user statistics run over every codeword pair from distinct users
    (each unordered user pair counted once); absent with a single codebook.
    """
    if not codebooks:
        raise ValueError("need at least one codebook")
    N = codebooks[0].N
    for cb in codebooks:
        if cb.N != N:
            raise ValueError("all codebooks must share the same sequence length N")
    K = len(codebooks)
    M = codebooks[0].M

    intra_max = np.empty(K)
    intra_mean = np.empty(K)
    for k, cb in enumerate(codebooks):
        g = np.abs(cb.codewords @ cb.codewords.conj().T)
        off = g[~np.eye(cb.M, dtype=bool)]
        intra_max[k] = off.max() if off.size else 0.0
        intra_mean[k] = off.mean() if off.size else 0.0

    if K == 1:
        return CoherenceReport(K, N, M, intra_max, intra_mean, None, None)

    # cross-user stats, chunked over users to bound memory at large K
    all_rows = np.vstack([cb.codewords for cb in codebooks])
    sizes = np.array([cb.M for cb in codebooks])
    starts = np.concatenate([[0], np.cumsum(sizes)])
    inter_max = 0.0
    inter_sum = 0.0
    inter_cnt = 0
    for k0 in range(0, K, chunk):
        k1 = min(k0 + chunk, K)
        rows = all_rows[starts[k0]:starts[k1]]
        tail = all_rows[starts[k0]:]  # users >= k0; same-user blocks masked below
        g = np.abs(rows @ tail.conj().T)
        for k in range(k0, k1):
            r0, r1 = starts[k] - starts[k0], starts[k + 1] - starts[k0]
            c0 = starts[k + 1] - starts[k0]  # columns for users strictly after k
            block = g[r0:r1, c0:]
            if block.size:
                inter_max = max(inter_max, float(block.max()))
                inter_sum += float(block.sum())
                inter_cnt += block.size
    return CoherenceReport(K, N, M, intra_max, intra_mean, inter_max,
                           inter_sum / inter_cnt)


def save_matrix(path, matrix: np.ndarray, N: int, K: int, M: int, seed: int) -> None:
    """Write a complex matrix as plain text: header "N K M seed", one row per line.

    Entries are "re+imi" pairs with enough digits to round-trip float64.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
    with open(path, "w") as fh:
        fh.write(f"{N} {K} {M} {seed}\n")
        for row in matrix:
            fh.write(" ".join(f"{z.real:.17g}{z.imag:+.17g}i" for z in row))
            fh.write("\n")


def load_matrix(path) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    """Read a matrix written by save_matrix; returns (matrix, (N, K, M, seed))."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise ValueError(f"{path}: expected header 'N K M seed', got {header!r}")
        meta = tuple(int(v) for v in header)
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append([complex(tok.replace("i", "j")) for tok in line.split()])
    return np.asarray(rows, dtype=complex), meta
