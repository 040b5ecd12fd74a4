"""Joint activity-and-data detection for the multiuser uplink.

Two greedy receivers: a group matching pursuit that detects the strongest
remaining user from codebook correlations and assigns per-symbol nearest
codewords (direct spreading), and a conventional group orthogonal matching
pursuit that re-estimates all detected users' complex symbols by joint
least squares and PSK-demaps at the end.  Both count multiplications,
additions and pseudoinverses of their detection kernels so runs can be
checked against the closed-form cost model in count_expected_ops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelState, block_slices
from .phy_tx import CONSTRAINT_LEN, GENERATORS, TAIL, _bits_per_symbol, psk_demodulate

__all__ = [
    "DetectionResult",
    "OperationCounters",
    "StoppingRule",
    "count_expected_ops",
    "gmp_detect",
    "gomp_detect",
    "omp_reference",
    "symbols_to_bits",
    "viterbi_decode",
]


@dataclass
class OperationCounters:
    """Counts of the instrumented receiver kernels."""

    multiplications: int = 0
    additions: int = 0
    pseudoinverses: int = 0

    def __add__(self, other: "OperationCounters") -> "OperationCounters":
        return OperationCounters(
            self.multiplications + other.multiplications,
            self.additions + other.additions,
            self.pseudoinverses + other.pseudoinverses,
        )


@dataclass(frozen=True)
class StoppingRule:
    """Stop after K_a iterations (oracle) or once ||R||_F < gamma (threshold)."""

    mode: str
    K_a: int | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.mode == "oracle":
            if self.K_a is None or self.gamma is not None:
                raise ValueError("oracle mode takes K_a and no gamma")
            if self.K_a < 0:
                raise ValueError(f"K_a must be >= 0, got {self.K_a}")
        elif self.mode == "threshold":
            if self.gamma is None or self.K_a is not None:
                raise ValueError("threshold mode takes gamma and no K_a")
            if self.gamma <= 0:
                raise ValueError(f"gamma must be positive, got {self.gamma}")
        else:
            raise ValueError(f"unknown stopping mode {self.mode!r}")


@dataclass
class DetectionResult:
    """Detected users, symbol/bit estimates and per-run diagnostics."""

    active_set: list[int]
    D_hat: np.ndarray                 # (K, L_d) ints; zero rows for undetected users
    B_hat: np.ndarray                 # (K, L_d*log2(M)) bits
    residual_norm_history: list[float]  # ||R||_F after 0, 1, ... iterations
    op_counts: OperationCounters = field(default_factory=OperationCounters)


def symbols_to_bits(symbols, M: int, n_bits: int | None = None) -> np.ndarray:
    """MSB-first binary expansion of symbols; inverse of bits_to_symbols.

    With n_bits the trailing pad introduced by the packer is stripped
    (per row for matrix input).
    """
    k = _bits_per_symbol(M)
    d = np.asarray(symbols, dtype=np.int64)
    if (d < 0).any() or (d >= M).any():
        raise ValueError(f"symbols must lie in [0, {M})")
    bits = (d[..., None] >> np.arange(k - 1, -1, -1)) & 1
    bits = bits.reshape(*d.shape[:-1], d.shape[-1] * k) if d.ndim else bits.ravel()
    if n_bits is not None:
        bits = bits[..., :n_bits]
    return bits


def _shifted_codeword_tensor(S: np.ndarray, patterns: np.ndarray) -> np.ndarray:
    """(K, M, N) tensor of every user's pattern-shifted sequences."""
    N, K = S.shape
    idx = (np.arange(N)[None, None, :] - patterns[:, :, None]) % N
    return S.T[np.arange(K)[:, None, None], idx]


def _check_stop(stop: StoppingRule, K: int) -> int:
    """Validate the rule against the user count; returns the iteration cap."""
    if stop.mode == "oracle":
        if stop.K_a > K:
            raise ValueError(f"K_a={stop.K_a} exceeds the user count K={K}")
        return stop.K_a
    return K


def gmp_detect(Y: np.ndarray, S: np.ndarray, states: list[ChannelState],
               patterns: np.ndarray, stop: StoppingRule) -> DetectionResult:
    """Greedy joint activity and symbol detection over shift codebooks.

    Per iteration: for every user take, per OFDM symbol, the norm-scaled
    complex correlation <w, r>/||w|| of largest magnitude between its
    channel-weighted codewords w and the residual column, sum those over
    symbols and rank users by the magnitude of the sum.  Scaling by ||w||
    is the usual matching-pursuit column selection under unequal effective
    norms, and true-user correlations are near positive real so they add
    coherently while false users self-cancel.  The winner gets, per symbol,
    the codeword of minimum Euclidean distance to the residual, which is
    then subtracted.  Argmax/argmin ties break to the smallest index.
    """
    Y = np.asarray(Y, dtype=complex)
    N, L_d = Y.shape
    K = S.shape[1]
    M = patterns.shape[1]
    max_iters = _check_stop(stop, K)

    slices = block_slices(L_d, states[0].block_len)
    if len(slices) > len(states):
        raise ValueError(f"{len(states)} fading blocks cannot cover {L_d} symbols")
    shifted = _shifted_codeword_tensor(S, patterns)
    W = [shifted * st.H.T[:, None, :] for st in states[:len(slices)]]  # (K, M, N)
    Wc = [w.conj().reshape(K * M, N) for w in W]
    Wnorm = [np.maximum(np.linalg.norm(w, axis=2), 1e-300) for w in W]  # (K, M)

    ops = OperationCounters()
    R = Y.copy()
    history = [float(np.linalg.norm(R))]
    D_hat = np.zeros((K, L_d), dtype=np.int64)
    detected: list[int] = []

    for _ in range(max_iters):
        if stop.mode == "threshold" and history[-1] < stop.gamma:
            break
        # activity detection: per symbol keep the norm-scaled complex
        # correlation of largest magnitude over the M shifts, then rank
        # users by |sum over symbols|
        best = np.empty((K, L_d), dtype=complex)
        for b, sl in enumerate(slices):
            C = (Wc[b] @ R[:, sl]).reshape(K, M, sl.stop - sl.start)
            C /= Wnorm[b][:, :, None]
            pick = np.abs(C).argmax(axis=1)
            best[:, sl] = np.take_along_axis(C, pick[:, None, :], axis=1)[:, 0, :]
        ops.multiplications += K * M * N * L_d
        metric = np.abs(best.sum(axis=1))
        ops.additions += K * L_d
        if detected:
            metric[detected] = -np.inf
        k_star = int(np.argmax(metric))
        # data detection: nearest codeword per OFDM symbol
        syms = np.empty(L_d, dtype=np.int64)
        for b, sl in enumerate(slices):
            diff = W[b][k_star][:, :, None] - R[:, sl][None, :, :]  # (M, N, L_b)
            d2 = (diff.real ** 2 + diff.imag ** 2).sum(axis=1)
            syms[sl] = d2.argmin(axis=0)
        ops.additions += M * N * L_d
        # residual update
        for b, sl in enumerate(slices):
            R[:, sl] -= W[b][k_star][syms[sl]].T
        ops.additions += N * L_d
        D_hat[k_star] = syms
        detected.append(k_star)
        history.append(float(np.linalg.norm(R)))

    # degenerate single-codeword dictionaries (M = 1) carry no bits
    B_hat = symbols_to_bits(D_hat, M) if M >= 2 else np.zeros((K, 0), dtype=np.int64)
    return DetectionResult(detected, D_hat, B_hat, history, ops)


def gomp_detect(Y: np.ndarray, S: np.ndarray, states: list[ChannelState],
                stop: StoppingRule, M: int,
                ridge: float = 1e-10) -> DetectionResult:
    """Conventional group matching pursuit with least-squares data detection.

    Per iteration: pick the not-yet-detected user with the largest summed
    norm-scaled correlation magnitude between its channel-weighted sequence
    and the residual (incoherent sum; data phases randomize the terms),
    jointly re-estimate all detected users' complex symbols per OFDM symbol
    through a ridge-regularized pseudoinverse, and rebuild the residual.
    After stopping, the final estimates are PSK-demapped.
    """
    Y = np.asarray(Y, dtype=complex)
    N, L_d = Y.shape
    K = S.shape[1]
    max_iters = _check_stop(stop, K)

    slices = block_slices(L_d, states[0].block_len)
    if len(slices) > len(states):
        raise ValueError(f"{len(states)} fading blocks cannot cover {L_d} symbols")
    A = [st.H * S for st in states[:len(slices)]]  # (N, K): column k = diag(h_k) s_k
    Anorm = [np.maximum(np.linalg.norm(a, axis=0), 1e-300) for a in A]

    ops = OperationCounters()
    R = Y.copy()
    history = [float(np.linalg.norm(R))]
    X_pad = np.zeros((K, L_d), dtype=complex)
    detected: list[int] = []

    for _ in range(max_iters):
        if stop.mode == "threshold" and history[-1] < stop.gamma:
            break
        corr = np.empty((K, L_d))
        for b, sl in enumerate(slices):
            corr[:, sl] = np.abs(A[b].conj().T @ R[:, sl]) / Anorm[b][:, None]
        ops.multiplications += K * N * L_d
        metric = corr.sum(axis=1)
        ops.additions += K * L_d
        if detected:
            metric[detected] = -np.inf
        detected.append(int(np.argmax(metric)))
        q = len(detected)
        # joint LS over the detected set, one solve per fading block
        for b, sl in enumerate(slices):
            Ab = A[b][:, detected]
            G = Ab.conj().T @ Ab + ridge * np.eye(q)
            X_pad[np.ix_(detected, range(sl.start, sl.stop))] = np.linalg.solve(
                G, Ab.conj().T @ Y[:, sl])
            ops.pseudoinverses += 1
        # applying the LS estimate is charged at (2q-1)*N*L_d per iteration so
        # a Q-iteration run totals Q^2*N*L_d for this kernel
        ops.multiplications += (2 * q - 1) * N * L_d
        # residual rebuild through the zero-padded estimate of all K users
        for b, sl in enumerate(slices):
            R[:, sl] = Y[:, sl] - A[b] @ X_pad[:, sl]
        ops.multiplications += K * N * L_d
        ops.additions += N * L_d
        history.append(float(np.linalg.norm(R)))

    D_hat = np.zeros((K, L_d), dtype=np.int64)
    if detected:
        D_hat[detected] = psk_demodulate(X_pad[detected], M)
    B_hat = symbols_to_bits(D_hat, M)
    return DetectionResult(detected, D_hat, B_hat, history, ops)


def omp_reference(y: np.ndarray, Psi: np.ndarray,
                  sparsity: int) -> tuple[list[int], np.ndarray]:
    """Plain orthogonal matching pursuit; reference solver for tests.

    Returns the ordered support and the least-squares coefficients on it.
    A (numerically) zero residual stops early, so y = 0 yields an empty
    support.
    """
    y = np.asarray(y, dtype=complex).ravel()
    if sparsity > Psi.shape[1]:
        raise ValueError("sparsity cannot exceed the number of columns")
    support: list[int] = []
    coef = np.zeros(0, dtype=complex)
    r = y.copy()
    tiny = 1e-12 * max(1.0, float(np.linalg.norm(y)))
    for _ in range(sparsity):
        if np.linalg.norm(r) <= tiny:
            break
        scores = np.abs(Psi.conj().T @ r)
        if support:
            scores[support] = -1.0
        support.append(int(np.argmax(scores)))
        coef, *_ = np.linalg.lstsq(Psi[:, support], y, rcond=None)
        r = y - Psi[:, support] @ coef
    return support, coef


def count_expected_ops(M: int, L_d: int, K_a: int, N: int, K: int,
                       mode: str) -> OperationCounters:
    """Closed-form kernel counts for a K_a-iteration detection run."""
    if min(M, L_d, N, K) < 1 or K_a < 0:
        raise ValueError("dimensions must be positive and K_a >= 0")
    if mode == "direct":
        return OperationCounters(
            multiplications=M * L_d * K_a * N * K,
            additions=K_a * L_d * (K + N + M * N),
            pseudoinverses=0,
        )
    if mode == "conventional":
        return OperationCounters(
            multiplications=L_d * K_a * N * (2 * K + K_a),
            additions=K_a * L_d * (K + N),
            pseudoinverses=K_a,
        )
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Viterbi decoding of the (133, 171) code


def _trellis():
    n_states = 1 << (CONSTRAINT_LEN - 1)
    states = np.arange(n_states)
    out_sym = np.zeros((n_states, 2), dtype=np.int64)
    for b in (0, 1):
        w = (b << (CONSTRAINT_LEN - 1)) | states  # window: current bit at MSB
        o0 = _popcount_parity(w & GENERATORS[0])
        o1 = _popcount_parity(w & GENERATORS[1])
        out_sym[:, b] = (o0 << 1) | o1
    return out_sym


def _popcount_parity(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    out = np.zeros_like(v)
    while v.any():
        out ^= v & 1
        v >>= 1
    return out


_OUT_SYM = _trellis()
_HAMM2 = np.array([[bin(a ^ b).count("1") for b in range(4)] for a in range(4)])


def viterbi_decode(coded_bits, L: int) -> np.ndarray:
    """Hard-decision ML Viterbi decode of one terminated codeword.

    Input must hold 2*(L + 6) coded bits; returns the L info bits.
    """
    coded = np.asarray(coded_bits, dtype=np.int64).reshape(1, -1)
    return viterbi_decode_batch(coded, L)[0]


def viterbi_decode_batch(coded: np.ndarray, L: int) -> np.ndarray:
    """Decode U codewords at once; coded has shape (U, 2*(L+6))."""
    coded = np.asarray(coded, dtype=np.int64)
    n_steps = L + TAIL
    if coded.ndim != 2 or coded.shape[1] != 2 * n_steps:
        raise ValueError(f"expected {2 * n_steps} coded bits per row, "
                         f"got shape {coded.shape}")
    U = coded.shape[0]
    n_states = 1 << (CONSTRAINT_LEN - 1)
    rx_sym = (coded[:, 0::2] << 1) | coded[:, 1::2]  # (U, n_steps) ints 0..3

    # predecessors of state s' under input b = s' >> 5 are 2t and 2t+1, t = s' & 31
    sp = np.arange(n_states)
    b_of = sp >> (CONSTRAINT_LEN - 2)
    pred0 = (sp & (n_states // 2 - 1)) * 2
    pred1 = pred0 + 1

    pm = np.full((U, n_states), 1e9)
    pm[:, 0] = 0.0  # encoder starts in the zero state
    back = np.empty((n_steps, U, n_states), dtype=np.int8)
    for t in range(n_steps):
        bm = _HAMM2[_OUT_SYM[None, :, :], rx_sym[:, t, None, None]]  # (U, 64, 2)
        c0 = pm[:, pred0] + bm[:, pred0, b_of]
        c1 = pm[:, pred1] + bm[:, pred1, b_of]
        take1 = c1 < c0
        pm = np.where(take1, c1, c0)
        back[t] = take1
    # terminated: trace back from state 0
    bits = np.empty((U, n_steps), dtype=np.int64)
    state = np.zeros(U, dtype=np.int64)
    rows = np.arange(U)
    for t in range(n_steps - 1, -1, -1):
        bits[:, t] = state >> (CONSTRAINT_LEN - 2)
        pick1 = back[t, rows, state]
        base = (state & (n_states // 2 - 1)) * 2
        state = base + pick1
    return bits[:, :L]
