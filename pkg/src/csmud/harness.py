"""Monte-Carlo orchestration: configuration, trials, sweeps and output files.

A sweep runs n_frames independent trials per (scheme, Eb/N0) grid point.
Every random draw is tied to an explicit seed plus the global trial index,
so identical configs give byte-identical CSV output no matter how trials
are distributed over workers.  Both schemes inside one trial share the
info bits, channel and noise realizations (paired comparison).
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .channel import (add_awgn, draw_activity, generate_block_fading,
                      noise_variance, superpose)
from .codebook import (Codebook, build_codebook, design_shift_pattern,
                       generate_base_sequences)
from .phy_tx import (CODE_RATE, TAIL, _bits_per_symbol, deinterleave,
                     encode_frame, psk_modulate, spread_conventional,
                     spread_direct)
from .rx_mud import (OperationCounters, StoppingRule, gmp_detect, gomp_detect,
                     viterbi_decode_batch)

__all__ = [
    "SimConfig",
    "SufficiencyVerdict",
    "SweepResult",
    "TrialRecord",
    "load_config",
    "measurement_sufficiency",
    "paper_scale",
    "run_sweep",
    "run_trial",
    "write_outputs",
]

CSV_HEADER = ("scheme,M,p_a,snr_db,bits,bit_errors,ber,fer,"
              "md_rate,fa_rate,mults,adds,pinvs,seed")


@dataclass(frozen=True)
class SimConfig:
    """Every knob of a sweep; all randomness is pinned by the six seeds."""

    K: int = 320
    N: int = 32
    M: int = 8
    p_a: float = 0.01
    L: int = 100
    snr_grid_db: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0, 8.0)
    n_frames: int = 200
    scheme: str = "both"            # direct | conventional | both
    stop_mode: str = "oracle"       # oracle | threshold
    gamma_delta: float = 0.1        # threshold margin: gamma = sqrt(N*L_d*var)*(1+delta)
    taps: int = 4
    decay: float = 2.0
    block_len: int = 10
    seed_sequence: int = 1
    seed_pattern: int = 2
    seed_activity: int = 3
    seed_channel: int = 4
    seed_noise: int = 5
    seed_interleaver: int = 6
    out: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.scheme not in ("direct", "conventional", "both"):
            raise ValueError(f"scheme must be direct|conventional|both, got {self.scheme!r}")
        if self.stop_mode not in ("oracle", "threshold"):
            raise ValueError(f"stop_mode must be oracle|threshold, got {self.stop_mode!r}")
        if self.M > self.N:
            raise ValueError(f"M={self.M} exceeds sequence length N={self.N}")
        if not 0.0 <= self.p_a <= 1.0:
            raise ValueError(f"p_a must lie in [0, 1], got {self.p_a}")
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db must not be empty")
        if self.n_frames < 1 or self.workers < 1:
            raise ValueError("n_frames and workers must be >= 1")

    @property
    def overload(self) -> float:
        """Overloading factor lambda = K/N."""
        return self.K / self.N

    @property
    def schemes(self) -> tuple[str, ...]:
        return ("direct", "conventional") if self.scheme == "both" else (self.scheme,)

    @property
    def L_c(self) -> int:
        return 2 * (self.L + TAIL)

    @property
    def L_d(self) -> int:
        return math.ceil(self.L_c / _bits_per_symbol(self.M))


def paper_scale(cfg: SimConfig) -> SimConfig:
    """Scale a config up to the full-size system (long-running preset)."""
    return replace(cfg, K=1390, N=139, p_a=cfg.p_a, L=100, taps=14, block_len=10)


_CONFIG_DOC = {
    "K": "total user count",
    "N": "spreading-sequence length (subcarriers)",
    "M": "modulation order / codebook size (power of two)",
    "p_a": "per-user activity probability",
    "L": "information bits per active-user frame",
    "snr_grid_db": "comma-separated Eb/N0 grid in dB",
    "n_frames": "Monte-Carlo frames per grid point",
    "scheme": "direct | conventional | both",
    "stop_mode": "oracle (true per-frame K_a) | threshold (residual < gamma)",
    "gamma_delta": "threshold margin delta in gamma = sqrt(N*L_d*sigma^2)*(1+delta)",
    "taps": "channel taps in the exponential power-delay profile",
    "decay": "power-delay decay constant",
    "block_len": "OFDM symbols per fading block",
    "seed_sequence": "seed for the base-sequence matrix",
    "seed_pattern": "seed for randomized pattern baselines",
    "seed_activity": "base seed for activity flags and info bits (plus trial index)",
    "seed_channel": "base seed for fading draws (plus trial index)",
    "seed_noise": "base seed for noise draws (plus trial index)",
    "seed_interleaver": "base seed for per-user interleavers (plus user index)",
    "out": "output directory for CSV/plot/manifest files",
    "workers": "parallel worker processes for trials",
}


def _parse_value(name: str, raw: str):
    kind = SimConfig.__dataclass_fields__[name].type
    if name == "snr_grid_db":
        return tuple(float(v) for v in raw.replace(",", " ").split())
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def load_config(path) -> SimConfig:
    """Parse a flat key = value config file; unknown keys are errors."""
    overrides = {}
    known = {f.name for f in fields(SimConfig)}
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"{path}:{ln}: unknown config key {key!r}")
        if key in overrides:
            raise ValueError(f"{path}:{ln}: duplicate config key {key!r}")
        overrides[key] = _parse_value(key, raw)
    return SimConfig(**overrides)


def config_lines(cfg: SimConfig) -> list[str]:
    """Resolved config as key = value lines (manifest / reference format)."""
    out = []
    for f in fields(SimConfig):
        v = getattr(cfg, f.name)
        if f.name == "snr_grid_db":
            v = ",".join(f"{x:g}" for x in v)
        out.append(f"{f.name} = {v}")
    return out


@dataclass
class SufficiencyVerdict:
    """Advisory check that N measurements can support K_a-sparse recovery."""

    passed: bool
    bound: float
    N: int


def measurement_sufficiency(N: int, K_a: int, K: int, M: int,
                            c: float = 1.0) -> SufficiencyVerdict:
    """Advisory verdict on N >= c * K_a * ln(M*K); never blocks a run."""
    if min(N, K, M) < 1 or K_a < 0:
        raise ValueError("arguments must be positive (K_a may be 0)")
    bound = c * K_a * math.log(M * K)
    return SufficiencyVerdict(passed=N >= bound, bound=bound, N=N)


# ---------------------------------------------------------------------------
# trial pipeline


class SimContext:
    """Per-config immutable state shared by all trials (sequences, codebooks)."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.S = generate_base_sequences(cfg.K, cfg.N, cfg.seed_sequence)
        self.patterns = np.stack([design_shift_pattern(self.S[:, k], cfg.M)
                                  for k in range(cfg.K)])
        self.n_blocks = math.ceil(cfg.L_d / cfg.block_len)

    def codebook(self, k: int) -> Codebook:
        return build_codebook(self.S[:, k], self.patterns[k])


@lru_cache(maxsize=4)
def _context(cfg: SimConfig) -> SimContext:
    return SimContext(cfg)


@dataclass
class SchemeStats:
    """Raw per-trial accounting for one scheme (integers only, mergeable)."""

    bits: int = 0
    bit_errors: int = 0
    frames_with_traffic: int = 0
    frame_errors: int = 0
    active: int = 0
    missed: int = 0
    inactive: int = 0
    false_alarms: int = 0
    ops: OperationCounters = field(default_factory=OperationCounters)

    def merge(self, other: "SchemeStats") -> None:
        self.bits += other.bits
        self.bit_errors += other.bit_errors
        self.frames_with_traffic += other.frames_with_traffic
        self.frame_errors += other.frame_errors
        self.active += other.active
        self.missed += other.missed
        self.inactive += other.inactive
        self.false_alarms += other.false_alarms
        self.ops = self.ops + other.ops


@dataclass
class TrialRecord:
    """Outcome of one Monte-Carlo frame at one grid point."""

    trial_index: int
    snr_index: int
    snr_db: float
    K_a: int
    per_scheme: dict[str, SchemeStats]
    elapsed: float


def run_trial(cfg: SimConfig, trial_index: int) -> TrialRecord:
    """Run one frame end to end; deterministic in (cfg, trial_index).

    The grid point is trial_index // n_frames; per-stream seeds are the
    configured bases plus trial_index.
    """
    t0 = time.perf_counter()
    ctx = _context(cfg)
    snr_index, _ = divmod(trial_index, cfg.n_frames)
    if not 0 <= snr_index < len(cfg.snr_grid_db):
        raise ValueError(f"trial_index {trial_index} outside the sweep "
                         f"({len(cfg.snr_grid_db)} x {cfg.n_frames} trials)")
    snr_db = cfg.snr_grid_db[snr_index]
    K, N, M, L = cfg.K, cfg.N, cfg.M, cfg.L
    L_c, L_d = cfg.L_c, cfg.L_d

    rng_act = np.random.default_rng(cfg.seed_activity + trial_index)
    flags = rng_act.random(K) < cfg.p_a
    active = np.flatnonzero(flags)
    K_a = int(active.size)

    frames = {}
    for k in active:
        info = rng_act.integers(0, 2, size=L)
        frames[int(k)] = encode_frame(info, M, cfg.seed_interleaver + int(k))

    states = generate_block_fading(K, N, ctx.n_blocks, cfg.taps, cfg.decay,
                                   cfg.seed_channel + trial_index,
                                   block_len=cfg.block_len)
    var = noise_variance(snr_db, CODE_RATE, M)
    for st in states:
        st.noise_var = var

    if cfg.stop_mode == "oracle":
        stop = StoppingRule(mode="oracle", K_a=K_a)
    else:
        gamma = math.sqrt(N * L_d * var) * (1.0 + cfg.gamma_delta) if var > 0 else 1e-9
        stop = StoppingRule(mode="threshold", gamma=gamma)

    per_scheme: dict[str, SchemeStats] = {}
    for scheme in cfg.schemes:
        if scheme == "direct":
            chips = {k: spread_direct(uf.symbols, ctx.codebook(k))
                     for k, uf in frames.items()}
        else:
            chips = {k: spread_conventional(psk_modulate(uf.symbols, M), ctx.S[:, k])
                     for k, uf in frames.items()}
        if frames:
            Y = superpose(chips, states, flags)
        else:
            Y = np.zeros((N, L_d), dtype=complex)
        Y = add_awgn(Y, snr_db, CODE_RATE, M, cfg.seed_noise + trial_index)

        if scheme == "direct":
            det = gmp_detect(Y, ctx.S, states, ctx.patterns, stop)
        else:
            det = gomp_detect(Y, ctx.S, states, stop, M)

        stats = SchemeStats(ops=det.op_counts)
        stats.active = K_a
        stats.inactive = K - K_a
        detected = set(det.active_set)
        stats.false_alarms = len(detected - set(int(k) for k in active))
        hit = [int(k) for k in active if int(k) in detected]
        stats.missed = K_a - len(hit)
        stats.bits = K_a * L
        stats.bit_errors = stats.missed * L  # every bit of a missed user counts
        if hit:
            coded_hat = np.stack([
                deinterleave(det.B_hat[k, :L_c], cfg.seed_interleaver + k)
                for k in hit])
            decoded = viterbi_decode_batch(coded_hat, L)
            for row, k in enumerate(hit):
                stats.bit_errors += int(np.sum(decoded[row] != frames[k].info_bits))
        if K_a > 0:
            stats.frames_with_traffic = 1
            stats.frame_errors = int(stats.bit_errors > 0)
        per_scheme[scheme] = stats

    return TrialRecord(trial_index, snr_index, snr_db, K_a, per_scheme,
                       time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# sweep aggregation and output files


@dataclass
class SweepResult:
    """Aggregated metrics for one (scheme, Eb/N0) grid point."""

    scheme: str
    M: int
    p_a: float
    snr_db: float
    overload: float
    n_frames: int
    bits: int
    bit_errors: int
    ber: float
    se_ber: float
    fer: float
    md_rate: float
    fa_rate: float
    mean_K_a: float
    mean_mults: float
    mean_adds: float
    mean_pinvs: float
    wall_time: float
    seed: int


def _ratio(num: int, den: int) -> float:
    return num / den if den else float("nan")


def _aggregate(cfg: SimConfig, records: list[TrialRecord]) -> list[SweepResult]:
    rows = []
    for scheme in cfg.schemes:
        for i, snr_db in enumerate(cfg.snr_grid_db):
            cell = [r for r in records if r.snr_index == i]
            agg = SchemeStats()
            K_a_total = 0
            elapsed = 0.0
            for r in sorted(cell, key=lambda r: r.trial_index):
                agg.merge(r.per_scheme[scheme])
                K_a_total += r.K_a
                elapsed += r.elapsed
            ber = _ratio(agg.bit_errors, agg.bits)
            se = math.sqrt(ber * (1.0 - ber) / agg.bits) if agg.bits else float("nan")
            rows.append(SweepResult(
                scheme=scheme, M=cfg.M, p_a=cfg.p_a, snr_db=snr_db,
                overload=cfg.overload, n_frames=len(cell),
                bits=agg.bits, bit_errors=agg.bit_errors, ber=ber, se_ber=se,
                fer=_ratio(agg.frame_errors, agg.frames_with_traffic),
                md_rate=_ratio(agg.missed, agg.active),
                fa_rate=_ratio(agg.false_alarms, agg.inactive),
                mean_K_a=K_a_total / len(cell) if cell else float("nan"),
                mean_mults=agg.ops.multiplications / len(cell) if cell else 0.0,
                mean_adds=agg.ops.additions / len(cell) if cell else 0.0,
                mean_pinvs=agg.ops.pseudoinverses / len(cell) if cell else 0.0,
                wall_time=elapsed,
                seed=cfg.seed_noise + i * cfg.n_frames,
            ))
    return rows


def run_sweep(cfg: SimConfig, out_dir=None, write_files: bool = True,
              render_figure: bool = True) -> list[SweepResult]:
    """Run the configured sweep and (optionally) emit CSV/plot/manifest files.

    Trials are independent and may run on several worker processes; the
    aggregation only sums integers, so results and the emitted CSV are
    byte-identical regardless of scheduling.
    """
    n_trials = len(cfg.snr_grid_db) * cfg.n_frames
    if cfg.workers > 1:
        _context(cfg)  # build once in the parent; forked workers inherit it
        import multiprocessing

        with ProcessPoolExecutor(
                max_workers=cfg.workers,
                mp_context=multiprocessing.get_context("fork")) as ex:
            chunk = max(1, n_trials // (cfg.workers * 8))
            records = list(ex.map(run_trial, [cfg] * n_trials, range(n_trials),
                                  chunksize=chunk))
    else:
        records = [run_trial(cfg, t) for t in range(n_trials)]
    rows = _aggregate(cfg, records)
    if write_files:
        write_outputs(cfg, rows, out_dir=out_dir, render_figure=render_figure)
    return rows


def format_csv(rows: list[SweepResult]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(",".join([
            r.scheme, repr(r.M), repr(r.p_a), repr(r.snr_db),
            repr(r.bits), repr(r.bit_errors), repr(r.ber), repr(r.fer),
            repr(r.md_rate), repr(r.fa_rate),
            repr(r.mean_mults), repr(r.mean_adds), repr(r.mean_pinvs),
            repr(r.seed),
        ]))
    return "\n".join(lines) + "\n"


def write_outputs(cfg: SimConfig, rows: list[SweepResult], out_dir=None,
                  render_figure: bool = True) -> dict[str, Path]:
    """Write results.csv, per-scheme plot data, the run manifest and a figure."""
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "results.csv"}
    paths["csv"].write_text(format_csv(rows))

    for scheme in cfg.schemes:
        lines = ["# snr_db log10_ber"]
        for r in rows:
            if r.scheme == scheme and r.bits > 0 and r.ber > 0:
                lines.append(f"{r.snr_db:g} {math.log10(r.ber):.6f}")
        p = out / f"plot_{scheme}.dat"
        p.write_text("\n".join(lines) + "\n")
        paths[f"plot_{scheme}"] = p

    manifest = [f"csmud version {__version__}", ""]
    manifest += config_lines(cfg)
    manifest.append(f"overload_lambda = {cfg.overload}")
    manifest.append(f"L_c = {cfg.L_c}")
    manifest.append(f"L_d = {cfg.L_d}")
    paths["manifest"] = out / "manifest.txt"
    paths["manifest"].write_text("\n".join(manifest) + "\n")

    if render_figure:
        from .plots import render_ber_figure

        paths["figure"] = out / "ber_vs_snr.png"
        render_ber_figure(rows, paths["figure"])
    return paths
