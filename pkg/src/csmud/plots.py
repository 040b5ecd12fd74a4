"""Figure rendering for sweep results and codebook reports (Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_ber_figure", "render_coherence_figure"]

_STYLE = {"direct": dict(marker="o", color="tab:blue"),
          "conventional": dict(marker="s", color="tab:red")}


def render_ber_figure(rows, path) -> None:
    """Semilog BER-vs-Eb/N0 curves, one line per scheme, saved to `path`."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    schemes = []
    for r in rows:
        if r.scheme not in schemes:
            schemes.append(r.scheme)
    for scheme in schemes:
        pts = [(r.snr_db, r.ber) for r in rows
               if r.scheme == scheme and r.bits > 0 and r.ber > 0]
        if not pts:
            continue
        x, y = zip(*sorted(pts))
        ax.semilogy(x, y, label=scheme, **_STYLE.get(scheme, {}))
    ax.set_xlabel(r"$E_b/N_0$ (dB)")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_coherence_figure(report, path) -> None:
    """Histogram of per-user max intra-codebook correlation magnitudes."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist(np.asarray(report.intra_max), bins=40, color="tab:blue", alpha=0.8)
    if report.inter_max is not None:
        ax.axvline(report.inter_max, color="tab:red", linestyle="--",
                   label=f"max inter-codebook = {report.inter_max:.3f}")
        ax.legend()
    ax.set_xlabel("max intra-codebook |correlation| per user")
    ax.set_ylabel("users")
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
