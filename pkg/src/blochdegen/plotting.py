"""Optional PNG figures for band paths and strength ladders."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _png(fig) -> bytes:
    buf = io.BytesIO()
    # no Software/date metadata so reruns give identical bytes
    fig.savefig(buf, format="png", dpi=120, metadata={"Software": None})
    plt.close(fig)
    return buf.getvalue()


def bands_figure(path_rows, n_bands: int, title: str = "") -> bytes:
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = range(len(path_rows))
    for band in range(n_bands):
        ax.plot(xs, [e[band] for _, e in path_rows], lw=1.0, color="C0")
    ax.set_xlabel("k-path index")
    ax.set_ylabel("energy (Ha)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _png(fig)


def scan_figure(rows, exponent: float) -> bytes:
    rows = [r for r in rows if r[0] > 0 and r[3] > 0]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog([r[0] for r in rows], [r[3] for r in rows], "o-", label=f"fitted p = {exponent:.2f}")
    ax.set_xlabel("lambda (Ha)")
    ax.set_ylabel("|dE_exact - dE_PT| (Ha)")
    ax.legend()
    fig.tight_layout()
    return _png(fig)
