"""Figure rendering for the report paths.

Every report-emitting CLI command saves the matching figure next to its
CSV output. All functions take already-computed tables/results and
return the written path.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGSIZE = (6.4, 4.2)


def save_spectrum_figure(hist: dict, mp: dict, path) -> str:
    """Bulk eigenvalue histogram with the fitted density overlaid."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    widths = hist["bin_right"] - hist["bin_left"]
    ax.bar(hist["bin_left"], hist["density"], width=widths, align="edge",
           color="#9ecae1", edgecolor="white", label="bulk eigenvalues")
    lo, hi = mp["lambda_minus"], mp["lambda_plus"]
    grid = np.linspace(max(lo, 1e-9), hi, 400)
    from .spectra import mp_density
    ax.plot(grid, mp_density(grid, mp["q"], mp["sigma"]), "r-", lw=1.5,
            label=f"fit: q={mp['q']:.3f}, sigma={mp['sigma']:.3f}")
    ax.axvline(hi, color="k", ls="--", lw=0.8)
    ax.set_xlabel("eigenvalue")
    ax.set_ylabel("density")
    ax.set_title(f"bulk spectrum, {mp['m_max']} outliers above the edge")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def save_memory_figure(zeta: np.ndarray, theta_hat: int | None, path) -> str:
    """Log-log memory curve with the fitted breakpoint."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    m = np.arange(1, zeta.size)
    good = zeta[1:] > 0
    ax.plot(m[good], zeta[1:][good], "o-", ms=4, color="#3182bd", label="zeta(m)")
    if theta_hat is not None:
        ax.axvline(theta_hat, color="r", ls="--", lw=1.0, label=f"breakpoint {theta_hat}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("removed components m")
    ax.set_ylabel("residual memory fraction")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def save_comparison_figure(lambda_curve: np.ndarray, press: np.ndarray | None,
                           markers: dict, path) -> str:
    """Cumulative-variance curve (and PRESS, when present) with selections."""
    n_panels = 2 if press is not None else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(6.4 * n_panels / 1.4, 4.2))
    axes = np.atleast_1d(axes)
    ax = axes[0]
    ax.plot(np.arange(1, lambda_curve.size + 1), lambda_curve, color="#3182bd")
    for alpha in (70, 90):
        ax.axhline(alpha, color="r", ls="--", lw=0.8)
    for name, m in markers.items():
        if m is not None:
            ax.axvline(m, ls=":", lw=1.0, label=f"{name}: {m}")
    ax.set_xlabel("components m")
    ax.set_ylabel("cumulative variation [%]")
    if markers:
        ax.legend(frameon=False, fontsize=8)
    if press is not None:
        ax2 = axes[1]
        ax2.plot(np.arange(press.size), press, color="#31a354")
        ax2.axvline(int(np.argmin(press)), color="r", ls="--", lw=0.8)
        ax2.set_xlabel("components m")
        ax2.set_ylabel("PRESS(m)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def save_sweep_figure(phis: np.ndarray, table: dict[str, np.ndarray], path) -> str:
    """Seed-averaged selected counts per method across the noise sweep."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for name, values in table.items():
        ax.plot(phis, values, "o-", label=name)
    ax.set_xlabel("noise variance")
    ax.set_ylabel("selected components")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)
