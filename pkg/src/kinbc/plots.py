"""Figure rendering for simulation and sweep reports (written next to the CSV)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_decay_figure(record, fit, path):
    """Log-scale norm history with the fitted exponential overlaid."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    mask = record.l2_norm > 0.0
    ax.semilogy(record.times[mask], record.l2_norm[mask], "b-", lw=1.2, label="L2 norm")
    if fit is not None and fit.ok:
        t = np.linspace(fit.window[0], fit.window[1], 64)
        ax.semilogy(
            t,
            np.exp(fit.intercept - fit.nu * t),
            "r--",
            lw=1.0,
            label=f"fit: rate {fit.nu:.4g}, R$^2$ {fit.r_squared:.4f}",
        )
    ax.set_xlabel("t")
    ax.set_ylabel("||f(t)||")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_energy_figure(record, path):
    """Weighted functional (log scale) and discrete boundary form over time."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 6.0), sharex=True)
    mask = record.lyapunov > 0.0
    ax1.semilogy(record.times[mask], record.lyapunov[mask], "g-", lw=1.2)
    ax1.set_ylabel("weighted energy")
    ax1.grid(True, which="both", alpha=0.3)
    ax2.plot(record.times, record.boundary_form, "k-", lw=1.0)
    ax2.axhline(0.0, color="r", lw=0.8, ls=":")
    ax2.set_xlabel("t")
    ax2.set_ylabel("boundary form")
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(values, rates, admissible, param, path):
    """Fitted decay rate against the swept parameter."""
    values = np.asarray(values, dtype=float)
    rates = np.asarray(rates, dtype=float)
    admissible = np.asarray(admissible, dtype=bool)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ok = np.isfinite(rates)
    ax.plot(values[ok & admissible], rates[ok & admissible], "go", label="admissible")
    if np.any(ok & ~admissible):
        ax.plot(values[ok & ~admissible], rates[ok & ~admissible], "rx", label="not certified")
    ax.axhline(0.0, color="k", lw=0.8, ls=":")
    ax.set_xlabel(param)
    ax.set_ylabel("fitted decay rate")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
