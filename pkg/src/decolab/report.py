"""Figure rendering for the CLI report path.

Each renderer takes already-computed results and writes one PNG next to
the delimited output.  The CSV files remain the machine-readable contract;
figures are a convenience for eyeballing runs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def save_trajectory_figure(traj, path: str | Path, title: str = "evolution"):
    fig, (ax_log, ax_lin) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    t = traj.times
    for name in ("coherence", "cross01_norm"):
        if name in traj.series:
            ax_log.semilogy(t, np.maximum(traj.series[name], 1e-300),
                            label=name)
    ax_log.set_xlabel("time")
    ax_log.set_ylabel("normalized coherence")
    ax_log.grid(alpha=0.3)
    if ax_log.lines:
        ax_log.legend(fontsize=8)
    for name in sorted(traj.series):
        if name in ("coherence", "cross01_norm"):
            continue
        ax_lin.plot(t, traj.series[name], label=name)
    ax_lin.set_xlabel("time")
    ax_lin.grid(alpha=0.3)
    ax_lin.legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_ratio_figure(n_values, theta_inv, exponent, path: str | Path):
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    ax.loglog(n_values, theta_inv, "o", label="fitted decay rate")
    n_ref = np.array([min(n_values), max(n_values)], dtype=float)
    scale = theta_inv[-1] / n_values[-1] ** 2
    ax.loglog(n_ref, scale * n_ref ** 2, "--",
              label="quadratic in separation")
    ax.set_xlabel("separation / thermal wavelength")
    ax.set_ylabel("coherence decay rate")
    ax.set_title(f"fitted power-law exponent {exponent:.3f}")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_hbar_figure(rows, path: str | Path, fitted=None):
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    hb = [r.hbar for r in rows]
    th = [r.theta for r in rows]
    ax.loglog(hb, th, "o-", label="analytic coherence time")
    if fitted:
        ax.loglog([f[0] for f in fitted], [f[1] for f in fitted], "s",
                  label="simulated")
    ax.set_xlabel("hbar")
    ax.set_ylabel("coherence time")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_measure_figure(traj, path: str | Path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    t = traj.times
    ax1.semilogy(t, np.maximum(traj.series["cross01_norm"], 1e-300),
                 label="cross-block norm")
    ax1.semilogy(t, np.maximum(traj.series["mixture_distance"], 1e-300),
                 label="distance to mixture")
    ax1.set_xlabel("time")
    ax1.grid(alpha=0.3)
    ax1.legend(fontsize=8)
    ax2.plot(t, traj.series["diag0_trace"], label="weight 0")
    ax2.plot(t, traj.series["diag1_trace"], label="weight 1")
    ax2.set_xlabel("time")
    ax2.set_ylabel("outcome weight")
    ax2.set_ylim(-0.05, 1.05)
    ax2.grid(alpha=0.3)
    ax2.legend(fontsize=8)
    fig.suptitle("measurement chain")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
