"""Figures rendered next to the CSV outputs (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def convergence(report: dict, path: Path):
    """Log-log error curves of every fitted metric."""
    h = np.asarray(report["hbar_values"])
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for key, fit in report["orders"].items():
        vals = np.asarray(report["metrics"][key], dtype=float)
        ok = vals > 0
        ax.loglog(h[ok], vals[ok], "o-", label=f"{key} (order {fit['order']:.2f})")
    ax.set_xlabel("hbar")
    ax.set_ylabel("error")
    ax.legend(fontsize=7)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def field_1d(x, rho, S, title, path: Path):
    fig, (a1, a2) = plt.subplots(2, 1, sharex=True, figsize=(5.5, 5))
    a1.plot(x, rho)
    a1.set_ylabel("rho")
    a2.plot(x, S)
    a2.set_ylabel("S")
    a2.set_xlabel("x")
    a1.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def field_2d(grid, rho, title, path: Path):
    fig, ax = plt.subplots(figsize=(5, 4.5))
    ext = (grid.lower[0], grid.upper[0], grid.lower[1], grid.upper[1])
    im = ax.imshow(rho.T, origin="lower", extent=ext, aspect="auto")
    fig.colorbar(im, ax=ax, label="rho")
    ax.set_xlabel("x0")
    ax.set_ylabel("x1")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def trajectories(times, positions, title, path: Path, axis=0, max_lines=200):
    """Component ``axis`` of the first ``max_lines`` trajectories against time."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    pos = np.asarray(positions)
    for j in range(min(pos.shape[1], max_lines)):
        ax.plot(times, pos[:, j, axis], lw=0.5, color="k", alpha=0.4)
    ax.set_xlabel("t")
    ax.set_ylabel(f"x{axis}")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
