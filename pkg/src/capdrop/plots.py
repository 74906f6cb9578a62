"""Static SVG figure rendering for the command-line reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import SurfaceProfile, to_cartesian

# deterministic ids inside the SVG output
matplotlib.rcParams["svg.hashsalt"] = "capdrop"

_SAVE_OPTS = {"format": "svg", "metadata": {"Date": None}}


def save_profile_plot(path, profile: SurfaceProfile, reference: SurfaceProfile | None = None):
    fig, (ax_polar, ax_xy) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    th = profile.grid.nodes
    ax_polar.plot(th, profile.rho, lw=1.2, label="rho")
    if reference is not None:
        ax_polar.plot(reference.grid.nodes, reference.rho, "--", lw=1.0, label="reference")
        ax_polar.legend(frameon=False, fontsize=8)
    ax_polar.set_xlabel(r"$\theta$")
    ax_polar.set_ylabel(r"$\rho(\theta)$")

    curve = to_cartesian(profile)
    ax_xy.plot(curve.x, curve.y, lw=1.2)
    ax_xy.axhline(0.0, color="k", lw=0.8)
    ax_xy.set_aspect("equal")
    ax_xy.set_xlabel("x")
    ax_xy.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def save_spectrum_plot(path, eigenvalues, gap=None):
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    lam = np.asarray(eigenvalues)
    k = np.arange(len(lam))
    ax.stem(k, lam)
    if gap is not None:
        ax.axhline(gap, color="tab:red", lw=0.8, ls="--", label=f"gap = {gap:.4g}")
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel("mode index")
    ax.set_ylabel("eigenvalue")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def save_trace_plot(path, trace):
    fig, (ax_e, ax_d) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    ax_e.plot(trace.times, trace.energies, lw=1.2)
    ax_e.set_xlabel("t")
    ax_e.set_ylabel("energy")
    keep = trace.l2_distance_to_equilibrium > 0
    ax_d.semilogy(trace.times[keep], trace.l2_distance_to_equilibrium[keep], lw=1.2)
    ax_d.set_xlabel("t")
    ax_d.set_ylabel("L2 distance to equilibrium")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def save_kernel_plot(path, grid_nodes, xi5, xi6):
    fig, ax = plt.subplots(figsize=(5.6, 3.4))
    ax.plot(grid_nodes, xi5, lw=1.2, label=r"$\xi_5$ (bounded)")
    ax.plot(grid_nodes, xi6, lw=1.2, label=r"$\xi_6$ (jump at $\pi/2$)")
    ax.axvline(np.pi / 2, color="k", lw=0.6, ls=":")
    ax.set_xlabel(r"$\theta$")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
