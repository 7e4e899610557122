"""Figure rendering for the report path.

Figures are rendered to PNG files next to the delimited output with the
Agg backend (no display needed). The CSV files remain the primary,
plot-ready artifacts; these renderings are a convenience layer on top.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402


def render_sweep_figures(rows, out_dir) -> list:
    """Optimal angle and relative improvement versus operating point."""
    out_dir = Path(out_dir)
    ok = [r for r in rows if r["status"] == "ok" and r["alpha_opt_deg"]]
    if not ok:
        return []
    u = np.array([float(r["u_in_mm_s"]) for r in ok])
    alpha = np.array([float(r["alpha_opt_deg"]) for r in ok])
    impr = np.array([float(r["improvement"]) for r in ok])
    dp_base = np.array([float(r["dp_baseline"]) for r in ok])
    dp_opt = np.array([float(r["dp_opt"]) for r in ok])

    paths = []
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(u, alpha, "o-")
    ax1.set_xlabel("feeding rate [mm/s]")
    ax1.set_ylabel("optimal half-angle [deg]")
    ax2.plot(u, 100.0 * impr, "s-")
    ax2.set_xlabel("feeding rate [mm/s]")
    ax2.set_ylabel("pressure-loss improvement [%]")
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = out_dir / "sweep_optima.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    width = 0.35 * (u.ptp() / max(len(u) - 1, 1) if len(u) > 1 else 1.0)
    ax.bar(u - width / 2, dp_base, width, label="baseline 30 deg")
    ax.bar(u + width / 2, dp_opt, width, label="optimized")
    ax.set_xlabel("feeding rate [mm/s]")
    ax.set_ylabel("pressure drop [kPa]")
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    path = out_dir / "sweep_pressure_drops.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)
    return paths


def render_gallery_figures(rows, solutions, out_dir) -> list:
    """Axial-velocity field per angle plus a pressure-drop summary."""
    out_dir = Path(out_dir)
    paths = []
    for alpha, (mesh, sol, rep) in sorted(solutions.items()):
        tri = mtri.Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1],
                                 mesh.elements)
        fig, ax = plt.subplots(figsize=(9, 2.2))
        im = ax.tripcolor(tri, sol.u[:, 0], shading="gouraud", cmap="viridis")
        fig.colorbar(im, ax=ax, label="u_x [mm/s]")
        ax.set_aspect("equal")
        ax.set_xlabel("x [mm]")
        ax.set_ylabel("y [mm]")
        n_vort = rep.diagnostics.get("n_vortices", 0)
        ax.set_title(f"alpha = {alpha:g} deg, "
                     f"dp = {rep.delta_p / 1e3:.1f} kPa, "
                     f"vortices: {n_vort}")
        fig.tight_layout()
        path = out_dir / f"field_a{alpha:g}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)

    ok = [r for r in rows if r["status"] == "ok"]
    if ok:
        a = np.array([float(r["alpha_deg"]) for r in ok])
        dp = np.array([float(r["dp"]) for r in ok])
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(a, dp, "o-")
        ax.set_xlabel("half-angle [deg]")
        ax.set_ylabel("pressure drop [kPa]")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out_dir / "gallery_pressure_drops.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    return paths
