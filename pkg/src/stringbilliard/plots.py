"""SVG figures with matplotlib.

Output is byte-stable: the SVG hash salt is fixed and the date stamp is
dropped, so identical data gives identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SVG_RC = {"svg.hashsalt": "stringbilliard", "svg.fonttype": "none", "path.simplify": False}


def save_svg(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _axes(title: str, equal: bool = True):
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.set_title(title)
    if equal:
        ax.set_aspect("equal")
    return fig, ax


def draw_table(ax, table, foci: bool = True):
    b = table.sample_boundary(200)
    b = np.vstack([b, b[:1]])
    ax.plot(b[:, 0], b[:, 1], color="black", lw=1.0)
    if foci:
        K = np.vstack([table.foci, table.foci[:1]])
        ax.plot(K[:, 0], K[:, 1], color="grey", lw=0.6, ls="--")
        ax.plot(table.foci[:, 0], table.foci[:, 1], "o", color="grey", ms=3)


def table_figure(table, path):
    fig, ax = _axes(f"string table, n = {table.n}")
    draw_table(ax, table)
    for j in range(table.n):
        p = table.junction(j)
        ax.plot(p[0], p[1], "x", color="tab:red", ms=4)
    return save_svg(fig, path)


def trajectory_figure(table, traj, path, title: str = "trajectory", max_chords: int = 400):
    fig, ax = _axes(title)
    draw_table(ax, table)
    pts = np.vstack([traj.start, traj.points[:max_chords]])
    ax.plot(pts[:, 0], pts[:, 1], color="tab:blue", lw=0.4)
    return save_svg(fig, path)


def orbit_figure(table, orbits, path, title: str = "periodic orbits"):
    fig, ax = _axes(title)
    draw_table(ax, table)
    for orb in orbits:
        xy = np.vstack([orb.xy, orb.xy[:1]])
        ax.plot(xy[:, 0], xy[:, 1], lw=0.8, label=orb.label or f"{orb.n}/{orb.k}")
    if orbits:
        ax.legend(loc="upper right", fontsize=7)
    return save_svg(fig, path)


def region_figure(table, traj, region, path, max_chords: int = 200):
    fig, ax = _axes(f"forbidden region ({region.segment_count} chords)")
    draw_table(ax, table)
    pts = np.vstack([traj.start, traj.points[:max_chords]])
    ax.plot(pts[:, 0], pts[:, 1], color="tab:blue", lw=0.3)
    v = region.polygon.vertices
    if len(v):
        ax.fill(v[:, 0], v[:, 1], color="tab:orange", alpha=0.6)
    return save_svg(fig, path)


def section_figure(section, path, curves=(), title: str = "surface of section"):
    """Scatter of (s, theta / pi) with optional (s, theta) curve overlays."""
    fig, ax = _axes(title, equal=False)
    ax.scatter(section.s, section.theta / math.pi, s=0.6, c=section.traj_id % 10,
               cmap="tab10", vmin=0, vmax=9, linewidths=0)
    for c in curves:
        ax.plot(c[:, 0], c[:, 1] / math.pi, color="black", lw=0.8)
    ax.set_xlabel("s")
    ax.set_ylabel("theta / pi")
    ax.set_xlim(0, section.boundary_length if len(section) else 1)
    return save_svg(fig, path)


def focal_figure(series_list, path):
    """phi_i and s_i against bounce index for a batch of focal orbits."""
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    for ser in series_list:
        a1.plot(ser.phi, lw=0.5)
        a2.plot(ser.s, lw=0.5)
    a1.axhline(math.pi / 2, color="black", lw=0.6, ls="--")
    a2.axhline(4.0, color="black", lw=0.6, ls="--")
    a1.set_ylabel("phi")
    a2.set_ylabel("s")
    a2.set_xlabel("bounce")
    return save_svg(fig, path)
