"""
SVG Plots

Radial profiles, spectral scatters and level-curve overlays. With
`deterministic` set, SVGs carry a fixed hash salt and no date metadata so
identical inputs give identical files.
"""

import logging
from typing import Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from conditions.report import SpectralReport  # noqa: E402
from scan.sphere import RadialScan  # noqa: E402
from topology.level_curves import LevelCurveSet  # noqa: E402

logger = logging.getLogger(__name__)

HASH_SALT = "injectivity-checker"


def _save(fig, path: str, deterministic: bool) -> None:
    metadata = {'Date': None} if deterministic else None
    with matplotlib.rc_context({'svg.hashsalt': HASH_SALT if deterministic else None}):
        fig.savefig(path, format="svg", metadata=metadata)
    plt.close(fig)
    logger.debug(f"Wrote {path}")


def plot_scan(scan: RadialScan, path: str, title: Optional[str] = None, deterministic: bool = True,
              reference: Optional[float] = None) -> None:
    """Log-log plot of a radial profile; nonpositive values are dropped."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    keep = scan.finite & (scan.values > 0)
    ax.loglog(scan.radii[keep], scan.values[keep], marker=".", linewidth=1)
    if reference is not None:
        ax.axhline(reference, color="grey", linestyle="--", linewidth=0.8)
    ax.set_xlabel("r")
    ax.set_ylabel(scan.objective)
    ax.set_title(title or f"{scan.objective} on {scan.map_name}")
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path, deterministic)


def plot_spectrum(report: SpectralReport, path: str, title: str = "", deterministic: bool = True) -> None:
    """Scatter of sampled eigenvalues with the excluded segment [0, epsilon)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    values = report.eigenvalues.ravel()
    ax.scatter(values.real, values.imag, s=2, alpha=0.5)
    ax.plot([0, report.epsilon], [0, 0], color="red", linewidth=2)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_title(title or f"Sampled spectrum ({len(report.points)} points)")
    ax.grid(True, alpha=0.3)
    _save(fig, path, deterministic)


def plot_level_curves(curves: LevelCurveSet, path: str, deterministic: bool = True) -> None:
    """Overlay of one level's polylines on its box."""
    fig, ax = plt.subplots(figsize=(5.2, 5.2))
    for polyline in curves.polylines:
        vertices = polyline.vertices
        if polyline.closed:
            vertices = np.vstack([vertices, vertices[:1]])
        ax.plot(vertices[:, 0], vertices[:, 1], linewidth=1,
                linestyle="-" if polyline.closed else "--")
    R = curves.half_width
    ax.set_xlim(-R, R)
    ax.set_ylim(-R, R)
    ax.set_aspect("equal")
    ax.set_title(f"{curves.function} = {curves.level:g} ({curves.components} components)")
    _save(fig, path, deterministic)
