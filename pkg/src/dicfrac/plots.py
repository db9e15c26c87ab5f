"""SVG chart emission (convergence plots, study curves, error heatmaps).

All figures are rendered through matplotlib's SVG backend with a fixed
hashsalt and no date metadata, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import io

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .fracture import ContourSeries, PlateauStats

matplotlib.rcParams["svg.hashsalt"] = "dicfrac"


def _render(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def convergence_svg(series: ContourSeries, plateau: PlateauStats | None = None) -> str:
    """J and K vs contour index, with the convergence window shaded."""
    fig, (ax_j, ax_k) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    x = np.asarray(series.ring_index)
    ax_j.plot(x, series.J, "o-", color="tab:blue", ms=3, label="J (in-plane)")
    if series.J_total is not None:
        ax_j.plot(x, series.J_total, "s-", color="tab:purple", ms=3,
                  label="J total")
    ax_j.set_ylabel("J (J/m$^2$)")
    ax_j.legend(loc="best", fontsize=8)
    had_k = False
    for name, color in (("K_I", "tab:red"), ("K_II", "tab:green"),
                        ("K_III", "tab:orange")):
        v = getattr(series, name)
        if v is not None:
            ax_k.plot(x, np.asarray(v) / 1e6, "o-", ms=3, color=color,
                      label=name.replace("_", " "))
            had_k = True
    ax_k.set_xlabel("contour index")
    ax_k.set_ylabel("K (MPa$\\cdot\\sqrt{m}$)")
    if had_k:
        ax_k.legend(loc="best", fontsize=8)
    if plateau is not None and not plateau.no_plateau:
        for ax in (ax_j, ax_k):
            ax.axvspan(plateau.start_contour, plateau.end_contour,
                       color="pink", alpha=0.4, zorder=0)
    fig.tight_layout()
    return _render(fig)


def line_study_svg(x, curves: dict, xlabel: str, ylabel: str,
                   logx: bool = False, marker_x: float | None = None) -> str:
    """Generic study plot: one curve per named quantity, optional marker."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, y in curves.items():
        ax.plot(x, y, "o-", ms=3, label=name)
    if logx:
        ax.set_xscale("log")
    if marker_x is not None:
        ax.axvline(marker_x, color="k", ls="--", lw=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _render(fig)


def heatmap_svg(dx, dy, grid: np.ndarray, title: str) -> str:
    """2D error map over tip offsets (node units)."""
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    im = ax.imshow(grid, origin="lower", aspect="equal", cmap="RdBu_r",
                   extent=(min(dx) - 0.5, max(dx) + 0.5,
                           min(dy) - 0.5, max(dy) + 0.5))
    fig.colorbar(im, ax=ax, label="normalized error")
    ax.set_xlabel("tip offset x (nodes)")
    ax.set_ylabel("tip offset y (nodes)")
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    return _render(fig)
