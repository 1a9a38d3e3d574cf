"""SVG figures for rounding results, area checks and modulus densities.

Figures are built on bare :class:`matplotlib.figure.Figure` objects (no
pyplot state) and written through the SVG backend with a fixed hash salt and
no date stamp, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure
from matplotlib.patches import Circle, Polygon

from .banach_mazur import RoundingResult, canonical_ellipse
from .envelopes import ELL_MIN, M_env, m_env
from .geometry import Ellipse, PolygonBody, SymmetricConvexBody

__all__ = ["rounding_figure", "lemma1_figure", "density_figure", "save_svg"]

INNER, OUTER, CANON, JOHN = "tab:blue", "tab:red", "tab:green", "tab:purple"


def save_svg(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    FigureCanvasSVG(fig)
    with matplotlib.rc_context({"svg.hashsalt": "bmround", "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _outline(body: SymmetricConvexBody) -> np.ndarray:
    if isinstance(body, PolygonBody):
        return np.asarray(body.vertices)
    return body.boundary_points(720)


def _ellipse_xy(E: Ellipse, T) -> np.ndarray:
    return E.boundary_points(360) @ np.asarray(T).T


def rounding_figure(body: SymmetricConvexBody, result: RoundingResult, john: Ellipse | None = None) -> Figure:
    """``T* A`` with its inner and outer circles, contacts and overlaid ellipses.

    Ellipses are drawn in the rounded frame, i.e. mapped by ``T*``: the
    canonical ellipse becomes the inner circle and the John ellipse its image.
    """
    T = result.T_star
    image = body.mapped(T)
    fig = Figure(figsize=(5, 5))
    ax = fig.add_subplot()
    ax.add_patch(Polygon(_outline(image), closed=True, fc="0.92", ec="k", lw=1.0, label="$T^*A$"))
    ax.add_patch(Circle((0, 0), result.inner, fill=False, ec=INNER, lw=1.0, ls="--", label=r"radius $\ell$"))
    ax.add_patch(Circle((0, 0), result.outer, fill=False, ec=OUTER, lw=1.0, ls="--", label="radius $L$"))
    if result.full_circle:
        ax.text(0, -1.15 * result.outer, "inner and outer circles coincide", ha="center", fontsize=8)
    else:
        E = canonical_ellipse(body, result)
        xy = _ellipse_xy(E, T)
        ax.plot(xy[:, 0], xy[:, 1], color=CANON, lw=0.8, label="canonical ellipse")
    if john is not None:
        xy = _ellipse_xy(john, T)
        ax.plot(xy[:, 0], xy[:, 1], color=JOHN, lw=0.8, ls=":", label="John ellipse")
    for angles, radius, color, marker in (
        (result.outer_contacts, result.outer, OUTER, "o"),
        (result.inner_contacts, result.inner, INNER, "s"),
    ):
        t = np.asarray(angles, dtype=float)
        if t.size:
            # contacts come in antipodal pairs
            t = np.concatenate([t, t + math.pi])
            ax.plot(radius * np.cos(t), radius * np.sin(t), marker, color=color, ms=5, ls="none")
    r = 1.2 * result.outer
    ax.set_xlim(-r, r)
    ax.set_ylim(-r, r)
    ax.set_aspect("equal")
    ax.set_title(rf"$\rho = {result.rho:.10g}$, certified: {result.certified}", fontsize=10)
    ax.legend(loc="upper right", fontsize=7, frameon=False)
    return fig


def lemma1_figure(ells, areas, flags=None) -> Figure:
    """Normalised areas against ``ell`` between the two envelopes."""
    ells = np.asarray(ells, dtype=float)
    areas = np.asarray(areas, dtype=float)
    grid = np.linspace(ELL_MIN, 1.0, 400)
    fig = Figure(figsize=(5.5, 4))
    ax = fig.add_subplot()
    ax.fill_between(grid, m_env(grid), M_env(grid), color="0.9", label="envelope band")
    ax.plot(grid, 4 * grid**2, color=OUTER, lw=0.8, label=r"$4\ell^2$")
    ax.plot(grid, np.full_like(grid, 2.0), color=INNER, lw=0.8, label="2")
    ax.plot(grid, M_env(grid), "k", lw=0.6)
    ax.plot(grid, m_env(grid), "k", lw=0.6)
    ok = np.ones(len(ells), dtype=bool) if flags is None else np.asarray(flags, dtype=bool)
    ax.plot(ells[ok], areas[ok], ".", color=CANON, ms=3, label="bodies")
    if (~ok).any():
        ax.plot(ells[~ok], areas[~ok], "x", color="k", ms=5, label="failing")
    ax.set_xlabel(r"$\ell(TA)$ with $L(TA) = 1$")
    ax.set_ylabel(r"$|TA|$")
    ax.set_xlim(ELL_MIN - 0.01, 1.01)
    ax.legend(fontsize=7, frameon=False, loc="upper left")
    return fig


def density_figure(density: np.ndarray, rect, title: str = "") -> Figure:
    """Heat map of an extremal density; cells outside the domain are blank."""
    x0, y0, x1, y1 = rect
    fig = Figure(figsize=(5, 4.4))
    ax = fig.add_subplot()
    data = np.ma.masked_where(density <= 0, density)
    im = ax.imshow(data, origin="lower", extent=(x0, x1, y0, y1), cmap="viridis", interpolation="nearest")
    fig.colorbar(im, ax=ax, shrink=0.8, label=r"$\rho$")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title, fontsize=10)
    return fig
