"""Figures written next to the CSV/JSON outputs (non-interactive backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .domain import Grid  # noqa: E402

# fixed metadata keeps repeated runs byte-identical
_META = {"Software": None, "Creation Time": None}


def _save(fig, path) -> None:
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def field_figure(grid: Grid, values: np.ndarray, path, title: str, label: str) -> None:
    img = grid.to_image(np.asarray(values, dtype=float))
    ny, nx = grid.shape
    x0, y0 = grid.origin
    extent = (x0, x0 + nx * grid.h, y0, y0 + ny * grid.h)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(img, origin="lower", extent=extent, cmap="viridis", interpolation="nearest")
    fig.colorbar(im, ax=ax, label=label)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    ax.set_aspect("equal")
    fig.tight_layout()
    _save(fig, path)


def trace_figure(totals: np.ndarray, grad_norms: np.ndarray, path) -> None:
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    it = np.arange(len(totals))
    gap = np.asarray(totals) - np.min(totals)
    a1.semilogy(it, np.where(gap > 0, gap, np.nan), "o-", ms=3)
    a1.set_xlabel("iteration")
    a1.set_ylabel("J - min J")
    a2.semilogy(it, grad_norms, "o-", ms=3, color="C1")
    a2.set_xlabel("iteration")
    a2.set_ylabel("projected gradient (L2)")
    fig.tight_layout()
    _save(fig, path)


def profile_figure(r: np.ndarray, u: np.ndarray, path, beta: float) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(r, u)
    ax.set_xlabel("r")
    ax.set_ylabel("u(r)")
    ax.set_title(f"radial profile, beta = {beta:g}")
    fig.tight_layout()
    _save(fig, path)


def continuation_figure(sigma, iterations, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.step(sigma, iterations, where="post")
    ax.set_xlabel("sigma")
    ax.set_ylabel("Newton iterations")
    fig.tight_layout()
    _save(fig, path)
