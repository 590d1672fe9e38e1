"""
Capillary Euler-Lagrange residuals and the continuity-method solver for the
prescribed-mean-curvature Dirichlet problems on interior balls.

All operators use one finite-volume stencil on a set of cells with
4-neighbour maps: face fluxes ``q = p / W`` where ``p`` is the normal
difference across the face and ``W = sqrt(1 + p^2 + t^2)`` with ``t`` the
averaged centred tangential derivative.  The Newton Jacobian is assembled
from the exact derivatives of this stencil.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .domain import Ball, BoundaryData, Grid
from .energy import to_density

logger = logging.getLogger(__name__)


class NewtonFailure(RuntimeError):
    """Damped Newton hit its damping floor or iteration budget."""


class ContinuationError(RuntimeError):
    """The sigma step fell below the minimum; ``state`` holds the last accepted point."""

    def __init__(self, message: str, state: "ContinuationState"):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-9
    max_iterations: int = 50
    min_damping: float = 1.0 / 1024


@dataclass
class NewtonStats:
    iterations: int
    residuals: list[float]
    dampings: list[float]

    def tail_ratios(self) -> list[float]:
        """Ratios r_{k+1} / r_k^2 over the last three iterations."""
        r = self.residuals[-4:]
        return [b / (a * a) for a, b in zip(r, r[1:]) if a > 0]


@dataclass
class ContinuationState:
    sigma: float
    u: np.ndarray
    step: float
    log: list[dict] = field(default_factory=list)


class _Stencil:
    """Flux operators on a cell set given by its neighbour maps."""

    def __init__(self, h: float, right, left, up, down):
        self.h = h
        self.n = n = len(right)
        self.right, self.left, self.up, self.down = right, left, up, down
        self.Cx = self._centred(right, left)
        self.Cy = self._centred(up, down)
        self.faces = []
        for fwd, C_t in ((right, self.Cy), (up, self.Cx)):
            c = np.nonzero(fwd >= 0)[0]
            e = fwd[c]
            m = len(c)
            rows = np.arange(m)
            F = sp.csr_matrix(
                (np.concatenate([np.full(m, -1.0 / h), np.full(m, 1.0 / h)]),
                 (np.concatenate([rows, rows]), np.concatenate([c, e]))), shape=(m, n))
            avg = sp.csr_matrix(
                (np.full(2 * m, 0.5), (np.concatenate([rows, rows]), np.concatenate([c, e]))), shape=(m, n))
            self.faces.append((F, (avg @ C_t).tocsr()))

    def _centred(self, fwd, bwd) -> sp.csr_matrix:
        n, h = self.n, self.h
        rows, cols, vals = [], [], []
        idx = np.arange(n)
        both = (fwd >= 0) & (bwd >= 0)
        only_f = (fwd >= 0) & (bwd < 0)
        only_b = (fwd < 0) & (bwd >= 0)
        for sel, a, b, s in ((both, fwd, bwd, 0.5 / h), (only_f, fwd, idx, 1.0 / h), (only_b, idx, bwd, 1.0 / h)):
            i = np.nonzero(sel)[0]
            rows += [i, i]
            cols += [a[i], b[i]]
            vals += [np.full(i.size, s), np.full(i.size, -s)]
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))

    def residual(self, u: np.ndarray, sigma: float, jacobian: bool = False):
        """``div(Du/W) - sigma (u - 1/W)`` per cell, optionally with its Jacobian."""
        div = np.zeros(self.n)
        J = sp.csr_matrix((self.n, self.n)) if jacobian else None
        for F, T in self.faces:
            p = F @ u
            t = T @ u
            W = np.sqrt(1.0 + p * p + t * t)
            q = p / W
            div -= F.T @ q
            if jacobian:
                W3 = W ** 3
                dq = sp.diags((1.0 + t * t) / W3) @ F - sp.diags(p * t / W3) @ T
                J = J - F.T @ dq
        gx = self.Cx @ u
        gy = self.Cy @ u
        Wc = np.sqrt(1.0 + gx * gx + gy * gy)
        r = div - sigma * (u - 1.0 / Wc)
        if not jacobian:
            return r
        Wc3 = Wc ** 3
        dinvW = -(sp.diags(gx / Wc3) @ self.Cx + sp.diags(gy / Wc3) @ self.Cy)
        J = J + sigma * dinvW - sigma * sp.identity(self.n)
        return r, J.tocsr()

    def gradient_norm(self, u: np.ndarray) -> np.ndarray:
        return np.hypot(self.Cx @ u, self.Cy @ u)


def _grid_stencil(grid: Grid) -> _Stencil:
    return _Stencil(grid.h, grid.right, grid.left, grid.up, grid.down)


def _ball_stencil(ball: Ball) -> _Stencil:
    return _Stencil(ball.grid.h, ball.local_right, ball.local_left, ball.local_up, ball.local_down)


def el_residual(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Residual ``div(Du/W) - u + 1/W`` of the capillary equation on every inside cell.

    Faces on the domain boundary carry no flux, so only cells from
    ``grid.interior_cells()`` are meaningful away from the contact condition.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_cells,):
        raise ValueError(f"field has shape {u.shape}, grid has {grid.n_cells} inside cells")
    return _grid_stencil(grid).residual(u, 1.0)


def interior_l2(r: np.ndarray, grid: Grid) -> float:
    inner = grid.interior_cells()
    return float(np.sqrt(np.sum(r[inner] ** 2) * grid.cell_area))


def boundary_residual(u: np.ndarray, bdata: BoundaryData, grid: Grid) -> np.ndarray:
    """Contact condition ``Du.nu / W - beta`` on each boundary edge."""
    u = np.asarray(u, dtype=float)
    bdata.check_grid(grid)
    st = _grid_stencil(grid)
    gx, gy = st.Cx @ u, st.Cy @ u
    c = grid.edge_owner
    nx, ny = grid.edge_normal[:, 0], grid.edge_normal[:, 1]
    # inward neighbour of the owner across the edge
    inward = np.where(nx > 0, grid.left[c], np.where(nx < 0, grid.right[c],
                      np.where(ny > 0, grid.down[c], grid.up[c])))
    has = inward >= 0
    normal = np.zeros(len(c))
    normal[has] = (u[c[has]] - u[inward[has]]) / grid.h
    tangent = np.where(nx != 0, gy[c], gx[c])
    W = np.sqrt(1.0 + normal**2 + tangent**2)
    return normal / W - bdata.beta


def solve_dirichlet(ball: Ball, g, sigma: float, config: NewtonConfig = NewtonConfig(),
                    initial=None, stats: list | None = None) -> np.ndarray:
    """Damped Newton for ``div(Du/W) = sigma(u - 1/W)`` on the ball with ``u = g`` on the rim.

    ``g`` has one value per flagged cell (in ball order).  Returns ``u`` on all
    ball cells.  Appends a :class:`NewtonStats` to ``stats`` when given.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must lie in [0, 1], got {sigma}")
    g = np.asarray(g, dtype=float)
    flagged = ball.flagged
    if g.shape != (int(flagged.sum()),):
        raise ValueError(f"boundary data has {g.shape} values, ball has {int(flagged.sum())} flagged cells")
    if not np.all(np.isfinite(g)):
        raise ValueError("boundary data must be finite")

    st = _ball_stencil(ball)
    free = ~flagged
    if initial is None:
        u = np.full(ball.size, float(np.mean(g)))
    else:
        u = np.array(initial, dtype=float)
    u[flagged] = g

    r = st.residual(u, sigma)[free]
    norm = float(np.max(np.abs(r)))
    residuals, dampings = [norm], []
    it = 0
    while norm > config.tol:
        if it >= config.max_iterations:
            raise NewtonFailure(f"Newton did not converge in {it} iterations (residual {norm:.3e})")
        _, J = st.residual(u, sigma, jacobian=True)
        Jff = J[free][:, free].tocsc()
        delta = spsolve(Jff, -r)
        lam = 1.0
        while True:
            trial = u.copy()
            trial[free] += lam * delta
            r_trial = st.residual(trial, sigma)[free]
            n_trial = float(np.max(np.abs(r_trial)))
            if np.isfinite(n_trial) and n_trial <= (1.0 - 1e-4 * lam) * norm:
                break
            lam *= 0.5
            if lam < config.min_damping:
                raise NewtonFailure(f"damping floor reached at sigma={sigma} (residual {norm:.3e})")
        u, r, norm = trial, r_trial, n_trial
        residuals.append(norm)
        dampings.append(lam)
        it += 1

    if stats is not None:
        stats.append(NewtonStats(it, residuals, dampings))
    return u


def continuation(ball: Ball, g, step: float = 0.1, config: NewtonConfig = NewtonConfig(),
                 min_step: float = 1e-3, scale_data: bool = False) -> ContinuationState:
    """Follow the sigma family from the minimal surface equation to sigma = 1.

    Each solve is warm-started from the previous one; a failed Newton solve
    halves the sigma step.  With ``scale_data`` the rim data is ``sigma * g``.
    """
    if not 0 < step <= 1:
        raise ValueError("sigma step must lie in (0, 1]")
    g = np.asarray(g, dtype=float)
    state = ContinuationState(0.0, np.empty(0), step)
    sigma_target = 0.0
    u_prev = None
    while True:
        data = sigma_target * g if scale_data else g
        stats: list[NewtonStats] = []
        try:
            u = solve_dirichlet(ball, data, sigma_target, config, initial=u_prev, stats=stats)
        except NewtonFailure as exc:
            if u_prev is None:
                raise ContinuationError(f"initial minimal-surface solve failed: {exc}", state) from exc
            state.step *= 0.5
            state.log.append({"sigma": sigma_target, "newton_iterations": -1,
                              "residual": float("nan"), "accepted": False})
            if state.step < min_step:
                raise ContinuationError(
                    f"sigma step underflow below {min_step} at sigma={state.sigma}", state) from exc
            sigma_target = _next_sigma(state.sigma, state.step)
            continue
        st = stats[0]
        state.sigma, state.u, u_prev = sigma_target, u, u
        state.log.append({"sigma": sigma_target, "newton_iterations": st.iterations,
                          "residual": st.residuals[-1], "accepted": True, "stats": st})
        if sigma_target >= 1.0:
            return state
        sigma_target = _next_sigma(sigma_target, state.step)


def _next_sigma(sigma: float, step: float) -> float:
    # snap to 1 so that 0.1 + ... + 0.1 does not leave a sliver step
    nxt = sigma + step
    return 1.0 if nxt > 1.0 - 1e-9 else nxt


def check_height_bound(u: np.ndarray, g, tol: float = 1e-6) -> dict:
    """Compare a Dirichlet solution with the uniform height bounds.

    The stated bound is ``-sup|g| <= u <= min(1, sup|g|)``.  The report also
    carries the maximum-principle bound ``min(0, min g) <= u <= max(1, max g)``
    that the discrete scheme satisfies for every sigma in (0, 1].
    """
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    sup_g = float(np.max(np.abs(g)))
    upper = min(1.0, sup_g)
    lower = -sup_g
    mp_upper = max(1.0, float(np.max(g)))
    mp_lower = min(0.0, float(np.min(g)))
    max_u, min_u = float(np.max(u)), float(np.min(u))
    report = {
        "sup_abs_g": sup_g,
        "branch": "sup|g|" if sup_g < 1.0 else "one",
        "max_u": max_u,
        "min_u": min_u,
        "upper_bound": upper,
        "lower_bound": lower,
        "upper_margin": upper - max_u,
        "lower_margin": min_u - lower,
        "upper_ok": max_u <= upper + tol,
        "lower_ok": min_u >= lower - tol,
        "max_principle_upper": mp_upper,
        "max_principle_lower": mp_lower,
        "max_principle_ok": (max_u <= mp_upper + tol) and (min_u >= mp_lower - tol),
    }
    report["passed"] = report["upper_ok"] and report["lower_ok"]
    return report


def patch(v: np.ndarray, ball: Ball, w: np.ndarray) -> np.ndarray:
    """Field equal to ``w`` on the ball cells and to ``v`` elsewhere."""
    w = np.asarray(w, dtype=float)
    if w.shape != (ball.size,):
        raise ValueError(f"patch has {w.shape} values, ball has {ball.size} cells")
    out = np.array(v, dtype=float)
    out[ball.cells] = w
    return out


def ball_energy(w: np.ndarray, ball: Ball) -> float:
    """Surface plus potential energy of a density restricted to the ball cells."""
    w = np.asarray(w, dtype=float)
    if w.shape != (ball.size,) or not np.all(w > 0):
        raise ValueError("ball energy needs a positive density on the ball cells")
    h = ball.grid.h
    dx = np.zeros_like(w)
    dy = np.zeros_like(w)
    r, u = ball.local_right >= 0, ball.local_up >= 0
    dx[r] = (w[ball.local_right[r]] - w[r]) / h
    dy[u] = (w[ball.local_up[u]] - w[u]) / h
    return float(np.sum(np.sqrt(w * w + dx * dx + dy * dy) + w * np.log(w) - w + 1.0) * h * h)


def dirichlet_density(v: np.ndarray, ball: Ball, config: NewtonConfig = NewtonConfig(),
                      step: float = 0.1) -> np.ndarray:
    """Replace ``v`` on the ball by the sigma = 1 solution with rim data ``-ln v``."""
    g = -np.log(np.asarray(v, dtype=float)[ball.cells][ball.flagged])
    state = continuation(ball, g, step, config)
    return to_density(state.u)


def interior_gradient_max(u: np.ndarray, ball: Ball, depth: int = 2) -> float:
    """Largest centred gradient on ball cells at least ``depth`` cells from the rim."""
    st = _ball_stencil(ball)
    keep = ~ball.flagged
    for _ in range(depth - 1):
        nb_ok = np.ones(ball.size, dtype=bool)
        for nb in (ball.local_right, ball.local_left, ball.local_up, ball.local_down):
            nb_ok &= (nb >= 0) & keep[np.maximum(nb, 0)]
        keep = keep & nb_ok
    if not np.any(keep):
        return float("nan")
    return float(np.max(st.gradient_norm(np.asarray(u, dtype=float))[keep]))
