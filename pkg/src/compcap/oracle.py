"""
Independent reference solutions for cross-checking the main solvers.

* :func:`radial_solve` integrates the axisymmetric capillary equation on a
  disk and shoots on the centre height to meet the wall contact condition.
* :func:`coarse_reference_minimize` minimizes the discrete energy one cell at
  a time with golden-section searches on compiled local energy differences;
  it shares nothing with the gradient path.
* :func:`mollify` smooths a field with a truncated Gaussian kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .domain import BoundaryData, Grid


class ShootingError(RuntimeError):
    pass


@dataclass(frozen=True)
class RadialProfile:
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    beta: float
    u0: float
    contact_residual: float

    def height(self, radius) -> np.ndarray:
        return np.interp(radius, self.r, self.u)

    def density(self, radius) -> np.ndarray:
        return np.exp(-self.height(radius))


def _rhs(r, y):
    # y = (u, psi) with psi = u'/sqrt(1+u'^2); (r psi)'/r = u - sqrt(1 - psi^2)
    u, psi = y
    c = math.sqrt(max(1.0 - psi * psi, 0.0))
    return [psi / c if c > 0 else math.copysign(1e300, psi), u - c - psi / r]


def _wall(r, y):
    return 1.0 - abs(y[1]) - 1e-9


_wall.terminal = True


def _integrate(u0: float, R0: float, step: float, dense: bool = False):
    r0 = step
    # removable singularity: psi ~ (u0 - 1) r / 2, u ~ u0 + (u0 - 1) r^2 / 4
    y0 = [u0 + (u0 - 1.0) * r0 * r0 / 4.0, (u0 - 1.0) * r0 / 2.0]
    return solve_ivp(
        _rhs, (r0, R0), y0, method="DOP853", max_step=step, rtol=1e-12, atol=1e-13,
        events=_wall, dense_output=dense,
    )


def _contact(u0: float, R0: float, beta: float, step: float) -> float:
    sol = _integrate(u0, R0, step)
    if sol.status == 1:
        # slope became vertical before the wall: overshoot in the sign of psi
        return math.copysign(2.0, sol.y[1, -1]) - beta
    return float(sol.y[1, -1]) - beta


def radial_solve(R0: float, beta: float, tol: float = 1e-10, step: float | None = None,
                 n_out: int = 2001) -> RadialProfile:
    """Axisymmetric solution on a disk of radius ``R0`` with wall condition ``u'/W = beta``."""
    if not R0 > 0:
        raise ValueError("R0 must be positive")
    if not -1 < beta < 1:
        raise ValueError("beta must lie in (-1, 1)")
    step = R0 / 2000 if step is None else float(step)
    r_out = np.linspace(0.0, R0, n_out)
    if beta == 0.0:
        ones = np.ones_like(r_out)
        return RadialProfile(r_out, ones, np.zeros_like(r_out), 0.0, 1.0, 0.0)

    f = lambda u0: _contact(u0, R0, beta, step)
    # beta > 0 needs a centre above the flat level 1, beta < 0 below it
    direction = 1.0 if beta > 0 else -1.0
    lo, width = 1.0, 0.25
    hi = lo + direction * width
    f_lo = f(lo)
    for _ in range(60):
        f_hi = f(hi)
        if np.sign(f_hi) != np.sign(f_lo):
            break
        lo, f_lo = hi, f_hi
        width *= 2.0
        hi = lo + direction * width
    else:
        raise ShootingError(f"no bracket for the centre height (beta={beta}, R0={R0})")

    u0 = brentq(f, min(lo, hi), max(lo, hi), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    sol = _integrate(u0, R0, step, dense=True)
    residual = float(sol.y[1, -1]) - beta
    if abs(residual) > tol:
        raise ShootingError(f"contact residual {residual:.3e} exceeds tolerance {tol:.1e}")

    r_in = r_out[r_out >= step]
    u_in, psi_in = sol.sol(r_in)
    r_core = r_out[r_out < step]
    u = np.concatenate([u0 + (u0 - 1.0) * r_core**2 / 4.0, u_in])
    psi = np.concatenate([(u0 - 1.0) * r_core / 2.0, psi_in])
    du = psi / np.sqrt(1.0 - psi * psi)
    return RadialProfile(r_out, u, du, float(beta), float(u0), residual)


# --- coordinate-descent reference minimizer -------------------------------

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


@numba.njit(cache=True)
def _local_change(c, x, v, right, up, left, down, wet, h, g1, g2, g3):
    """Energy change when cell ``c`` moves from ``v[c]`` to ``x``, free of cancellation."""
    x0 = v[c]
    dlt = x - x0
    area = h * h
    # own integrand sqrt(v^2 + dx^2 + dy^2)
    dx0 = (v[right[c]] - x0) / h if right[c] >= 0 else 0.0
    dy0 = (v[up[c]] - x0) / h if up[c] >= 0 else 0.0
    dx1 = (v[right[c]] - x) / h if right[c] >= 0 else 0.0
    dy1 = (v[up[c]] - x) / h if up[c] >= 0 else 0.0
    dA = dlt * (x + x0)
    if right[c] >= 0:
        dA += (-dlt / h) * (dx1 + dx0)
    if up[c] >= 0:
        dA += (-dlt / h) * (dy1 + dy0)
    A0 = x0 * x0 + dx0 * dx0 + dy0 * dy0
    A1 = x * x + dx1 * dx1 + dy1 * dy1
    ds = dA / (math.sqrt(A1) + math.sqrt(A0))
    # integrand of the left neighbour, whose forward x-difference reaches c
    k = left[c]
    if k >= 0:
        vk = v[k]
        dyk = (v[up[k]] - vk) / h if up[k] >= 0 else 0.0
        B0 = vk * vk + ((x0 - vk) / h) ** 2 + dyk * dyk
        B1 = vk * vk + ((x - vk) / h) ** 2 + dyk * dyk
        ds += dlt * (x + x0 - 2.0 * vk) / (h * h) / (math.sqrt(B1) + math.sqrt(B0))
    m = down[c]
    if m >= 0:
        vm = v[m]
        dxm = (v[right[m]] - vm) / h if right[m] >= 0 else 0.0
        C0 = vm * vm + dxm * dxm + ((x0 - vm) / h) ** 2
        C1 = vm * vm + dxm * dxm + ((x - vm) / h) ** 2
        ds += dlt * (x + x0 - 2.0 * vm) / (h * h) / (math.sqrt(C1) + math.sqrt(C0))
    # x ln x - x0 ln x0 - (x - x0)
    dphi = dlt * math.log(x0) + x * math.log1p(dlt / x0) - dlt
    return g1 * area * ds + g2 * area * dphi + g3 * wet[c] * dlt


@numba.njit(cache=True)
def _coordinate_descent(v, right, up, left, down, wet, h, g1, g2, g3, tol, max_sweeps):
    n = v.shape[0]
    moves = np.full(n, 0.25)
    for sweep in range(max_sweeps):
        biggest = 0.0
        for c in range(n):
            x0 = v[c]
            w = max(4.0 * moves[c], 1e-12 * x0)
            # downhill bracket (a, m, b) around the current value, staying positive
            a = x0 - w if x0 - w > 0.0 else 0.5 * x0
            b = x0 + w
            m, fm = x0, 0.0
            fa = _local_change(c, a, v, right, up, left, down, wet, h, g1, g2, g3)
            fb = _local_change(c, b, v, right, up, left, down, wet, h, g1, g2, g3)
            while fb < fm:
                a, m, fm = m, b, fb
                b = m + 2.0 * (m - a)
                fb = _local_change(c, b, v, right, up, left, down, wet, h, g1, g2, g3)
            while fa < fm:
                b, m, fm = m, a, fa
                a = m - 2.0 * (b - m)
                if a <= 0.0:
                    a = 0.5 * m
                fa = _local_change(c, a, v, right, up, left, down, wet, h, g1, g2, g3)
            p = b - _GOLD * (b - a)
            q = a + _GOLD * (b - a)
            fp = _local_change(c, p, v, right, up, left, down, wet, h, g1, g2, g3)
            fq = _local_change(c, q, v, right, up, left, down, wet, h, g1, g2, g3)
            for _ in range(200):
                if b - a <= 4e-16 * b:
                    break
                if fp < fq:
                    b, q, fq = q, p, fp
                    p = b - _GOLD * (b - a)
                    fp = _local_change(c, p, v, right, up, left, down, wet, h, g1, g2, g3)
                else:
                    a, p, fp = p, q, fq
                    q = a + _GOLD * (b - a)
                    fq = _local_change(c, q, v, right, up, left, down, wet, h, g1, g2, g3)
            x = p if fp < fq else q
            if _local_change(c, x, v, right, up, left, down, wet, h, g1, g2, g3) < 0.0:
                moves[c] = abs(x - x0)
                biggest = max(biggest, moves[c])
                v[c] = x
            else:
                moves[c] = 1e-12 * x0
        if biggest <= tol:
            return sweep + 1
    return -1



def coarse_reference_minimize(grid: Grid, bdata: BoundaryData, weights=(1.0, 1.0, 1.0),
                              initial=None, tol: float = 1e-10, max_sweeps: int = 200000) -> np.ndarray:
    """Cyclic coordinate descent with a golden-section search per cell.

    Stops once a full sweep moves no cell by more than ``tol``.
    """
    if max(grid.shape) > 16:
        raise ValueError("coarse reference minimizer is limited to grids of at most 16 x 16")
    bdata.check_grid(grid)
    g1, g2, g3 = (float(w) for w in weights)
    wet = np.zeros(grid.n_cells)
    for e, c in enumerate(grid.edge_owner):
        wet[c] += bdata.beta[e] * grid.edge_length[e]
    v = np.ones(grid.n_cells) if initial is None else np.array(initial, dtype=float)
    sweeps = _coordinate_descent(v, grid.right, grid.up, grid.left, grid.down, wet,
                                 grid.h, g1, g2, g3, tol, max_sweeps)
    if sweeps < 0:
        raise RuntimeError(f"coordinate descent did not stagnate within {max_sweeps} sweeps")
    return v


# --- mollification --------------------------------------------------------

def mollify(v: np.ndarray, grid: Grid, width: float) -> np.ndarray:
    """Mask-renormalized convolution with a Gaussian of std ``width`` cut at 3 ``width``."""
    if width < grid.h * (1 - 1e-12):
        raise ValueError(f"mollifier width {width} is below the cell side {grid.h}")
    radius = int(math.ceil(3.0 * width / grid.h))
    k = np.arange(-radius, radius + 1) * grid.h
    KX, KY = np.meshgrid(k, k)
    kernel = np.exp(-(KX**2 + KY**2) / (2.0 * width**2))
    kernel[KX**2 + KY**2 > (3.0 * width) ** 2] = 0.0
    kernel /= kernel.sum()

    img = grid.to_image(np.asarray(v, dtype=float), fill=0.0)
    m = grid.mask.astype(float)
    num = ndimage.convolve(img, kernel, mode="constant", cval=0.0)
    den = ndimage.convolve(m, kernel, mode="constant", cval=0.0)
    out = num[grid.mask] / den[grid.mask]
    # a convex combination cannot leave [min v, max v]; clip round-off
    return np.clip(out, np.min(v), np.max(v))
