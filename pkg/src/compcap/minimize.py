"""
Global minimization of the discrete energy over positive density fields.

The energy is smooth and convex wherever ``v > 0``, so projected gradient
descent onto ``{v >= v_floor}`` reaches the global minimizer.  Trial steps
use the Barzilai-Borwein length; every accepted step passes an Armijo test,
so the recorded energies never increase.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .domain import BoundaryData, Grid
from .energy import (
    DEFAULT_WEIGHTS,
    EnergyBreakdown,
    energy_gradient,
    total_energy,
    total_variation,
)

logger = logging.getLogger(__name__)

MIN_STEP = 1e-14
_ARMIJO = 1e-4


class LineSearchError(RuntimeError):
    """Backtracking reached the minimum step without sufficient decrease."""


@dataclass(frozen=True)
class SolverConfig:
    v_floor: float = 1e-8
    max_iterations: int = 20000
    grad_tolerance: float = 1e-9
    energy_rel_tolerance: float = 1e-15
    sweep: int = 10
    initial_step: float = 1.0
    max_step: float = 1e6
    precondition: bool = True

    def __post_init__(self):
        if not 0 < self.v_floor < math.exp(-1):
            raise ValueError(f"v_floor must lie in (0, 1/e), got {self.v_floor}")
        if self.max_iterations < 1 or self.sweep < 1:
            raise ValueError("max_iterations and sweep must be positive")
        if not (self.grad_tolerance > 0 and self.energy_rel_tolerance > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class MinimizeResult:
    v_star: np.ndarray
    trace: list[EnergyBreakdown]
    grad_norms: list[float]
    converged: bool
    iterations: int
    message: str = ""
    totals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.totals = np.array([e.total for e in self.trace])


def _l2(x: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(np.sum(x * x) * grid.cell_area))


def difference_matrix(grid: Grid) -> sp.csr_matrix:
    """Stacked forward-difference operator ``[Dx; Dy]`` with the energy's zero extension."""
    n = grid.n_cells
    rows, cols, vals = [], [], []
    for k, nb in enumerate((grid.right, grid.up)):
        has = np.nonzero(nb >= 0)[0]
        r = has + k * n
        rows += [r, r]
        cols += [nb[has], has]
        vals += [np.full(has.size, 1.0 / grid.h), np.full(has.size, -1.0 / grid.h)]
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * n, n)
    )


class _Metric:
    """Fixed SPD metric ``I + D^T D``: the Hessian shape of the energy near flat fields."""

    def __init__(self, grid: Grid, enabled: bool):
        self.enabled = enabled
        if enabled:
            D = difference_matrix(grid)
            self.P = (sp.identity(grid.n_cells, format="csc") + (D.T @ D).tocsc()).tocsc()
            self._lu = splu(self.P)

    def solve(self, r: np.ndarray) -> np.ndarray:
        return self._lu.solve(r) if self.enabled else r

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(a @ (self.P @ b)) if self.enabled else float(a @ b)


def minimize(
    grid: Grid,
    bdata: BoundaryData,
    config: SolverConfig = SolverConfig(),
    weights=DEFAULT_WEIGHTS,
    initial=None,
) -> MinimizeResult:
    """Minimize the discrete energy from ``initial`` (default ``v = 1``)."""
    bdata.check_grid(grid)
    floor = config.v_floor
    if initial is None:
        v = np.ones(grid.n_cells)
    else:
        v = np.array(initial, dtype=float)
        if v.shape != (grid.n_cells,) or not np.all(v > 0):
            raise ValueError("initial guess must be a positive field on the grid")
        v = np.maximum(v, floor)

    area = grid.cell_area
    metric = _Metric(grid, config.precondition)
    E = total_energy(v, bdata, grid, weights)
    g = energy_gradient(v, bdata, grid, weights)
    r = g / area  # L2 gradient, resolution independent
    d = metric.solve(r)
    trace = [E]
    pg = v - np.maximum(v - r, floor)
    norms = [_l2(pg, grid)]
    step = config.initial_step
    converged = False
    message = "iteration budget exhausted"

    it = 0
    for it in range(1, config.max_iterations + 1):
        if norms[-1] <= config.grad_tolerance:
            converged, message = True, "projected gradient below tolerance"
            it -= 1
            break

        scale = abs(E.surface) + abs(E.potential) + abs(E.wetting) + 1.0
        roundoff = 1e-14 * scale
        t = step
        while True:
            v_new = np.maximum(v - t * d, floor)
            delta = v_new - v
            pred = float(g @ delta)
            E_new = total_energy(v_new, bdata, grid, weights)
            if E_new.total <= E.total + _ARMIJO * pred:
                break
            if -pred <= roundoff and E_new.total <= E.total:
                break
            t *= 0.5
            if t < MIN_STEP:
                break
        if t < MIN_STEP:
            first_pred = float(g @ (np.maximum(v - step * d, floor) - v))
            if -first_pred <= roundoff or norms[-1] <= 1e3 * config.grad_tolerance:
                converged, message = True, "energy decrease at round-off level"
                it -= 1
                break
            raise LineSearchError(
                f"line search failed at iteration {it}: projected gradient norm {norms[-1]:.3e}"
            )

        g_new = energy_gradient(v_new, bdata, grid, weights)
        r_new = g_new / area
        s = v_new - v
        sy = float(s @ (r_new - r))
        step = metric.dot(s, s) / sy if sy > 0 else config.max_step
        step = min(max(step, 1e-12), config.max_step)

        v, g, r, E = v_new, g_new, r_new, E_new
        d = metric.solve(r)
        pg = v - np.maximum(v - r, floor)
        trace.append(E)
        norms.append(_l2(pg, grid))

        if len(trace) > config.sweep:
            drop = trace[-config.sweep - 1].total - E.total
            if drop <= config.energy_rel_tolerance * max(1.0, abs(E.total)):
                converged, message = True, "relative energy decrease below tolerance"
                break
    else:
        if norms[-1] <= config.grad_tolerance:
            converged, message = True, "projected gradient below tolerance"

    logger.debug("minimize: %s after %d iterations, J=%.16g", message, it, E.total)
    return MinimizeResult(v, trace, norms, converged, it, message)


def truncate_above(v: np.ndarray, k: float) -> np.ndarray:
    return np.minimum(np.asarray(v, dtype=float), k)


def truncate_below(v: np.ndarray, eps: float) -> np.ndarray:
    return np.maximum(np.asarray(v, dtype=float), eps)


def lower_bound_integrand(t, c_R: float, margin: float):
    """``f(t) = t(ln t - 1) + 1 - c_R (1 - a) |1 - t|``."""
    t = np.asarray(t, dtype=float)
    return t * (np.log(t) - 1.0) + 1.0 - c_R * (1.0 - margin) * np.abs(1.0 - t)


def lower_bound_infimum(c_R: float, margin: float) -> float:
    """Infimum of :func:`lower_bound_integrand` over ``t > 0``.

    On ``t > 1`` the minimum sits at ``t = e^c`` with value ``1 + c - e^c``,
    which is never above the ``t < 1`` branch.
    """
    c = c_R * (1.0 - margin)
    return 1.0 + c - math.exp(c)


def energy_lower_bound(grid: Grid, c_R: float, margin: float) -> float:
    return grid.area * lower_bound_infimum(c_R, margin)


def bv_bound(initial_energy: float, grid: Grid, c_R: float, margin: float) -> float:
    """Bound on ``sum|Dv| + sum|v|`` for any field with energy at most ``initial_energy``.

    Uses ``a * TV(v) <= J - |Omega| inf f`` and ``f(t) >= t - alpha2``.
    """
    c = c_R * (1.0 - margin)
    inf_f = lower_bound_infimum(c_R, margin)
    # inf of f(t) - t over t > 0: stationary points of each convex branch and t -> 0
    candidates = [-math.exp(1.0 + c) + 1.0 + c, 1.0 - c, -1.0]
    if c > 1.0:
        t = math.exp(1.0 - c)
        candidates.append(float(lower_bound_integrand(t, c_R, margin)) - t)
    alpha2 = -min(candidates)
    tv = (initial_energy - grid.area * inf_f) / margin
    l1 = initial_energy + alpha2 * grid.area
    return tv + l1


def monitor(result: MinimizeResult, grid: Grid, c_R: float, margin: float) -> dict:
    """Lower-bound, BV-boundedness and lower-semicontinuity diagnostics of a run."""
    lb = energy_lower_bound(grid, c_R, margin)
    totals = result.totals
    bound = bv_bound(float(totals[0]), grid, c_R, margin)
    v_last = result.v_star
    bv_last = total_variation(v_last, grid) + float(np.sum(np.abs(v_last)) * grid.cell_area)
    return {
        "energy_lower_bound": lb,
        "lower_bound_margin": float(np.min(totals) - lb),
        "monotone": bool(np.all(np.diff(totals) <= 0)),
        "bv_bound": bound,
        "bv_final": bv_last,
        "lsc_gap": float(totals[-1] - np.min(totals)),
    }
