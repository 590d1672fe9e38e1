import math

import numpy as np
import pytest

from compcap.domain import BoundaryData, DomainSpec, build_grid
from compcap.energy import total_energy, total_variation, weighted_area
from compcap.minimize import (
    SolverConfig,
    bv_bound,
    energy_lower_bound,
    lower_bound_infimum,
    lower_bound_integrand,
    minimize,
    monitor,
    truncate_above,
    truncate_below,
)


def test_flat_solution(square16):
    b = BoundaryData.constant(square16, 0.0, 0.5)
    res = minimize(square16, b)
    assert res.converged
    assert np.max(np.abs(res.v_star - math.exp(-1))) < 1e-8
    assert np.all(np.diff(res.totals) <= 0)


def test_trace_monotone_and_bounded(disk16, rng, random_beta):
    b = random_beta(disk16, rng)
    res = minimize(disk16, b)
    assert res.converged
    assert np.all(np.diff(res.totals) <= 0)
    m = monitor(res, disk16, c_R=3.0, margin=0.5)
    assert m["monotone"]
    assert m["lower_bound_margin"] >= 0
    assert m["lsc_gap"] <= 1e-10
    assert m["bv_final"] <= m["bv_bound"]


def test_minimizer_beats_truncations(square16, rng, random_beta):
    b = random_beta(square16, rng)
    res = minimize(square16, b)
    J = total_energy(res.v_star, b, square16).total
    for k in np.quantile(res.v_star, [0.2, 0.5, 0.9]):
        assert J <= total_energy(truncate_above(res.v_star, k), b, square16).total + 1e-13
        assert J <= total_energy(truncate_below(res.v_star, k), b, square16).total + 1e-13


def test_initial_guesses_reach_same_energy(square16, rng, random_beta):
    b = random_beta(square16, rng)
    cfg = SolverConfig(grad_tolerance=1e-11)
    r1 = minimize(square16, b, cfg)
    r2 = minimize(square16, b, cfg, initial=np.full(square16.n_cells, 10.0))
    assert r1.totals[-1] == pytest.approx(r2.totals[-1], abs=1e-11)


def test_unpreconditioned_agrees(square16, rng, random_beta):
    b = random_beta(square16, rng)
    r1 = minimize(square16, b)
    r2 = minimize(square16, b, SolverConfig(precondition=False, max_iterations=50000))
    assert r2.converged
    assert r1.totals[-1] == pytest.approx(r2.totals[-1], abs=1e-9)


def test_iteration_budget_reports_nonconvergence(square16):
    b = BoundaryData.constant(square16, 0.4, 0.5)
    res = minimize(square16, b, SolverConfig(max_iterations=2))
    assert not res.converged


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(v_floor=0.5)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)
    with pytest.raises(ValueError):
        SolverConfig(grad_tolerance=0)


def test_bad_initial_guess(square16):
    b = BoundaryData.constant(square16, 0.0, 0.5)
    with pytest.raises(ValueError):
        minimize(square16, b, initial=-np.ones(square16.n_cells))


def test_lower_bound_infimum_matches_grid_search():
    for c_R, a in ((0.5, 0.5), (3.0, 0.2), (10.0, 0.9)):
        t = np.geomspace(1e-8, 1e4, 400001)
        assert lower_bound_infimum(c_R, a) <= np.min(lower_bound_integrand(t, c_R, a)) + 1e-12
        assert lower_bound_infimum(c_R, a) == pytest.approx(np.min(lower_bound_integrand(t, c_R, a)), abs=1e-6)


def test_energy_lower_bound_holds_for_random_fields(square16, rng, random_beta):
    # empirical check with c_R = perimeter / area of the unit square
    b = random_beta(square16, rng)
    lb = energy_lower_bound(square16, c_R=4.0, margin=0.5)
    for _ in range(20):
        v = rng.uniform(0.05, 5, square16.n_cells)
        assert total_energy(v, b, square16).total >= lb


def test_bv_bound_dominates_sublevel_fields(square16, rng, random_beta):
    b = random_beta(square16, rng)
    E0 = total_energy(np.ones(square16.n_cells), b, square16).total
    bound = bv_bound(E0, square16, c_R=4.0, margin=0.5)
    for _ in range(20):
        v = rng.uniform(0.3, 1.2, square16.n_cells)
        if total_energy(v, b, square16).total <= E0:
            assert total_variation(v, square16) + np.sum(v) * square16.cell_area <= bound


def test_truncation_strictly_decreases_area(square16, rng):
    for _ in range(20):
        v = rng.uniform(0.1, 3, square16.n_cells)
        k = max(1.0, 0.9 * float(np.max(v)))
        assert weighted_area(truncate_above(v, k), square16) < weighted_area(v, square16)
