import math

import numpy as np
import pytest

from compcap import pde
from compcap.cli import random_ball_data
from compcap.domain import BoundaryData, DomainSpec, build_grid, interior_ball
from compcap.energy import to_density, to_height
from compcap.minimize import minimize
from compcap.oracle import mollify, radial_solve


@pytest.fixture
def ball32():
    g = build_grid(DomainSpec.rectangle(1, 1), 32)
    return interior_ball(g, (0.5, 0.5), 0.3)


def test_el_residual_trivial(square16):
    inner = square16.interior_cells()
    assert np.all(pde.el_residual(np.ones(square16.n_cells), square16)[inner] == 0.0)
    assert np.all(pde.el_residual(np.zeros(square16.n_cells), square16) == 1.0)
    with pytest.raises(ValueError):
        pde.el_residual(np.ones(3), square16)


def test_boundary_residual_trivial(square16):
    u = np.full(square16.n_cells, 2.0)
    assert np.all(pde.boundary_residual(u, BoundaryData.constant(square16, 0.0, 0.5), square16) == 0.0)
    r = pde.boundary_residual(u, BoundaryData.constant(square16, 0.3, 0.5), square16)
    assert np.allclose(r, -0.3, atol=1e-15)


def test_boundary_residual_of_radial_solution_vanishes():
    prof = radial_solve(1.0, 0.4)
    worst = []
    for res in (32, 64, 128):
        g = build_grid(DomainSpec.disk(1.0), res)
        u = prof.height(np.hypot(g.centers[:, 0], g.centers[:, 1]))
        worst.append(np.max(np.abs(pde.boundary_residual(u, BoundaryData.constant(g, 0.4, 0.5), g))))
    assert worst[0] > worst[1] > worst[2]
    assert worst[2] < 2e-2


def test_jacobian_matches_finite_differences(ball32, rng):
    st = pde._ball_stencil(ball32)
    u = rng.normal(size=ball32.size)
    _, J = st.residual(u, 0.6, jacobian=True)
    J = J.toarray()
    for k in rng.choice(ball32.size, 10, replace=False):
        e = np.zeros(ball32.size)
        e[k] = 1e-6
        fd = (st.residual(u + e, 0.6) - st.residual(u - e, 0.6)) / 2e-6
        assert np.max(np.abs(fd - J[:, k])) < 1e-6


def test_dirichlet_constants(ball32):
    n = int(ball32.flagged.sum())
    assert np.all(pde.solve_dirichlet(ball32, np.full(n, 2.5), 0.0) == 2.5)
    assert np.all(pde.solve_dirichlet(ball32, np.ones(n), 1.0) == 1.0)


def test_dirichlet_rejects_bad_input(ball32):
    n = int(ball32.flagged.sum())
    with pytest.raises(ValueError):
        pde.solve_dirichlet(ball32, np.ones(n), 1.5)
    with pytest.raises(ValueError):
        pde.solve_dirichlet(ball32, np.ones(n + 1), 0.5)
    with pytest.raises(ValueError):
        pde.solve_dirichlet(ball32, np.full(n, np.inf), 0.5)


def test_newton_failure_surfaces_as_continuation_error(ball32, rng):
    g = random_ball_data(ball32, 3.0, rng)
    with pytest.raises(pde.ContinuationError) as info:
        pde.continuation(ball32, g, config=pde.NewtonConfig(max_iterations=1))
    assert info.value.state.sigma < 1.0


def test_flat_family(ball32):
    n = int(ball32.flagged.sum())
    state = pde.continuation(ball32, np.ones(n))
    assert state.sigma == 1.0
    assert all(r["newton_iterations"] == 0 for r in state.log)
    assert np.all(state.u == 1.0)


def test_sigma_monotone_and_schedule_independent(ball32, rng):
    g = random_ball_data(ball32, 0.8, rng)
    s1 = pde.continuation(ball32, g, step=0.1)
    s2 = pde.continuation(ball32, g, step=0.05)
    sig = [r["sigma"] for r in s1.log]
    assert sig[0] == 0.0 and sig[-1] == 1.0
    assert all(b > a for a, b in zip(sig, sig[1:]))
    assert np.max(np.abs(s1.u - s2.u)) <= 10 * pde.NewtonConfig().tol


def test_newton_tail_superlinear(ball32, rng):
    g = random_ball_data(ball32, 1.5, rng)
    stats = []
    pde.solve_dirichlet(ball32, g, 1.0, stats=stats)
    r = stats[0].residuals
    assert len(r) >= 3
    ratios = [b / a for a, b in zip(r, r[1:])][-3:]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))


def test_mollified_flat_minimizer_gives_flat_solution():
    g = build_grid(DomainSpec.rectangle(1, 1), 32)
    res = minimize(g, BoundaryData.constant(g, 0.0, 0.5))
    vm = mollify(res.v_star, g, 2 * g.h)
    ball = interior_ball(g, (0.5, 0.5), 0.3)
    data = to_height(vm)[ball.cells][ball.flagged]
    state = pde.continuation(ball, data)
    assert np.max(np.abs(state.u - 1.0)) <= 1e-8


def test_height_bound_report_fields():
    rep = pde.check_height_bound(np.ones(5), np.ones(3))
    assert rep["passed"] and rep["upper_margin"] == 0.0 and rep["max_principle_ok"]


def test_height_bound_flags_violation():
    rep = pde.check_height_bound(np.array([0.0, 2.0]), np.array([2.0]))
    assert not rep["upper_ok"] and rep["max_principle_ok"]


def test_max_principle_bound_holds(ball32, rng):
    # the discrete scheme obeys min(0, min g) <= u <= max(1, max g) for every sigma
    for amp in (0.5, 3.0):
        for _ in range(3):
            g = random_ball_data(ball32, amp, rng)
            for sigma in (0.3, 1.0):
                u = pde.solve_dirichlet(ball32, g, sigma)
                assert pde.check_height_bound(u, g)["max_principle_ok"]


def test_lower_height_bound_holds(ball32, rng):
    for amp in (0.5, 3.0):
        g = random_ball_data(ball32, amp, rng)
        assert pde.check_height_bound(pde.continuation(ball32, g).u, g)["lower_ok"]


def test_patch(ball32, rng):
    g = ball32.grid
    v = rng.uniform(0.2, 2, g.n_cells)
    assert np.array_equal(pde.patch(v, ball32, v[ball32.cells]), v)
    flat = np.full(g.n_cells, math.exp(-1))
    assert np.array_equal(pde.patch(flat, ball32, np.full(ball32.size, math.exp(-1))), flat)
    with pytest.raises(ValueError):
        pde.patch(v, ball32, np.ones(ball32.size - 1))


def test_dirichlet_patch_lowers_ball_energy(ball32, rng):
    g = ball32.grid
    v = rng.uniform(0.2, 2, g.n_cells)
    w = pde.dirichlet_density(v, ball32)
    assert np.allclose(w[ball32.flagged], v[ball32.cells][ball32.flagged])
    assert pde.ball_energy(w, ball32) <= pde.ball_energy(v[ball32.cells], ball32)
    patched = pde.patch(v, ball32, w)
    assert np.array_equal(patched[np.setdiff1d(np.arange(g.n_cells), ball32.cells)],
                          v[np.setdiff1d(np.arange(g.n_cells), ball32.cells)])


def test_ball_energy_optimal_against_competitors(ball32, rng):
    v = to_density(1.0 + 0.3 * rng.normal(size=ball32.grid.n_cells))
    w = pde.dirichlet_density(v, ball32)
    Jw = pde.ball_energy(w, ball32)
    for amp in (0.2, 0.05, 0.01):
        for _ in range(10):
            d = amp * w * rng.normal(size=ball32.size)
            d[ball32.flagged] = 0.0
            assert Jw <= pde.ball_energy(np.abs(w + d), ball32)


def test_interior_gradient_is_finite(ball32, rng):
    g = random_ball_data(ball32, 3.0, rng)
    u = pde.continuation(ball32, g).u
    assert np.isfinite(pde.interior_gradient_max(u, ball32))


def test_stated_upper_branch_fails_for_constant_data(ball32):
    # g = 0.5 on the rim: the solution bends up toward the flat level 1 inside,
    # so max u exceeds sup|g| while the maximum-principle bound still holds
    n = int(ball32.flagged.sum())
    g = np.full(n, 0.5)
    rep = pde.check_height_bound(pde.continuation(ball32, g).u, g)
    assert rep["max_u"] > 0.5 + 1e-3
    assert not rep["upper_ok"] and rep["max_principle_ok"]
