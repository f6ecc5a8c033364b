import math

import numpy as np
import pytest
import scipy.linalg

from microlaser import analytic, generator
from microlaser.analytic import DivergenceError, JointDist, default_grid
from microlaser.generator import (ConvergenceError, StabilityError, build,
                                  conditional_state, g2_regression,
                                  rk4_evolve, steady_state, vacuum_dist)
from microlaser.model import FockGrid, symmetric_params, velocity_model


def tv(a, b):
    return 0.5 * np.abs(a.p - b.p).sum()


@pytest.fixture(scope="module")
def fig3_params():
    return symmetric_params(g=1.0, gamma=1.0, nb=0.1, R=50.0, tau_int=0.8)


def test_probability_is_conserved_up_to_tracked_leak(fig3_params):
    gen = build(fig3_params, default_grid(fig3_params))
    assert np.max(np.abs(gen.column_defect())) < 1e-12
    assert np.all(gen.leak >= 0.0)


def test_rk4_agrees_with_matrix_exponential():
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.2, R=3.0, tau_int=0.6)
    grid = FockGrid(14, 14)
    gen = build(p, grid)
    d = rk4_evolve(gen, vacuum_dist(grid), t_final=0.7)
    exact = scipy.linalg.expm(gen.matrix.toarray() * 0.7) @ \
        vacuum_dist(grid).p.ravel()
    exact = np.maximum(exact, 0.0)
    assert np.max(np.abs(d.p.ravel() - exact / exact.sum())) < 1e-9


def test_rk4_zero_time_is_identity(fig3_params):
    grid = default_grid(fig3_params)
    gen = build(fig3_params, grid)
    d0 = vacuum_dist(grid)
    assert np.array_equal(rk4_evolve(gen, d0, 0.0).p, d0.p)
    with pytest.raises(ValueError):
        rk4_evolve(gen, d0, -1.0)


def test_rk4_detects_unstable_step(fig3_params):
    grid = default_grid(fig3_params)
    gen = build(fig3_params, grid)
    with pytest.raises(StabilityError, match="unstable"):
        rk4_evolve(gen, vacuum_dist(grid), t_final=10.0,
                   dt=10.0 / gen.max_outflow)


def test_steady_state_matches_product_solution(fig3_params):
    grid = default_grid(fig3_params)
    gen = build(fig3_params, grid)
    exact = analytic.steady_joint_dist(fig3_params, grid)
    assert tv(steady_state(gen, method="direct"), exact) < 1e-10
    assert generator.residual(gen, exact) < 1e-8


def test_steady_state_march_converges_on_fast_relaxing_point():
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.1, R=5.0, tau_int=0.7)
    grid = default_grid(p)
    gen = build(p, grid)
    marched = steady_state(gen, method="march", tv_tol=1e-12)
    exact = analytic.steady_joint_dist(p, grid)
    assert tv(marched, exact) < 1e-9


def test_steady_state_march_budget_error():
    # metastable trapping point: marching alone cannot get there quickly
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.0, R=10.0,
                         tau_int=math.pi / math.sqrt(3.0), spread=0.002)
    gen = build(p, default_grid(p))
    with pytest.raises(ConvergenceError, match="no steady state"):
        steady_state(gen, method="march", max_time=20.0)
    # the auto path falls back to the direct solve and succeeds
    d = steady_state(gen, march_budget=10.0)
    assert generator.residual(gen, d) < 1e-10


def test_non_symmetric_steady_state_exists():
    # no detailed balance here, but the generator still has a fixed point
    p = symmetric_params(g=0.8, gamma=1.0, nb=0.0, R=10.0,
                         tau_int=1.0).with_(g2=0.5)
    gen = build(p, default_grid(p))
    d = steady_state(gen)
    assert generator.residual(gen, d) < 1e-10
    assert d.mean_n(1) > d.mean_n(2)  # the stronger-coupled mode wins


def test_velocity_averaged_generator_matches_averaged_product_solution():
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.0, R=10.0,
                         tau_int=math.pi / math.sqrt(3.0), spread=0.2)
    grid = default_grid(p)
    gen = build(p, grid, velocity=velocity_model(p))
    exact = analytic.steady_joint_dist(p, grid)
    assert tv(steady_state(gen), exact) < 1e-10


def test_conditional_state_hand_computed():
    grid = FockGrid(2, 1)
    d = JointDist(grid, np.array([[0.4, 0.1], [0.2, 0.1], [0.1, 0.1]]))
    c1 = conditional_state(d, "mode1")
    # P~(n1, n2) prop. (n1 + 1) P(n1 + 1, n2)
    expect = np.array([[0.2, 0.1], [0.2, 0.2], [0.0, 0.0]])
    assert c1.p == pytest.approx(expect / expect.sum())
    ct = conditional_state(d, "total")
    expect_t = expect + np.array([[0.1, 0.0], [0.1, 0.0], [0.1, 0.0]])
    assert ct.p == pytest.approx(expect_t / expect_t.sum())
    with pytest.raises(ValueError):
        conditional_state(d, "mode3")


def test_conditional_state_needs_photons():
    grid = FockGrid(2, 2)
    vac = vacuum_dist(grid)
    with pytest.raises(DivergenceError, match="no photons"):
        conditional_state(vac, "mode1")


def test_g2_regression_zero_lag_equals_moment_formula(fig3_params):
    grid = default_grid(fig3_params)
    d = analytic.steady_joint_dist(fig3_params, grid)
    series = g2_regression(fig3_params, grid, "mode1",
                           np.array([0.0, 0.5, 40.0]), steady=d)
    assert series.g2[0] == pytest.approx(
        analytic.g2_zero(analytic.marginal(d, 1)), abs=1e-7)
    # far from any trapping state correlations die out
    assert series.g2[-1] == pytest.approx(1.0, abs=0.02)


def test_g2_regression_rejects_bad_tau_grid(fig3_params):
    grid = default_grid(fig3_params)
    with pytest.raises(ValueError):
        g2_regression(fig3_params, grid, "mode1", np.array([0.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        g2_regression(fig3_params, grid, "mode1", np.array([-1.0, 1.0]))
