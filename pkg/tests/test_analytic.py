import math

import numpy as np
import pytest

from microlaser import analytic
from microlaser.analytic import (DivergenceError, JointDist, default_grid,
                                 g2_zero, lambda_nm, marginal, moments,
                                 resonance_fluorescence_g2,
                                 semiclassical_residual, semiclassical_roots,
                                 steady_joint_dist, total_photon_dist,
                                 trapping_g2_formula, trapping_points)
from microlaser.model import (FockGrid, ParameterError, single_mode_preset,
                              symmetric_params)


def tv(a, b):
    return 0.5 * np.abs(np.asarray(a) - np.asarray(b)).sum()


# ---------------------------------------------------------------------------
# basic building blocks


def test_lambda_nm():
    assert lambda_nm(0, 0, 1.0, 1.0) == pytest.approx(math.sqrt(2.0))
    assert lambda_nm(2, 1, 0.8, 0.5) == pytest.approx(
        math.sqrt(0.64 * 3 + 0.25 * 2))


def test_joint_dist_rejects_bad_tables():
    grid = FockGrid(2, 2)
    with pytest.raises(ValueError, match="negative"):
        JointDist(grid, np.array([[0.5, 0, 0], [0, -0.1, 0], [0, 0, 0.6]]))
    with pytest.raises(ValueError, match="shape"):
        JointDist(grid, np.ones((2, 2)) / 4)
    with pytest.raises(ValueError, match="empty"):
        JointDist(grid, np.zeros((3, 3)))


def test_joint_dist_normalizes_drifted_input():
    grid = FockGrid(1, 1)
    d = JointDist(grid, np.array([[0.5, 0.25], [0.2, 0.1]]))
    assert d.p.sum() == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# product solution: frozen brute-force recursion oracle (explicit loop over
# q(s) factors, no log-space, computed independently)


def test_symmetric_product_solution_against_recursion_oracle():
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.1, R=5.0, tau_int=0.7)
    d = steady_joint_dist(p, FockGrid(25, 25))
    assert d.p[0, 0] == pytest.approx(0.013048332954651845, rel=1e-12)
    assert d.p[1, 0] == pytest.approx(0.02191209813520545, rel=1e-12)
    assert d.p[2, 1] == pytest.approx(0.03715669959910258, rel=1e-12)
    assert d.mean_n(1) == pytest.approx(2.3172278358636635, rel=1e-12)


def test_single_mode_chain_against_recursion_oracle():
    p = single_mode_preset(g=1.0, gamma=1.0, nb=0.2, R=8.0, tau_int=1.1)
    d = steady_joint_dist(p, FockGrid(39, 0))
    m = marginal(d, 1)
    assert m[0] == pytest.approx(0.005842341116821827, rel=1e-12)
    assert m[3] == pytest.approx(0.23999924997934804, rel=1e-12)
    assert moments(m)[0] == pytest.approx(3.8511407499421537, rel=1e-12)
    # all mass stays in the decoupled mode
    assert marginal(d, 2)[0] == pytest.approx(1.0)


def test_diagonal_constancy_and_flat_marginal_structure():
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.1, R=50.0, tau_int=0.8)
    d = steady_joint_dist(p, default_grid(p))
    n1 = np.arange(d.p.shape[0])[:, None]
    n2 = np.arange(d.p.shape[1])[None, :]
    s = n1 + n2
    for k in range(d.p.shape[0]):
        vals = d.p[s == k]
        assert vals.max() - vals.min() < 1e-12
    m = marginal(d, 1)
    assert np.all(np.diff(m) <= 1e-15)


def test_non_symmetric_has_no_closed_form():
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.1, R=5.0, tau_int=0.7)
    with pytest.raises(ParameterError, match="symmetric"):
        steady_joint_dist(p.with_(g2=0.5), FockGrid(20, 20))


def test_undersized_grid_is_rejected():
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.1, R=50.0, tau_int=0.8)
    with pytest.raises(ParameterError, match="enlarge"):
        steady_joint_dist(p, FockGrid(5, 5))


def test_default_grid_scales_with_pump():
    weak = symmetric_params(g=1.0, gamma=1.0, nb=0.0, R=5.0, tau_int=0.3)
    strong = weak.with_(R=200.0)
    assert default_grid(strong).n1_max > default_grid(weak).n1_max
    # returned grid is admissible for the closed form
    steady_joint_dist(strong, default_grid(strong))


# ---------------------------------------------------------------------------
# derived quantities


def test_total_photon_dist_and_moments():
    grid = FockGrid(2, 2)
    d = JointDist(grid, np.array([[0.4, 0.1, 0.0],
                                  [0.2, 0.1, 0.0],
                                  [0.1, 0.1, 0.0]]))
    q = total_photon_dist(d)
    assert q == pytest.approx([0.4, 0.3, 0.2, 0.1, 0.0])
    mean, second, fano = moments(q)
    assert mean == pytest.approx(1.0)
    assert second == pytest.approx(0.3 + 4 * 0.2 + 9 * 0.1)
    assert fano == pytest.approx(second - mean)


def test_g2_zero_matches_direct_formula_and_diverges_on_vacuum():
    m = np.array([0.5, 0.3, 0.2])
    mean = 0.3 + 2 * 0.2
    second = 0.3 + 4 * 0.2
    assert g2_zero(m) == pytest.approx((second - mean) / mean**2)
    with pytest.raises(DivergenceError):
        g2_zero(np.array([1.0, 0.0]))


def test_trapping_points():
    pts = trapping_points(1, 2)
    assert pts[0] == pytest.approx(math.pi / math.sqrt(3.0))
    assert pts[0] == pytest.approx(1.8137993642342178)
    assert pts[1] == pytest.approx(2.0 * math.pi / math.sqrt(3.0))
    assert trapping_points(0, 1)[0] == pytest.approx(math.pi / math.sqrt(2.0))
    with pytest.raises(ValueError):
        trapping_points(-1, 1)


def test_trapped_analytic_state_has_no_mass_beyond_total_one():
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.0, R=10.0,
                         tau_int=math.pi / math.sqrt(3.0))
    d = steady_joint_dist(p, default_grid(p))
    s = np.add.outer(np.arange(d.p.shape[0]), np.arange(d.p.shape[1]))
    assert d.p[s >= 2].sum() == 0.0


# ---------------------------------------------------------------------------
# semiclassical rate equation


def test_semiclassical_roots_solve_gain_equals_loss():
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.1, R=50.0, tau_int=0.8)
    roots = semiclassical_roots(p, s_max=4.0 * p.R)
    assert roots.roots, "expected at least one crossing"
    for s, _ in roots.roots:
        if s == 0.0:
            continue
        # residual at the root, in units of the pump rate
        assert abs(semiclassical_residual(p, s / 2.0, s / 2.0)) < 1e-6 * p.R
    # the laser is above threshold here: a stable non-vacuum occupation exists
    assert any(s > 1.0 for s in roots.stable())


def test_semiclassical_stability_flags():
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.0, R=50.0, tau_int=0.8)
    roots = semiclassical_roots(p, s_max=4.0 * p.R)
    flags = [st for _, st in roots.roots]
    # crossings alternate between stable (down-going) and unstable (up-going)
    assert any(flags) and not all(flags)


# ---------------------------------------------------------------------------
# closed-form correlation references


def test_trapping_g2_formula_rates():
    p = single_mode_preset(g=1.0, gamma=1.0, nb=0.0, R=10.0,
                           tau_int=math.pi / math.sqrt(2.0))
    eta, f = trapping_g2_formula(p, mode_count=1)
    assert eta == pytest.approx(10.0 * math.sin(p.gtau) ** 2 + 1.0)
    assert f(0.0) == 0.0
    assert f(50.0) == pytest.approx(1.0)
    p2 = symmetric_params(g=1.0, gamma=1.0, nb=0.0, R=10.0,
                          tau_int=math.pi / math.sqrt(3.0))
    eta2, _ = trapping_g2_formula(p2, mode_count=2)
    assert eta2 == pytest.approx(10.0 * math.sin(p2.gtau * math.sqrt(2.0)) ** 2
                                 + 1.0)
    with pytest.raises(ValueError):
        trapping_g2_formula(p, mode_count=3)


def test_resonance_fluorescence_antibunched_start_and_branches():
    tau = np.linspace(0.0, 20.0, 500)
    under = resonance_fluorescence_g2(rabi=2.0, linewidth=1.0, tau=tau)
    assert under[0] == pytest.approx(0.0, abs=1e-12)
    assert under[-1] == pytest.approx(1.0, abs=1e-3)
    assert under.max() > 1.0  # Rabi oscillation overshoot
    over = resonance_fluorescence_g2(rabi=0.1, linewidth=2.0, tau=tau)
    assert np.all(np.diff(over) >= -1e-12)  # overdamped: monotone rise
    # branches meet continuously at the critical point
    crit = resonance_fluorescence_g2(1.0, 4.0, tau)
    near = resonance_fluorescence_g2(1.0 + 1e-8, 4.0, tau)
    assert np.max(np.abs(crit - near)) < 1e-6
