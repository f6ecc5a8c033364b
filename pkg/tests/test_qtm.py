import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microlaser import _kernel_py, analytic, qtm
from microlaser.model import FockGrid, symmetric_params, velocity_model
from microlaser.qtm import (EventKind, GridOverflowError, ensemble_run,
                            event_probabilities, run_trajectory,
                            sample_interaction_time, sample_waiting_time,
                            time_averaged_dist, total_rate, trajectory_rng)

try:
    from microlaser import _kernel_cy
except ImportError:
    _kernel_cy = None


P_FIG10 = symmetric_params(g=1.0, gamma=1.0, nb=0.1, R=200.0, tau_int=0.3)
P_TRAP = symmetric_params(g=1.0, gamma=1.0, nb=0.0, R=10.0,
                          tau_int=math.pi / math.sqrt(3.0))


def test_fixed_seed_reproduces_trajectory_exactly():
    a = run_trajectory(P_FIG10, 5.0, seed=42, collect_events=True)
    b = run_trajectory(P_FIG10, 5.0, seed=42, collect_events=True)
    assert np.array_equal(a.occupancy, b.occupancy)
    assert np.array_equal(a.leak_times_1, b.leak_times_1)
    assert np.array_equal(a.events[0], b.events[0])
    c = run_trajectory(P_FIG10, 5.0, seed=43)
    assert not np.array_equal(a.occupancy, c.occupancy)


@pytest.mark.skipif(_kernel_cy is None, reason="compiled kernel not built")
def test_compiled_and_python_kernels_are_bit_identical():
    for params in (P_FIG10, P_TRAP.with_(spread=0.2), P_TRAP):
        for i in range(3):
            a = run_trajectory(params, 15.0, seed=99, traj_id=i,
                               collect_events=True,
                               kernel=_kernel_py.run_trajectory_kernel)
            b = run_trajectory(params, 15.0, seed=99, traj_id=i,
                               collect_events=True,
                               kernel=_kernel_cy.run_trajectory_kernel)
            assert np.array_equal(a.occupancy, b.occupancy)
            assert np.array_equal(a.leak_times_1, b.leak_times_1)
            assert np.array_equal(a.leak_times_2, b.leak_times_2)
            assert np.array_equal(a.events[0], b.events[0])
            assert np.array_equal(a.events[1], b.events[1])
            assert (a.final_n1, a.final_n2) == (b.final_n1, b.final_n2)


def test_waiting_times_are_exponential():
    rng = trajectory_rng(0, 0)
    rate = total_rate(P_FIG10, 2, 3)
    draws = np.array([sample_waiting_time(rng, rate) for _ in range(200_000)])
    assert draws.mean() == pytest.approx(1.0 / rate, rel=0.01)
    assert draws.std() == pytest.approx(1.0 / rate, rel=0.01)


def test_interaction_time_sampling():
    vm = velocity_model(P_TRAP.with_(spread=0.2))
    rng = trajectory_rng(1, 0)
    assert sample_interaction_time(rng, 0.7, velocity_model(P_TRAP)) == 0.7
    draws = np.array([sample_interaction_time(rng, 0.7, vm)
                      for _ in range(100_000)])
    assert draws.max() <= 0.7 / vm.v_min_fraction
    # quadrature oracle for E[tau] = tau * E[v0/v] (frozen from scipy quad)
    assert draws.mean() == pytest.approx(0.7 * 1.0462107987489542, rel=0.005)


@given(n1=st.integers(0, 30), n2=st.integers(0, 30),
       nb=st.floats(0.0, 2.0), gtau=st.floats(0.05, 4.0),
       r=st.floats(0.5, 300.0))
@settings(max_examples=200, deadline=None)
def test_event_probabilities_sum_to_one(n1, n2, nb, gtau, r):
    p = symmetric_params(g=1.0, gamma=1.0, nb=nb, R=r, tau_int=gtau)
    probs = event_probabilities(p, n1, n2)
    assert abs(sum(probs.values()) - 1.0) < 1e-12
    assert all(v >= 0.0 for v in probs.values())


def test_event_probabilities_structure():
    # vacuum with nb = 0: only atomic outcomes have weight
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.0, R=10.0, tau_int=0.5)
    probs = event_probabilities(p, 0, 0)
    assert probs[EventKind.LEAK1] == 0.0 and probs[EventKind.THERMAL1] == 0.0
    assert probs[EventKind.EMIT1] == probs[EventKind.EMIT2]
    assert probs[EventKind.EMIT1] == pytest.approx(
        0.5 * math.sin(0.5 * math.sqrt(2.0)) ** 2)
    # trapping: emission from the n1 + n2 = 1 shell is blocked
    trapped = event_probabilities(P_TRAP, 1, 0)
    assert trapped[EventKind.EMIT1] == pytest.approx(0.0, abs=1e-25)
    assert trapped[EventKind.EMIT2] == pytest.approx(0.0, abs=1e-25)


def test_vacuum_trapping_blocks_all_emission():
    # sin^2(g tau sqrt(2)) = 0 at g tau = pi/sqrt(2): the field never leaves
    # vacuum, so the only recorded events are atoms passing through
    p = symmetric_params(g=1.0, gamma=1.0, nb=0.0, R=20.0,
                         tau_int=math.pi / math.sqrt(2.0))
    rec = run_trajectory(p, 50.0, seed=3)
    assert rec.final_n1 == 0 and rec.final_n2 == 0
    assert rec.counts[EventKind.ATOM_PASS] == rec.counts.sum()


def test_one_photon_trapping_never_exceeds_total_one():
    ens = ensemble_run(P_TRAP, 200, 30.0, seed=8, collect_leaks=False)
    occ = ens.occupancy
    s = np.add.outer(np.arange(occ.shape[0]), np.arange(occ.shape[1]))
    assert occ[s >= 2].sum() == 0.0


def test_ensemble_is_worker_count_invariant():
    kw = dict(seed=17, burn_in=2.0, collect_leaks=True)
    serial = ensemble_run(P_FIG10, 12, 6.0, n_workers=1, **kw)
    parallel = ensemble_run(P_FIG10, 12, 6.0, n_workers=3, **kw)
    assert np.array_equal(serial.occupancy, parallel.occupancy)
    assert np.array_equal(serial.counts, parallel.counts)
    for a, b in zip(serial.records, parallel.records):
        assert a.traj_id == b.traj_id
        assert np.array_equal(a.leak_times_1, b.leak_times_1)


def test_single_trajectory_ensemble_equals_run_trajectory():
    ens = ensemble_run(P_FIG10, 1, 5.0, seed=21)
    rec = run_trajectory(P_FIG10, 5.0, seed=21, traj_id=0)
    assert np.array_equal(ens.occupancy, rec.occupancy)
    assert np.array_equal(ens.counts, rec.counts)


def test_time_average_converges_to_analytic():
    ens = ensemble_run(P_FIG10, 2000, 50.0, seed=5, burn_in=25.0,
                       collect_leaks=False)
    d = time_averaged_dist(ens)
    exact = analytic.steady_joint_dist(P_FIG10, ens.grid)
    assert 0.5 * np.abs(d.p - exact.p).sum() < 0.02


def test_burn_in_must_leave_observation_time():
    with pytest.raises(ValueError, match="burn_in"):
        run_trajectory(P_FIG10, 5.0, seed=1, burn_in=5.0)


def test_grid_overflow_is_an_error_naming_the_state():
    with pytest.raises(GridOverflowError, match=r"state \(.*\) exceeds"):
        run_trajectory(P_FIG10, 20.0, seed=2, grid=FockGrid(2, 2))


def test_event_table_export():
    rec = run_trajectory(P_FIG10, 2.0, seed=4, collect_events=True)
    rows = qtm.event_table(rec)
    assert len(rows) == rec.counts.sum()
    times = [r[1] for r in rows]
    assert times == sorted(times)
    labels = {r[2] for r in rows}
    assert labels <= {k.label for k in EventKind}
    plain = run_trajectory(P_FIG10, 2.0, seed=4)
    with pytest.raises(ValueError, match="collect_events"):
        qtm.event_table(plain)
