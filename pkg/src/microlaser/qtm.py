"""Stochastic trajectory simulation of the two-mode microlaser.

Each trajectory is a continuous-time jump process on the joint photon
numbers: atoms transit at rate R and emit into mode 1 or 2 with the
sin^2-split probabilities, while each mode independently leaks and is fed
thermally.  Trajectories are seeded counter-style from a master seed so an
ensemble is reproducible regardless of worker count or scheduling.
"""
from __future__ import annotations

import enum
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernel_py
from .analytic import JointDist, default_grid
from .model import FockGrid, ModelParams, VelocityModel, validate, velocity_model

GridOverflowError = _kernel_py.GridOverflowError

try:  # pragma: no cover - exercised indirectly via the parity test
    from . import _kernel_cy as _compiled
except ImportError:  # pragma: no cover
    _compiled = None


def active_kernel(force_python: bool | None = None):
    """The trajectory kernel in use; MICROLASER_FORCE_PY=1 forces the fallback."""
    if force_python is None:
        force_python = os.environ.get("MICROLASER_FORCE_PY", "") not in ("", "0")
    if force_python or _compiled is None:
        return _kernel_py.run_trajectory_kernel
    return _compiled.run_trajectory_kernel


def kernel_name() -> str:
    return "compiled" if active_kernel() is not _kernel_py.run_trajectory_kernel \
        else "python"


class EventKind(enum.IntEnum):
    EMIT1 = _kernel_py.EMIT1
    EMIT2 = _kernel_py.EMIT2
    LEAK1 = _kernel_py.LEAK1
    LEAK2 = _kernel_py.LEAK2
    THERMAL1 = _kernel_py.THERMAL1
    THERMAL2 = _kernel_py.THERMAL2
    ATOM_PASS = _kernel_py.ATOM_PASS

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass
class TrajectoryRecord:
    traj_id: int
    t_final: float
    burn_in: float
    leak_times_1: np.ndarray
    leak_times_2: np.ndarray
    counts: np.ndarray                  # per-EventKind event totals
    final_n1: int
    final_n2: int
    occupancy: np.ndarray | None = None  # dwell time per state in [burn_in, t_final]
    events: tuple | None = None          # (t, kind, n1, n2) arrays when recorded


@dataclass
class EnsembleResult:
    params: ModelParams
    grid: FockGrid
    t_final: float
    burn_in: float
    seed: int
    occupancy: np.ndarray                # summed over trajectories
    counts: np.ndarray
    records: list[TrajectoryRecord] = field(default_factory=list)

    @property
    def n_traj(self) -> int:
        return len(self.records)

    def final_state_hist(self) -> np.ndarray:
        h = np.zeros(self.grid.shape)
        for rec in self.records:
            h[rec.final_n1, rec.final_n2] += 1.0
        return h / h.sum()


def trajectory_rng(master_seed: int, traj_id: int) -> np.random.Generator:
    """Independent, reproducible stream for one trajectory."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(traj_id,))
    return np.random.Generator(np.random.PCG64(ss))


def total_rate(params: ModelParams, n1: int, n2: int) -> float:
    """Total jump rate out of state (n1, n2)."""
    return (params.R
            + params.gamma1 * ((params.nb1 + 1.0) * n1 + params.nb1 * (n1 + 1.0))
            + params.gamma2 * ((params.nb2 + 1.0) * n2 + params.nb2 * (n2 + 1.0)))


def sample_waiting_time(rng: np.random.Generator, rate: float) -> float:
    return -np.log1p(-rng.random()) / rate


def sample_interaction_time(rng: np.random.Generator, tau_int: float,
                            velocity: VelocityModel) -> float:
    """One atom's interaction time: tau_int * v0 / v with v Gaussian,
    rejection-sampled above the v_min cut."""
    if velocity.spread == 0.0:
        return tau_int
    from scipy.special import ndtri
    sig = velocity.spread * velocity.v0
    vmin = velocity.v_min_fraction * velocity.v0
    while True:
        v = velocity.v0 + sig * ndtri(rng.random())
        if v >= vmin:
            return tau_int * velocity.v0 / v


def event_probabilities(params: ModelParams, n1: int, n2: int,
                        tau: float | None = None) -> dict[EventKind, float]:
    """Per-kind probabilities for the next jump out of (n1, n2).

    Reference decomposition used by tests; tau defaults to the nominal
    interaction time.  Sums to 1 by construction.
    """
    if tau is None:
        tau = params.tau_int
    A = total_rate(params, n1, n2)
    lam2 = params.g1**2 * (n1 + 1.0) + params.g2**2 * (n2 + 1.0)
    if lam2 > 0.0:
        s2 = float(np.sin(np.sqrt(lam2) * tau) ** 2)
        w1 = params.g1**2 * (n1 + 1.0) / lam2
    else:
        s2, w1 = 0.0, 0.0
    p = {
        EventKind.EMIT1: params.R * s2 * w1 / A,
        EventKind.EMIT2: params.R * s2 * (1.0 - w1) / A,
        EventKind.ATOM_PASS: params.R * (1.0 - s2) / A,
        EventKind.LEAK1: params.gamma1 * (params.nb1 + 1.0) * n1 / A,
        EventKind.LEAK2: params.gamma2 * (params.nb2 + 1.0) * n2 / A,
        EventKind.THERMAL1: params.gamma1 * params.nb1 * (n1 + 1.0) / A,
        EventKind.THERMAL2: params.gamma2 * params.nb2 * (n2 + 1.0) / A,
    }
    assert abs(sum(p.values()) - 1.0) < 1e-12
    return p


def _grid_caps(params: ModelParams, grid: FockGrid | None,
               velocity: VelocityModel | None) -> FockGrid:
    if grid is not None:
        return grid
    return default_grid(params, velocity)


def run_trajectory(params: ModelParams, t_final: float, *,
                   seed: int | None = None, traj_id: int = 0,
                   rng: np.random.Generator | None = None,
                   grid: FockGrid | None = None, burn_in: float = 0.0,
                   collect_leaks: bool = True, collect_events: bool = False,
                   keep_occupancy: bool = True,
                   kernel=None) -> TrajectoryRecord:
    """One trajectory from vacuum.  Pass either rng or (seed, traj_id)."""
    validate(params)
    if t_final <= burn_in:
        raise ValueError("t_final must exceed burn_in")
    if rng is None:
        if seed is None:
            raise ValueError("either rng or seed is required")
        rng = trajectory_rng(seed, traj_id)
    velocity = velocity_model(params) if params.spread > 0 else None
    grid = _grid_caps(params, grid, velocity)
    if kernel is None:
        kernel = active_kernel()
    occ, leak1, leak2, counts, n1, n2, events = kernel(
        rng, params.g1, params.g2, params.gamma1, params.gamma2,
        params.nb1, params.nb2, params.R, params.tau_int, params.spread,
        1.0, velocity.v_min_fraction if velocity else 0.05,
        t_final, burn_in, grid.n1_max, grid.n2_max,
        collect_leaks, collect_events,
    )
    return TrajectoryRecord(
        traj_id, t_final, burn_in, leak1, leak2, counts, n1, n2,
        occupancy=occ if keep_occupancy else None, events=events,
    )


def _run_chunk(args):
    (params, t_final, seed, ids, grid, burn_in,
     collect_leaks, collect_events, force_python) = args
    kernel = active_kernel(force_python)
    occ_sum = np.zeros(grid.shape)
    counts_sum = np.zeros(7, dtype=np.int64)
    records = []
    for i in ids:
        rec = run_trajectory(
            params, t_final, rng=trajectory_rng(seed, i), traj_id=i,
            grid=grid, burn_in=burn_in, collect_leaks=collect_leaks,
            collect_events=collect_events, kernel=kernel,
        )
        occ_sum += rec.occupancy
        counts_sum += rec.counts
        rec.occupancy = None
        records.append(rec)
    return occ_sum, counts_sum, records


def ensemble_run(params: ModelParams, n_traj: int, t_final: float, *,
                 seed: int, grid: FockGrid | None = None,
                 burn_in: float = 0.0, collect_leaks: bool = True,
                 collect_events: bool = False,
                 n_workers: int = 1) -> EnsembleResult:
    """n_traj independent trajectories with counter-based per-trajectory seeds.

    The result is identical for any n_workers: trajectory i always uses the
    stream spawned at (seed, i), and merging is order-independent sums.
    """
    validate(params)
    if n_traj < 1:
        raise ValueError("n_traj must be positive")
    velocity = velocity_model(params) if params.spread > 0 else None
    grid = _grid_caps(params, grid, velocity)
    ids = np.arange(n_traj)
    force_python = active_kernel() is _kernel_py.run_trajectory_kernel
    if n_workers <= 1:
        chunks = [_run_chunk((params, t_final, seed, ids, grid, burn_in,
                              collect_leaks, collect_events, force_python))]
    else:
        parts = np.array_split(ids, min(n_workers * 4, n_traj))
        jobs = [(params, t_final, seed, part, grid, burn_in,
                 collect_leaks, collect_events, force_python)
                for part in parts if len(part)]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            chunks = list(pool.map(_run_chunk, jobs))
    occ = np.zeros(grid.shape)
    counts = np.zeros(7, dtype=np.int64)
    records = []
    for occ_c, counts_c, recs in chunks:
        occ += occ_c
        counts += counts_c
        records.extend(recs)
    records.sort(key=lambda r: r.traj_id)
    return EnsembleResult(params, grid, t_final, burn_in, seed, occ, counts,
                          records)


def time_averaged_dist(result: EnsembleResult) -> JointDist:
    """Occupation-weighted photon distribution pooled over the ensemble."""
    total = result.occupancy.sum()
    if total <= 0:
        raise ValueError("no dwell time recorded; check burn_in < t_final")
    return JointDist(result.grid, result.occupancy / total)


def event_table(record: TrajectoryRecord):
    """Rows (traj_id, time, event label, n1, n2) for CSV export."""
    if record.events is None:
        raise ValueError("trajectory was run without collect_events")
    t, k, n1, n2 = record.events
    return [
        (record.traj_id, float(ti), EventKind(int(ki)).label, int(a), int(b))
        for ti, ki, a, b in zip(t, k, n1, n2)
    ]
