"""g2(tau) estimation from photon leak-time streams.

Mirrors the experimental procedure: count ordered photon pairs separated by
tau within each trajectory, normalize by the squared rate with an
edge-corrected observation window, and pool counts over trajectories.
An uncorrelated Poisson stream gives g2 = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EstimationError(ValueError):
    pass


@dataclass
class CorrelationSeries:
    tau_centers: np.ndarray
    g2: np.ndarray
    pair_counts: np.ndarray
    stderr: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau_centers = np.asarray(self.tau_centers, dtype=float)
        self.g2 = np.asarray(self.g2, dtype=float)
        self.pair_counts = np.asarray(self.pair_counts)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if np.any(np.diff(self.tau_centers) <= 0):
            raise ValueError("tau centers must be strictly increasing")
        if np.any(self.g2 < 0):
            raise ValueError("negative g2 entry")
        if np.any(self.pair_counts < 0):
            raise ValueError("negative pair count")


DEFAULT_BIN_WIDTH = 0.05
DEFAULT_TAU_MAX = 10.0


def pair_separation_counts(times: np.ndarray, bin_width: float, tau_max: float) -> np.ndarray:
    """Histogram of ordered-pair separations t_b - t_a in (0, tau_max]."""
    times = np.asarray(times, dtype=float)
    nbins = int(round(tau_max / bin_width))
    counts = np.zeros(nbins, dtype=np.int64)
    n = len(times)
    if n < 2:
        return counts
    hi = np.searchsorted(times, times + tau_max, side="right")
    starts = np.arange(1, n + 1)
    lengths = np.maximum(hi - starts, 0)
    total = int(lengths.sum())
    if total == 0:
        return counts
    # flat indices of all partners within tau_max of each event
    offsets = np.concatenate([[0], np.cumsum(lengths[:-1])])
    flat = (np.arange(total) - np.repeat(offsets, lengths)
            + np.repeat(starts, lengths))
    diffs = times[flat] - np.repeat(times, lengths)
    bins = np.minimum((diffs / bin_width).astype(np.int64), nbins - 1)
    np.add.at(counts, bins, 1)
    return counts


def _estimate(counts, n_events, t_obs, bin_width, tau_centers):
    """Pooled estimator: counts / (rate^2 * bin_width * sum_i (T_i - tau))."""
    rate = n_events.sum() / t_obs.sum()
    window = np.maximum(t_obs[None, :] - tau_centers[:, None], 0.0).sum(axis=1)
    denom = rate * rate * bin_width * window
    with np.errstate(divide="ignore", invalid="ignore"):
        g2 = np.where(denom > 0, counts / denom, 0.0)
    return g2


def leak_pair_correlation(leak_times, t_total: float,
                          bin_width: float = DEFAULT_BIN_WIDTH,
                          tau_max: float = DEFAULT_TAU_MAX) -> CorrelationSeries:
    """g2 estimate from a single leak-time stream observed over [0, t_total]."""
    times = np.asarray(leak_times, dtype=float)
    if len(times) < 2:
        raise EstimationError("insufficient events: need at least 2 leak times")
    if tau_max >= t_total:
        raise EstimationError("tau_max must be smaller than the observation time")
    nbins = int(round(tau_max / bin_width))
    centers = (np.arange(nbins) + 0.5) * bin_width
    counts = pair_separation_counts(times, bin_width, tau_max)
    g2 = _estimate(counts, np.array([len(times)]), np.array([t_total]),
                   bin_width, centers)
    stderr = _poisson_stderr(g2, counts)
    return CorrelationSeries(centers, g2, counts, stderr, meta={
        "bin_width": bin_width, "tau_max": tau_max,
        "n_events": int(len(times)), "t_total": float(t_total),
    })


def _poisson_stderr(g2, counts):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(counts > 0, g2 / np.sqrt(counts), 0.0)


def _target_streams(records, target):
    """Per-trajectory (leak times, observation time) for the requested stream."""
    out = []
    for rec in records:
        if target == "mode1":
            t = np.asarray(rec.leak_times_1, dtype=float)
        elif target == "mode2":
            t = np.asarray(rec.leak_times_2, dtype=float)
        elif target == "total":
            t = np.sort(np.concatenate([
                np.asarray(rec.leak_times_1, dtype=float),
                np.asarray(rec.leak_times_2, dtype=float),
            ]))
        else:
            raise ValueError("target must be mode1, mode2 or total")
        out.append((t, float(rec.t_final)))
    return out


def pooled_correlation(records, target: str = "mode1",
                       bin_width: float = DEFAULT_BIN_WIDTH,
                       tau_max: float = DEFAULT_TAU_MAX,
                       burn_in: float = 0.0) -> CorrelationSeries:
    """g2 estimate pooled over trajectories; pairs never span trajectories.

    Leak times before burn_in are discarded (initial transient).  Standard
    errors come from a leave-one-trajectory-out jackknife, since pair counts
    within a trajectory are correlated.
    """
    streams = _target_streams(records, target)
    nbins = int(round(tau_max / bin_width))
    centers = (np.arange(nbins) + 0.5) * bin_width
    per_counts, n_events, t_obs = [], [], []
    for times, t_final in streams:
        if burn_in > 0.0:
            if burn_in >= t_final:
                raise EstimationError("burn_in must be smaller than the trajectory length")
            times = times[times >= burn_in] - burn_in
            t_final = t_final - burn_in
        if tau_max >= t_final:
            raise EstimationError("tau_max must be smaller than the observation time")
        per_counts.append(pair_separation_counts(times, bin_width, tau_max))
        n_events.append(len(times))
        t_obs.append(t_final)
    per_counts = np.asarray(per_counts)
    n_events = np.asarray(n_events, dtype=float)
    t_obs = np.asarray(t_obs, dtype=float)
    if n_events.sum() < 2:
        raise EstimationError("insufficient events: need at least 2 leak times")
    counts = per_counts.sum(axis=0)
    g2 = _estimate(counts, n_events, t_obs, bin_width, centers)
    n_traj = len(streams)
    if n_traj == 1:
        stderr = _poisson_stderr(g2, counts)
    else:
        stderr = _jackknife_stderr(per_counts, n_events, t_obs, bin_width, centers)
    return CorrelationSeries(centers, g2, counts, stderr, meta={
        "bin_width": bin_width, "tau_max": tau_max, "target": target,
        "burn_in": burn_in, "n_traj": n_traj,
        "n_events": int(n_events.sum()), "t_total": float(t_obs.sum()),
    })


def _jackknife_stderr(per_counts, n_events, t_obs, bin_width, centers):
    """Leave-one-trajectory-out jackknife standard errors per bin."""
    n = len(n_events)
    tot_counts = per_counts.sum(axis=0)[None, :]           # (1, nbins)
    tot_events = n_events.sum()
    tot_time = t_obs.sum()
    window_i = np.maximum(t_obs[:, None] - centers[None, :], 0.0)  # (n, nbins)
    tot_window = window_i.sum(axis=0)[None, :]
    counts_jk = tot_counts - per_counts
    rate_jk = (tot_events - n_events)[:, None] / (tot_time - t_obs)[:, None]
    denom_jk = rate_jk**2 * bin_width * (tot_window - window_i)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(denom_jk > 0, counts_jk / denom_jk, 0.0)
    mean = theta.mean(axis=0)
    var = (n - 1) / n * np.sum((theta - mean) ** 2, axis=0)
    return np.sqrt(var)
