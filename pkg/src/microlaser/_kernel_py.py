"""Pure-Python trajectory kernel.

Reference implementation of the jump-process event loop.  The compiled
kernel mirrors this function draw-for-draw: both consume the same uniform
stream (Generator.random / next_double) in the same order and use the same
libm/cephes primitives, so trajectories are bit-identical across the two.

Draw order per event: u_wait, u_cat, then for an atom transit zero or more
u_v (speed rejection loop) followed by u_split.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtri

EMIT1, EMIT2, LEAK1, LEAK2, THERMAL1, THERMAL2, ATOM_PASS = range(7)


class GridOverflowError(RuntimeError):
    """A trajectory climbed past the occupancy-grid cap."""


def run_trajectory_kernel(rng, g1, g2, gamma1, gamma2, nb1, nb2, R, tau_int,
                          spread, v0, v_min_fraction, t_final, burn_in,
                          n1_cap, n2_cap, collect_leaks, collect_events):
    """Simulate one trajectory from vacuum over [0, t_final].

    Returns (occupancy, leak1, leak2, counts, n1, n2, events) where
    occupancy accumulates dwell time per state inside [burn_in, t_final],
    counts holds per-kind event totals, and events is (t, kind, n1, n2)
    arrays or None.
    """
    random = rng.random
    occ = np.zeros((n1_cap + 1, n2_cap + 1))
    leak1, leak2 = [], []
    ev_t, ev_k, ev_n1, ev_n2 = [], [], [], []
    counts = np.zeros(7, dtype=np.int64)
    n1 = 0
    n2 = 0
    t = 0.0
    g1sq = g1 * g1
    g2sq = g2 * g2
    vmin = v_min_fraction * v0
    sig = spread * v0
    while True:
        r_leak1 = gamma1 * (nb1 + 1.0) * n1
        r_leak2 = gamma2 * (nb2 + 1.0) * n2
        r_th1 = gamma1 * nb1 * (n1 + 1.0)
        r_th2 = gamma2 * nb2 * (n2 + 1.0)
        A = R + r_leak1 + r_leak2 + r_th1 + r_th2
        u = random()
        t_next = t - math.log1p(-u) / A
        seg = min(t_next, t_final) - max(t, burn_in)
        if seg > 0.0:
            occ[n1, n2] += seg
        if t_next >= t_final:
            break
        t = t_next
        u = random() * A
        if u < R:
            tau = tau_int
            if spread > 0.0:
                while True:
                    v = v0 + sig * ndtri(random())
                    if v >= vmin:
                        break
                tau = tau_int * v0 / v
            lam2 = g1sq * (n1 + 1.0) + g2sq * (n2 + 1.0)
            if lam2 > 0.0:
                s = math.sin(math.sqrt(lam2) * tau)
                s2 = s * s
                w1 = g1sq * (n1 + 1.0) / lam2
                us = random()
                if us < s2 * w1:
                    n1 += 1
                    kind = EMIT1
                    if n1 > n1_cap:
                        raise GridOverflowError(
                            f"state ({n1}, {n2}) exceeds grid cap "
                            f"({n1_cap}, {n2_cap}) at t = {t:.6g}"
                        )
                elif us < s2:
                    n2 += 1
                    kind = EMIT2
                    if n2 > n2_cap:
                        raise GridOverflowError(
                            f"state ({n1}, {n2}) exceeds grid cap "
                            f"({n1_cap}, {n2_cap}) at t = {t:.6g}"
                        )
                else:
                    kind = ATOM_PASS
            else:
                kind = ATOM_PASS
        elif u < R + r_leak1:
            n1 -= 1
            kind = LEAK1
            if collect_leaks:
                leak1.append(t)
        elif u < R + r_leak1 + r_leak2:
            n2 -= 1
            kind = LEAK2
            if collect_leaks:
                leak2.append(t)
        elif u < R + r_leak1 + r_leak2 + r_th1:
            n1 += 1
            kind = THERMAL1
            if n1 > n1_cap:
                raise GridOverflowError(
                    f"state ({n1}, {n2}) exceeds grid cap "
                    f"({n1_cap}, {n2_cap}) at t = {t:.6g}"
                )
        else:
            n2 += 1
            kind = THERMAL2
            if n2 > n2_cap:
                raise GridOverflowError(
                    f"state ({n1}, {n2}) exceeds grid cap "
                    f"({n1_cap}, {n2_cap}) at t = {t:.6g}"
                )
        counts[kind] += 1
        if collect_events:
            ev_t.append(t)
            ev_k.append(kind)
            ev_n1.append(n1)
            ev_n2.append(n2)
    events = None
    if collect_events:
        events = (np.asarray(ev_t, dtype=float),
                  np.asarray(ev_k, dtype=np.int64),
                  np.asarray(ev_n1, dtype=np.int64),
                  np.asarray(ev_n2, dtype=np.int64))
    return (occ, np.asarray(leak1, dtype=float), np.asarray(leak2, dtype=float),
            counts, n1, n2, events)
