# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled trajectory kernel.

Mirrors _kernel_py.run_trajectory_kernel draw-for-draw: uniforms come
straight from the generator's next_double, the Gaussian inverse CDF is the
same cephes ndtri, and sin/sqrt/log1p are the same libm calls, so the two
kernels produce bit-identical trajectories from the same seed.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport log1p, sin, sqrt

import numpy as np

cimport numpy as cnp
from numpy.random cimport bitgen_t
from scipy.special.cython_special cimport ndtri

from ._kernel_py import GridOverflowError

cdef int EMIT1 = 0, EMIT2 = 1, LEAK1 = 2, LEAK2 = 3
cdef int THERMAL1 = 4, THERMAL2 = 5, ATOM_PASS = 6


cdef class _Buf:
    """Growable float64 buffer."""
    cdef cnp.ndarray arr
    cdef double[::1] view
    cdef Py_ssize_t n

    def __cinit__(self, Py_ssize_t cap=1024):
        self.arr = np.empty(cap, dtype=np.float64)
        self.view = self.arr
        self.n = 0

    cdef inline void push(self, double x):
        if self.n == self.view.shape[0]:
            self.arr = np.concatenate([self.arr, np.empty_like(self.arr)])
            self.view = self.arr
        self.view[self.n] = x
        self.n += 1

    cdef cnp.ndarray take(self):
        return self.arr[:self.n].copy()


def run_trajectory_kernel(rng, double g1, double g2, double gamma1,
                          double gamma2, double nb1, double nb2, double R,
                          double tau_int, double spread, double v0,
                          double v_min_fraction, double t_final,
                          double burn_in, Py_ssize_t n1_cap,
                          Py_ssize_t n2_cap, bint collect_leaks,
                          bint collect_events):
    capsule = rng.bit_generator.capsule
    cdef bitgen_t *bg = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    occ_arr = np.zeros((n1_cap + 1, n2_cap + 1))
    cdef double[:, ::1] occ = occ_arr
    counts_arr = np.zeros(7, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    cdef _Buf leak1 = _Buf(), leak2 = _Buf()
    cdef _Buf ev_t = _Buf(), ev_k = _Buf(), ev_n1 = _Buf(), ev_n2 = _Buf()

    cdef Py_ssize_t n1 = 0, n2 = 0
    cdef double t = 0.0, t_next, seg, u, us, A, tau, v, lam2, s, s2, w1
    cdef double r_leak1, r_leak2, r_th1, r_th2
    cdef double g1sq = g1 * g1, g2sq = g2 * g2
    cdef double vmin = v_min_fraction * v0, sig = spread * v0
    cdef int kind

    while True:
        r_leak1 = gamma1 * (nb1 + 1.0) * n1
        r_leak2 = gamma2 * (nb2 + 1.0) * n2
        r_th1 = gamma1 * nb1 * (n1 + 1.0)
        r_th2 = gamma2 * nb2 * (n2 + 1.0)
        A = R + r_leak1 + r_leak2 + r_th1 + r_th2
        u = bg.next_double(bg.state)
        t_next = t - log1p(-u) / A
        seg = min(t_next, t_final) - max(t, burn_in)
        if seg > 0.0:
            occ[n1, n2] += seg
        if t_next >= t_final:
            break
        t = t_next
        u = bg.next_double(bg.state) * A
        if u < R:
            tau = tau_int
            if spread > 0.0:
                while True:
                    v = v0 + sig * ndtri(bg.next_double(bg.state))
                    if v >= vmin:
                        break
                tau = tau_int * v0 / v
            lam2 = g1sq * (n1 + 1.0) + g2sq * (n2 + 1.0)
            if lam2 > 0.0:
                s = sin(sqrt(lam2) * tau)
                s2 = s * s
                w1 = g1sq * (n1 + 1.0) / lam2
                us = bg.next_double(bg.state)
                if us < s2 * w1:
                    n1 += 1
                    kind = EMIT1
                    if n1 > n1_cap:
                        raise GridOverflowError(
                            f"state ({n1}, {n2}) exceeds grid cap "
                            f"({n1_cap}, {n2_cap}) at t = {t:.6g}")
                elif us < s2:
                    n2 += 1
                    kind = EMIT2
                    if n2 > n2_cap:
                        raise GridOverflowError(
                            f"state ({n1}, {n2}) exceeds grid cap "
                            f"({n1_cap}, {n2_cap}) at t = {t:.6g}")
                else:
                    kind = ATOM_PASS
            else:
                kind = ATOM_PASS
        elif u < R + r_leak1:
            n1 -= 1
            kind = LEAK1
            if collect_leaks:
                leak1.push(t)
        elif u < R + r_leak1 + r_leak2:
            n2 -= 1
            kind = LEAK2
            if collect_leaks:
                leak2.push(t)
        elif u < R + r_leak1 + r_leak2 + r_th1:
            n1 += 1
            kind = THERMAL1
            if n1 > n1_cap:
                raise GridOverflowError(
                    f"state ({n1}, {n2}) exceeds grid cap "
                    f"({n1_cap}, {n2_cap}) at t = {t:.6g}")
        else:
            n2 += 1
            kind = THERMAL2
            if n2 > n2_cap:
                raise GridOverflowError(
                    f"state ({n1}, {n2}) exceeds grid cap "
                    f"({n1_cap}, {n2_cap}) at t = {t:.6g}")
        counts[kind] += 1
        if collect_events:
            ev_t.push(t)
            ev_k.push(<double> kind)
            ev_n1.push(<double> n1)
            ev_n2.push(<double> n2)

    events = None
    if collect_events:
        events = (ev_t.take(),
                  ev_k.take().astype(np.int64),
                  ev_n1.take().astype(np.int64),
                  ev_n2.take().astype(np.int64))
    return (occ_arr, leak1.take(), leak2.take(), counts_arr,
            int(n1), int(n2), events)
