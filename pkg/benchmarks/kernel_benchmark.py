"""Compare the compiled trajectory kernel against the pure-Python fallback.

Usage: python benchmarks/kernel_benchmark.py [n_traj] [t_final]

Both kernels consume identical random streams, so the benchmark also
re-verifies that their outputs agree bit-for-bit on the workload it times.
"""
import sys
import time

import numpy as np

from microlaser import _kernel_py, qtm
from microlaser.model import symmetric_params

try:
    from microlaser import _kernel_cy
except ImportError:
    _kernel_cy = None


def bench(kernel, params, n_traj, t_final):
    start = time.perf_counter()
    events = 0
    occ = None
    for i in range(n_traj):
        rec = qtm.run_trajectory(params, t_final, seed=123, traj_id=i,
                                 kernel=kernel)
        events += int(rec.counts.sum())
        occ = rec.occupancy if occ is None else occ + rec.occupancy
    return time.perf_counter() - start, events, occ


def main():
    n_traj = int(sys.argv[1]) if len(sys.argv) > 1 else 50
    t_final = float(sys.argv[2]) if len(sys.argv) > 2 else 100.0
    params = symmetric_params(g=1.0, gamma=1.0, nb=0.1, R=200.0, tau_int=0.3)
    print(f"workload: {n_traj} trajectories x {t_final}/gamma, "
          f"R={params.R}, gtau={params.gtau}")

    t_py, ev_py, occ_py = bench(_kernel_py.run_trajectory_kernel, params,
                                n_traj, t_final)
    print(f"python   kernel: {t_py:8.2f} s   {ev_py / t_py:12.0f} events/s")
    if _kernel_cy is None:
        print("compiled kernel: not built")
        return
    t_cy, ev_cy, occ_cy = bench(_kernel_cy.run_trajectory_kernel, params,
                                n_traj, t_final)
    print(f"compiled kernel: {t_cy:8.2f} s   {ev_cy / t_cy:12.0f} events/s")
    print(f"speedup: {t_py / t_cy:.1f}x")
    assert ev_py == ev_cy and np.array_equal(occ_py, occ_cy), \
        "kernel outputs diverged"
    print("outputs bit-identical: yes")


if __name__ == "__main__":
    main()
