"""Diagonal master-equation generator on the truncated joint Fock grid.

The photon-number master equation couples P(n1, n2) to its four neighbours:
atomic pumping at rate R weighted by sin^2(lambda tau) factors, cavity decay
gamma (nb+1) n downward and thermal feeding gamma nb (n+1) upward in each
mode.  The generator is assembled as a sparse rate matrix; pump flows that
would leave the grid are dropped and accounted as truncation leak.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .analytic import JointDist, _pump_sin2, _resolve_velocity
from .correlation import CorrelationSeries
from .model import FockGrid, ModelParams, VelocityModel


class ConvergenceError(RuntimeError):
    pass


class StabilityError(RuntimeError):
    pass


@dataclass
class DiagGenerator:
    """Sparse transition-rate matrix M with dP/dt = M P, plus truncation leak."""

    grid: FockGrid
    params: ModelParams
    matrix: sp.csr_matrix
    leak: np.ndarray                 # per-state outflow rate lost to truncation
    pump_table: np.ndarray           # sin^2(lambda tau) per state (possibly averaged)
    velocity: VelocityModel | None = None
    meta: dict = field(default_factory=dict)

    @property
    def max_outflow(self) -> float:
        return float(np.max(-self.matrix.diagonal()))

    def apply(self, p: np.ndarray) -> np.ndarray:
        return self.matrix @ p

    def column_defect(self) -> np.ndarray:
        """Column sums plus leak; zero (to roundoff) if probability is conserved."""
        colsum = np.asarray(self.matrix.sum(axis=0)).ravel()
        return colsum + self.leak


def build(params: ModelParams, grid: FockGrid,
          velocity: VelocityModel | None = None) -> DiagGenerator:
    """Assemble the generator; velocity != None averages every pumping
    coefficient over the interaction-time distribution."""
    velocity = _resolve_velocity(params, velocity)
    N1, N2 = grid.n1_max, grid.n2_max
    n1 = np.arange(N1 + 1)[:, None] * np.ones((1, N2 + 1), dtype=int)
    n2 = np.ones((N1 + 1, 1), dtype=int) * np.arange(N2 + 1)[None, :]
    idx = (n1 * (N2 + 1) + n2).ravel()
    n1f, n2f = n1.ravel().astype(float), n2.ravel().astype(float)

    lam2 = params.g1**2 * (n1f + 1.0) + params.g2**2 * (n2f + 1.0)
    phases = np.sqrt(lam2) * params.tau_int
    # quadrature once per distinct phase (symmetric grids have few)
    uniq, inv = np.unique(phases, return_inverse=True)
    s2 = _pump_sin2(uniq, velocity)[inv]

    w1 = params.g1**2 * (n1f + 1.0) / lam2
    w2 = params.g2**2 * (n2f + 1.0) / lam2

    rows, cols, vals = [], [], []
    leak = np.zeros(grid.size)
    diag = np.zeros(grid.size)

    def flow(rate, dn1, dn2):
        src = rate > 0
        t1, t2 = n1.ravel() + dn1, n2.ravel() + dn2
        inside = src & (t1 >= 0) & (t1 <= N1) & (t2 >= 0) & (t2 <= N2)
        lost = src & ~inside
        rows.append((t1 * (N2 + 1) + t2)[inside])
        cols.append(idx[inside])
        vals.append(rate[inside])
        np.add.at(leak, idx[lost], rate[lost])
        np.subtract.at(diag, idx, rate * src)

    R = params.R
    flow(R * s2 * w1, +1, 0)                                  # atom emits, mode 1
    flow(R * s2 * w2, 0, +1)                                  # atom emits, mode 2
    flow(params.gamma1 * (params.nb1 + 1.0) * n1f, -1, 0)     # leak, mode 1
    flow(params.gamma2 * (params.nb2 + 1.0) * n2f, 0, -1)     # leak, mode 2
    flow(params.gamma1 * params.nb1 * (n1f + 1.0), +1, 0)     # thermal, mode 1
    flow(params.gamma2 * params.nb2 * (n2f + 1.0), 0, +1)     # thermal, mode 2

    rows.append(idx)
    cols.append(idx)
    vals.append(diag)
    M = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )
    return DiagGenerator(grid, params, M, leak, s2.reshape(grid.shape),
                         velocity=velocity,
                         meta={"averaged": velocity is not None and velocity.spread > 0})


def build_velocity_averaged(params: ModelParams, grid: FockGrid,
                            velocity: VelocityModel, quad_points: int = 21) -> DiagGenerator:
    """Generator with pumping coefficients averaged over the speed spread.

    quad_points is a lower bound; the quadrature refines itself until the
    averaged coefficients are stable.
    """
    if quad_points < 3:
        raise ValueError("quad_points must be at least 3")
    return build(params, grid, velocity=velocity)


def default_dt(gen: DiagGenerator, safety: float = 0.1) -> float:
    return safety / gen.max_outflow


def rk4_evolve(gen: DiagGenerator, dist: JointDist, t_final: float,
               dt: float | None = None) -> JointDist:
    """Classical fixed-step RK4 on dP/dt = M P."""
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    p = dist.p.ravel().copy()
    if t_final == 0:
        return JointDist(gen.grid, p.reshape(gen.grid.shape))
    if dt is None:
        dt = default_dt(gen)
    p = _rk4_run(gen.matrix, p, t_final, dt)
    drift = abs(p.sum() - 1.0)
    if drift > 1e-9:
        warnings.warn(f"probability drift {drift:.3e} exceeds 1e-9; renormalizing "
                      "(check grid size / step size)")
        p /= p.sum()
    return JointDist(gen.grid, np.maximum(p, 0.0).reshape(gen.grid.shape))


def _rk4_run(M, p, t_final, dt):
    nsteps = max(1, int(np.ceil(t_final / dt)))
    h = t_final / nsteps
    for _ in range(nsteps):
        k1 = M @ p
        k2 = M @ (p + 0.5 * h * k1)
        k3 = M @ (p + 0.5 * h * k2)
        k4 = M @ (p + h * k3)
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if p.min() < -1e-9:
            raise StabilityError(
                f"negative probability {p.min():.3e}: step size {h:.3e} unstable"
            )
    return p


def _tv(a, b):
    return 0.5 * float(np.abs(a - b).sum())


def vacuum_dist(grid: FockGrid) -> JointDist:
    p = np.zeros(grid.shape)
    p[0, 0] = 1.0
    return JointDist(grid, p)


def steady_state(gen: DiagGenerator, method: str = "auto",
                 checkpoint: float = 5.0, tv_tol: float = 1e-10,
                 march_budget: float = 400.0, max_time: float = 4000.0) -> JointDist:
    """Fixed point of the generator.

    "march": RK4 from vacuum until checkpoints (spaced `checkpoint`/gamma)
    agree to TV < tv_tol.  "direct": sparse linear solve of M P = 0 with a
    normalization row.  "auto" marches within march_budget and falls back to
    the direct solve for stiff (metastable) operating points.
    """
    if method == "direct":
        return _steady_direct(gen)
    # marching uses a stability-limited step; the RK4 fixed point is the
    # exact null vector of M independent of dt
    dt = 0.9 / gen.max_outflow
    p = vacuum_dist(gen.grid).p.ravel()
    t = 0.0
    budget = march_budget if method == "auto" else max_time
    last_tv = np.inf
    while t < budget:
        q = _rk4_run(gen.matrix, p, checkpoint, dt)
        s = q.sum()
        if s <= 0:
            raise ConvergenceError("probability vanished during time marching")
        q /= s
        last_tv = _tv(p, q)
        p, t = q, t + checkpoint
        if last_tv < tv_tol:
            return JointDist(gen.grid, np.maximum(p, 0.0).reshape(gen.grid.shape))
    if method == "auto":
        return _steady_direct(gen)
    raise ConvergenceError(
        f"no steady state after t = {budget:g}; last checkpoint TV = {last_tv:.3e}"
    )


def _steady_direct(gen: DiagGenerator) -> JointDist:
    n = gen.grid.size
    K = gen.matrix.tolil(copy=True)
    K[0, :] = np.ones(n)
    b = np.zeros(n)
    b[0] = 1.0
    x = spla.spsolve(K.tocsc(), b)
    x = np.maximum(x, 0.0)
    x[x < 1e-15 * x.max()] = 0.0   # suppress solver noise around exact zeros
    x /= x.sum()
    return JointDist(gen.grid, x.reshape(gen.grid.shape))


def residual(gen: DiagGenerator, dist: JointDist) -> float:
    """max |dP/dt| of a candidate fixed point."""
    return float(np.max(np.abs(gen.matrix @ dist.p.ravel())))


def conditional_state(dist: JointDist, target: str = "mode1") -> JointDist:
    """State conditioned on detecting and annihilating one photon.

    Diagonal form of a rho a^dag: mode 1 gives P~(n1,n2) prop.
    (n1+1) P(n1+1, n2); "total" removes the photon from either mode with
    weight proportional to its occupation.
    """
    p = dist.p
    out = np.zeros_like(p)
    if target in ("mode1", "total"):
        out[:-1, :] += (np.arange(1, p.shape[0])[:, None]) * p[1:, :]
    if target in ("mode2", "total"):
        out[:, :-1] += (np.arange(1, p.shape[1])[None, :]) * p[:, 1:]
    if target not in ("mode1", "mode2", "total"):
        raise ValueError("target must be mode1, mode2 or total")
    norm = out.sum()
    if norm <= 0:
        from .analytic import DivergenceError
        raise DivergenceError("cannot condition on a photon: the cavity has no photons")
    return JointDist(dist.grid, out / norm)


def _mean_target(dist: JointDist, target: str) -> float:
    if target == "mode1":
        return dist.mean_n(1)
    if target == "mode2":
        return dist.mean_n(2)
    return dist.mean_total()


def g2_regression(params: ModelParams, grid: FockGrid, target: str,
                  tau_grid, velocity: VelocityModel | None = None,
                  dt_tol: float = 1e-8, steady: JointDist | None = None) -> CorrelationSeries:
    """Deterministic g2(tau) via the conditional-state (quantum regression) route.

    Evolves a rho_ss a^dag / Tr[...] under the generator with RK4 and reads
    off <n_target>(tau) / <n_target>_ss.  The step size is halved until the
    whole series is stable to dt_tol.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    if np.any(np.diff(tau_grid) <= 0) or tau_grid[0] < 0:
        raise ValueError("tau_grid must be nonnegative and strictly increasing")
    gen = build(params, grid, velocity=velocity)
    rho_ss = steady if steady is not None else steady_state(gen, method="direct")
    n_ss = _mean_target(rho_ss, target)
    if n_ss < 1e-12:
        from .analytic import DivergenceError
        raise DivergenceError(
            "correlation undefined: the steady-state cavity has no photons")
    cond = conditional_state(rho_ss, target)

    dt = default_dt(gen)
    prev = None
    for _ in range(40):
        g2 = _g2_series(gen, cond, n_ss, target, tau_grid, dt)
        if prev is not None and np.max(np.abs(g2 - prev)) < dt_tol:
            break
        prev = g2
        dt *= 0.5
    else:
        raise ConvergenceError(
            f"correlation series did not stabilize to {dt_tol:g} under step refinement")
    series = CorrelationSeries(
        tau_grid if tau_grid[0] > 0 else tau_grid + 0.0,
        np.maximum(g2, 0.0), np.zeros(len(tau_grid), dtype=np.int64),
        np.zeros(len(tau_grid)),
        meta={"method": "regression", "target": target, "dt": dt},
    )
    return series


def _g2_series(gen, cond, n_ss, target, tau_grid, dt):
    p = cond.p.ravel().copy()
    out = np.empty(len(tau_grid))
    t = 0.0
    for j, tau in enumerate(tau_grid):
        if tau > t:
            p = _rk4_run(gen.matrix, p, tau - t, dt)
            t = tau
        d = JointDist(gen.grid, np.maximum(p, 0.0).reshape(gen.grid.shape))
        out[j] = _mean_target(d, target) / n_ss
    return out
