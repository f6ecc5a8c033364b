"""Closed-form steady state and correlation results for the two-mode microlaser.

Under symmetric operation (g1=g2, gamma1=gamma2, nb1=nb2) detailed balance
holds and the joint photon distribution is a product over total photon
number.  The same detailed-balance argument survives velocity averaging of
the pumping coefficients, so the closed form optionally takes a velocity
model.  The decoupled single-mode limit (g2 = 0, nb2 = 0) collapses to the
standard one-mode birth-death chain and is handled as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import FockGrid, ModelParams, ParameterError, VelocityModel, velocity_model
from .velocity import averaged_sin_squared

#: |sin| below this is treated as an exact trapping zero, so the trapping
#: nullity holds bit-exactly despite k*pi/sqrt(s+2) being irrational.
TRAP_SIN_TOL = 1e-9

TAIL_TOL = 1e-10
GRID_FLOOR = 15
GRID_CAP = 256


class DivergenceError(ArithmeticError):
    """A normalized quantity is undefined because the mean photon number is zero."""


@dataclass
class JointDist:
    """Normalized probability table P(n1, n2) on a truncated Fock grid."""

    grid: FockGrid
    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.shape != self.grid.shape:
            raise ValueError(f"table shape {self.p.shape} != grid shape {self.grid.shape}")
        if np.any(self.p < 0):
            raise ValueError("negative probability entry")
        total = self.p.sum()
        if total <= 0:
            raise ValueError("empty distribution")
        if abs(total - 1.0) > 1e-12:
            self.p = self.p / total

    def mean_n(self, mode: int) -> float:
        return float(np.sum(marginal(self, mode) * np.arange(self.p.shape[mode - 1])))

    def mean_total(self) -> float:
        return self.mean_n(1) + self.mean_n(2)


def lambda_nm(n, m, g1, g2):
    """Effective Rabi frequency sqrt(g1^2 (n+1) + g2^2 (m+1))."""
    return np.sqrt(g1 * g1 * (np.asarray(n) + 1.0) + g2 * g2 * (np.asarray(m) + 1.0))


def sin2_clamped(x):
    """sin^2(x), clamped to exactly 0 at trapping phases (|sin x| < TRAP_SIN_TOL)."""
    s = np.sin(x)
    return np.where(np.abs(s) < TRAP_SIN_TOL, 0.0, s * s)


def _pump_sin2(phases, velocity: VelocityModel | None):
    """sin^2 pumping factors, sharp (with trapping clamp) or velocity-averaged."""
    if velocity is None or velocity.spread == 0.0:
        return sin2_clamped(phases)
    return averaged_sin_squared(phases, velocity)


def _resolve_velocity(params: ModelParams, velocity: VelocityModel | None):
    if velocity is not None:
        return velocity
    if params.spread > 0.0:
        return velocity_model(params)
    return None


def log_total_weights(params: ModelParams, s_max: int,
                      velocity: VelocityModel | None = None) -> np.ndarray:
    """log q(s) for the symmetric product solution, q(0) = 0, s = n1 + n2.

    P(n1, n2) is proportional to q(n1 + n2):
    q(s) = (R / (gamma (nb+1)))^s * prod_{k=1..s} (gamma nb / R
            + sin^2[g tau sqrt(k+1)] / (k+1)).
    """
    if not params.symmetric():
        raise ParameterError("product solution requires symmetric operation")
    velocity = _resolve_velocity(params, velocity)
    R, g, gamma, nb = params.R, params.g1, params.gamma1, params.nb1
    k = np.arange(1, s_max + 1, dtype=float)
    s2 = _pump_sin2(params.gtau * np.sqrt(k + 1.0), velocity)
    factors = gamma * nb / R + s2 / (k + 1.0)
    with np.errstate(divide="ignore"):
        logf = math.log(R / (gamma * (nb + 1.0))) + np.log(factors)
    return np.concatenate([[0.0], np.cumsum(logf)])


def _log_single_mode_weights(params: ModelParams, n_max: int,
                             velocity: VelocityModel | None = None) -> np.ndarray:
    """log p(n) (unnormalized) for the decoupled single-mode chain."""
    velocity = _resolve_velocity(params, velocity)
    R, g, gamma, nb = params.R, params.g1, params.gamma1, params.nb1
    n = np.arange(1, n_max + 1, dtype=float)
    s2 = _pump_sin2(params.gtau * np.sqrt(n), velocity)
    factors = gamma * nb / R + s2 / n
    with np.errstate(divide="ignore"):
        logf = math.log(R / (gamma * (nb + 1.0))) + np.log(factors)
    return np.concatenate([[0.0], np.cumsum(logf)])


def _diag_counts(grid: FockGrid, s: np.ndarray) -> np.ndarray:
    """Number of grid states (n1, n2) with n1 + n2 = s."""
    lo = np.maximum(0, s - grid.n2_max)
    hi = np.minimum(s, grid.n1_max)
    return np.maximum(hi - lo + 1, 0)


def _tail_mass(logq: np.ndarray, grid: FockGrid) -> float:
    """Probability mass outside the rectangular grid, under the full wedge."""
    s = np.arange(len(logq))
    q = np.exp(logq - np.max(logq[np.isfinite(logq)]))
    total = np.sum((s + 1) * q)
    inside = np.sum(_diag_counts(grid, s) * q)
    return float((total - inside) / total)


def steady_joint_dist(params: ModelParams, grid: FockGrid,
                      velocity: VelocityModel | None = None) -> JointDist:
    """Detailed-balance steady state P(n1, n2) on the grid.

    Symmetric operation uses the two-mode product solution; the decoupled
    single-mode limit uses the one-mode chain.  Raises if the grid leaves
    more than TAIL_TOL of probability outside.
    """
    if params.symmetric():
        s_hi = grid.n1_max + grid.n2_max + GRID_CAP
        logq = log_total_weights(params, s_hi, velocity)
        if _tail_mass(logq, grid) >= TAIL_TOL:
            raise ParameterError(
                f"grid {grid.shape} leaves >= {TAIL_TOL} probability outside; enlarge it"
            )
        n1 = np.arange(grid.n1_max + 1)[:, None]
        n2 = np.arange(grid.n2_max + 1)[None, :]
        logp = logq[n1 + n2]
        finite = np.isfinite(logp)
        p = np.zeros(grid.shape)
        p[finite] = np.exp(logp[finite] - logp[finite].max())
        return JointDist(grid, p / p.sum())
    if params.single_mode():
        n_hi = grid.n1_max + GRID_CAP
        logp1 = _log_single_mode_weights(params, n_hi, velocity)
        q = np.exp(logp1 - np.max(logp1[np.isfinite(logp1)]))
        tail = q[grid.n1_max + 1 :].sum() / q.sum()
        if tail >= TAIL_TOL:
            raise ParameterError(
                f"grid {grid.shape} leaves >= {TAIL_TOL} probability outside; enlarge it"
            )
        p = np.zeros(grid.shape)
        p[:, 0] = q[: grid.n1_max + 1]
        return JointDist(grid, p / p.sum())
    raise ParameterError(
        "closed-form steady state requires symmetric operation or a decoupled mode"
    )


def default_grid(params: ModelParams, velocity: VelocityModel | None = None,
                 pad: int = 10) -> FockGrid:
    """Smallest square grid holding all but TAIL_TOL of the steady-state mass,
    plus a pad of extra levels.

    Floor GRID_FLOOR, cap GRID_CAP.  Non-symmetric parameters are bounded by
    the symmetrized worst case (largest coupling, smallest decay).  The pad
    matters for time-dependent solvers: the fixed point of the truncated
    generator is perturbed by boundary leak far more than the raw tail mass,
    and ~10 extra levels push that bias below 1e-8.
    """
    probe = params
    if not params.symmetric():
        g = max(params.g1, params.g2)
        gamma = min(params.gamma1, params.gamma2)
        nb = max(params.nb1, params.nb2)
        probe = ModelParams(g, g, gamma, gamma, nb, nb, params.R,
                            params.tau_int, params.spread)
    velocity = _resolve_velocity(params, velocity)
    logq = log_total_weights(probe, 2 * GRID_CAP + 2, velocity)
    for n in range(GRID_FLOOR, GRID_CAP):
        if _tail_mass(logq, FockGrid(n, n)) < TAIL_TOL:
            n = min(n + pad, GRID_CAP)
            return FockGrid(n, n)
    return FockGrid(GRID_CAP, GRID_CAP)


def marginal(dist: JointDist, mode: int) -> np.ndarray:
    """Photon number distribution of one mode, P_mode(n)."""
    if mode == 1:
        return dist.p.sum(axis=1)
    if mode == 2:
        return dist.p.sum(axis=0)
    raise ValueError("mode must be 1 or 2")


def total_photon_dist(dist: JointDist) -> np.ndarray:
    """Distribution of the total photon number n1 + n2."""
    s_max = dist.grid.n1_max + dist.grid.n2_max
    out = np.zeros(s_max + 1)
    n1 = np.arange(dist.grid.n1_max + 1)[:, None]
    n2 = np.arange(dist.grid.n2_max + 1)[None, :]
    np.add.at(out, (n1 + n2).ravel(), dist.p.ravel())
    return out


def moments(marg: np.ndarray):
    """(mean, second moment, Fano factor) of a photon number distribution."""
    marg = np.asarray(marg, dtype=float)
    n = np.arange(len(marg))
    mean = float(np.sum(n * marg))
    second = float(np.sum(n * n * marg))
    if mean == 0.0:
        raise DivergenceError("Fano factor undefined: mean photon number is zero")
    fano = (second - mean * mean) / mean
    return mean, second, fano


def g2_zero(marg: np.ndarray) -> float:
    """Equal-time second-order coherence (<n^2> - <n>) / <n>^2."""
    marg = np.asarray(marg, dtype=float)
    n = np.arange(len(marg))
    mean = float(np.sum(n * marg))
    if mean == 0.0:
        raise DivergenceError("g2(0) diverges: the cavity has no photons")
    second = float(np.sum(n * n * marg))
    return (second - mean) / mean**2


def trapping_points(total_photons: int, k_max: int) -> list[float]:
    """g*tau values where pumping beyond `total_photons` photons is blocked.

    The condition is g tau sqrt(total + 2) = k pi; total = 0 gives the
    vacuum trapping states.
    """
    if total_photons < 0:
        raise ValueError("total_photons must be nonnegative")
    root = math.sqrt(total_photons + 2.0)
    return [k * math.pi / root for k in range(1, k_max + 1)]


@dataclass
class SemiclassicalRoots:
    """Sign-change roots of gain(s) - loss(s) with stability flags."""

    roots: list = field(default_factory=list)  # (s, stable) pairs

    def stable(self):
        return [s for s, st in self.roots if st]


def semiclassical_residual(params: ModelParams, n, m):
    """Gain minus loss of the rate equation at occupation (n, m) = (mode2, mode1)."""
    lam2 = params.g1 ** 2 * (np.asarray(m) + 1.0) + params.g2 ** 2 * (np.asarray(n) + 1.0)
    gain = params.R * np.sin(params.tau_int * np.sqrt(lam2)) ** 2
    return gain - params.gamma1 * (np.asarray(n) + np.asarray(m))


def semiclassical_roots(params: ModelParams, s_max: float,
                        ray_ratio: float = 1.0, tol: float = 1e-9) -> SemiclassicalRoots:
    """All gain = loss crossings for total photon number in [0, s_max].

    Non-symmetric parameters are scanned along the ray m = ray_ratio * n
    (m is the mode-1 occupation); reported values are s = n + m.
    """
    def f(s):
        m = s / (1.0 + ray_ratio) * ray_ratio
        n = s / (1.0 + ray_ratio)
        return semiclassical_residual(params, n, m)

    # resolve the fastest oscillation of sin^2(g tau sqrt(s+2)) near s = 0
    gtau = max(params.g1, params.g2) * params.tau_int
    ds = min(0.05, 0.3 / max(gtau, 1.0))
    grid = np.arange(0.0, s_max + ds, ds)
    vals = f(grid)
    out = SemiclassicalRoots()
    scale = max(params.R, params.gamma1 * max(s_max, 1.0))
    if abs(vals[0]) < 1e-12 * scale:
        out.roots.append((0.0, _stable_at(f, 0.0, ds)))
    for i in range(len(grid) - 1):
        a, b, fa, fb = grid[i], grid[i + 1], vals[i], vals[i + 1]
        if fa == 0.0 and a > 0.0:
            out.roots.append((float(a), _stable_at(f, a, ds)))
            continue
        if fa * fb < 0.0:
            while b - a > tol:
                mid = 0.5 * (a + b)
                fm = float(f(mid))
                if fa * fm <= 0.0:
                    b, fb = mid, fm
                else:
                    a, fa = mid, fm
            root = 0.5 * (a + b)
            out.roots.append((float(root), _stable_at(f, root, ds)))
    return out


def _stable_at(f, s, ds):
    h = max(1e-6, ds * 1e-3)
    lo = max(s - h, 0.0)
    return bool((float(f(s + h)) - float(f(lo))) / (s + h - lo) < 0.0)


def trapping_g2_formula(params: ModelParams, mode_count: int):
    """(eta, f) with f(tau) = 1 - exp(-eta tau), the trapped-state correlation.

    Single mode: eta = R sin^2(g tau_int) + gamma (pump probability out of
    vacuum uses the sqrt(1) phase).  Two symmetric modes: eta =
    R sin^2(g tau_int sqrt(2)) + gamma.
    """
    if mode_count == 1:
        eta = params.R * math.sin(params.gtau) ** 2 + params.gamma1
    elif mode_count == 2:
        eta = params.R * math.sin(params.gtau * math.sqrt(2.0)) ** 2 + params.gamma1
    else:
        raise ValueError("mode_count must be 1 or 2")

    def f(tau):
        return 1.0 - np.exp(-eta * np.asarray(tau, dtype=float))

    return eta, f


def resonance_fluorescence_g2(rabi: float, linewidth: float, tau):
    """g2(tau) of resonance fluorescence from a driven two-level atom.

    1 - (cos(mu t) + (3 Gamma / 4 mu) sin(mu t)) exp(-3 Gamma t / 4), with
    mu = sqrt(Omega^2 - Gamma^2/16); the overdamped branch uses the
    hyperbolic form.
    """
    tau = np.asarray(tau, dtype=float)
    disc = rabi * rabi - linewidth * linewidth / 16.0
    damp = np.exp(-0.75 * linewidth * tau)
    if disc > 0:
        mu = math.sqrt(disc)
        env = np.cos(mu * tau) + (0.75 * linewidth / mu) * np.sin(mu * tau)
    elif disc < 0:
        nu = math.sqrt(-disc)
        env = np.cosh(nu * tau) + (0.75 * linewidth / nu) * np.sinh(nu * tau)
    else:
        env = 1.0 + 0.75 * linewidth * tau
    return 1.0 - env * damp
