"""Physical parameters, Fock-grid truncation and the atomic velocity model.

Unit convention: gamma1 = 1 defines the time unit in all presets, so every
rate is quoted in units of the mode-1 field decay rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace


class ParameterError(ValueError):
    """A physical parameter violates its constraint."""


@dataclass(frozen=True)
class ModelParams:
    """Operating point of the two-mode microlaser.

    g1, g2        atom-mode coupling strengths [1/time]
    gamma1/2      cavity field decay rates [1/time]
    nb1, nb2      mean thermal photon numbers
    R             atomic injection rate [atoms/time]
    tau_int       nominal atom-cavity interaction time [time]
    spread        relative velocity spread sigma_v / v0
    """

    g1: float
    g2: float
    gamma1: float
    gamma2: float
    nb1: float
    nb2: float
    R: float
    tau_int: float
    spread: float = 0.0

    def symmetric(self) -> bool:
        return (
            self.g1 == self.g2
            and self.gamma1 == self.gamma2
            and self.nb1 == self.nb2
        )

    def single_mode(self) -> bool:
        """True when mode 2 is completely decoupled (never pumped, never fed)."""
        return self.g2 == 0.0 and self.nb2 == 0.0

    @property
    def gtau(self) -> float:
        return self.g1 * self.tau_int

    def with_(self, **kw) -> "ModelParams":
        return validate(replace(self, **kw))


@dataclass(frozen=True)
class FockGrid:
    """Truncation bounds of the joint number-state basis."""

    n1_max: int
    n2_max: int

    def __post_init__(self):
        if self.n1_max < 0 or self.n2_max < 0:
            raise ParameterError("grid bounds must be nonnegative")

    @property
    def shape(self):
        return (self.n1_max + 1, self.n2_max + 1)

    @property
    def size(self):
        return (self.n1_max + 1) * (self.n2_max + 1)


@dataclass(frozen=True)
class VelocityModel:
    """Gaussian speed distribution of the pumping atoms.

    spread is sigma_v/v0.  Samples below v_min_fraction*v0 are rejected and
    redrawn so interaction times stay bounded.
    """

    v0: float = 1.0
    spread: float = 0.0
    v_min_fraction: float = 0.05

    def __post_init__(self):
        if self.v0 <= 0:
            raise ParameterError("v0 must be positive")
        if self.spread < 0:
            raise ParameterError("spread must be nonnegative")
        if not 0.0 < self.v_min_fraction < 1.0:
            raise ParameterError("v_min_fraction must lie in (0, 1)")


def validate(params: ModelParams) -> ModelParams:
    """Return params unchanged, or raise naming the first violated constraint."""
    if params.g1 < 0:
        raise ParameterError("g1 must be nonnegative")
    if params.g2 < 0:
        raise ParameterError("g2 must be nonnegative")
    if params.gamma1 <= 0:
        raise ParameterError("gamma1 must be positive")
    if params.gamma2 <= 0:
        raise ParameterError("gamma2 must be positive")
    if params.nb1 < 0:
        raise ParameterError("nb1 must be nonnegative")
    if params.nb2 < 0:
        raise ParameterError("nb2 must be nonnegative")
    if params.R <= 0:
        raise ParameterError("R must be positive")
    if params.tau_int <= 0:
        raise ParameterError("tau_int must be positive")
    if params.spread < 0:
        raise ParameterError("spread must be nonnegative")
    return params


def pump_theta(params: ModelParams) -> float:
    """Pump parameter theta = g * tau_int * sqrt(R / gamma) (symmetric operation)."""
    if not params.symmetric():
        raise ParameterError("pump_theta requires symmetric operation")
    return params.g1 * params.tau_int * math.sqrt(params.R / params.gamma1)


def symmetric_params(g, gamma, nb, R, tau_int, spread=0.0) -> ModelParams:
    """Symmetric two-mode operating point (g1=g2, gamma1=gamma2, nb1=nb2)."""
    return validate(
        ModelParams(g, g, gamma, gamma, nb, nb, R, tau_int, spread)
    )


def single_mode_preset(g, gamma, nb, R, tau_int, spread=0.0) -> ModelParams:
    """Single-mode microlaser: mode 2 decoupled (g2 = 0, nb2 = 0).

    With g2 = 0 the second mode is never pumped and lambda(n, m) reduces to
    g*sqrt(n+1), so the dynamics are exactly the single-mode model.
    """
    return validate(
        ModelParams(g, 0.0, gamma, gamma, nb, 0.0, R, tau_int, spread)
    )


def velocity_model(params: ModelParams, v_min_fraction: float = 0.05) -> VelocityModel:
    return VelocityModel(v0=1.0, spread=params.spread, v_min_fraction=v_min_fraction)
