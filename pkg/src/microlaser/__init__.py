"""Photon statistics of a two-mode microlaser.

Three routes to the same physics, kept deliberately independent so they can
cross-check each other:

- analytic: detailed-balance product solution of the photon-number
  distribution (symmetric two-mode and decoupled single-mode cases).
- generator: truncated diagonal master equation, time-marched or solved
  directly; also the deterministic g2(tau) via the conditional-state route.
- qtm: stochastic jump trajectories (compiled kernel with a pure-Python
  fallback) plus the leak-stream correlation estimator.
"""

__version__ = "0.1.0"

from . import analytic, correlation, generator, model, qtm, velocity
from .analytic import (DivergenceError, JointDist, default_grid, g2_zero,
                       marginal, moments, steady_joint_dist, total_photon_dist,
                       trapping_g2_formula, trapping_points)
from .correlation import (CorrelationSeries, EstimationError,
                          leak_pair_correlation, pooled_correlation)
from .generator import (ConvergenceError, DiagGenerator, StabilityError,
                        build, conditional_state, g2_regression, rk4_evolve,
                        steady_state)
from .model import (FockGrid, ModelParams, ParameterError, VelocityModel,
                    pump_theta, single_mode_preset, symmetric_params, validate)
from .qtm import (EnsembleResult, EventKind, GridOverflowError,
                  TrajectoryRecord, ensemble_run, run_trajectory,
                  time_averaged_dist)
