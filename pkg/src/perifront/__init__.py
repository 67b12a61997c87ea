"""Numerics for free boundary Fisher-KPP fronts under time-periodic advection.

Modules
-------
periodic : periodic coefficient algebra, reaction presets, hypotheses
eigen    : periodic-parabolic principal eigenvalues, critical lengths
semiwave : periodic strip / half-line profiles and their boundary fluxes
critical : semi-wave speeds, the critical advection curve, regimes
fbp      : front-fixing solver for the free boundary problem
classify : outcome detection, threshold bisection, front-law diagnostics
cli      : config-driven command line driver
"""

from .periodic import (PeriodicFn, Reaction, Problem, as_periodic,
                       mean_and_shape, periodic_state, stability_index,
                       validate_hypotheses)
from .eigen import EigenResult, principal_eigenvalue, critical_length
from .semiwave import (SemiWaveProfile, relax_dirichlet_zero,
                       relax_dirichlet_pinned, half_line_profile,
                       boundary_flux, compact_wave_view)
from .critical import (CriticalSpeeds, Regime, cbar, rightward_speed,
                       leftward_speed, critical_average, beta_star_from_shape,
                       advection_regime, critical_speeds)
from .fbp import InitialData, FbpState, Trajectory, advance, simulate
from .classify import (Outcome, OutcomeKind, Thresholds, ThresholdResult,
                       AsymptoticsReport, classify, classify_run,
                       critical_sigma, front_asymptotics)
from . import errors

__version__ = "0.1.0"

__all__ = [
    "PeriodicFn", "Reaction", "Problem", "as_periodic", "mean_and_shape",
    "periodic_state", "stability_index", "validate_hypotheses",
    "EigenResult", "principal_eigenvalue", "critical_length",
    "SemiWaveProfile", "relax_dirichlet_zero", "relax_dirichlet_pinned",
    "half_line_profile", "boundary_flux", "compact_wave_view",
    "CriticalSpeeds", "Regime", "cbar", "rightward_speed", "leftward_speed",
    "critical_average", "beta_star_from_shape", "advection_regime",
    "critical_speeds",
    "InitialData", "FbpState", "Trajectory", "advance", "simulate",
    "Outcome", "OutcomeKind", "Thresholds", "ThresholdResult",
    "AsymptoticsReport", "classify", "classify_run", "critical_sigma",
    "front_asymptotics",
    "errors",
]
