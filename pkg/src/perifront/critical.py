"""Critical quantities of the advection problem.

The rightward semi-wave speed r(t) is the unique fixed point of the
order-reversing map r -> A[beta - r], where A[k] = mu * dz U(t,0;k) is the
boundary flux of the half-line profile. Undamped iteration of an
order-reversing map oscillates, so the update is damped. The critical average
B(theta) is the root of the strictly increasing y(b) = b - cbar - mean(r(t; b+theta)),
and the set of critical advections can equivalently be built pointwise as
beta* = A[cbar + omega] + cbar + omega.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (BracketFailure, NoConvergence, NonpositiveLinearization,
                     RegimeError)
from .periodic import PeriodicFn, Problem, Reaction, mean_and_shape
from .semiwave import (DEFAULT_NODES_PER_UNIT, DEFAULT_STEPS, SemiWaveProfile,
                       TRUNC_TOL, _extend_field, relax_dirichlet_pinned)

FP_TOL = 1e-5
DAMPING = 0.5
MAX_FP_ITER = 200
B_TOL = 1e-3
DEFAULT_RADIUS = 24.0
NEAR_MARGIN = 1e-2


def cbar(a: PeriodicFn) -> float:
    """Minimal average wave speed 2 sqrt(mean a) of the linearization."""
    abar = a.mean()
    if abar <= 0.0:
        raise NonpositiveLinearization(f"mean(a)={abar:g} <= 0")
    return 2.0 * float(np.sqrt(abar))


class Regime(str, Enum):
    SMALL = "Small"
    MEDIUM = "Medium"
    LARGE = "Large"


@dataclass
class CriticalSpeeds:
    """Bundle of the critical objects for one coefficient triple."""

    cbar: float
    r: PeriodicFn
    R: object                      # cumulative integral of r
    l: PeriodicFn | None
    L: object | None
    regime: Regime
    b_theta: float | None          # B(shape(beta)); filled when the regime needs it
    margin: float
    low_confidence: bool
    r_profile: SemiWaveProfile
    l_profile: SemiWaveProfile | None
    ell_star: float | None = None  # cached critical length of (-beta, a)


class _FluxOperator:
    """Evaluator of A[k] = mu * dz U(t,0;k) with warm starts and a shared radius.

    The half-line profile is re-relaxed from the previous field whenever the
    drift changes slightly, which is what the damped fixed point produces, so
    each evaluation after the first typically needs only a few periods.
    """

    def __init__(self, mu: PeriodicFn, f: Reaction, radius: float,
                 nodes_per_unit: int, steps_per_period: int, period_tol: float,
                 max_periods: int):
        self.mu = mu
        self.f = f
        self.radius = radius
        self.nodes_per_unit = nodes_per_unit
        self.steps = steps_per_period
        self.period_tol = period_tol
        self.max_periods = max_periods
        self.cb = cbar(f.a)
        self._warm: np.ndarray | None = None
        self.profile: SemiWaveProfile | None = None
        self.solves = 0

    def _grid_times(self) -> np.ndarray:
        return np.arange(self.steps) * (self.f.period / self.steps)

    def __call__(self, k: PeriodicFn) -> PeriodicFn:
        if k.mean() <= -self.cb:
            self.profile = None
            self._warm = None
            return PeriodicFn.constant(0.0, self.f.period, self.steps)
        prof = relax_dirichlet_pinned(
            k, self.f, self.radius, right_bc=self.f.P,
            nodes_per_unit=self.nodes_per_unit, steps_per_period=self.steps,
            period_tol=self.period_tol, max_periods=self.max_periods,
            warm_start=self._warm)
        prof.kind = "HalfLine"  # pinned at P(t): the half-line truncation
        self.solves += 1
        self._warm = prof.field[0].copy()
        self.profile = prof
        t = self._grid_times()
        return PeriodicFn(self.f.period, self.mu(t) * prof.boundary_flux(t))

    def double_radius(self):
        if self._warm is not None and self.profile is not None:
            self._warm = _extend_field(self.profile, self.f.P)
        else:
            self._warm = None
        self.radius *= 2.0


def _speed_fixed_point(beta_eff: PeriodicFn, mu: PeriodicFn, f: Reaction, *,
                       damping: float = DAMPING, fp_tol: float = FP_TOL,
                       max_iter: int = MAX_FP_ITER, radius: float = DEFAULT_RADIUS,
                       trunc_tol: float = TRUNC_TOL, max_doublings: int = 3,
                       nodes_per_unit: int = DEFAULT_NODES_PER_UNIT,
                       steps_per_period: int = DEFAULT_STEPS,
                       period_tol: float = 1e-8, max_periods: int = 2000,
                       r0: PeriodicFn | None = None):
    """Damped iteration r <- (1-w) r + w A[beta_eff - r], plus a truncation check.

    Once the residual passes fp_tol, the converged flux is re-evaluated at a
    doubled radius; if it moves more than trunc_tol the whole iteration
    continues on the larger domain.
    """
    op = _FluxOperator(mu, f, radius, nodes_per_unit, steps_per_period,
                       period_tol, max_periods)
    t = op._grid_times()
    if r0 is None:
        r = PeriodicFn.constant(0.0, f.period, steps_per_period)
    else:
        r = PeriodicFn(f.period, r0(t))
    doublings = 0
    radius_verified = False
    for _ in range(max_iter):
        A = op(beta_eff - r)
        resid = float(np.abs(r(t) - A(t)).max())
        if resid < fp_tol:
            if radius_verified:
                return r, op.profile
            # truncation check: the converged flux must survive one doubling
            op.double_radius()
            A2 = op(beta_eff - r)
            gap = float(np.abs(A(t) - A2(t)).max())
            if gap <= trunc_tol:
                radius_verified = True
                if float(np.abs(r(t) - A2(t)).max()) < fp_tol:
                    return r, op.profile
            else:
                doublings += 1
                if doublings > max_doublings:
                    raise NoConvergence(
                        f"flux truncation gap {gap:.2e} above {trunc_tol:g} "
                        f"after {doublings} radius doublings")
            A = A2  # polish on the doubled domain
        r = (1.0 - damping) * r + damping * A
    raise NoConvergence(
        f"speed fixed point residual {resid:.2e} above {fp_tol:g} after "
        f"{max_iter} iterations")


def rightward_speed(beta: PeriodicFn, mu: PeriodicFn, f: Reaction,
                    **kwargs) -> PeriodicFn:
    """The unique periodic speed r(t; beta) with r = A[beta - r].

    Requires mean(beta) >= 0; the mirrored convention handles negative means.
    """
    if beta.mean() < 0.0:
        raise RegimeError("rightward_speed requires mean(beta) >= 0; reflect x first")
    r, _ = _speed_fixed_point(beta, mu, f, **kwargs)
    return r


def leftward_speed(beta: PeriodicFn, mu: PeriodicFn, f: Reaction,
                   **kwargs) -> PeriodicFn:
    """The leftward speed l(t; beta), the fixed point of l -> A[-beta - l].

    Exists only in the small advection regime 0 <= mean(beta) < cbar.
    """
    bbar = beta.mean()
    cb = cbar(f.a)
    if not (0.0 <= bbar < cb):
        raise RegimeError(
            f"leftward semi-wave needs 0 <= mean(beta) < cbar; got "
            f"mean(beta)={bbar:g}, cbar={cb:g}")
    l, _ = _speed_fixed_point(-beta, mu, f, **kwargs)
    return l


def critical_average(theta: PeriodicFn, mu: PeriodicFn, f: Reaction, *,
                     b_tol: float = B_TOL, bracket_span: float = 64.0,
                     mean_tol: float = 1e-9, **kwargs) -> float:
    """The unique B(theta) > cbar with mean(r(t; B+theta)) = B - cbar.

    Root of the strictly increasing y(b) = b - cbar - mean(r(t; b+theta)) by
    bisection; the upper bracket end grows geometrically from cbar+1 until
    y > 0. Speeds are warm-started from the nearest previously solved b.
    """
    if abs(theta.mean()) > mean_tol:
        raise ValueError(f"theta must have zero mean, got {theta.mean():.3e}")
    cb = cbar(f.a)
    cache: list[tuple[float, PeriodicFn]] = []

    def y(b: float) -> float:
        r0 = None
        if cache:
            nearest = min(cache, key=lambda item: abs(item[0] - b))
            r0 = nearest[1]
        r, _ = _speed_fixed_point(b + theta, mu, f, r0=r0, **kwargs)
        cache.append((b, r))
        return b - cb - r.mean()

    lo = cb
    y_lo = y(lo)
    if y_lo >= 0.0:
        # theory gives y(cbar) < 0; landing at >= 0 means the flux solver broke
        raise BracketFailure(f"y(cbar)={y_lo:g} is not negative")
    span = 1.0
    hi = cb + span
    y_hi = y(hi)
    while y_hi <= 0.0:
        span *= 2.0
        if span > bracket_span:
            raise BracketFailure(
                f"y(b) still negative at b={hi:g}; upstream speed solver "
                "likely failed (y must diverge)")
        hi = cb + span
        y_hi = y(hi)
    while hi - lo > b_tol:
        mid = 0.5 * (lo + hi)
        if y(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def beta_star_from_shape(omega: PeriodicFn, mu: PeriodicFn, f: Reaction, *,
                         mean_tol: float = 1e-9, radius: float = DEFAULT_RADIUS,
                         **kwargs) -> PeriodicFn:
    """A critical advection beta* = A[cbar + omega] + cbar + omega.

    One half-line solve, no fixed-point iteration; every member of the
    critical set arises this way for some zero-mean omega.
    """
    if abs(omega.mean()) > mean_tol:
        raise ValueError(f"omega must have zero mean, got {omega.mean():.3e}")
    cb = cbar(f.a)
    op = _FluxOperator(mu, f, radius,
                       kwargs.pop("nodes_per_unit", DEFAULT_NODES_PER_UNIT),
                       kwargs.pop("steps_per_period", DEFAULT_STEPS),
                       kwargs.pop("period_tol", 1e-8),
                       kwargs.pop("max_periods", 2000))
    trunc_tol = kwargs.pop("trunc_tol", TRUNC_TOL)
    k = cb + omega
    A = op(k)
    op.double_radius()
    A2 = op(k)
    t = op._grid_times()
    if float(np.abs(A(t) - A2(t)).max()) > trunc_tol:
        raise NoConvergence("half-line flux not settled after one radius doubling")
    return A2 + cb + omega


@dataclass
class RegimeReport:
    regime: Regime
    margin: float
    b_theta: float | None
    low_confidence: bool


def advection_regime(beta: PeriodicFn, mu: PeriodicFn, f: Reaction, *,
                     near_margin: float = NEAR_MARGIN, **kwargs) -> RegimeReport:
    """Classify beta as Small, Medium, or Large.

    Small means mean(beta) < cbar. Otherwise B(shape(beta)) is computed and
    Medium/Large decided by mean(beta) < B or >= B. Margins below near_margin
    set the low-confidence flag instead of refusing.
    """
    bbar = beta.mean()
    if bbar < 0.0:
        raise RegimeError("advection_regime requires mean(beta) >= 0")
    cb = cbar(f.a)
    if bbar < cb:
        margin = cb - bbar
        return RegimeReport(Regime.SMALL, margin, None, margin < near_margin)
    _, shape = mean_and_shape(beta)
    B = critical_average(shape, mu, f, **kwargs)
    regime = Regime.MEDIUM if bbar < B else Regime.LARGE
    margin = min(abs(bbar - cb), abs(bbar - B))
    return RegimeReport(regime, margin, B, margin < near_margin)


def critical_speeds(problem: Problem, *, with_b: bool | None = None,
                    b_tol: float = B_TOL, **kwargs) -> CriticalSpeeds:
    """Assemble the CriticalSpeeds bundle for a coefficient triple.

    B(shape) is computed when the regime requires it (mean(beta) >= cbar) or
    when with_b=True is forced. The leftward speed is present only in the
    Small regime, where the leftward semi-wave exists.
    """
    beta, mu, f = problem.beta, problem.mu, problem.reaction
    cb = cbar(f.a)
    bbar = beta.mean()
    if bbar < 0.0:
        raise RegimeError("critical_speeds requires mean(beta) >= 0")

    r, r_prof = _speed_fixed_point(beta, mu, f, **kwargs)
    l = None
    l_prof = None
    b_theta = None
    if bbar < cb:
        regime = Regime.SMALL
        margin = cb - bbar
        l, l_prof = _speed_fixed_point(-beta, mu, f, **kwargs)
        if with_b:
            _, shape = mean_and_shape(beta)
            b_theta = critical_average(shape, mu, f, b_tol=b_tol, **kwargs)
    else:
        _, shape = mean_and_shape(beta)
        b_theta = critical_average(shape, mu, f, b_tol=b_tol, **kwargs)
        regime = Regime.MEDIUM if bbar < b_theta else Regime.LARGE
        margin = min(abs(bbar - cb), abs(bbar - b_theta))
    return CriticalSpeeds(cbar=cb, r=r, R=r.antiderivative(), l=l,
                          L=l.antiderivative() if l is not None else None,
                          regime=regime, b_theta=b_theta, margin=margin,
                          low_confidence=margin < NEAR_MARGIN,
                          r_profile=r_prof, l_profile=l_prof)
