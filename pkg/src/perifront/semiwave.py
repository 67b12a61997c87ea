"""Relaxation solvers for the periodic strip and half-line problems.

All three boundary-value flavors share one mechanism: time-step the parabolic
equation from suitable initial data until the orbit is periodic, then record
one period. The pinned solver starts from the supersolution P_sup * chi and
relaxes downward, so its limit is the maximal periodic solution; the half line
is approximated by pinning the far boundary at P(t) and doubling the radius
until the boundary flux stops moving.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import TruncationFailure
from .periodic import PeriodicFn, Reaction
from .stepper import StripStepper, relax_to_periodic

DEFAULT_NODES_PER_UNIT = 256
DEFAULT_STEPS = 512
PERIOD_TOL = 1e-8
MAX_PERIODS = 2000
ZERO_THRESHOLD = 1e-6
TRUNC_TOL = 2e-5


@dataclass
class SemiWaveProfile:
    """A converged periodic profile on [0, T] x [0, Z] with its boundary flux.

    field[m, j] holds the value at time m*T/nt and z = j*Z/nz. boundary_flux
    is the one-sided second-order gradient at z=0 (before multiplication by
    mu). Beyond the grid, value() extends by zero on the left and by the
    recorded far boundary data on the right.
    """

    kind: str                      # "DD0" | "DD1" | "HalfLine"
    field: np.ndarray
    times: np.ndarray
    z: np.ndarray
    drift: PeriodicFn
    domain_length: float
    boundary_flux: PeriodicFn
    right_boundary: PeriodicFn
    is_zero: bool
    periods: int
    period_residual: float
    _interp: RegularGridInterpolator | None = dc_field(default=None, repr=False)

    @property
    def period(self) -> float:
        return float(self.times[-1])

    def value(self, t, z):
        """Evaluate the profile at arbitrary (t, z), t reduced mod T.

        z < 0 maps to 0 (compact-support extension); z beyond the grid maps
        to the far boundary value at that time.
        """
        if self._interp is None:
            self._interp = RegularGridInterpolator(
                (self.times, self.z), self.field, method="linear",
                bounds_error=False, fill_value=None)
        t = np.asarray(t, dtype=float)
        z = np.asarray(z, dtype=float)
        tb, zb = np.broadcast_arrays(np.mod(t, self.period), z)
        out = np.zeros(tb.shape)
        inside = (zb >= 0.0) & (zb <= self.domain_length)
        if np.any(inside):
            pts = np.stack([tb[inside], zb[inside]], axis=-1)
            out[inside] = self._interp(pts)
        beyond = zb > self.domain_length
        if np.any(beyond):
            out[beyond] = self.right_boundary(tb[beyond])
        return out if out.shape else float(out)


def _flux_from_field(field: np.ndarray, dz: float, period: float) -> PeriodicFn:
    # one-sided three-point gradient at z=0; field[:,0] == 0
    vals = (4.0 * field[:-1, 1] - field[:-1, 2]) / (2.0 * dz)
    return PeriodicFn(period, vals)


def _profile_from_relax(kind: str, k: PeriodicFn, stepper: StripStepper, result,
                        right_boundary: PeriodicFn) -> SemiWaveProfile:
    period = stepper.period
    if result.status == "zero":
        field = np.zeros((stepper.nt + 1, stepper.nz + 1))
        flux = PeriodicFn.constant(0.0, period)
        zero = True
    else:
        field = stepper.record_period(result.u)
        flux = _flux_from_field(field, stepper.dz, period)
        zero = False
    times = np.arange(stepper.nt + 1) * stepper.dt
    return SemiWaveProfile(kind=kind, field=field, times=times, z=stepper.z,
                           drift=k, domain_length=stepper.length,
                           boundary_flux=flux, right_boundary=right_boundary,
                           is_zero=zero, periods=result.periods,
                           period_residual=result.residual)


def relax_dirichlet_zero(k: PeriodicFn, f: Reaction, length: float, *,
                         nodes_per_unit: int = DEFAULT_NODES_PER_UNIT,
                         steps_per_period: int = DEFAULT_STEPS,
                         period_tol: float = PERIOD_TOL,
                         max_periods: int = MAX_PERIODS,
                         zero_threshold: float = ZERO_THRESHOLD) -> SemiWaveProfile:
    """Periodic solution with zero Dirichlet data at both ends of [0, length].

    The limit is nontrivial exactly when |mean(k)| < cbar and the strip is
    wider than the critical length; otherwise the iterates decay and the zero
    profile is returned with is_zero set.
    """
    if length <= 0.0:
        raise ValueError("length must be positive")
    nz = max(int(round(nodes_per_unit * length)), 16)
    stepper = StripStepper(length, nz, steps_per_period, f.period, k, f, right_bc=0.0)
    psup = f.P_sup
    u0 = psup * np.minimum(1.0, np.minimum(stepper.z, length - stepper.z))
    res = relax_to_periodic(stepper, u0, period_tol=period_tol,
                            max_periods=max_periods, zero_threshold=zero_threshold)
    return _profile_from_relax("DD0", k, stepper, res,
                               PeriodicFn.constant(0.0, f.period))


def relax_dirichlet_pinned(k: PeriodicFn, f: Reaction, length: float, *,
                           right_bc=None,
                           nodes_per_unit: int = DEFAULT_NODES_PER_UNIT,
                           steps_per_period: int = DEFAULT_STEPS,
                           period_tol: float = PERIOD_TOL,
                           max_periods: int = MAX_PERIODS,
                           warm_start: np.ndarray | None = None) -> SemiWaveProfile:
    """Maximal periodic solution with the right end pinned above zero.

    The default pin value is the constant P_sup; passing right_bc=f.P pins at
    the periodic state itself, which is the half-line truncation. Starting
    data is the pinned supersolution mollified over the first cell, so the
    relaxation is monotone downward.
    """
    if length <= 0.0:
        raise ValueError("length must be positive")
    period = f.period
    if right_bc is None:
        right_bc = PeriodicFn.constant(f.P_sup, period)
    elif not isinstance(right_bc, PeriodicFn):
        right_bc = PeriodicFn.constant(float(right_bc), period)
    nz = max(int(round(nodes_per_unit * length)), 16)
    stepper = StripStepper(length, nz, steps_per_period, period, k, f,
                           right_bc=right_bc)
    if warm_start is not None:
        u0 = np.asarray(warm_start, dtype=float)
        if u0.shape != (nz + 1,):
            raise ValueError("warm_start shape does not match the grid")
    else:
        u0 = np.full(nz + 1, f.P_sup)
        u0[0] = 0.0
    res = relax_to_periodic(stepper, u0, period_tol=period_tol,
                            max_periods=max_periods, zero_threshold=None)
    return _profile_from_relax("DD1", k, stepper, res, right_bc)


def _zero_profile(kind: str, k: PeriodicFn, f: Reaction, length: float,
                  steps_per_period: int) -> SemiWaveProfile:
    period = f.period
    nt = steps_per_period
    times = np.arange(nt + 1) * (period / nt)
    z = np.linspace(0.0, length, 17)
    return SemiWaveProfile(kind=kind, field=np.zeros((nt + 1, 17)), times=times,
                           z=z, drift=k, domain_length=length,
                           boundary_flux=PeriodicFn.constant(0.0, period),
                           right_boundary=PeriodicFn.constant(0.0, period),
                           is_zero=True, periods=0, period_residual=0.0)


def half_line_profile(k: PeriodicFn, f: Reaction, radius: float = 24.0, *,
                      trunc_tol: float = TRUNC_TOL, max_doublings: int = 3,
                      nodes_per_unit: int = DEFAULT_NODES_PER_UNIT,
                      steps_per_period: int = DEFAULT_STEPS,
                      period_tol: float = PERIOD_TOL,
                      max_periods: int = MAX_PERIODS) -> SemiWaveProfile:
    """Bounded periodic solution on the half line, truncated at a far radius.

    For mean(k) <= -cbar the only solution is zero and it is returned without
    any stepping. Otherwise the far boundary is pinned at P(t) and the radius
    doubles until the boundary flux moves by less than trunc_tol; the profile
    from the last (largest) radius is returned.
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    abar = f.a.mean()
    cb = 2.0 * np.sqrt(abar) if abar > 0 else 0.0
    if k.mean() <= -cb:
        return _zero_profile("HalfLine", k, f, radius, steps_per_period)

    P = f.P
    prof = relax_dirichlet_pinned(k, f, radius, right_bc=P,
                                  nodes_per_unit=nodes_per_unit,
                                  steps_per_period=steps_per_period,
                                  period_tol=period_tol, max_periods=max_periods)
    shift = np.inf
    for _ in range(max_doublings):
        bigger = _extend_field(prof, P)
        prof2 = relax_dirichlet_pinned(k, f, 2.0 * prof.domain_length, right_bc=P,
                                       nodes_per_unit=nodes_per_unit,
                                       steps_per_period=steps_per_period,
                                       period_tol=period_tol,
                                       max_periods=max_periods, warm_start=bigger)
        shift = _flux_gap(prof, prof2)
        if shift < trunc_tol:
            prof2.kind = "HalfLine"
            return prof2
        prof = prof2
    raise TruncationFailure(
        f"boundary flux still moving by {shift:.2e} after doubling to "
        f"radius {prof.domain_length:g}")


def _extend_field(prof: SemiWaveProfile, P: PeriodicFn) -> np.ndarray:
    """Pad the t=0 slice onto a doubled domain, filling the far half with P(0)."""
    old = prof.field[0]
    n_old = old.size - 1
    out = np.empty(2 * n_old + 1)
    out[:n_old + 1] = old
    out[n_old + 1:] = P(0.0)
    return out


def _flux_gap(p1: SemiWaveProfile, p2: SemiWaveProfile) -> float:
    t = p1.boundary_flux.grid
    return float(np.abs(p1.boundary_flux(t) - p2.boundary_flux(t)).max())


def boundary_flux(profile: SemiWaveProfile, mu: PeriodicFn) -> PeriodicFn:
    """The Stefan flux operator mu(t) * dz profile(t, 0)."""
    return profile.boundary_flux * mu


@dataclass
class CompactWave:
    """Moving-frame view u(t, x) = U0(t, S(t) - x) of a compactly supported profile.

    S is the cumulative integral of the frame speed. When mu is supplied at
    construction, subsolution_ok records whether speed(t) stays strictly below
    the boundary flux operator mu * dz U0(t, 0) at every sampled time, which
    is the inequality making the view a lower solution for the free boundary
    problem.
    """

    profile: SemiWaveProfile
    speed: PeriodicFn
    S: object
    subsolution_ok: bool | None
    margin: float | None

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        return self.profile.value(t, self.S(t) - x)


def compact_wave_view(profile: SemiWaveProfile, speed: PeriodicFn,
                      mu: PeriodicFn | None = None) -> CompactWave:
    """Wrap a nontrivial bounded-strip profile as a traveling sub-wave."""
    if profile.is_zero:
        raise ValueError("cannot build a moving-frame view of the zero profile")
    ok = None
    margin = None
    if mu is not None:
        flux = boundary_flux(profile, mu)
        t = flux.grid
        diff = flux(t) - speed(t)
        margin = float(diff.min())
        ok = bool(margin > 0.0)
    return CompactWave(profile=profile, speed=speed, S=speed.antiderivative(),
                       subsolution_ok=ok, margin=margin)
