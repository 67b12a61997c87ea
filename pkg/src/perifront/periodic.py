"""Algebra of T-periodic coefficient functions and the reaction nonlinearity.

Covers the periodic mean/shape decomposition, the positive periodic state of
the reaction ODE, the stability index alpha(t), and hypothesis validation for
the coefficient triple (beta, mu, f).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .errors import NoPositivePeriodicState, ValidationError

DEFAULT_NODES = 256
MIN_NODES = 16


class PeriodicFn:
    """A T-periodic scalar function sampled on a uniform grid.

    Evaluation between nodes uses a periodic cubic spline; the argument is
    reduced mod T first, so eval(t + n*T) == eval(t) for any integer n.
    """

    __slots__ = ("period", "samples", "_spline")

    def __init__(self, period: float, samples):
        period = float(period)
        if not period > 0.0:
            raise ValidationError(f"period must be positive, got {period}")
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 1 or samples.size < MIN_NODES:
            raise ValidationError(
                f"need a 1-d sample array with at least {MIN_NODES} nodes, got shape {samples.shape}"
            )
        self.period = period
        self.samples = samples
        n = samples.size
        t_closed = np.linspace(0.0, period, n + 1)
        y_closed = np.concatenate([samples, samples[:1]])
        self._spline = CubicSpline(t_closed, y_closed, bc_type="periodic")

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], period: float,
                      n: int = DEFAULT_NODES) -> "PeriodicFn":
        t = np.arange(n) * (period / n)
        return cls(period, np.asarray(fn(t), dtype=float) + np.zeros(n))

    @classmethod
    def constant(cls, value: float, period: float, n: int = DEFAULT_NODES) -> "PeriodicFn":
        return cls(period, np.full(n, float(value)))

    @classmethod
    def sin_offset(cls, period: float, mean: float = 0.0,
                   terms: Sequence[tuple] = (), n: int = DEFAULT_NODES) -> "PeriodicFn":
        """mean + sum of amp*sin(2*pi*harmonic*t/T + phase) terms."""

        def fn(t):
            out = np.full_like(t, mean, dtype=float)
            for amp, harmonic, phase in terms:
                out += amp * np.sin(2.0 * np.pi * harmonic * t / period + phase)
            return out

        return cls.from_callable(fn, period, n)

    # -- evaluation ------------------------------------------------------------

    def __call__(self, t):
        return self._spline(np.mod(t, self.period))

    @property
    def grid(self) -> np.ndarray:
        n = self.samples.size
        return np.arange(n) * (self.period / n)

    def mean(self) -> float:
        """Composite-quadrature average over one period (Simpson on the grid)."""
        n = self.samples.size
        t_closed = np.linspace(0.0, self.period, n + 1)
        y_closed = np.concatenate([self.samples, self.samples[:1]])
        return float(simpson(y_closed, x=t_closed) / self.period)

    def max(self) -> float:
        return float(self._dense().max())

    def min(self) -> float:
        return float(self._dense().min())

    def _dense(self, refine: int = 8) -> np.ndarray:
        n = self.samples.size * refine
        return self._spline(np.arange(n) * (self.period / n))

    def antiderivative(self) -> Callable[[np.ndarray], np.ndarray]:
        """Return t -> integral_0^t of this function, valid for all real t.

        Split as mean*t plus the periodic antiderivative of the zero-mean part.
        """
        m = self.mean()
        n = self.samples.size
        t_closed = np.linspace(0.0, self.period, n + 1)
        y_closed = np.concatenate([self.samples, self.samples[:1]]) - m
        prim = CubicSpline(t_closed, y_closed, bc_type="periodic").antiderivative()
        per = self.period

        def cumulative(t):
            t = np.asarray(t, dtype=float)
            tm = np.mod(t, per)
            laps = np.round((t - tm) / per)
            return m * t + prim(tm) + laps * prim(per)

        return cumulative

    # -- arithmetic ------------------------------------------------------------

    def _binary(self, other, op) -> "PeriodicFn":
        if isinstance(other, PeriodicFn):
            if not np.isclose(self.period, other.period, rtol=1e-12, atol=0.0):
                raise ValidationError("operands have different periods")
            n = max(self.samples.size, other.samples.size)
            t = np.arange(n) * (self.period / n)
            return PeriodicFn(self.period, op(self(t), other(t)))
        other = float(other)
        return PeriodicFn(self.period, op(self.samples, other))

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y)

    def __rsub__(self, other):
        return self._binary(other, lambda x, y: y - x)

    def __mul__(self, other):
        return self._binary(other, lambda x, y: x * y)

    __rmul__ = __mul__

    def __neg__(self):
        return PeriodicFn(self.period, -self.samples)

    def __repr__(self):
        return (f"PeriodicFn(T={self.period:g}, n={self.samples.size}, "
                f"mean={self.mean():.6g})")


def as_periodic(value, period: float, n: int = DEFAULT_NODES) -> PeriodicFn:
    """Coerce a float, callable, or PeriodicFn to a PeriodicFn of the given period."""
    if isinstance(value, PeriodicFn):
        if not np.isclose(value.period, period, rtol=1e-12, atol=0.0):
            raise ValidationError("PeriodicFn period does not match the problem period")
        return value
    if callable(value):
        return PeriodicFn.from_callable(value, period, n)
    return PeriodicFn.constant(float(value), period, n)


def mean_and_shape(p: PeriodicFn) -> tuple[float, PeriodicFn]:
    """Split p into its period average and the zero-mean remainder."""
    m = p.mean()
    return m, PeriodicFn(p.period, p.samples - m)


class Reaction:
    """Fisher-KPP nonlinearity f(t, u) with its u-derivative and linearization a(t).

    Both f and f_u must accept (t: float, u: array) and broadcast over u.
    The positive periodic state P(t) of u' = f(t, u) is computed on demand
    and cached; P_sup and P_inf are its extrema.
    """

    def __init__(self, f, f_u, period: float, preset: str = "custom",
                 n: int = DEFAULT_NODES):
        self.f = f
        self.f_u = f_u
        self.period = float(period)
        self.preset = preset
        self.a = PeriodicFn.from_callable(lambda t: f_u(t, np.zeros_like(t)), period, n)
        self.a_fn = None
        self.b_fn = None
        self._P: PeriodicFn | None = None

    @classmethod
    def logistic(cls, a, b, period: float = 1.0, n: int = DEFAULT_NODES) -> "Reaction":
        """f(t, u) = u * (a(t) - b(t) * u) for positive periodic a, b."""
        a_fn = as_periodic(a, period, n)
        b_fn = as_periodic(b, period, n)

        def f(t, u):
            return u * (a_fn(t) - b_fn(t) * u)

        def f_u(t, u):
            return a_fn(t) - 2.0 * b_fn(t) * u

        obj = cls(f, f_u, period, preset="logistic", n=n)
        obj.a_fn = a_fn
        obj.b_fn = b_fn
        return obj

    @property
    def P(self) -> PeriodicFn:
        if self._P is None:
            self._P = periodic_state(self)
        return self._P

    @property
    def P_sup(self) -> float:
        return self.P.max()

    @property
    def P_inf(self) -> float:
        return self.P.min()

    def __repr__(self):
        return f"Reaction(preset={self.preset!r}, T={self.period:g})"


@dataclass(frozen=True)
class Problem:
    """The coefficient triple of the free boundary problem."""

    beta: PeriodicFn
    mu: PeriodicFn
    reaction: Reaction

    @property
    def period(self) -> float:
        return self.reaction.period

    def __post_init__(self):
        if not (np.isclose(self.beta.period, self.reaction.period)
                and np.isclose(self.mu.period, self.reaction.period)):
            raise ValidationError("beta, mu, and the reaction must share one period")


def _orbit_factory(f: "Reaction", period: float, nsub: int):
    """Build an RK4 one-period integrator u0 -> orbit samples.

    Logistic reactions get a fast path with the coefficient splines evaluated
    once on the step grid; everything else calls f pointwise. Divergent orbits
    come back as inf rather than raising, so bracket tests stay total.
    """
    h = period / nsub
    t0 = np.arange(nsub) * h
    if f.preset == "logistic" and f.a_fn is not None:
        a0, am, a1 = f.a_fn(t0), f.a_fn(t0 + 0.5 * h), f.a_fn(t0 + h)
        b0, bm, b1 = f.b_fn(t0), f.b_fn(t0 + 0.5 * h), f.b_fn(t0 + h)

        def orbit(u0: float, record_every: int = 0):
            u = float(u0)
            rec = [u] if record_every else None
            for i in range(nsub):
                k1 = u * (a0[i] - b0[i] * u)
                v = u + 0.5 * h * k1
                k2 = v * (am[i] - bm[i] * v)
                v = u + 0.5 * h * k2
                k3 = v * (am[i] - bm[i] * v)
                v = u + h * k3
                k4 = v * (a1[i] - b1[i] * v)
                u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                if record_every and (i + 1) % record_every == 0:
                    rec.append(u)
            return (u, np.array(rec[:-1])) if record_every else u
    else:
        def orbit(u0: float, record_every: int = 0):
            u = np.float64(u0)
            rec = [float(u)] if record_every else None
            with np.errstate(over="ignore", invalid="ignore"):
                for i in range(nsub):
                    t = t0[i]
                    k1 = f.f(t, u)
                    k2 = f.f(t + 0.5 * h, u + 0.5 * h * k1)
                    k3 = f.f(t + 0.5 * h, u + 0.5 * h * k2)
                    k4 = f.f(t + h, u + h * k3)
                    u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                    if not np.isfinite(u):
                        u = np.float64(np.inf)
                        break
                    if record_every and (i + 1) % record_every == 0:
                        rec.append(float(u))
            return (float(u), np.array(rec[:-1])) if record_every else float(u)
    return orbit


def periodic_state(f: Reaction, T: float | None = None, *, n: int = DEFAULT_NODES,
                   nsub: int = 2048, bracket_eps: float = 1e-10,
                   bracket_top: float | None = None) -> PeriodicFn:
    """The unique positive periodic solution of u' = f(t, u).

    Found by bisection on the time-T map u0 -> Phi_T(u0) - u0. Under the
    standing hypotheses Phi_T(u0) > u0 near 0 and < u0 above the carrying
    capacity, so the bracket (bracket_eps, bracket_top] always straddles.
    """
    period = f.period if T is None else float(T)
    if T is not None and not np.isclose(period, f.period):
        raise ValidationError("T does not match the reaction period")
    if nsub % n:
        nsub = n * (nsub // n + 1)
    orbit = _orbit_factory(f, period, nsub)

    lo = bracket_eps
    hi = bracket_top if bracket_top is not None else 1.0 + 0.05
    g_lo = orbit(lo) - lo
    g_hi = orbit(hi) - hi
    if not (g_lo > 0.0 > g_hi) or not np.isfinite(g_hi):
        raise NoPositivePeriodicState(
            f"time-T map has no positive fixed point in ({lo:g}, {hi:g}]; "
            "check hypothesis (H0)")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if orbit(mid) - mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    u0 = 0.5 * (lo + hi)
    _, values = orbit(u0, record_every=nsub // n)
    return PeriodicFn(period, values)


@dataclass(frozen=True)
class StabilityReport:
    """alpha(t) = P f_u(t, P) - f(t, P) and whether its max is negative (H1)."""

    alpha: PeriodicFn
    max_alpha: float
    satisfies_h1: bool


def stability_index(f: Reaction, P: PeriodicFn | None = None) -> StabilityReport:
    """Evaluate the stability index of the periodic state on the sample grid."""
    if P is None:
        P = f.P
    t = P.grid
    Pv = P.samples
    alpha = Pv * f.f_u(t, Pv) - f.f(t, Pv)
    alpha_fn = PeriodicFn(P.period, alpha)
    mx = float(alpha.max())
    return StabilityReport(alpha=alpha_fn, max_alpha=mx, satisfies_h1=mx < 0.0)


@dataclass
class HypothesesReport:
    """Pass/fail record for each clause of (H0) and for (H1)."""

    clauses: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def h0_ok(self) -> bool:
        return all(v for k, v in self.clauses.items() if k != "h1_stability")

    @property
    def all_ok(self) -> bool:
        return all(self.clauses.values())

    def __str__(self):
        lines = []
        for name, ok in self.clauses.items():
            detail = self.details.get(name, "")
            lines.append(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
        return "\n".join(lines)


def validate_hypotheses(beta: PeriodicFn, mu: PeriodicFn, f: Reaction,
                        *, n_t: int = 64, n_u: int = 64,
                        u_max: float = 2.0) -> HypothesesReport:
    """Check (H0) clause by clause on a finite sample grid, and (H1) via alpha(t).

    The monotonicity of f(t,u)/u and the sign of f above u=1 are pointwise
    conditions; they are only sampled here (n_t x n_u grid by default).
    """
    rep = HypothesesReport()
    period = f.period
    t = np.arange(n_t) * (period / n_t)

    bmean = beta.mean()
    rep.clauses["beta_mean_nonneg"] = bmean >= 0.0
    rep.details["beta_mean_nonneg"] = f"mean(beta)={bmean:.6g}"

    mu_min = mu.min()
    rep.clauses["mu_positive"] = mu_min > 0.0
    rep.details["mu_positive"] = f"min(mu)={mu_min:.6g}"

    a_min = f.a.min()
    rep.clauses["a_positive"] = a_min > 0.0
    rep.details["a_positive"] = f"min(a)={a_min:.6g}"

    f0 = np.array([f.f(ti, np.array(0.0)) for ti in t], dtype=float)
    rep.clauses["f_zero_at_zero"] = bool(np.all(np.abs(f0) < 1e-12))
    rep.details["f_zero_at_zero"] = f"max|f(t,0)|={np.abs(f0).max():.2e}"

    u = np.linspace(u_max / n_u, u_max, n_u)
    ratios = np.array([f.f(ti, u) / u for ti in t])
    rep.clauses["f_over_u_decreasing"] = bool(np.all(np.diff(ratios, axis=1) < 0.0))
    rep.details["f_over_u_decreasing"] = f"sampled on ({n_t}x{n_u}) grid, u in (0,{u_max:g}]"

    above = u[u > 1.0]
    fvals = np.array([f.f(ti, above) for ti in t])
    rep.clauses["f_negative_above_one"] = bool(np.all(fvals < 0.0))
    rep.details["f_negative_above_one"] = f"max f(t,u>1)={fvals.max():.3g}"

    try:
        stab = stability_index(f)
        rep.clauses["h1_stability"] = stab.satisfies_h1
        rep.details["h1_stability"] = f"max(alpha)={stab.max_alpha:.6g}"
    except NoPositivePeriodicState as exc:
        rep.clauses["h1_stability"] = False
        rep.details["h1_stability"] = f"no periodic state: {exc}"
    return rep
