"""Long-time outcome detection, the sharp threshold in sigma, and front-law
diagnostics for (virtually) spreading runs.

The analytic definitions are t -> infinity statements; their numerical
surrogates here are fixed observation windows, a moving window riding at the
admissible speed c1, an extinction threshold on the sup norm, and a near-state
threshold for |u - P|. A run that triggers no rule stays Undetermined; the
threshold bisection treats such probes as evidence of the transition zone
rather than guessing a side.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np

from .critical import CriticalSpeeds, Regime, critical_speeds
from .eigen import critical_length
from .errors import BracketFailure, HorizonTooShortWarning, RegimeError
from .fbp import InitialData, Trajectory, simulate
from .periodic import Problem


class OutcomeKind(str, Enum):
    VANISHING = "Vanishing"
    SPREADING = "Spreading"
    VIRTUAL_SPREADING = "VirtualSpreading"
    TRANSITION = "Transition"
    UNDETERMINED = "Undetermined"


@dataclass
class Outcome:
    kind: OutcomeKind
    evidence: dict
    confidence: str = "High"     # "High" | "Low"


@dataclass(frozen=True)
class Thresholds:
    """Numerical surrogates for the asymptotic definitions (all config knobs)."""

    extinction: float = 1e-4      # sup norm below this means the solution died
    near_state: float = 1e-2      # |u - P| below this counts as "at the state"
    window: float = 10.0          # half-width of fixed and moving windows
    escape_radius: float = 15.0   # front beyond this counts as escaped
    g_stall: float = 0.05         # max |g - g_end| over the last quarter
    length_margin_cells: int = 3  # slack on the vanishing length bound
    min_periods: float = 5.0


def _snapshot_u(snap, xs: np.ndarray) -> np.ndarray:
    """Evaluate a trajectory snapshot at physical points, zero outside the habitat."""
    t, g, h, w = snap
    xi = np.linspace(0.0, 1.0, w.size)
    out = np.zeros_like(xs, dtype=float)
    inside = (xs >= g) & (xs <= h)
    if np.any(inside):
        out[inside] = np.interp((xs[inside] - g) / (h - g), xi, w)
    return out


def _window_sup(snap, lo: float, hi: float, ref=None, npts: int = 1024) -> float:
    """sup over [lo, hi] of |u - ref|; ref may be None (then |u|) or P(t)."""
    xs = np.linspace(lo, hi, npts)
    u = _snapshot_u(snap, xs)
    if ref is None:
        return float(np.abs(u).max())
    return float(np.abs(u - float(ref(snap[0]))).max())


def _spreading_now(snap, P, th: Thresholds) -> tuple[bool, dict]:
    t, g, h, _ = snap
    gap = _window_sup(snap, -th.window, th.window, ref=P)
    ok = (h > th.escape_radius and -g > th.escape_radius and gap < th.near_state)
    return ok, {"window_gap_to_state": gap, "h": h, "g": g}


def _virtual_now(snap, traj: Trajectory, P, c1: float, th: Thresholds) -> tuple[bool, dict]:
    t, g, h, _ = snap
    times = np.asarray(traj.times)
    gs = np.asarray(traj.g)
    last_quarter = times >= times[-1] - 0.25 * (times[-1] - times[0])
    g_var = float(np.abs(gs[last_quarter] - gs[-1]).max()) if last_quarter.any() else np.inf
    fixed_sup = _window_sup(snap, -th.window, th.window, ref=None)
    center = c1 * t
    moving_gap = _window_sup(snap, center - th.window, center + th.window, ref=P)
    ok = (g_var < th.g_stall and h > th.escape_radius
          and fixed_sup < th.near_state and moving_gap < th.near_state)
    return ok, {"g_variation": g_var, "fixed_window_sup": fixed_sup,
                "moving_window_gap": moving_gap, "c1": c1, "h": h, "g": g}


def _ell_star_bound(crit: CriticalSpeeds, traj: Trajectory) -> float | None:
    """Critical length of (-beta, a), cached on the CriticalSpeeds bundle."""
    beta = traj.problem.beta
    a = traj.problem.reaction.a
    if crit.ell_star is None:
        crit.ell_star = critical_length(-beta, a)
    return crit.ell_star


def classify(traj: Trajectory, crit: CriticalSpeeds,
             thresholds: Thresholds = Thresholds()) -> Outcome:
    """Apply the outcome decision rules to a finished trajectory.

    Vanishing needs the sup norm under the extinction threshold; in the small
    advection regime the final habitat must also respect the critical length
    bound. Spreading needs both fronts escaped and u near P(t) on the fixed
    window. Virtual spreading needs a stalled left front, an escaping right
    front, a small solution on the fixed window, and u near P(t) on the window
    moving at c1 = (mean(beta) - cbar + mean(r))/2. Anything else is
    Undetermined.
    """
    extinct = traj.sup[-1] < thresholds.extinction
    if traj.periods_covered < thresholds.min_periods and not extinct:
        # an extinction exit is decisive however early it happens; anything
        # else needs the configured minimum horizon
        raise ValueError(
            f"trajectory covers {traj.periods_covered:.1f} periods; "
            f"need at least {thresholds.min_periods:g}")
    problem = traj.problem
    P = problem.reaction.P
    snap = traj.snapshots[-1]
    sup_final = traj.sup[-1]
    width_final = traj.h[-1] - traj.g[-1]
    bbar = problem.beta.mean()
    evidence = {"sup_final": sup_final, "width_final": width_final,
                "t_final": traj.times[-1], "exit_reason": traj.exit_reason}

    if sup_final < thresholds.extinction:
        small = bbar < crit.cbar
        if small:
            ell = _ell_star_bound(crit, traj)
            nxi = snap[3].size - 1
            margin = thresholds.length_margin_cells * width_final / nxi
            evidence.update({"ell_star": ell, "length_margin": margin})
            if width_final <= ell + margin + 1e-9:
                return Outcome(OutcomeKind.VANISHING, evidence)
            evidence["length_bound_violated"] = True
            return Outcome(OutcomeKind.UNDETERMINED, evidence, confidence="Low")
        return Outcome(OutcomeKind.VANISHING, evidence)

    if bbar < crit.cbar:
        ok, info = _spreading_now(snap, P, thresholds)
        evidence.update(info)
        if ok:
            conf = "High" if info["window_gap_to_state"] < 0.5 * thresholds.near_state \
                else "Low"
            return Outcome(OutcomeKind.SPREADING, evidence, confidence=conf)
    else:
        c1 = 0.5 * ((bbar - crit.cbar) + crit.r.mean())
        ok, info = _virtual_now(snap, traj, P, c1, thresholds)
        evidence.update(info)
        if ok:
            return Outcome(OutcomeKind.VIRTUAL_SPREADING, evidence)
    return Outcome(OutcomeKind.UNDETERMINED, evidence, confidence="Low")


def _make_hooks(problem: Problem, crit: CriticalSpeeds, th: Thresholds):
    """Early-exit hooks matching the positive classification rules."""
    P = problem.reaction.P
    bbar = problem.beta.mean()

    if bbar < crit.cbar:
        def hook(state, traj):
            snap = (state.t, state.g, state.h, state.w)
            ok, _ = _spreading_now(snap, P, th)
            return "spreading" if ok else None
    else:
        c1 = 0.5 * ((bbar - crit.cbar) + crit.r.mean())

        def hook(state, traj):
            snap = (state.t, state.g, state.h, state.w)
            ok, _ = _virtual_now(snap, traj, P, c1, th)
            return "virtual-spreading" if ok else None
    return (hook,)


@dataclass(frozen=True)
class ProbeSettings:
    horizon_periods: float = 60.0
    max_extensions: int = 4
    nxi: int = 1024
    dtfrac: int = 1024
    snapshot_every: float = 1.0


def classify_run(problem: Problem, init: InitialData, crit: CriticalSpeeds,
                 thresholds: Thresholds = Thresholds(),
                 settings: ProbeSettings = ProbeSettings()) -> tuple[Outcome, Trajectory]:
    """Simulate, classify, and auto-extend the horizon while Undetermined.

    The horizon doubles (up to max_extensions times) by resuming the same run,
    so no work is repeated. Early-exit hooks stop the simulation as soon as a
    positive rule fires.
    """
    hooks = _make_hooks(problem, crit, thresholds)
    horizon = settings.horizon_periods
    with warnings.catch_warnings():
        # extensions are the plan here, so a quiet horizon is not noteworthy
        warnings.simplefilter("ignore", HorizonTooShortWarning)
        traj = simulate(problem, init, horizon, nxi=settings.nxi,
                        dtfrac=settings.dtfrac,
                        snapshot_every=settings.snapshot_every,
                        extinction_threshold=thresholds.extinction,
                        stop_hooks=hooks)
        out = classify(traj, crit, thresholds)
        extensions = 0
        while (out.kind is OutcomeKind.UNDETERMINED
               and extensions < settings.max_extensions):
            horizon *= 2.0
            extensions += 1
            traj = simulate(problem, init, horizon, stop_hooks=hooks,
                            extinction_threshold=thresholds.extinction,
                            resume=traj)
            out = classify(traj, crit, thresholds)
    if extensions:
        out.evidence["horizon_extensions"] = extensions
        if out.kind is OutcomeKind.UNDETERMINED:
            out.confidence = "Low"
    return out, traj


@dataclass
class ThresholdResult:
    """Certified bracket around the sharp initial-amplitude threshold."""

    sigma_low: float              # largest tested sigma that vanished
    sigma_high: float             # smallest tested sigma that (virtually) spread
    bracket_width: float
    per_run_outcomes: list = dc_field(default_factory=list)  # (sigma, kind) sorted
    confidence: str = "High"
    evidence_by_sigma: dict = dc_field(default_factory=dict)

    def outcomes_sorted(self):
        return sorted(self.per_run_outcomes, key=lambda p: p[0])


_SPREAD_KINDS = (OutcomeKind.SPREADING, OutcomeKind.VIRTUAL_SPREADING)


def critical_sigma(problem: Problem, init: InitialData,
                   bracket: tuple[float, float] = (0.5, 8.0), budget: int = 24, *,
                   sigma_rel_tol: float = 1e-2, crit: CriticalSpeeds | None = None,
                   thresholds: Thresholds = Thresholds(),
                   settings: ProbeSettings = ProbeSettings()) -> ThresholdResult:
    """Bisect the initial amplitude between vanishing and (virtual) spreading.

    Each probe is a full simulate+classify at u0 = sigma*phi. The bracket is
    first expanded geometrically until its ends classify differently; probes
    that stay Undetermined lower the confidence but never move an endpoint.
    Raises RegimeError in the large regime (every sigma vanishes there) and
    BracketFailure when expansion exhausts the budget with uniform outcomes.
    """
    if crit is None:
        crit = critical_speeds(problem)
    if crit.regime is Regime.LARGE:
        raise RegimeError(
            "no vanishing/spreading threshold exists for large advection; "
            "all solutions vanish")

    outcomes: list[tuple[float, OutcomeKind]] = []
    evidence: dict[float, dict] = {}
    spent = 0

    def probe(sigma: float) -> OutcomeKind:
        nonlocal spent
        spent += 1
        out, _ = classify_run(problem,
                              InitialData(init.h0, init.phi, sigma),
                              crit, thresholds, settings)
        outcomes.append((sigma, out.kind))
        evidence[sigma] = out.evidence
        return out.kind

    lo, hi = bracket
    if not (0.0 < lo < hi):
        raise ValueError("bracket must satisfy 0 < lo < hi")

    # both endpoints must be certified: lo vanishes, hi (virtually) spreads;
    # Undetermined endpoints are pushed outward like the wrong-side outcomes
    kind_lo = probe(lo)
    while kind_lo is not OutcomeKind.VANISHING:
        lo *= 0.5
        if spent >= budget or lo < 1e-8:
            raise BracketFailure(
                "no vanishing endpoint found; consistent with sigma* = 0")
        kind_lo = probe(lo)
    kind_hi = probe(hi)
    while kind_hi not in _SPREAD_KINDS:
        hi *= 2.0
        if spent >= budget or hi > 1e8:
            raise BracketFailure(
                "no spreading endpoint found; consistent with sigma* = infinity")
        kind_hi = probe(hi)

    confidence = "High"

    undetermined: list[float] = []
    while spent < budget and hi - lo > sigma_rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if any(abs(mid - s) < 1e-12 * hi for s in undetermined):
            mid = lo + 0.382 * (hi - lo)
        kind = probe(mid)
        if kind is OutcomeKind.VANISHING:
            lo = mid
        elif kind in _SPREAD_KINDS:
            hi = mid
        else:
            undetermined.append(mid)
            confidence = "Low"

    per_run = []
    for sigma, kind in outcomes:
        if kind is OutcomeKind.UNDETERMINED and lo < sigma < hi:
            kind = OutcomeKind.TRANSITION
        per_run.append((sigma, kind))
    return ThresholdResult(sigma_low=lo, sigma_high=hi, bracket_width=hi - lo,
                           per_run_outcomes=sorted(per_run, key=lambda p: p[0]),
                           confidence=confidence, evidence_by_sigma=evidence)


@dataclass
class AsymptoticsReport:
    """Series behind the front-law checks for a (virtually) spreading run."""

    times: np.ndarray
    h_minus_R: np.ndarray
    H1: float
    speed_residual: np.ndarray        # h'(t) - r(t)
    profile_times: np.ndarray
    profile_sup: np.ndarray           # sup over [c_l t, h(t)] of |u - U(.)|
    c_l: float
    g_plus_L: np.ndarray | None = None
    G1: float | None = None
    left_speed_residual: np.ndarray | None = None
    left_profile_sup: np.ndarray | None = None


def front_asymptotics(traj: Trajectory, crit: CriticalSpeeds, *,
                      outcome_kind: OutcomeKind | None = None,
                      epsilon0_factor: float = 0.05,
                      npts: int = 2048) -> AsymptoticsReport:
    """Measure how closely the fronts follow the semi-wave laws.

    h(t) - R(t) should flatten to a constant H1 and h'(t) - r(t) should decay;
    the solution profile near the right front should match the rightward
    semi-wave placed at R(t) + H1 (extended by zero past its tip). In the
    small regime the same holds on the left with l, L, G1.
    """
    problem = traj.problem
    bbar = problem.beta.mean()
    if outcome_kind is None:
        outcome_kind = (OutcomeKind.SPREADING if bbar < crit.cbar
                        else OutcomeKind.VIRTUAL_SPREADING)
    times = np.asarray(traj.times)
    h = np.asarray(traj.h)
    hdot = np.asarray(traj.hdot)
    R = crit.R(times)
    h_minus_R = h - R
    quarter = times >= times[-1] - 0.25 * (times[-1] - times[0])
    H1 = float(h_minus_R[quarter].mean())
    speed_resid = hdot - crit.r(times)

    if outcome_kind is OutcomeKind.VIRTUAL_SPREADING:
        rbar = crit.r.mean()
        c_l = (bbar - crit.cbar) + epsilon0_factor * (rbar - (bbar - crit.cbar))
    else:
        c_l = 0.0

    U = crit.r_profile
    snap_times = []
    sups = []
    t_cut = times[-1] - 0.25 * (times[-1] - times[0])
    for snap in traj.snapshots:
        t, g, hh, w = snap
        if t < t_cut:
            continue
        lo = max(c_l * t, g)
        if lo >= hh:
            continue
        xs = np.linspace(lo, hh, npts)
        u = _snapshot_u(snap, xs)
        z = crit.R(t) + H1 - xs
        Uv = U.value(t, z)
        snap_times.append(t)
        sups.append(float(np.abs(u - Uv).max()))

    report = AsymptoticsReport(times=times, h_minus_R=h_minus_R, H1=H1,
                               speed_residual=speed_resid,
                               profile_times=np.asarray(snap_times),
                               profile_sup=np.asarray(sups), c_l=c_l)

    if bbar < crit.cbar and crit.l is not None:
        g = np.asarray(traj.g)
        gdot = np.asarray(traj.gdot)
        L = crit.L(times)
        g_plus_L = g + L
        report.g_plus_L = g_plus_L
        report.G1 = float(g_plus_L[quarter].mean())
        report.left_speed_residual = gdot + crit.l(times)
        Uhat = crit.l_profile
        lsups = []
        for snap in traj.snapshots:
            t, gg, hh, w = snap
            if t < t_cut or gg >= 0.0:
                continue
            xs = np.linspace(gg, 0.0, npts)
            u = _snapshot_u(snap, xs)
            z = xs + crit.L(t) - report.G1
            Uv = Uhat.value(t, z)
            lsups.append(float(np.abs(u - Uv).max()))
        report.left_profile_sup = np.asarray(lsups)
    return report
