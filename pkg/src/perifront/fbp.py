"""Front-fixing finite-difference solver for the free boundary problem.

The moving habitat (g(t), h(t)) is mapped to the unit interval by
xi = (x - g)/(h - g); the transformed equation gains the metric factors
1/(h-g)^2 on diffusion and (xdot(xi) - beta)/(h-g) on advection, where
xdot(xi) = g' + xi (h' - g') is the grid velocity. Stefan conditions close
the system: both front velocities are the one-sided solution gradients scaled
by mu. Velocities enter the step through a lagged predictor plus correction
sweeps until they settle, which keeps the scheme second order in time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainCollapse, HorizonTooShortWarning, StepRejected
from .periodic import Problem

DEFAULT_NXI = 1024
DEFAULT_DTFRAC = 1024
VEL_TOL = 1e-8
MAX_SWEEPS = 8


@dataclass
class InitialData:
    """u0 = sigma * phi on [-h0, h0], with phi vanishing at both ends."""

    h0: float
    phi: Callable[[np.ndarray], np.ndarray]
    sigma: float = 1.0

    def __post_init__(self):
        if self.h0 <= 0.0:
            raise ValueError("h0 must be positive")
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        x = np.linspace(-self.h0, self.h0, 257)
        vals = np.asarray(self.phi(x), dtype=float)
        peak = np.abs(vals).max()
        if peak > 0.0 and (abs(vals[0]) > 1e-9 * peak or abs(vals[-1]) > 1e-9 * peak):
            raise ValueError("phi must vanish at -h0 and h0")
        if np.any(vals < -1e-12 * max(peak, 1.0)):
            raise ValueError("phi must be nonnegative")
        if peak == 0.0:
            raise ValueError("phi must not be identically zero")

    def values(self, x):
        return self.sigma * np.asarray(self.phi(x), dtype=float)


@dataclass
class FbpState:
    """The solution at one instant on the fixed grid xi in [0, 1]."""

    t: float
    g: float
    h: float
    w: np.ndarray
    gdot: float
    hdot: float

    @property
    def width(self) -> float:
        return self.h - self.g

    @property
    def nxi(self) -> int:
        return self.w.size - 1

    def x(self) -> np.ndarray:
        xi = np.linspace(0.0, 1.0, self.w.size)
        return self.g + xi * (self.h - self.g)

    def sup(self) -> float:
        return float(self.w.max())


class Trajectory:
    """Time series of fronts, front velocities, sup norms, and field snapshots."""

    def __init__(self, problem: Problem, config: dict | None = None):
        self.problem = problem
        self.config = dict(config or {})
        self.times: list[float] = []
        self.g: list[float] = []
        self.h: list[float] = []
        self.gdot: list[float] = []
        self.hdot: list[float] = []
        self.sup: list[float] = []
        self.snapshots: list[tuple[float, float, float, np.ndarray]] = []
        self.final_state: FbpState | None = None
        self.exit_reason: str | None = None

    def append(self, state: FbpState):
        if self.times and state.t <= self.times[-1]:
            raise ValueError("time stamps must increase")
        self.times.append(state.t)
        self.g.append(state.g)
        self.h.append(state.h)
        self.gdot.append(state.gdot)
        self.hdot.append(state.hdot)
        self.sup.append(state.sup())

    def snapshot(self, state: FbpState):
        self.snapshots.append((state.t, state.g, state.h, state.w.copy()))

    def series(self) -> dict:
        return {name: np.asarray(getattr(self, name))
                for name in ("times", "g", "h", "gdot", "hdot", "sup")}

    @property
    def periods_covered(self) -> float:
        if not self.times:
            return 0.0
        return self.times[-1] / self.problem.period


def _boundary_gradients(w: np.ndarray, dxi: float) -> tuple[float, float]:
    # one-sided three-point formulas; w[0] == w[-1] == 0
    left = (4.0 * w[1] - w[2]) / (2.0 * dxi)
    right = (-4.0 * w[-2] + w[-3]) / (2.0 * dxi)
    return left, right


def initial_state(init: InitialData, nxi: int = DEFAULT_NXI,
                  mu0: float = 1.0) -> FbpState:
    """Sample the initial data on the xi-grid and seed the front velocities."""
    xi = np.linspace(0.0, 1.0, nxi + 1)
    x = -init.h0 + xi * (2.0 * init.h0)
    w = init.values(x)
    w[0] = 0.0
    w[-1] = 0.0
    dxi = 1.0 / nxi
    width = 2.0 * init.h0
    gl, gr = _boundary_gradients(w, dxi)
    return FbpState(t=0.0, g=-init.h0, h=init.h0, w=w,
                    gdot=-mu0 * gl / width, hdot=-mu0 * gr / width)


def advance(state: FbpState, problem: Problem, dt: float, *,
            vel_tol: float = VEL_TOL, max_sweeps: int = MAX_SWEEPS,
            min_width: float | None = None) -> FbpState:
    """One time step of the front-fixed scheme.

    Raises StepRejected when the velocity correction sweeps fail to settle
    below vel_tol (caller should halve dt) and DomainCollapse when the habitat
    falls below min_width (default: four cells of the entry grid).
    """
    n = state.nxi
    dxi = 1.0 / n
    xi_int = np.linspace(0.0, 1.0, n + 1)[1:-1]
    if min_width is None:
        min_width = 4.0 * dxi * state.width
    beta, mu, reaction = problem.beta, problem.mu, problem.reaction
    f = reaction.f
    t0 = state.t
    tmid = t0 + 0.5 * dt
    bmid = float(beta(tmid))
    mu_new = float(mu(t0 + dt))
    w0 = state.w
    g0, h0w = state.g, state.h
    gdot0, hdot0 = state.gdot, state.hdot
    width0 = state.width

    vg, vh = gdot0, hdot0  # lagged predictor
    ab = np.empty((3, n - 1))
    for _ in range(max_sweeps):
        g1 = g0 + 0.5 * dt * (gdot0 + vg)
        h1 = h0w + 0.5 * dt * (hdot0 + vh)
        width1 = h1 - g1
        if width1 < min_width:
            raise DomainCollapse(f"habitat width {width1:g} below {min_width:g}")
        width_mid = 0.5 * (width0 + width1)
        gm = 0.5 * (gdot0 + vg)
        hm = 0.5 * (hdot0 + vh)
        adv = (gm + xi_int * (hm - gm) - bmid) / width_mid
        dif = 1.0 / width_mid**2

        # reaction half step (explicit midpoint), transport, reaction half step
        half = 0.5 * dt
        wi = w0[1:-1]
        wm = wi + 0.5 * half * f(t0, wi)
        wi = wi + half * f(t0 + 0.5 * half, wm)

        cl = dif / dxi**2 - adv / (2.0 * dxi)
        cr = dif / dxi**2 + adv / (2.0 * dxi)
        cd = -2.0 * dif / dxi**2
        rhs = wi * (1.0 + 0.5 * dt * cd)
        rhs[1:] += 0.5 * dt * cl[1:] * wi[:-1]
        rhs[:-1] += 0.5 * dt * cr[:-1] * wi[1:]
        ab[0, 0] = 0.0
        ab[0, 1:] = -0.5 * dt * cr[:-1]
        ab[1, :] = 1.0 - 0.5 * dt * cd
        ab[2, :-1] = -0.5 * dt * cl[1:]
        ab[2, -1] = 0.0
        wi = solve_banded((1, 1), ab, rhs, check_finite=False, overwrite_ab=True,
                          overwrite_b=True)

        tb = t0 + half
        wm = wi + 0.5 * half * f(tb, wi)
        wi = wi + half * f(tb + 0.5 * half, wm)

        w_new = np.empty(n + 1)
        w_new[0] = 0.0
        w_new[-1] = 0.0
        w_new[1:-1] = wi
        gl, gr = _boundary_gradients(w_new, dxi)
        vg_out = -mu_new * gl / width1
        vh_out = -mu_new * gr / width1
        delta = max(abs(vg_out - vg), abs(vh_out - vh))
        vg, vh = vg_out, vh_out
        if delta < vel_tol:
            return FbpState(t=t0 + dt, g=g1, h=h1, w=w_new, gdot=vg, hdot=vh)
    raise StepRejected(
        f"front velocities moved by {delta:.2e} (> {vel_tol:g}) after "
        f"{max_sweeps} sweeps at dt={dt:g}")


StopHook = Callable[[FbpState, Trajectory], "str | None"]


def simulate(problem: Problem, init: InitialData, horizon_periods: float, *,
             nxi: int = DEFAULT_NXI, dtfrac: int = DEFAULT_DTFRAC,
             snapshot_every: float = 1.0, extinction_threshold: float = 1e-4,
             stop_hooks: tuple[StopHook, ...] = (), vel_tol: float = VEL_TOL,
             max_sweeps: int = MAX_SWEEPS, max_halvings: int = 20,
             resume: Trajectory | None = None,
             config_echo: dict | None = None) -> Trajectory:
    """Run the free boundary problem for a number of periods.

    Sampling: every accepted step is appended to the series; full-field
    snapshots are stored each snapshot_every periods. The built-in extinction
    hook stops the run once the sup norm falls below extinction_threshold;
    extra stop_hooks are polled at period boundaries and may return a string
    reason to stop early. A trajectory returned earlier can be passed back as
    resume= to extend the same run to a larger horizon.
    """
    T = problem.period
    dt_base = T / dtfrac
    if resume is not None:
        traj = resume
        state = traj.final_state
        if state is None:
            raise ValueError("resume trajectory has no final state")
    else:
        traj = Trajectory(problem, config_echo)
        state = initial_state(init, nxi, mu0=float(problem.mu(0.0)))
        traj.append(state)
        traj.snapshot(state)
    min_width = 4.0 * (state.width / state.nxi)

    # merely continuous data can start with a vanishing one-sided slope; a
    # quarter-size first step avoids a spurious zero front velocity
    dxi = 1.0 / state.nxi
    gl, gr = _boundary_gradients(state.w, dxi)
    degenerate = min(abs(gl), abs(gr)) < 1e-8 * max(state.sup(), 1.0)

    t_end = horizon_periods * T
    dt = dt_base
    consecutive_rejects = 0
    accepted_since_reject = 0
    next_snap = (np.floor(state.t / (snapshot_every * T)) + 1) * snapshot_every * T
    stopped = None
    first_step = state.t == 0.0 and degenerate
    while state.t < t_end - 1e-12 * T:
        step_dt = dt
        sweeps = max_sweeps
        if state.t == 0.0:
            # the seeded velocities are data gradients, not solution velocities;
            # the first velocity fixed point starts far away and needs slack
            sweeps = max(max_sweeps, 32)
            if first_step:
                step_dt = dt / 4.0
        try:
            new_state = advance(state, problem, step_dt, vel_tol=vel_tol,
                                max_sweeps=sweeps, min_width=min_width)
        except StepRejected:
            dt *= 0.5
            consecutive_rejects += 1
            accepted_since_reject = 0
            if consecutive_rejects > max_halvings:
                raise
            continue
        consecutive_rejects = 0
        accepted_since_reject += 1
        first_step = False
        state = new_state
        traj.append(state)
        if state.t >= next_snap - 0.25 * step_dt:
            traj.snapshot(state)
            next_snap += snapshot_every * T
            for hook in stop_hooks:
                reason = hook(state, traj)
                if reason:
                    stopped = reason
                    break
            if stopped:
                break
        if state.sup() < extinction_threshold:
            stopped = "extinction"
            traj.snapshot(state)
            break
        if dt < dt_base and accepted_since_reject >= 64:
            # recover toward the base step only after a calm stretch, so a
            # transient needing the smaller step does not cause flapping
            dt = min(dt * 2.0, dt_base)
            accepted_since_reject = 0
    traj.final_state = state
    traj.exit_reason = stopped
    if stopped is None and stop_hooks:
        warnings.warn("horizon reached without any classification hook firing",
                      HorizonTooShortWarning, stacklevel=2)
    return traj
