"""Shared finite-difference machinery for strips [0, L] x one period.

Two steppers live here: a nonlinear one (Crank-Nicolson transport with a
Strang-split second-order explicit reaction), used by the semi-wave solvers,
and an L-stable linear TR-BDF2 period map used for Floquet eigenvalues.
The reaction is kept out of the tridiagonal solve on purpose: the transport
matrix then depends only on the scalar k(t) per step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import NoConvergence
from .periodic import PeriodicFn, Reaction

_TRBDF2_GAMMA = 2.0 - np.sqrt(2.0)


def _solve_tridiag(lower, diag, upper, rhs, ab):
    """Solve the constant-coefficient tridiagonal system via LAPACK's banded solver."""
    ab[0, :] = upper
    ab[1, :] = diag
    ab[2, :] = lower
    return solve_banded((1, 1), ab, rhs, check_finite=False, overwrite_ab=True,
                        overwrite_b=True)


class StripStepper:
    """Period stepping of v_t = v_zz + k(t) v_z + f(t, v) with Dirichlet data.

    Grid: nz cells on [0, length], nt steps per period. The left boundary is
    held at zero; the right boundary value may be zero, a constant, or any
    T-periodic function, sampled at the step times once at construction.
    """

    def __init__(self, length: float, nz: int, nt: int, period: float,
                 k: PeriodicFn, reaction: Reaction | None, right_bc=0.0):
        self.length = float(length)
        self.nz = int(nz)
        self.nt = int(nt)
        self.period = float(period)
        self.reaction = reaction
        self.dz = self.length / self.nz
        self.dt = self.period / self.nt
        self.z = np.linspace(0.0, self.length, self.nz + 1)
        t0 = np.arange(self.nt) * self.dt
        self.k_mid = np.asarray(k(t0 + 0.5 * self.dt), dtype=float)
        t_nodes = np.arange(self.nt + 1) * self.dt
        if isinstance(right_bc, PeriodicFn) or callable(right_bc):
            self.right_bc = np.asarray(right_bc(t_nodes), dtype=float)
        else:
            self.right_bc = np.full(self.nt + 1, float(right_bc))
        self._ab = np.empty((3, self.nz - 1))

    def _react_half(self, t0: float, w: np.ndarray) -> np.ndarray:
        # explicit midpoint over dt/2; second order so the Strang fixed point
        # stays an O(dt^2) perturbation of the semi-discrete steady problem
        h = 0.5 * self.dt
        f = self.reaction.f
        wm = w + 0.5 * h * f(t0, w)
        return w + h * f(t0 + 0.5 * h, wm)

    def _step_inplace(self, u: np.ndarray, m: int) -> None:
        dt, dz = self.dt, self.dz
        rb = self.right_bc
        t0 = m * dt
        ui = u[1:-1]
        if self.reaction is not None:
            ui = self._react_half(t0, ui)
        k = self.k_mid[m]
        cl = 1.0 / dz**2 - k / (2.0 * dz)
        cr = 1.0 / dz**2 + k / (2.0 * dz)
        cd = -2.0 / dz**2
        rhs = ui * (1.0 + 0.5 * dt * cd)
        rhs[1:] += 0.5 * dt * cl * ui[:-1]
        rhs[:-1] += 0.5 * dt * cr * ui[1:]
        rhs[-1] += 0.5 * dt * cr * (rb[m] + rb[m + 1])
        ui = _solve_tridiag(-0.5 * dt * cl, 1.0 - 0.5 * dt * cd, -0.5 * dt * cr,
                            rhs, self._ab)
        if self.reaction is not None:
            ui = self._react_half(t0 + 0.5 * dt, ui)
        u[1:-1] = ui
        u[0] = 0.0
        u[-1] = rb[m + 1]

    def step_period(self, u: np.ndarray) -> np.ndarray:
        """Advance one full period; returns a new array, input untouched."""
        u = u.copy()
        for m in range(self.nt):
            self._step_inplace(u, m)
        return u

    def record_period(self, u: np.ndarray) -> np.ndarray:
        """One period with every time slice kept; shape (nt+1, nz+1)."""
        field = np.empty((self.nt + 1, self.nz + 1))
        field[0] = u
        cur = u.copy()
        for m in range(self.nt):
            self._step_inplace(cur, m)
            field[m + 1] = cur
        return field


@dataclass
class RelaxResult:
    u: np.ndarray
    periods: int
    status: str          # "converged" | "zero"
    residual: float


def relax_to_periodic(stepper: StripStepper, u0: np.ndarray, *,
                      period_tol: float = 1e-8, max_periods: int = 2000,
                      zero_threshold: float | None = None) -> RelaxResult:
    """Iterate full periods until the per-period sup change drops below tolerance.

    If zero_threshold is given and the iterate's sup norm falls below it, the
    limit is declared to be the zero solution.
    """
    u = np.asarray(u0, dtype=float)
    for it in range(max_periods):
        un = stepper.step_period(u)
        change = float(np.abs(un - u).max())
        u = un
        if zero_threshold is not None and np.abs(u).max() < zero_threshold:
            return RelaxResult(u=np.zeros_like(u), periods=it + 1, status="zero",
                               residual=change)
        if change < period_tol:
            return RelaxResult(u=u, periods=it + 1, status="converged",
                               residual=change)
    raise NoConvergence(
        f"per-period change {change:.3e} still above {period_tol:g} after "
        f"{max_periods} periods")


class FloquetMap:
    """TR-BDF2 period map of the linear problem psi_t = psi_zz + k psi_z + a psi.

    L-stability matters here: with Crank-Nicolson the stiffest grid modes decay
    only like e^-1 per period and can out-live the principal mode whenever
    lambda_1 * T > 1, which breaks the power iteration. TR-BDF2 damps them out.
    """

    def __init__(self, length: float, nz: int, nt: int, period: float,
                 k: PeriodicFn, a: PeriodicFn):
        self.length = float(length)
        self.nz = int(nz)
        self.nt = int(nt)
        self.period = float(period)
        self.dz = self.length / self.nz
        self.dt = self.period / self.nt
        self.z = np.linspace(0.0, self.length, self.nz + 1)
        g = _TRBDF2_GAMMA
        t0 = np.arange(self.nt) * self.dt
        self.k1 = np.asarray(k(t0 + 0.5 * g * self.dt), dtype=float)
        self.a1 = np.asarray(a(t0 + 0.5 * g * self.dt), dtype=float)
        self.k2 = np.asarray(k(t0 + self.dt), dtype=float)
        self.a2 = np.asarray(a(t0 + self.dt), dtype=float)
        self._ab = np.empty((3, self.nz - 1))

    def _step(self, p: np.ndarray, m: int) -> np.ndarray:
        g = _TRBDF2_GAMMA
        dt, dz = self.dt, self.dz
        c1 = 1.0 / (g * (2.0 - g))
        c2 = (1.0 - g) ** 2 / (g * (2.0 - g))
        d = (1.0 - g) / (2.0 - g)
        # trapezoidal stage over gamma*dt
        k, a = self.k1[m], self.a1[m]
        cl = 1.0 / dz**2 - k / (2.0 * dz)
        cr = 1.0 / dz**2 + k / (2.0 * dz)
        cd = -2.0 / dz**2 + a
        rhs = p * (1.0 + 0.5 * g * dt * cd)
        rhs[1:] += 0.5 * g * dt * cl * p[:-1]
        rhs[:-1] += 0.5 * g * dt * cr * p[1:]
        pstar = _solve_tridiag(-0.5 * g * dt * cl, 1.0 - 0.5 * g * dt * cd,
                               -0.5 * g * dt * cr, rhs, self._ab)
        # BDF2 stage to the end of the step
        k, a = self.k2[m], self.a2[m]
        cl = 1.0 / dz**2 - k / (2.0 * dz)
        cr = 1.0 / dz**2 + k / (2.0 * dz)
        cd = -2.0 / dz**2 + a
        rhs = c1 * pstar - c2 * p
        return _solve_tridiag(-d * dt * cl, 1.0 - d * dt * cd, -d * dt * cr,
                              rhs, self._ab)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Map interior values (length nz-1) through one period."""
        p = psi.copy()
        for m in range(self.nt):
            p = self._step(p, m)
        return p

    def apply_record(self, psi: np.ndarray) -> np.ndarray:
        """One period keeping all slices, boundaries included; (nt+1, nz+1)."""
        field = np.zeros((self.nt + 1, self.nz + 1))
        field[0, 1:-1] = psi
        p = psi.copy()
        for m in range(self.nt):
            p = self._step(p, m)
            field[m + 1, 1:-1] = p
        return field
