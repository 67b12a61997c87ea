"""Acceptance suite: every criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS/FAIL line per
criterion. Heavy shared artifacts (critical speed bundles, the long spreading
run, B(0)) are computed once in module-scoped fixtures. Expect a total runtime
in the tens of minutes at the default grids.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from oracles import speed_oracle
from perifront import (InitialData, OutcomeKind, PeriodicFn, Problem, Reaction,
                       Thresholds, beta_star_from_shape, boundary_flux,
                       classify, classify_run, critical_average,
                       critical_sigma, critical_speeds, front_asymptotics,
                       half_line_profile, mean_and_shape, periodic_state,
                       principal_eigenvalue, relax_dirichlet_zero,
                       rightward_speed, simulate, stability_index)
from perifront.critical import CriticalSpeeds, Regime, _speed_fixed_point
from scipy.integrate import solve_ivp

TWO_PI = 2.0 * np.pi


@contextmanager
def criterion(number: int, title: str):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number:02d} FAIL: {title}")
        raise
    print(f"ACCEPTANCE {number:02d} PASS: {title} "
          f"[{time.perf_counter() - t0:.1f}s]")


def _const(v):
    return PeriodicFn.constant(v, 1.0)


def cosine_data(h0, sigma=1.0):
    return InitialData(h0=h0, phi=lambda x: np.cos(np.pi * x / (2.0 * h0)),
                       sigma=sigma)


@pytest.fixture(scope="module")
def logistic():
    return Reaction.logistic(1.0, 1.0)


@pytest.fixture(scope="module")
def homogeneous(logistic):
    return Problem(beta=_const(0.0), mu=_const(1.0), reaction=logistic)


@pytest.fixture(scope="module")
def crit_homog(homogeneous):
    """Full-resolution critical bundle for the homogeneous zero-advection case."""
    return critical_speeds(homogeneous)


@pytest.fixture(scope="module")
def B0(logistic):
    """B(0) for mu=1 at the default tolerance (1e-3 in b)."""
    return critical_average(PeriodicFn.constant(0.0, 1.0), _const(1.0), logistic)


@pytest.fixture(scope="module")
def spreading_traj_80(homogeneous):
    """The h0=2 spreading run carried to 80 periods (criteria 9 and 11)."""
    return simulate(homogeneous, cosine_data(2.0, sigma=1.0), 80.0)


# -- criterion 1: eigenvalue oracle --------------------------------------------

def test_criterion_01_eigenvalue_oracle():
    with criterion(1, "constant-coefficient eigenvalue oracle, 1e-5"):
        for k in (0.0, 1.0):
            for a in (1.0, 4.0):
                for ell in (1.0, 2.0, np.pi):
                    t0 = time.perf_counter()
                    res = principal_eigenvalue(_const(k), _const(a), ell)
                    dt = time.perf_counter() - t0
                    exact = np.pi**2 / ell**2 + k**2 / 4.0 - a
                    assert abs(res.lambda1 - exact) < 1e-5, (k, a, ell)
                    assert dt < 5.0, f"case {(k, a, ell)} took {dt:.1f}s"


# -- criterion 2: gauge invariance ----------------------------------------------

def test_criterion_02_gauge_invariance():
    with criterion(2, "gauge invariance of lambda1 in the shape of a(t), 1e-6"):
        aper = PeriodicFn.from_callable(lambda t: 1.0 + 0.5 * np.sin(TWO_PI * t), 1.0)
        l1 = principal_eigenvalue(_const(0.5), aper, 2.0).lambda1
        l2 = principal_eigenvalue(_const(0.5), _const(1.0), 2.0).lambda1
        assert abs(l1 - l2) < 1e-6


# -- criterion 3: periodic state oracle -------------------------------------------

def test_criterion_03_periodic_state_oracle():
    with criterion(3, "periodic logistic state and stability index, 1e-8"):
        a = lambda t: 1.0 + 0.5 * np.sin(TWO_PI * t)
        f = Reaction.logistic(a, 1.0)
        P = periodic_state(f)
        t = P.grid
        A = lambda s: s + 0.5 * (1.0 - np.cos(TWO_PI * s)) / TWO_PI
        sol = solve_ivp(lambda s, y: [np.exp(A(s))], (0.0, 1.0), [0.0],
                        rtol=1e-12, atol=1e-14, dense_output=True)
        I = lambda s: sol.sol(s)[0]
        K = I(1.0) / (np.exp(A(1.0)) - 1.0)
        expected = np.exp(A(t)) / (K + I(t))
        assert np.abs(P(t) - expected).max() < 1e-8
        rep = stability_index(f, P)
        assert np.abs(rep.alpha.samples - (-P.samples**2)).max() < 1e-8


# -- criterion 4: half-line flux oracle --------------------------------------------

def test_criterion_04_halfline_flux_oracle(logistic):
    with criterion(4, "half-line flux = 1/sqrt(3) (1e-4); trivial zero case"):
        prof = half_line_profile(_const(0.0), logistic)
        flux = boundary_flux(prof, _const(1.0))
        t = flux.grid
        assert np.abs(flux(t) - 1.0 / np.sqrt(3.0)).max() < 1e-4
        trivial = half_line_profile(_const(-3.0), logistic)
        assert trivial.is_zero
        assert np.abs(trivial.field).max() == 0.0


# -- criterion 5: strip-to-half-line flux convergence --------------------------------

def test_criterion_05_flux_convergence(logistic):
    with criterion(5, "A0[k,l] -> A[k] monotonically, < 1e-3 at l = 40"):
        kwargs = dict(period_tol=1e-11)
        ref = half_line_profile(_const(0.0), logistic, radius=32.0, **kwargs)
        A = boundary_flux(ref, _const(1.0))
        t = A.grid
        gaps = []
        for ell in (10.0, 20.0, 40.0):
            p = relax_dirichlet_zero(_const(0.0), logistic, ell, **kwargs)
            A0 = boundary_flux(p, _const(1.0))
            gaps.append(float(np.abs(A0(t) - A(t)).max()))
        assert gaps[0] > gaps[1] > gaps[2], gaps
        assert gaps[2] < 1e-3


# -- criterion 6: semi-wave speed oracle ----------------------------------------------

def test_criterion_06_semiwave_speed_oracle(logistic):
    with criterion(6, "rightward speed vs phase-plane shooting, 1e-4"):
        for beta in (0.0, 1.0, 2.0):
            t0 = time.perf_counter()
            r = rightward_speed(_const(beta), _const(1.0), logistic)
            dt = time.perf_counter() - t0
            expected = speed_oracle(beta)
            assert np.abs(r(r.grid) - expected).max() < 1e-4, beta
            assert dt < 120.0, f"beta={beta} took {dt:.0f}s"


# -- criterion 7: monotonicity suite ---------------------------------------------------

def test_criterion_07_monotonicity_suite(logistic):
    with criterion(7, "speed monotone in beta; y(b) strictly increasing"):
        mu = _const(1.0)
        rs = [rightward_speed(_const(b), mu, logistic) for b in (0.5, 1.0, 2.0)]
        t = rs[0].grid
        for r1, r2 in zip(rs, rs[1:]):
            assert (r2(t) - r1(t)).min() > 1e-5

        theta = PeriodicFn.from_callable(lambda s: 0.3 * np.sin(TWO_PI * s), 1.0)
        r_cache = None
        mins = []
        means = []
        for b in (2.0, 4.0, 8.0):
            r_cache, _ = _speed_fixed_point(b + theta, mu, logistic, r0=r_cache)
            mins.append(r_cache(t).min())
            means.append(r_cache.mean())
        assert mins[0] + 1e-5 < mins[1] < mins[2] - 1e-5
        # pointwise monotonicity along the same family
        r2, _ = _speed_fixed_point(2.0 + theta, mu, logistic)
        r4, _ = _speed_fixed_point(4.0 + theta, mu, logistic, r0=r2)
        r8, _ = _speed_fixed_point(8.0 + theta, mu, logistic, r0=r4)
        assert (r4(t) - r2(t)).min() > 1e-5
        assert (r8(t) - r4(t)).min() > 1e-5

        b_grid = np.linspace(2.0, 4.25, 10)
        ys = []
        warm = None
        for b in b_grid:
            warm, _ = _speed_fixed_point(b + theta, mu, logistic, r0=warm)
            ys.append(b - 2.0 - warm.mean())
        assert all(y2 - y1 > 1e-5 for y1, y2 in zip(ys, ys[1:])), ys


# -- criterion 8: the two constructions of the critical set agree ------------------------

def test_criterion_08_critical_set_roundtrip(logistic, B0):
    with criterion(8, "beta* roundtrip: means and B(shape) within 1e-3"):
        omega_shapes = {
            "zero": PeriodicFn.constant(0.0, 1.0),
            "sin": PeriodicFn.from_callable(lambda s: 0.3 * np.sin(TWO_PI * s), 1.0),
        }
        mus = {
            "one": _const(1.0),
            "periodic": PeriodicFn.from_callable(
                lambda s: 1.0 + 0.5 * np.sin(TWO_PI * s), 1.0),
        }
        for oname, omega in omega_shapes.items():
            for mname, mu in mus.items():
                beta_star = beta_star_from_shape(omega, mu, logistic)
                r = rightward_speed(beta_star, mu, logistic)
                gap = abs(r.mean() - (beta_star.mean() - 2.0))
                assert gap < 1e-3, (oname, mname, gap)
                bmean, shape = mean_and_shape(beta_star)
                if oname == "zero" and mname == "one":
                    B = B0  # same computation, reused from the fixture
                else:
                    B = critical_average(shape, mu, logistic)
                assert abs(B - bmean) < 1e-3, (oname, mname, B, bmean)


# -- criterion 9: vanishing/spreading dichotomy -------------------------------------------

def test_criterion_09_dichotomy(homogeneous, crit_homog, spreading_traj_80):
    with criterion(9, "sharp sigma threshold for small advection"):
        t0 = time.perf_counter()
        thresholds = Thresholds()
        result = critical_sigma(homogeneous, cosine_data(0.5),
                                bracket=(0.5, 8.0), budget=32,
                                sigma_rel_tol=1e-2, crit=crit_homog,
                                thresholds=thresholds)
        assert 0.0 < result.sigma_low < result.sigma_high < np.inf
        assert result.bracket_width <= 1e-2 * result.sigma_high + 1e-12
        vanished = [(s, k) for s, k in result.per_run_outcomes
                    if k is OutcomeKind.VANISHING]
        assert vanished
        nxi = 1024
        for s, _ in vanished:
            ev = result.evidence_by_sigma[s]
            margin = 3.0 * ev["width_final"] / nxi
            assert ev["width_final"] <= np.pi + margin + 1e-9, (s, ev)
        # wide initial habitat spreads with no bisection at all
        out = classify(spreading_traj_80, crit_homog, thresholds)
        assert out.kind is OutcomeKind.SPREADING
        assert time.perf_counter() - t0 < 1800.0


# -- criterion 10: trichotomy direction ----------------------------------------------------

def test_criterion_10_trichotomy_direction(logistic, B0):
    with criterion(10, "medium regime: vanish/virtually-spread; large: all vanish"):
        mu = _const(1.0)
        beta_med = 0.5 * (2.0 + B0)
        problem_med = Problem(beta=_const(beta_med), mu=mu, reaction=logistic)
        r_med, prof_med = _speed_fixed_point(_const(beta_med), mu, logistic)
        crit_med = CriticalSpeeds(cbar=2.0, r=r_med, R=r_med.antiderivative(),
                                  l=None, L=None, regime=Regime.MEDIUM,
                                  b_theta=B0, margin=min(beta_med - 2.0,
                                                         B0 - beta_med),
                                  low_confidence=False, r_profile=prof_med,
                                  l_profile=None)
        thresholds = Thresholds()
        out_small, _ = classify_run(problem_med, cosine_data(2.0, sigma=0.2),
                                    crit_med, thresholds)
        assert out_small.kind is OutcomeKind.VANISHING
        assert out_small.evidence["sup_final"] < thresholds.extinction

        out_big, _ = classify_run(problem_med, cosine_data(2.0, sigma=5.0),
                                  crit_med, thresholds)
        assert out_big.kind is OutcomeKind.VIRTUAL_SPREADING
        assert out_big.evidence["g_variation"] < thresholds.g_stall
        assert out_big.evidence["fixed_window_sup"] < thresholds.near_state

        beta_large = B0 + 0.5
        problem_large = Problem(beta=_const(beta_large), mu=mu, reaction=logistic)
        r_large, prof_large = _speed_fixed_point(_const(beta_large), mu, logistic)
        crit_large = CriticalSpeeds(cbar=2.0, r=r_large,
                                    R=r_large.antiderivative(), l=None, L=None,
                                    regime=Regime.LARGE, b_theta=B0, margin=0.5,
                                    low_confidence=False, r_profile=prof_large,
                                    l_profile=None)
        for sigma in (0.5, 5.0, 50.0):
            out, _ = classify_run(problem_large, cosine_data(2.0, sigma=sigma),
                                  crit_large, thresholds)
            assert out.kind is OutcomeKind.VANISHING, (sigma, out.kind)


# -- criterion 11: front asymptotics ---------------------------------------------------------

def test_criterion_11_front_asymptotics(spreading_traj_80, crit_homog):
    with criterion(11, "front laws: h-R flat, h'-r small, profile locking"):
        rep = front_asymptotics(spreading_traj_80, crit_homog)
        times = rep.times
        last20 = times >= times[-1] - 20.0
        assert np.abs(rep.speed_residual[last20]).max() < 5e-3
        seg = rep.h_minus_R[last20]
        assert seg.max() - seg.min() < 1e-2
        late_sups = rep.profile_sup[rep.profile_times >= times[-1] - 20.0]
        assert late_sups.size and late_sups.max() < 1e-2
        # left-side analogues at the same tolerances
        assert np.abs(rep.left_speed_residual[last20]).max() < 5e-3
        seg_l = rep.g_plus_L[last20]
        assert seg_l.max() - seg_l.min() < 1e-2
        late_l = rep.left_profile_sup[-late_sups.size:]
        assert late_l.size and late_l.max() < 1e-2


# -- criterion 12: scheme properties ----------------------------------------------------------

def test_criterion_12_scheme_properties(homogeneous):
    with criterion(12, "comparison ordering, symmetry, Richardson ratio"):
        lo = simulate(homogeneous, cosine_data(1.0, sigma=0.8), 20.0)
        hi = simulate(homogeneous, cosine_data(1.0, sigma=1.0), 20.0)
        assert np.all(np.asarray(hi.h) >= np.asarray(lo.h) - 1e-12)
        assert np.all(np.asarray(hi.g) <= np.asarray(lo.g) + 1e-12)
        for snap_lo, snap_hi in zip(lo.snapshots, hi.snapshots):
            t, g1, h1, w1 = snap_lo
            _, g2, h2, w2 = snap_hi
            xs = g1 + np.linspace(0.0, 1.0, w1.size) * (h1 - g1)
            xi2 = np.clip((xs - g2) / (h2 - g2), 0.0, 1.0)
            w2_on_1 = np.interp(xi2, np.linspace(0.0, 1.0, w2.size), w2)
            assert np.all(w2_on_1 >= w1 - 1e-10), f"ordering broke at t={t}"

        # symmetry: |g+h| < 1e-8 * (h-g) throughout
        sym = simulate(homogeneous, cosine_data(1.0), 10.0)
        g = np.asarray(sym.g)
        h = np.asarray(sym.h)
        assert np.abs(g + h).max() < 1e-8 * (h - g).max()

        # Richardson: halving dxi and dt twice scales the h(t_end) shift by ~4
        hs = []
        for scale in (1, 2, 4):
            traj = simulate(homogeneous, cosine_data(2.0), 4.0,
                            nxi=1024 * scale, dtfrac=1024 * scale)
            hs.append(traj.h[-1])
        ratio = (hs[0] - hs[1]) / (hs[1] - hs[2])
        assert 3.5 <= ratio <= 4.5, (hs, ratio)
