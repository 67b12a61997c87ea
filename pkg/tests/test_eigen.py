"""Tests for the principal eigenvalue and the critical length.

Constant-coefficient cases have the separable oracle
lambda_1 = pi^2/l^2 + k^2/4 - a (ansatz e^{-kz/2} sin(pi z / l)); a constant
drift with time-periodic a(t) reduces to the mean by the gauge transform
phi = e^{int (a - abar)} psi.
"""

import numpy as np
import pytest

from perifront import PeriodicFn, critical_length, principal_eigenvalue
from perifront.errors import NoCriticalLength

TWO_PI = 2.0 * np.pi


def _const(v):
    return PeriodicFn.constant(v, 1.0)


def lam_exact(k, a, ell):
    return np.pi**2 / ell**2 + k**2 / 4.0 - a


@pytest.mark.parametrize("k", [0.0, 1.0])
@pytest.mark.parametrize("a", [1.0, 4.0])
@pytest.mark.parametrize("ell", [1.0, 2.0, np.pi])
def test_constant_coefficient_oracle(k, a, ell):
    res = principal_eigenvalue(_const(k), _const(a), ell)
    assert res.converged
    assert abs(res.lambda1 - lam_exact(k, a, ell)) < 1e-5


def test_spec_example_value():
    res = principal_eigenvalue(_const(1.0), _const(1.0), 2.0)
    assert res.lambda1 == pytest.approx(np.pi**2 / 4 + 0.25 - 1.0, abs=1e-5)


def test_zero_eigenvalue_at_pi():
    res = principal_eigenvalue(_const(0.0), _const(1.0), np.pi)
    assert abs(res.lambda1) < 1e-6


def test_gauge_invariance_in_a():
    aper = PeriodicFn.from_callable(lambda t: 1.0 + 0.5 * np.sin(TWO_PI * t), 1.0)
    l1 = principal_eigenvalue(_const(0.5), aper, 2.0).lambda1
    l2 = principal_eigenvalue(_const(0.5), _const(1.0), 2.0).lambda1
    assert abs(l1 - l2) < 1e-6


def test_time_periodic_a_zero_crossing():
    aper = PeriodicFn.from_callable(lambda t: 1.0 + np.sin(TWO_PI * t), 1.0)
    res = principal_eigenvalue(_const(0.0), aper, np.pi)
    assert abs(res.lambda1) < 1e-6


def test_monotone_in_length():
    k = _const(0.6)
    a = _const(1.0)
    lams = [principal_eigenvalue(k, a, ell).lambda1 for ell in (1.0, 2.0, 4.0, 8.0)]
    assert all(l2 < l1 for l1, l2 in zip(lams, lams[1:]))


def test_eigenfunction_positive_periodic_and_boundary():
    res = principal_eigenvalue(_const(1.0), _const(1.0), 2.0)
    field = res.eigenfunction
    assert np.abs(field[:, 0]).max() == 0.0
    assert np.abs(field[:, -1]).max() == 0.0
    assert field[:, 1:-1].min() > 0.0
    assert np.abs(field[0] - field[-1]).max() < 1e-6
    assert res.residual < 5e-3


def test_critical_length_constant():
    assert critical_length(_const(0.0), _const(1.0)) == pytest.approx(np.pi, abs=1e-4)


def test_critical_length_with_drift():
    # l* = pi / sqrt(a - k^2/4)
    assert critical_length(_const(1.0), _const(1.0)) == pytest.approx(
        2 * np.pi / np.sqrt(3.0), abs=1e-4)


def test_critical_length_supercritical_drift():
    with pytest.raises(NoCriticalLength):
        critical_length(_const(2.0), _const(1.0))


def test_critical_length_periodic_shape_finite():
    k = PeriodicFn.from_callable(lambda t: 0.5 + 0.3 * np.sin(TWO_PI * t), 1.0)
    a = _const(1.0)
    ell = critical_length(k, a)
    assert 0.0 < ell < 100.0
    # with the mean below cbar the sign structure must hold around l*
    assert principal_eigenvalue(k, a, 0.8 * ell).lambda1 > 0.0
    assert principal_eigenvalue(k, a, 1.25 * ell).lambda1 < 0.0


def test_power_iteration_cap_raises():
    from perifront.errors import NoConvergence
    with pytest.raises(NoConvergence):
        principal_eigenvalue(_const(0.0), _const(1.0), 2.0, nz=128, nt=128,
                             max_periods=1)
