from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ballhgm.errors import NoConvergence
from ballhgm.model import NaturalParams, surface_area
from ballhgm.oracle import quad_fisher_bingham
from ballhgm.series import SeriesOptions, leading_initial_state, log_double_factorial, series_f_and_gradient

small = st.floats(min_value=-1.0, max_value=1.0, allow_subnormal=False)


@st.composite
def small_point(draw, max_d=5):
    d = draw(st.integers(1, max_d))
    lam = draw(st.lists(st.floats(min_value=-1.0, max_value=-0.01, allow_subnormal=False), min_size=d, max_size=d))
    tau = draw(st.lists(small, min_size=d, max_size=d))
    r = draw(st.floats(min_value=0.05, max_value=0.5, allow_subnormal=False))
    return NaturalParams.from_arrays(lam, tau), r


def _raw(lam, tau):
    # unsorted parameters, for symmetry checks that permute coordinates
    return NaturalParams(np.asarray(lam, float), np.asarray(tau, float), tuple(range(len(lam))))


@pytest.mark.parametrize("n,expected", [(-1, 1), (0, 1), (1, 1), (2, 2), (5, 15), (8, 384), (9, 945)])
def test_log_double_factorial(n, expected):
    assert math.exp(log_double_factorial(n)) == pytest.approx(expected, rel=1e-13)


def test_constant_integrand_is_sphere_area():
    f, _ = series_f_and_gradient(_raw([0.0, 0.0], [0.0, 0.0]), 2.0)
    assert f == pytest.approx(4 * math.pi, rel=1e-15)


def test_circle_against_quadrature():
    np_ = NaturalParams.from_arrays([-0.5, -1.0], [0.3, 0.1])
    f, _ = series_f_and_gradient(np_, 1.0)
    assert f == pytest.approx(quad_fisher_bingham(np_, 1.0), rel=1e-8)


def test_lambda_derivative_at_origin_of_parameters():
    _, g = series_f_and_gradient(_raw([0.0] * 3, [0.0] * 3), 1.0)
    np.testing.assert_allclose(g[3:], 4 * math.pi / 3, rtol=1e-14)
    np.testing.assert_array_equal(g[:3], 0.0)


def test_leading_state_values():
    np_ = _raw([-0.5, -0.5, -0.5], [0.1, 0.2, 0.3])
    s = surface_area(3) / 3
    np.testing.assert_allclose(leading_initial_state(np_, 1e-6), s * np.array([0.1, 0.2, 0.3, 1, 1, 1]), rtol=1e-15)


def test_leading_state_zero_drift():
    v = leading_initial_state(_raw([-0.5, -1.0], [0.0, 0.0]), 0.3)
    np.testing.assert_allclose(v, [0, 0, math.pi, math.pi], rtol=1e-15)


def test_leading_state_matches_series_at_r0():
    np_ = NaturalParams.from_arrays([-0.0555556, -0.125, -0.5], [0.111111, 0.125, 0.25])
    r0 = 1e-6
    _, g = series_f_and_gradient(np_, r0)
    lead = leading_initial_state(np_, r0) * r0 ** (np_.d + 1)
    np.testing.assert_allclose(lead, g, rtol=1e-11)


def test_no_convergence_raised_at_degree_cap():
    with pytest.raises(NoConvergence):
        series_f_and_gradient(NaturalParams.from_arrays([-0.5], [0.5]), 1.0, SeriesOptions(max_total_degree=2))


def test_options_validation():
    with pytest.raises(ValueError):
        SeriesOptions(max_total_degree=-1)
    with pytest.raises(ValueError):
        SeriesOptions(rel_tol=0.0)


@given(small_point())
def test_f_equals_scaled_sum_of_lambda_derivatives(pt):
    np_, r = pt
    f, g = series_f_and_gradient(np_, r)
    assert np.sum(g[np_.d :]) / r**2 == pytest.approx(f, rel=10 * SeriesOptions().rel_tol)


@given(small_point(), st.data())
def test_sign_flip_symmetry(pt, data):
    np_, r = pt
    i = data.draw(st.integers(0, np_.d - 1))
    tau = np_.tau.copy()
    tau[i] = -tau[i]
    f0, g0 = series_f_and_gradient(_raw(np_.lam, np_.tau), r)
    f1, g1 = series_f_and_gradient(_raw(np_.lam, tau), r)
    sign = np.ones(2 * np_.d)
    sign[i] = -1.0
    assert f1 == pytest.approx(f0, rel=1e-14)
    np.testing.assert_allclose(g1, sign * g0, rtol=1e-13, atol=1e-300)


@given(small_point(), st.randoms(use_true_random=False))
def test_permutation_equivariance(pt, rnd):
    np_, r = pt
    d = np_.d
    perm = list(range(d))
    rnd.shuffle(perm)
    f0, g0 = series_f_and_gradient(_raw(np_.lam, np_.tau), r)
    f1, g1 = series_f_and_gradient(_raw(np_.lam[perm], np_.tau[perm]), r)
    assert f1 == pytest.approx(f0, rel=1e-13)
    idx = perm + [d + p for p in perm]
    np.testing.assert_allclose(g1, g0[idx], rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    lam = -rng.uniform(0.05, 1.0, d)
    tau = rng.uniform(-1.0, 1.0, d)
    r = float(rng.uniform(0.2, 1.0))
    h = 1e-5
    _, g = series_f_and_gradient(_raw(lam, tau), r)

    def f(lam_, tau_):
        return series_f_and_gradient(_raw(lam_, tau_), r)[0]

    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        fd_tau = (f(lam, tau + e) - f(lam, tau - e)) / (2 * h)
        fd_lam = (f(lam + e, tau) - f(lam - e, tau)) / (2 * h)
        assert fd_tau == pytest.approx(g[i], rel=1e-6, abs=1e-9)
        assert fd_lam == pytest.approx(g[d + i], rel=1e-6)
