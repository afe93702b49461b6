from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ballhgm._dop853 import KIND_F, KIND_Q, eval_rhs, pack_params
from ballhgm.errors import SingularRadius
from ballhgm.laplace import asymptotic_eval
from ballhgm.model import ModelParams, NaturalParams, surface_area, to_natural
from ballhgm.pfaffian import (
    HgmState,
    RescaledState,
    apply_P,
    apply_Q_rhs,
    gauge_exponent,
    gauge_F_to_Q,
    gauge_Q_to_F,
    pfaffian_matrix,
    recover_f,
)
from ballhgm.series import leading_initial_state, series_f_and_gradient

FIRST = to_natural(ModelParams([9.0, 4.0, 1.0], [1.0, 0.5, 0.25]))


@st.composite
def points(draw, max_d=6, r_min=1e-3, r_max=20.0):
    d = draw(st.integers(1, max_d))
    lam = draw(st.lists(st.floats(min_value=-3.0, max_value=-0.01, allow_subnormal=False), min_size=d, max_size=d))
    tau = draw(st.lists(st.floats(min_value=-2.0, max_value=2.0, allow_subnormal=False), min_size=d, max_size=d))
    r = draw(st.floats(min_value=r_min, max_value=r_max))
    v = np.array(draw(st.lists(st.floats(min_value=-1.0, max_value=1.0, allow_subnormal=False), min_size=2 * d, max_size=2 * d)))
    # the solver keeps states well inside the normal range
    v[np.abs(v) < 1e-200] = 0.0
    return NaturalParams.from_arrays(lam, tau), r, v


def _block_matrix(np_, r):
    """The Pfaffian matrix assembled block-wise, as the display shows it."""
    d = np_.d
    lam, tau = np_.lam, np_.tau
    ul = np.diag(2 * r * r * lam + 1)
    ur = np.outer(tau, np.ones(d))
    ll = np.diag(r * r * tau)
    lr = np.ones((d, d)) + np.diag(2 * r * r * lam + 1)
    return np.block([[ul, ur], [ll, lr]]) / r


def _D(d, r):
    g = np.ones(2 * d)
    g[0], g[d] = 1 / r, 1 / r**2
    return g


def test_one_dimensional_matrix():
    np_ = NaturalParams.from_arrays([-0.5], [0.0])
    np.testing.assert_array_equal(pfaffian_matrix(np_, 1.0), [[0.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(apply_P(np_, 1.0, np.array([1.0, 1.0])), [0.0, 1.0])


def test_unit_vector_probe_recovers_block_display():
    np_ = NaturalParams.from_arrays([-0.3, -0.7], [0.4, -0.2])
    dense = _block_matrix(np_, 1.0)
    np.testing.assert_allclose(pfaffian_matrix(np_, 1.0), dense, rtol=0, atol=1e-15)
    for j in range(4):
        e = np.zeros(4)
        e[j] = 1.0
        np.testing.assert_allclose(apply_P(np_, 1.0, e), dense[:, j], rtol=0, atol=1e-15)


def test_matvec_matches_dense_example3d():
    rng = np.random.default_rng(7)
    v = rng.normal(size=6)
    dense = pfaffian_matrix(FIRST, 0.5) @ v
    got = apply_P(FIRST, 0.5, v)
    np.testing.assert_allclose(got, dense, rtol=1e-15, atol=1e-15 * np.abs(dense).max())


@given(points())
def test_column_probe_exact(pt):
    np_, r, _ = pt
    d = np_.d
    P = pfaffian_matrix(np_, r)
    # entries like 2 lambda r^2 + 2 may cancel, so the bound scales with the summands
    scale = (2 * r * r * np.abs(np_.lam).max() + 2 + np.abs(np_.tau).max() * (1 + r * r)) / r
    for j in range(2 * d):
        e = np.zeros(2 * d)
        e[j] = 1.0
        np.testing.assert_allclose(apply_P(np_, r, e), P[:, j], rtol=4e-16, atol=4e-16 * scale)


def test_q_rhs_hand_example():
    np_ = NaturalParams.from_arrays([-0.5], [0.0])
    np.testing.assert_allclose(apply_Q_rhs(np_, 1.0, np.array([0.0, 1.0])), [0.0, 0.0], atol=1e-15)


def _chain_rule_q_rhs(np_, r, F):
    # d/dr [exp(-g) D F] = exp(-g) (-g' D F + D' F + D P F)
    d = np_.d
    g = gauge_exponent(np_, r)
    gp = 2 * r * np_.lam[0] + abs(np_.tau[0])
    D = _D(d, r)
    Dp = np.zeros(2 * d)
    Dp[0], Dp[d] = -1 / r**2, -2 / r**3
    return math.exp(-g) * (-gp * D * F + Dp * F + D * (pfaffian_matrix(np_, r) @ F))


def test_q_rhs_chain_rule_example3d():
    _, F = series_f_and_gradient(FIRST, 1.0)
    q = math.exp(-gauge_exponent(FIRST, 1.0)) * _D(3, 1.0) * F
    np.testing.assert_allclose(apply_Q_rhs(FIRST, 1.0, q), _chain_rule_q_rhs(FIRST, 1.0, F), rtol=1e-13)


@given(points(r_min=0.05, r_max=10.0))
def test_gauge_commutation(pt):
    np_, r, F = pt
    q = math.exp(-gauge_exponent(np_, r)) * _D(np_.d, r) * F
    expect = _chain_rule_q_rhs(np_, r, F)
    scale = np.abs(expect).max() + np.abs(q).max() * (2 * r * abs(np_.lam[0]) + abs(np_.tau[0]) + 2 / r)
    np.testing.assert_allclose(apply_Q_rhs(np_, r, q), expect, rtol=0, atol=1e-12 * scale)


def test_asymptotic_limit_is_nearly_stationary():
    r = 50.0
    a = asymptotic_eval(FIRST, r)
    F_over_f = np.concatenate([a.dtau, a.dlambda])
    q = F_over_f * _D(3, r)
    rhs = apply_Q_rhs(FIRST, r, q)
    assert np.linalg.norm(rhs) / np.linalg.norm(q) <= 0.1


def test_singular_radius():
    with pytest.raises(SingularRadius):
        apply_P(FIRST, 0.0, np.ones(6))
    with pytest.raises(SingularRadius):
        apply_Q_rhs(FIRST, 0.0, np.ones(6))
    with pytest.raises(ValueError):
        apply_P(FIRST, -1.0, np.ones(6))


@given(points(r_min=1e-6, r_max=1e3))
def test_no_singularity_for_positive_radius(pt):
    np_, r, v = pt
    assert np.all(np.isfinite(apply_P(np_, r, v)))
    assert np.all(np.isfinite(apply_Q_rhs(np_, r, v)))


def test_gauge_one_dimensional_substitution():
    np_ = NaturalParams.from_arrays([-0.5], [0.0])
    q = gauge_F_to_Q(np_, 2.0, HgmState(np.array([3.0, 5.0]), 0.0))
    np.testing.assert_allclose(q.vec, [1.5, 1.25])
    assert q.log_scale == pytest.approx(2.0)


def test_gauge_ledger_absorption():
    np_ = NaturalParams.from_arrays([-0.0555556], [0.111111])
    q = gauge_F_to_Q(np_, 10.0, HgmState(np.array([1.0, 1.0]), 0.7))
    assert q.log_scale - 0.7 == pytest.approx(-(100 * -0.0555556 + 10 * 0.111111), rel=1e-14)


def test_gauge_round_trip_exact_at_unit_radius():
    s = HgmState(np.array([0.3, -1.7, 2.2, 0.1, 4.0, 5.5]), 1.25, 0.8, -0.3)
    back = gauge_Q_to_F(FIRST, 1.0, gauge_F_to_Q(FIRST, 1.0, s))
    # D = I at r = 1, so the mantissas are untouched; the ledger moves by -g then +g
    np.testing.assert_array_equal(back.vec, s.vec)
    assert back.integral_mantissa == s.integral_mantissa
    assert back.log_scale == pytest.approx(s.log_scale, abs=1e-15)
    assert back.integral_log_offset == pytest.approx(s.integral_log_offset, abs=1e-15)


@given(points(r_min=1e-3, r_max=100.0), st.floats(min_value=-50, max_value=50, allow_subnormal=False))
def test_gauge_round_trip(pt, L):
    np_, r, v = pt
    s = HgmState(v, L, 0.5, 0.0)
    back = gauge_Q_to_F(np_, r, gauge_F_to_Q(np_, r, s))
    np.testing.assert_allclose(back.vec, v, rtol=1e-15, atol=0)
    assert back.log_scale == pytest.approx(L, abs=1e-12 * (1 + abs(gauge_exponent(np_, r))))
    assert back.integral() == pytest.approx(s.integral(), rel=1e-12)


def test_gauge_rebases_integral_mantissa():
    s = HgmState(np.ones(6), 2.0, 3.0, 0.0)
    q = gauge_F_to_Q(FIRST, 4.0, s, integral_log_offset=10.0)
    assert q.integral_log_offset == 10.0
    assert q.integral() == pytest.approx(s.integral(), rel=1e-14)


def test_recover_f_matches_series_in_both_forms():
    r = 0.3
    f, F = series_f_and_gradient(FIRST, r)
    s = HgmState(F, 0.0)
    m, L = recover_f(FIRST, r, s)
    assert m * math.exp(L) == pytest.approx(f, rel=1e-8)
    m, L = recover_f(FIRST, r, gauge_F_to_Q(FIRST, r, s))
    assert m * math.exp(L) == pytest.approx(f, rel=1e-8)


@pytest.mark.parametrize("d", [1, 2, 3, 6])
def test_recover_f_from_leading_state(d):
    np_ = NaturalParams.from_arrays([0.0] * d, [0.0] * d)
    r0 = 1e-3
    s = HgmState(leading_initial_state(np_, r0), (d + 1) * math.log(r0))
    m, L = recover_f(np_, r0, s)
    assert m * math.exp(L) == pytest.approx(r0 ** (d - 1) * surface_area(d), rel=1e-12)


def test_series_derivative_matches_pfaffian():
    rng = np.random.default_rng(3)
    h = 1e-4
    for _ in range(5):
        d = int(rng.integers(1, 5))
        np_ = NaturalParams.from_arrays(-rng.uniform(0.05, 1.5, d), rng.uniform(-1, 1, d))
        r = float(rng.uniform(0.1, 0.5))
        _, F = series_f_and_gradient(np_, r)
        _, Fp = series_f_and_gradient(np_, r + h)
        _, Fm = series_f_and_gradient(np_, r - h)
        fd = (Fp - Fm) / (2 * h)
        got = apply_P(np_, r, F)
        np.testing.assert_allclose(got, fd, rtol=1e-5, atol=1e-5 * np.abs(fd).max())


@given(points(r_min=0.01, r_max=30.0))
def test_compiled_q_rhs_matches_reference(pt):
    np_, r, q = pt
    prm = pack_params(np_.lam, np_.tau, np.zeros(0))
    got = eval_rhs(KIND_Q, r, q, prm)
    ref = apply_Q_rhs(np_, r, q)
    scale = np.abs(q).max() * (2 * r * abs(np_.lam).max() + abs(np_.tau).max() * (1 + r) + 2 / r + 1)
    np.testing.assert_allclose(got, ref, rtol=1e-13, atol=1e-13 * (scale + np.abs(ref).max()))


@given(points(r_min=0.01, r_max=5.0))
def test_compiled_f_rhs_matches_reference(pt):
    # w = r^{-(d+1)} F, so w' = r^{-(d+1)} P F - (d+1) w / r
    np_, r, w = pt
    d = np_.d
    prm = pack_params(np_.lam, np_.tau, np.zeros(0))
    got = eval_rhs(KIND_F, r, w, prm)
    ref = apply_P(np_, r, w) - (d + 1) * w / r
    scale = np.abs(w).max() * (2 * r * abs(np_.lam).max() + abs(np_.tau).max() * (1 + r) + (d + 2) / r)
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-13 * scale)


def test_rescaled_state_integral():
    q = RescaledState(np.ones(2), 1.0, 2.0, 0.5)
    assert q.integral() == pytest.approx(2.0 * math.exp(1.5))
