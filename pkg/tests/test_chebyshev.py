import math

import gmpy2
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from npprio.chebyshev import (
    ab_polynomials,
    alpha_beta,
    chebyshev_t,
    chebyshev_u,
    joint_via_convolution,
    lo_marginal_extended,
)
from npprio.model import ModelParams, ParameterError
from npprio.quadratic import joint_qr, lo_marginal_qr
from npprio.validation import mop


def lam_minus(p, params):
    b = 1 + params.r - params.r_lo * p
    return (b - math.sqrt(b * b - 4 * params.r_hi)) / 2


def eval_exact(coeffs, p, precision=512):
    with gmpy2.context(gmpy2.get_context(), precision=precision):
        acc = gmpy2.mpfr(0)
        for c in coeffs[::-1]:
            acc = acc * gmpy2.mpfr(p) + c
        return float(acc)


def test_chebyshev_small_orders():
    x = 1.3
    assert chebyshev_u(-2, x) == -1.0 and chebyshev_u(-1, x) == 0.0
    assert chebyshev_u(0, x) == 1.0 and chebyshev_u(1, x) == pytest.approx(2 * x)
    assert chebyshev_u(2, x) == pytest.approx(4 * x * x - 1)
    assert chebyshev_t(0, x) == 1.0 and chebyshev_t(2, x) == pytest.approx(2 * x * x - 1)


@given(st.floats(1.0, 1.5), st.integers(0, 6))
def test_pell_identity(x, n):
    t = chebyshev_t(n, x)
    u = chebyshev_u(n - 1, x)
    assert abs(t * t - (x * x - 1) * u * u - 1) <= 1e-14 * max(1.0, t * t)


def test_alpha_beta_first_terms():
    p = ModelParams(0.9, 0.6)
    for q in (0.0, 0.4, -0.7):
        b = 1 + 0.9 - p.r_lo * q
        assert alpha_beta(0, q, p) == (0.0, 1.0)
        assert alpha_beta(1, q, p) == (1.0, 0.0)
        a2, b2 = alpha_beta(2, q, p)
        assert a2 == pytest.approx(b, rel=1e-14)
        assert b2 == pytest.approx(-p.r_hi, rel=1e-14)


@pytest.mark.parametrize("m", [0, 1, 2, 5, 7, 12])
def test_power_identity(m):
    p = ModelParams(0.9, 0.6)
    q = 0.4
    lam = lam_minus(q, p)
    a, b = alpha_beta(m, q, p)
    assert a * lam + b == pytest.approx(lam ** m, rel=1e-11)


def test_beta_alpha_relation():
    # beta_m = -r1 alpha_{m-1}; at m = 0 this needs alpha_{-1} = -1/r1
    p = ModelParams(0.8, 0.35)
    q = 0.3
    for m in range(1, 10):
        assert alpha_beta(m, q, p)[1] == pytest.approx(-p.r_hi * alpha_beta(m - 1, q, p)[0], rel=1e-13)
    x = (1 + p.r - p.r_lo * q) / (2 * math.sqrt(p.r_hi))
    alpha_minus_one = p.r_hi ** -1 * chebyshev_u(-2, x)
    assert alpha_minus_one == pytest.approx(-1 / p.r_hi)
    assert alpha_beta(0, q, p)[1] == pytest.approx(-p.r_hi * alpha_minus_one)


def test_alpha_beta_refuses_nu_zero():
    p = ModelParams(0.5, 0.0)
    assert alpha_beta(1, 0.2, p) == (1.0, 0.0)
    with pytest.raises(ParameterError):
        alpha_beta(2, 0.2, p)
    with pytest.raises(ParameterError):
        ab_polynomials(3, p)


def test_ab_at_m_zero():
    p = ModelParams(0.9, 0.5)
    ab = ab_polynomials(0, p)
    assert list(ab.a_coeffs) == [pytest.approx(0.1, rel=1e-15)]
    assert ab.b_coeffs[0] == pytest.approx(0.0, abs=1e-300)
    assert ab.b_coeffs[1] == pytest.approx(p.r_lo, rel=1e-15)


@pytest.mark.parametrize("m", [0, 1, 3, 8, 20])
def test_ab_degrees(m):
    ab = ab_polynomials(m, ModelParams(0.85, 0.4))
    assert len(ab.a_coeffs) == m + 1 and ab.a_coeffs[m] != 0
    # B^(m) has degree m + 1 (already at m = 0 it is r_lo p)
    assert len(ab.b_coeffs) == m + 2 and ab.b_coeffs[m + 1] != 0


@pytest.mark.parametrize("m", [0, 1, 4, 9, 30])
def test_ab_sum_at_one(m):
    p = ModelParams(0.9, 0.6)
    ab = ab_polynomials(m, p)
    total = eval_exact(ab.a_exact, 1.0) + eval_exact(ab.b_exact, 1.0)
    assert total == pytest.approx((1 - p.r_hi) * p.r_hi ** m, rel=1e-12)


@pytest.mark.parametrize("m", [2, 6, 15])
def test_ab_match_point_evaluation(m):
    p = ModelParams(0.9, 0.6)
    ab = ab_polynomials(m, p)
    for q in (0.0, 0.3, 1.05):
        a_next = alpha_beta(m + 1, q, p)[0]
        a_m = alpha_beta(m, q, p)[0]
        assert eval_exact(ab.a_exact, q) == pytest.approx((1 - p.r) * (a_next - a_m), rel=1e-11)


def test_ab_series_sums():
    p = ModelParams(0.9, 0.5)
    # p = 1: A^(m)(1) = (1 - r) r1^m, a plain geometric series
    a1 = [(1 - p.r) * (alpha_beta(m + 1, 1.0, p)[0] - alpha_beta(m, 1.0, p)[0]) for m in range(200)]
    assert sum(a1) == pytest.approx((1 - p.r) / (1 - p.r_hi), rel=1e-12)
    # for p in (1, 1/r] both roots lie inside the unit circle and the sums telescope to 0 and 1
    q = 0.5 * (1 + 1 / p.r)
    b = 1 + p.r - p.r_lo * q
    lam_plus = (b + math.sqrt(b * b - 4 * p.r_hi)) / 2
    assert lam_plus < 1
    n_terms = 800
    alpha = [alpha_beta(m, q, p)[0] for m in range(n_terms + 2)]
    a_vals = [(1 - p.r) * (alpha[m + 1] - alpha[m]) for m in range(n_terms + 1)]
    sa = sum(a_vals[:n_terms])
    sb = 1.0 + sum((-(1 - p.r_lo * q) * a_vals[m] + (p.r_hi * a_vals[m - 1] if m else 0.0)) / (1 - p.r)
                   for m in range(n_terms))
    tail = 10 * lam_plus ** n_terms / (1 - lam_plus)
    assert abs(sa) <= tail + 1e-13
    assert abs(sb - 1) <= tail + 1e-13


def test_ab_point_form_matches_coefficients():
    p = ModelParams(0.9, 0.5)
    q = 0.5 * (1 + 1 / p.r)
    a_prev = 0.0
    for m in range(8):
        a_m = (1 - p.r) * (alpha_beta(m + 1, q, p)[0] - alpha_beta(m, q, p)[0])
        b_m = (-(1 - p.r_lo * q) * a_m + p.r_hi * a_prev) / (1 - p.r) + (1.0 if m == 0 else 0.0)
        ab = ab_polynomials(m, p)
        assert eval_exact(ab.b_exact, q) == pytest.approx(b_m, rel=1e-11, abs=1e-15)
        a_prev = a_m


# convolutional reconstruction ----------------------------------------------------------

def test_extended_marginal_matches_qr():
    p = ModelParams(0.9, 0.5)
    assert np.allclose(lo_marginal_extended(p, 200).values, lo_marginal_qr(p, 200).values, rtol=1e-12)


def test_reconstruction_matches_qr_to_twelve_digits():
    p = ModelParams(0.9, 0.5)
    rep = mop(joint_via_convolution(p, 50, 50), joint_qr(p, 50, 50), 1e-20)
    assert rep.xi >= 12


def test_reconstruction_special_columns():
    p = ModelParams(0.8, 0.3)
    j = joint_via_convolution(p, 30, 30).values
    f_lo = lo_marginal_extended(p, 30).values
    assert j[0, 0] == pytest.approx(1 - p.r, rel=1e-14)
    assert np.allclose(j[1:, 0], p.r_lo * f_lo[:-1], rtol=1e-13)
    for m in (0, 3, 10):
        ab = ab_polynomials(m, p)
        assert j[0, m] == pytest.approx(ab.a_coeffs[0] + ab.b_coeffs[0] * f_lo[0], rel=1e-10)


def test_a_polynomials_vanish_beyond_degree():
    for m in range(6):
        assert len(ab_polynomials(m, ModelParams(0.7, 0.5)).a_coeffs) == m + 1


def test_reconstruction_from_float_marginal_is_unreliable():
    # binary64 marginal errors are amplified by the alternating coefficients
    p = ModelParams(0.9, 0.5)
    bad = joint_via_convolution(p, 120, 120, lo_marginal=lo_marginal_qr(p, 120))
    good = joint_qr(p, 120, 120).values
    with np.errstate(invalid="ignore", divide="ignore"):
        worst = np.nanmax(np.abs(bad.values / good - 1))
    assert worst > 1e-3
    assert bad.meta["marginal"] == "supplied"


def test_reconstruction_degenerate():
    for nu in (0.0, 1.0):
        p = ModelParams(0.6, nu)
        assert np.array_equal(joint_via_convolution(p, 5, 6).values, joint_qr(p, 5, 6).values)
