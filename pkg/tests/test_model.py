import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from npprio.model import (
    ModelParams,
    ParameterError,
    agg_exact,
    condition_decomposition,
    derive_constants,
    empty_system_probability,
    hi_marginal_exact,
    joint_single_class,
    no_wait_probability,
    roots,
    scaled_upper_incomplete_gamma,
    split_intensity,
    xhi_exact,
)
from npprio.pmf import PmfVector

unit_open = st.floats(min_value=1e-6, max_value=1 - 1e-6)
unit_nu = st.floats(min_value=1e-6, max_value=1 - 1e-6)


def erlang_c(a, n):
    """Classical Erlang C waiting probability with offered load a."""
    top = a ** n / math.factorial(n) * n / (n - a)
    return top / (sum(a ** k / math.factorial(k) for k in range(n)) + top)


def mmc_empty(r, n):
    a = n * r
    return 1.0 / (sum(a ** k / math.factorial(k) for k in range(n)) + a ** n / (math.factorial(n) * (1 - r)))


# parameters -----------------------------------------------------------------

@pytest.mark.parametrize("r", [1.0, 1.5, 0.0, -0.1, float("nan")])
def test_rejects_unstable_or_empty_r(r):
    with pytest.raises(ParameterError):
        ModelParams(r, 0.5)


@pytest.mark.parametrize("nu", [-0.01, 1.01, float("nan")])
def test_rejects_nu_outside_unit_interval(nu):
    with pytest.raises(ParameterError):
        ModelParams(0.5, nu)


def test_rejects_bad_servers_and_rate():
    with pytest.raises(ParameterError):
        ModelParams(0.5, 0.5, n_servers=0)
    with pytest.raises(ParameterError):
        ModelParams(0.5, 0.5, mu=-1.0)


@given(unit_open, st.floats(min_value=0.0, max_value=1.0))
def test_intensities_sum_exactly(r, nu):
    p = ModelParams(r, nu)
    assert p.r_hi + p.r_lo == r
    assert abs(p.r_hi - nu * r) <= 0.5 * np.spacing(r)


def test_split_handles_rounding_ties():
    # found by random search: plain nu*r and r - nu*r miss r by one ulp here
    rng = np.random.default_rng(1)
    misses = 0
    for r, nu in rng.random((20000, 2)):
        r_hi = nu * r
        misses += r_hi + (r - r_hi) != r
        assert sum(split_intensity(r, nu)) == r
    assert misses > 0


# roots and derived constants ------------------------------------------------

def test_roots_at_nu_one():
    z0, z1, z2 = roots(0.99, 1.0)
    assert (z0, z1, z2) == (1.0, 0.99, 1.0)


def test_roots_at_nu_zero():
    assert roots(0.5, 0.0) == (0.0, 0.0, 1.5)


def test_roots_figure_example():
    z0, z1, z2 = roots(0.95, 0.75)
    ref = np.roots([1.0, -1.95, 0.7125])
    assert z0 == 0.75
    assert z1 == pytest.approx(min(ref), abs=1e-14)
    assert z2 == pytest.approx(max(ref), abs=1e-14)
    assert z1 == pytest.approx(0.487019, abs=1e-6)
    assert z2 == pytest.approx(1.462981, abs=1e-6)
    assert z1 * z2 == pytest.approx(0.7125, rel=1e-15)


@given(unit_open, unit_nu)
def test_root_identities_within_four_ulps(r, nu):
    _, z1, z2 = roots(r, nu)
    assert abs(z1 + z2 - (1 + r)) <= 4 * np.spacing(1 + r)
    assert abs(z1 * z2 - nu * r) <= 4 * np.spacing(nu * r)


def test_root_identities_ten_thousand_points():
    rng = np.random.default_rng(20261016)
    for r, nu in rng.uniform(1e-9, 1, (10000, 2)):
        _, z1, z2 = roots(r, nu)
        assert abs(z1 + z2 - (1 + r)) <= 4 * np.spacing(1 + r)
        assert abs(z1 * z2 - nu * r) <= 4 * np.spacing(nu * r)


@given(unit_open, unit_nu)
def test_pole_ordering_and_chi(r, nu):
    c = derive_constants(ModelParams(r, nu))
    assert 0 < c.z1 < c.z0 == nu
    assert c.z2 > 1
    # chi - 1/r is minimal (zero) at the critical point nu = r
    assert c.chi >= (1 / r) * (1 - 1e-12)
    if abs(nu - r) > 1e-3:
        assert c.chi > 1 / r
    for v in (c.kappa, c.a_ratio, c.b_ratio, c.gamma_ratio):
        assert math.isfinite(v)


def test_constants_definitions():
    p = ModelParams(0.95, 0.75)
    c = derive_constants(p)
    w = c.z2 - c.z1
    assert c.a_ratio == pytest.approx(p.r_lo / w ** 2, rel=1e-15)
    assert c.b_ratio == pytest.approx(w / (1 - c.z1 / c.z0), rel=1e-15)
    assert c.gamma_ratio == pytest.approx(p.r_lo / (w * (1 - c.z1 / c.z0)), rel=1e-15)
    assert c.chi == pytest.approx(1 + (1 - math.sqrt(p.r_hi)) ** 2 / p.r_lo, rel=1e-15)


@pytest.mark.parametrize("nu", [0.0, 1.0])
def test_degenerate_constants_are_flagged(nu):
    c = derive_constants(ModelParams(0.7, nu))
    assert c.degenerate
    assert c.kappa is None and c.chi is None


# no-wait and empty-system probabilities --------------------------------------

@pytest.mark.parametrize("r", [0.1, 0.5, 0.9, 0.999])
def test_no_wait_single_server(r):
    assert no_wait_probability(r, 1) == pytest.approx(1 - r, rel=1e-15)


def test_no_wait_mm2_example():
    assert no_wait_probability(0.75, 2) == pytest.approx(5 / 14, rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 20, 60])
@pytest.mark.parametrize("r", [0.05, 0.3, 0.75, 0.95, 0.999])
def test_no_wait_matches_erlang_c(r, n):
    assert 1 - no_wait_probability(r, n) == pytest.approx(erlang_c(n * r, n), rel=1e-12)


def test_no_wait_limits():
    assert no_wait_probability(0.0, 5) == 1.0
    assert no_wait_probability(1e-12, 5) == pytest.approx(1.0, abs=1e-11)


@pytest.mark.parametrize("n", [1, 2, 5, 17])
def test_no_wait_decreasing_in_r(n):
    vals = np.array([no_wait_probability(r, n) for r in np.linspace(0.01, 0.99, 99)])
    d = np.diff(vals)
    assert np.all(d <= 0)
    # strict wherever the waiting probability is resolvable in binary64
    assert np.all(d[1 - vals[1:] > 1e-10] < 0)


def test_empty_system_examples():
    for r in (0.2, 0.75, 0.99):
        assert empty_system_probability(r, 1) == pytest.approx(1 - r, rel=1e-14)
    assert empty_system_probability(0.75, 2) == pytest.approx(1 / 7, rel=1e-14)
    assert empty_system_probability(1e-12, 4) == pytest.approx(1.0, abs=1e-11)


@pytest.mark.parametrize("n", [1, 2, 3, 10, 40])
@pytest.mark.parametrize("r", [0.1, 0.5, 0.9, 0.99])
def test_empty_system_matches_mmc(r, n):
    assert empty_system_probability(r, n) == pytest.approx(mmc_empty(r, n), rel=1e-12)


def test_scaled_gamma_simple_shapes():
    for x in (0.1, 1.0, 7.5, 100.0):
        assert scaled_upper_incomplete_gamma(x, 1.0) == pytest.approx(1 / x, rel=1e-14)
    assert scaled_upper_incomplete_gamma(1.0, 2.0) == pytest.approx(4.0, rel=1e-14)


def test_scaled_gamma_quadrature_oracle():
    x, s = 10.0, 5.0
    integral, _ = quad(lambda t: t ** (s - 1) * math.exp(-(t - x)), x, np.inf, epsabs=0, epsrel=1e-13)
    assert scaled_upper_incomplete_gamma(x, s) == pytest.approx(s * x ** -s * integral, rel=1e-12)


@pytest.mark.parametrize("x", [0.1, 0.37, 1.0, 4.2, 17.0, 55.0, 100.0])
@pytest.mark.parametrize("shape", [1.0, 1.5, 3.0, 12.0, 33.3, 64.0])
def test_scaled_gamma_against_mpmath(x, shape):
    mpmath.mp.dps = 40
    ref = shape * mpmath.exp(x) * mpmath.power(x, -shape) * mpmath.gammainc(shape, x, mpmath.inf)
    assert scaled_upper_incomplete_gamma(x, shape) == pytest.approx(float(ref), rel=1e-13)


def test_scaled_gamma_domain():
    with pytest.raises(ParameterError):
        scaled_upper_incomplete_gamma(0.0, 1.0)
    with pytest.raises(ParameterError):
        scaled_upper_incomplete_gamma(1.0, -1.0)


# closed forms -----------------------------------------------------------------

def test_hi_marginal_examples():
    p = ModelParams(0.9, 0.5)
    assert hi_marginal_exact(p, 0) == pytest.approx(1 - 0.45)
    assert hi_marginal_exact(p, 3) == pytest.approx(0.05011875, rel=1e-14)
    q = ModelParams(0.9, 0.0)
    assert list(hi_marginal_exact(q, np.arange(4))) == [1.0, 0.0, 0.0, 0.0]


@given(unit_open, st.floats(min_value=0, max_value=1), st.integers(0, 200))
def test_hi_marginal_partial_sums(r, nu, big_m):
    p = ModelParams(r, nu)
    s = hi_marginal_exact(p, np.arange(big_m + 1)).sum()
    assert s == pytest.approx(1 - p.r_hi ** (big_m + 1), abs=1e-13)


def test_agg_and_xhi_examples():
    p = ModelParams(0.95, 0.75)
    assert agg_exact(0.95, 0) == pytest.approx(0.05)
    assert xhi_exact(p, 0) == pytest.approx(0.05)
    assert xhi_exact(p, 2) == pytest.approx(0.05 * (0.7125 / 1.462981) ** 2, rel=1e-6)
    q = ModelParams(0.8, 1.0)
    m = np.arange(30)
    assert np.array_equal(xhi_exact(q, m), [(1 - 0.8) * 0.8 ** k for k in range(30)])


def test_negative_index_rejected():
    with pytest.raises(ParameterError):
        agg_exact(0.5, -1)


def test_condition_decomposition():
    rng = np.random.default_rng(3)
    f = rng.random(40)
    f /= f.sum()
    for n, r in ((1, 0.6), (2, 0.75), (5, 0.9)):
        p = ModelParams(r, 0.4, n_servers=n)
        pnw = no_wait_probability(r, n)
        out = condition_decomposition(p, f)
        assert out[0] - (1 - pnw) * f[0] == pytest.approx(pnw, rel=1e-14)
        assert out.sum() == pytest.approx(1.0, abs=1e-14)
    assert 1 - no_wait_probability(0.6, 1) == pytest.approx(0.6)
    assert 1 - no_wait_probability(0.75, 2) == pytest.approx(9 / 14)


def test_condition_decomposition_keeps_type():
    p = ModelParams(0.75, 0.3, n_servers=2)
    v = PmfVector.build((1 - 0.75) * 0.75 ** np.arange(100), "aggregate", "exact", p)
    out = condition_decomposition(p, v)
    assert isinstance(out, PmfVector) and not out.conditional
    with pytest.raises(ParameterError):
        condition_decomposition(ModelParams(0.75, 0.3), v)


def test_wait_conditional_law_ignores_server_count():
    from npprio.quadratic import joint_qr
    from npprio.rintegral import joint_ri
    a, b = ModelParams(0.8, 0.3, n_servers=1), ModelParams(0.8, 0.3, n_servers=17)
    assert np.array_equal(joint_qr(a, 30, 30).values, joint_qr(b, 30, 30).values)
    assert np.array_equal(joint_ri(a, 30, 30).values, joint_ri(b, 30, 30).values)


@pytest.mark.parametrize("nu", [0.0, 1.0])
def test_single_class_joint(nu):
    v = joint_single_class(ModelParams(0.6, nu), 5, 5)
    assert v.sum() == pytest.approx(1 - 0.6 ** 6, rel=1e-14)


def test_critical_chi_equals_inverse_r():
    for r in (0.3, 0.5, 0.9):
        assert derive_constants(ModelParams(r, r)).chi == pytest.approx(1 / r, rel=1e-14)
