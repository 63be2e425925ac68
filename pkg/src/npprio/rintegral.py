"""R-integral engine.

The R-integrals are the contour integrals

    R^m_n = (1/2 pi i) \\oint z^m / ((z - z0) [(z - z1)(z - z2)]^n) dz

taken around the pole z1 only.  Every joint and marginal probability is a
short linear combination of them.  They are evaluated through the scaled
quantities Rhat^m_{n+1} = (-r_lo)^n R^m_{n+1}, which have a finite-sum
representation

    Rhat^m_{n+1} = kappa * sum_k a^(n-k) C(2n-k, n) gamma^k z0^(m-k-1) P_k^m(z1/z0)

where P_k^m(x) is the probability that a Binomial(m, 1-x) variable is <= k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dtrmm

from ._backend import kernels
from ._purepy import _scaled_power
from .model import (
    ModelParams,
    ParameterError,
    joint_single_class,
    lo_marginal_single_class,
    roots,
    series_constants,
)
from .pmf import JointPmf, PmfVector

#: switch from the backward to the forward binomial-term walk at this x
D_THRESHOLD = 0.5
#: neighbourhood of nu = 0 in which the small-nu limits are offered
NU0_BAND = 1e-2


@dataclass(frozen=True, eq=False)
class RIntegralTable:
    """Rhat[n, m] = (-r_lo)^n R^m_{n+1} for n = 0..n_max, m = 0..m_max.

    Entries with m < n can overflow for small nu and large n; every entry the
    PMF formulas use has m >= n.
    """

    r_hat: np.ndarray
    p_table: np.ndarray
    kappa: float
    a: float
    b: float
    gamma: float
    z0: float
    z1: float
    z2: float
    r_lo: float

    def unscaled(self, n: int, m: int) -> float:
        """R^m_{n+1} (may overflow for large n)."""
        return self.r_hat[n, m] / (-self.r_lo) ** n


def _check_series_domain(params: ModelParams, at_endpoint: bool):
    if params.nu == 0.0 or (params.nu == 1.0 and not at_endpoint):
        raise ParameterError("the R-integral series needs 0 < nu < 1; use the single-class reductions")


def binomial_terms(m: int, x: float, direction: str | None = None, threshold: float = D_THRESHOLD) -> np.ndarray:
    """D_l^m(x) = C(m, l) x^(m-l) (1-x)^l for l = 0..m by a ratio walk.

    ``direction`` is "forward" (start at D_0 = x^m) or "backward" (start at
    D_m = (1-x)^m); by default forward when x >= threshold.
    """
    if not 0.0 <= x <= 1.0:
        raise ParameterError("x must be in [0, 1]")
    if direction is None:
        direction = "forward" if x >= threshold else "backward"
    out = np.zeros(m + 1)
    if direction == "forward":
        if x == 0.0:
            out[m] = 1.0
            return out
        q = 1.0 / x - 1.0
        d, e = _power_pair(x, m)
        out[0] = math.ldexp(d, e)
        for l in range(1, m + 1):
            d, ee = math.frexp(d * (((m + 1.0) / l - 1.0) * q))
            e += ee
            out[l] = math.ldexp(d, e)
    elif direction == "backward":
        if x == 1.0:
            out[0] = 1.0
            return out
        y = 1.0 - x
        q = x / y
        d, e = _power_pair(y, m)
        out[m] = math.ldexp(d, e)
        for l in range(m, 0, -1):
            d, ee = math.frexp(d * (l / (m - l + 1.0) * q))
            e += ee
            out[l - 1] = math.ldexp(d, e)
    else:
        raise ParameterError("direction must be 'forward' or 'backward'")
    return out


def _power_pair(x: float, n: int) -> tuple[float, int]:
    # x**n as (mantissa, exponent), safe against underflow
    v = x ** n
    if v >= 1e-280:
        return math.frexp(v)
    return _scaled_power(x, n)


def d_cumulative(m: int, x: float, k: int, direction: str | None = None,
                 threshold: float = D_THRESHOLD) -> float:
    """P_k^m(x) as the running sum of the binomial terms D_0..D_k."""
    if k >= m:
        return 1.0
    return float(np.sum(binomial_terms(m, x, direction, threshold)[: k + 1]))


def p_polynomial_table(x: float, m_max: int, k_max: int, method: str = "cumulative") -> np.ndarray:
    """P[k, m] = P_k^m(x) for k = 0..k_max, m = 0..m_max.

    ``cumulative`` sums binomial terms (the production path).  ``explicit``
    uses P = 1 - (1-x)^(k+1) sum_l C(k+l, l) x^l and ``recurrence`` steps in
    m; both are for cross-checks only, the recurrence is unstable for large m.
    """
    if not 0.0 <= x < 1.0:
        raise ParameterError("x must be in [0, 1)")
    if method == "cumulative":
        if x == 0.0:
            p = np.ones((k_max + 1, m_max + 1))
            p[0, 1:] = 0.0
            return p
        p = kernels.binomial_cdf_table(x, k_max, m_max, x >= D_THRESHOLD)
        # summed densities can overshoot a CDF of 1 by a few ulps
        return np.minimum(p, 1.0, out=p)
    p = np.ones((k_max + 1, m_max + 1))
    if method == "explicit":
        for k in range(k_max + 1):
            # partial sums of C(k+l, l) x^l, l = 0..m-k-1
            terms = np.ones(max(m_max - k, 1))
            for l in range(1, terms.size):
                terms[l] = terms[l - 1] * (k + l) / l * x
            partial = np.cumsum(terms)
            for m in range(k + 1, m_max + 1):
                p[k, m] = 1.0 - (1.0 - x) ** (k + 1) * partial[m - k - 1]
        return p
    if method == "recurrence":
        p[0, :] = np.power(x, np.arange(m_max + 1))
        for m in range(1, m_max):
            for k in range(1, min(k_max, m_max) + 1):
                p[k, m + 1] = p[k, m] + (m / k) * (1.0 - x) * (p[k - 1, m] - p[k - 1, m - 1])
        return p
    raise ParameterError(f"unknown method {method!r}")


def lower_binomial_matrix(a: float, n_max: int) -> np.ndarray:
    """L[n, k] = a^(n-k) C(2n-k, n) for k <= n, built by running products."""
    size = n_max + 1
    lmat = np.zeros((size, size))
    nvec = np.arange(size, dtype=np.float64)
    run = np.ones(size)
    lmat[np.arange(size), np.arange(size)] = 1.0
    for l in range(1, size):
        rows = nvec[l:]
        run[l:] = run[l:] * ((1.0 + rows / l) * a)
        lmat[np.arange(l, size), np.arange(0, size - l)] = run[l:]
    return lmat


def r_hat_table(params: ModelParams, n_max: int, m_max: int, at_endpoint: bool = False) -> RIntegralTable:
    """Scaled R-integrals for rows n = 0..n_max and columns m = 0..m_max.

    ``at_endpoint`` admits nu = 1, where the series stays finite
    (z0 = z2 = 1, z1 = r).
    """
    _check_series_domain(params, at_endpoint)
    r, nu = params.r, params.nu
    z0, z1, z2 = roots(r, nu)
    kappa, a, b, gamma = series_constants(r, nu)
    x = z1 / z0
    p = p_polynomial_table(x, m_max, n_max)
    k = np.arange(n_max + 1, dtype=np.float64)[:, None]
    mcol = np.arange(m_max + 1, dtype=np.float64)[None, :]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        q = np.power(gamma, k) * np.power(z0, mcol - k - 1.0) * p
        lmat = lower_binomial_matrix(a, n_max)
        # triangular product: the zero upper half never multiplies the
        # (possibly non-finite) entries of q with m < k
        r_hat = dtrmm(kappa, lmat, q, lower=1)
    return RIntegralTable(r_hat, p, kappa, a, b, gamma, z0, z1, z2, params.r_lo)


def joint_ri(params: ModelParams, n_max: int, m_max: int, at_endpoint: bool = False) -> JointPmf:
    """Joint law from differences of scaled R-integrals."""
    if params.nu == 0.0 or (params.nu == 1.0 and not at_endpoint):
        return JointPmf.build(joint_single_class(params, n_max, m_max), "ri", params)
    tab = r_hat_table(params, n_max, n_max + m_max + 3, at_endpoint)
    rh = tab.r_hat
    n = np.arange(n_max + 1)[:, None]
    c = n + np.arange(m_max + 1)[None, :]
    z12 = tab.z1 * tab.z2
    d_hi = rh[n, c + 3] - rh[n, c + 2]
    d_lo = rh[n, c + 1] - rh[n, c]
    vals = (1.0 - params.r) / params.r * (d_hi - z12 * d_lo)
    return JointPmf.build(vals, "ri", params)


def lo_marginal_ri(params: ModelParams, n_max: int) -> PmfVector:
    if params.degenerate:
        return PmfVector.build(lo_marginal_single_class(params, n_max), "lo_marginal", "ri", params)
    tab = r_hat_table(params, n_max, n_max + 2)
    rh = tab.r_hat
    n = np.arange(n_max + 1)
    vals = -(1.0 - params.r) / params.r * (rh[n, n + 2] - tab.z1 * tab.z2 * rh[n, n])
    return PmfVector.build(vals, "lo_marginal", "ri", params)


def xlo_ri(params: ModelParams, n_max: int) -> PmfVector:
    """f(n, 0): n low-priority clients waiting and no high-priority ones."""
    if params.degenerate:
        vals = joint_single_class(params, n_max, 0)[:, 0]
        return PmfVector.build(vals, "xlo", "ri", params)
    tab = r_hat_table(params, n_max, n_max + 3)
    rh = tab.r_hat
    n = np.arange(n_max + 1)
    z12 = tab.z1 * tab.z2
    vals = (1.0 - params.r) / params.r * ((rh[n, n + 3] - rh[n, n + 2]) - z12 * (rh[n, n + 1] - rh[n, n]))
    return PmfVector.build(vals, "xlo", "ri", params)


def condition_estimate(params: ModelParams) -> dict:
    """Quantities that govern the accuracy of the series near nu = 0 and nu = 1."""
    _check_series_domain(params, False)
    z0, z1, _ = roots(params.r, params.nu)
    kappa, a, _, gamma = series_constants(params.r, params.nu)
    return {"gamma": gamma, "one_minus_x": 1.0 - z1 / z0, "kappa": kappa, "a": a}


@dataclass(frozen=True, eq=False)
class BackwardsDiagnostic:
    """Unscaled R^m_n from the backward recurrence next to the series values.

    ``digits[n, m]`` is -log10 of the relative disagreement (capped at 16);
    row 0 (R^m_0 = 0) is left at 16.
    """

    recurrence: np.ndarray
    series: np.ndarray
    digits: np.ndarray


def seed_values(params: ModelParams, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """(R^0_{n+1}, R^1_{n+1}) for n = 0..n_max."""
    z0, z1, z2 = roots(params.r, params.nu)
    u = z1 - z0
    w = z1 - z2
    x = u / w
    r0 = np.empty(n_max + 1)
    r1 = np.empty(n_max + 1)
    for n in range(n_max + 1):
        # p_n(x) = sum_k C(k+n, k) x^k
        term, pn = 1.0, 1.0
        for k in range(1, n + 1):
            term *= (n + k) / k * x
            pn += term
        sgn = -1.0 if n % 2 else 1.0
        r0[n] = sgn / (u * w) ** (n + 1) * pn
        r1[n] = sgn * math.comb(2 * n, n) / w ** (2 * n + 1) + z0 * r0[n]
    return r0, r1


def backwards_recurrence_diagnostic(params: ModelParams, n_max: int, m_max: int) -> BackwardsDiagnostic:
    """Run the (unstable) recurrence in m from the exact seeds.

    R^m_n = R^{m-2}_{n-1} - z1 z2 R^{m-2}_n + (z1 + z2) R^{m-1}_n, with
    R^m_0 = 0.  Rows are the subscript n = 0..n_max + 1.
    """
    _check_series_domain(params, False)
    if m_max < 1:
        raise ParameterError("m_max must be at least 1")
    z0, z1, z2 = roots(params.r, params.nu)
    s, p = z1 + z2, z1 * z2
    r0, r1 = seed_values(params, n_max)
    rec = np.zeros((n_max + 2, m_max + 1))
    rec[1:, 0] = r0
    rec[1:, 1] = r1
    for n in range(1, n_max + 2):
        for m in range(2, m_max + 1):
            rec[n, m] = rec[n - 1, m - 2] - p * rec[n, m - 2] + s * rec[n, m - 1]
    tab = r_hat_table(params, n_max, m_max)
    ser = np.zeros_like(rec)
    scale = np.power(-params.r_lo, np.arange(n_max + 1, dtype=np.float64))[:, None]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ser[1:] = tab.r_hat / scale
        rel = np.abs(rec / ser - 1.0)
        digits = np.minimum(16.0, -np.log10(rel))
    digits[0] = 16.0
    digits[~np.isfinite(digits)] = 0.0
    return BackwardsDiagnostic(rec, ser, digits)


def limiting_r_integral(r: float, n: int, m: int, nu: float) -> float:
    """Limit forms of R^m_n as nu -> 0 (for 0 < nu <= NU0_BAND) or at nu = 1.

    Small nu:  0 for m > n;  (-1)^(n-1) [1 - (1+r)^(-n)] for m = n;
    (-1)^(n-1) / nu^(n-m) for m < n.  Both subscripts here are the integral's n.
    The m = n value is minus the residues at z0 -> (-1)^n and z2 -> -(1+r)^(-n)
    (times (-1)^(n-1)); it agrees with r^(n-1)/(1+r)^(2n-1) only at n = 1.
    """
    if not 0.0 < r < 1.0:
        raise ParameterError("r must be in (0, 1)")
    if n < 0 or m < 0:
        raise ParameterError("indices must be nonnegative")
    if n == 0:
        return 0.0
    sgn = -1.0 if (n - 1) % 2 else 1.0
    if nu == 1.0:
        # R^m_{j+1} = (-1)^j (1-r)^(-2j-2) sum_k C(2j-k, j) P_k^m(r)
        j = n - 1
        p = p_polynomial_table(r, m, j)[:, m]
        c = np.array([math.comb(2 * j - k, j) for k in range(j + 1)], dtype=np.float64)
        return sgn * float(c @ p) / (1.0 - r) ** (2 * j + 2)
    if not 0.0 < nu <= NU0_BAND:
        raise ParameterError(f"limit forms need 0 < nu <= {NU0_BAND} or nu == 1")
    if m > n:
        return 0.0
    if m == n:
        return sgn * (1.0 - (1.0 + r) ** (-n))
    return sgn / nu ** (n - m)
