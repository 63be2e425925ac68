"""Convolutional form of the joint law.

Column m of the joint law is a polynomial correction plus a polynomial
filter applied to the low-priority marginal:

    f(n, m) = A^(m)_n + sum_k B^(m)_k f_lo(n - k),

where A^(m), B^(m) follow from writing lambda_-(p)^m = alpha_m(p) lambda_-(p) + beta_m(p).
With b(p) = 1 + r - r_lo p, alpha obeys alpha_{m+1} = b alpha_m - r_hi alpha_{m-1}
(alpha_0 = 0, alpha_1 = 1), i.e. alpha_m = r_hi^((m-1)/2) U_{m-1}(b / (2 sqrt(r_hi))).

The coefficients of A^(m) and B^(m) grow roughly like (z2^2 / r_hi)^m and
alternate in sign, so the sum cancels catastrophically in binary64.  The
reconstruction therefore runs in extended precision (gmpy2/MPFR), including
the marginal it filters, and the working precision is raised until an a
posteriori rounding bound certifies every returned entry to double accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
import numpy as np

from .model import ModelParams, ParameterError, joint_single_class, lo_marginal_single_class, roots
from .pmf import JointPmf, PmfVector


def chebyshev_u(n: int, x: float) -> float:
    """U_n(x) by the three-term recurrence, with U_{-1} = 0 and U_{-2} = -1."""
    if n == -2:
        return -1.0
    u_prev, u = 0.0, 1.0
    if n == -1:
        return 0.0
    for _ in range(n):
        u_prev, u = u, 2.0 * x * u - u_prev
    return u


def chebyshev_t(n: int, x: float) -> float:
    t_prev, t = 1.0, x
    if n == 0:
        return 1.0
    for _ in range(n - 1):
        t_prev, t = t, 2.0 * x * t - t_prev
    return t


def alpha_beta(m: int, p: float, params: ModelParams) -> tuple[float, float]:
    """(alpha_m(p), beta_m(p)) with lambda_-^m = alpha_m lambda_- + beta_m."""
    if m < 0:
        raise ParameterError("m must be nonnegative")
    r1 = params.r_hi
    if m <= 1:
        return (0.0, 1.0) if m == 0 else (1.0, 0.0)
    if r1 == 0.0:
        raise ParameterError("alpha/beta for m >= 2 need nu > 0")
    s = math.sqrt(r1)
    x = (1.0 + params.r - params.r_lo * p) / (2.0 * s)
    alpha = s ** (m - 1) * chebyshev_u(m - 1, x)
    beta = -(s ** m) * chebyshev_u(m - 2, x)
    return alpha, beta


@dataclass(frozen=True, eq=False)
class ABPolynomials:
    """Coefficients (ascending powers of p) of A^(m) and B^(m).

    ``a_exact``/``b_exact`` hold the MPFR values the float arrays were
    rounded from.
    """

    m: int
    a_coeffs: np.ndarray
    b_coeffs: np.ndarray
    a_exact: np.ndarray
    b_exact: np.ndarray
    precision: int


def _mp(v):
    return gmpy2.mpfr(v)


def _pad(c, size):
    out = np.empty(size, dtype=object)
    out[:] = _mp(0)
    out[: len(c)] = c
    return out


def _ab_sequence(params: ModelParams, m_max: int):
    """Yield (A^(m), B^(m)) as MPFR object arrays for m = 0..m_max.

    Must run inside a gmpy2 context of the desired precision.
    """
    if params.r_hi == 0.0 and m_max >= 2:
        raise ParameterError("A/B polynomials for m >= 2 need nu > 0")
    r = _mp(params.r)
    r1 = _mp(params.nu) * r
    r2 = r - r1
    one_r = 1 - r
    al_m = np.array([_mp(0)], dtype=object)
    al_next = np.array([_mp(1)], dtype=object)
    a_prev = None
    for m in range(m_max + 1):
        a_m = one_r * (al_next - _pad(al_m, m + 1))
        # B = (-(1 - r2 p) A^(m) + r1 A^(m-1)) / (1 - r); the r1 term is 1 at m = 0
        b_m = _pad(-a_m, m + 2)
        b_m[1:] += r2 * a_m
        b_m /= one_r
        if m == 0:
            b_m[0] += 1
        else:
            b_m[:m] += r1 * a_prev / one_r
        yield a_m, b_m
        a_prev = a_m
        nxt = _pad((1 + r) * al_next, m + 2)
        nxt[1:] -= r2 * al_next
        nxt[: len(al_m)] -= r1 * al_m
        al_m, al_next = al_next, nxt


def ab_polynomials(m: int, params: ModelParams, precision: int = 256) -> ABPolynomials:
    """A^(m) and B^(m) with coefficients built by recurrence at ``precision`` bits."""
    if m < 0:
        raise ParameterError("m must be nonnegative")
    with gmpy2.context(gmpy2.get_context(), precision=precision):
        for a_m, b_m in _ab_sequence(params, m):
            pass
        a_f = np.array([float(v) for v in a_m])
        b_f = np.array([float(v) for v in b_m])
    return ABPolynomials(m, a_f, b_f, a_m, b_m, precision)


def _lo_marginal_mp(params: ModelParams, n_max: int) -> np.ndarray:
    """Scaled marginal recurrence carried out in the current MPFR context."""
    r = _mp(params.r)
    r_lo = r - _mp(params.nu) * r
    d = gmpy2.sqrt((1 - r) ** 2 + 4 * r_lo)
    c2 = r_lo / d
    ft = np.empty(n_max + 1, dtype=object)
    ft[:] = _mp(0)
    dl = ft.copy()
    ft[0] = 2 / (1 - r + d)
    for n in range(1, n_max + 1):
        dl[n - 1] = r * ft[n - 1]
        ft[n] = c2 * (ft[n - 1] + np.dot(ft[:n], dl[n - 1::-1]))
        dl[n - 1] = r * ft[n - 1] - ft[n]
    return (1 - r) * ft


def lo_marginal_extended(params: ModelParams, n_max: int, precision: int = 256) -> PmfVector:
    """Low-priority marginal from the scaled recurrence run at ``precision`` bits."""
    if params.degenerate:
        return PmfVector.build(lo_marginal_single_class(params, n_max), "lo_marginal", "cheb", params)
    with gmpy2.context(gmpy2.get_context(), precision=precision):
        vals = [float(v) for v in _lo_marginal_mp(params, n_max)]
    return PmfVector.build(vals, "lo_marginal", "cheb", params, precision=precision)


def _reconstruct(params, n_max, m_max, precision, f_lo_float):
    with gmpy2.context(gmpy2.get_context(), precision=precision):
        if f_lo_float is None:
            f_lo = _lo_marginal_mp(params, n_max)
        else:
            f_lo = np.array([_mp(float(v)) for v in f_lo_float], dtype=object)
        f_lo_abs = np.array([abs(float(v)) for v in f_lo])
        out = np.empty((n_max + 1, m_max + 1))
        bound = np.empty((n_max + 1, m_max + 1))
        for m, (a_m, b_m) in enumerate(_ab_sequence(params, m_max)):
            col = np.convolve(b_m, f_lo)[: n_max + 1]
            k = min(n_max + 1, len(a_m))
            col[:k] += a_m[:k]
            out[:, m] = [float(v) for v in col]
            with np.errstate(over="ignore"):
                mag = np.convolve(np.abs(b_m.astype(float)), f_lo_abs)[: n_max + 1]
                mag[:k] += np.abs(a_m[:k].astype(float))
            bound[:, m] = mag
    return out, bound


def joint_via_convolution(params: ModelParams, n_max: int, m_max: int,
                          lo_marginal: PmfVector | None = None,
                          precision: int | None = None, max_precision: int = 1 << 16) -> JointPmf:
    """Joint law rebuilt from the marginal through the A/B polynomials.

    Without ``lo_marginal`` the marginal is recomputed at the working
    precision, which is what makes the result accurate.  A supplied binary64
    marginal is used as given; its rounding errors are amplified by the
    polynomial coefficients and the result is only as good as that allows.
    With ``precision=None`` the precision is raised until the rounding bound
    sum_k |B_k| f_lo(n-k) * 2^-precision is below 2^-60 of every entry.
    """
    if params.degenerate:
        return JointPmf.build(joint_single_class(params, n_max, m_max), "cheb", params)
    f_lo_float = None if lo_marginal is None else np.asarray(lo_marginal.values)
    if f_lo_float is not None and f_lo_float.shape[0] < n_max + 1:
        raise ParameterError("supplied marginal is shorter than n_max + 1")
    adaptive = precision is None
    if adaptive:
        _, _, z2 = roots(params.r, params.nu)
        growth = math.log2(max(z2 * z2 / params.r_hi, 2.0)) + math.log2(1.0 / params.r_hi)
        precision = int(128 + m_max * growth + n_max * math.log2(1.0 / params.r))
    while True:
        vals, mag = _reconstruct(params, n_max, m_max, precision, f_lo_float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ratio = np.where(vals > 0, mag / vals, np.inf)
        worst = float(np.max(ratio))
        need = 60 + (math.log2(worst) if 0 < worst < np.inf else 1024) + math.log2(n_max + m_max + 2)
        if not adaptive or precision >= need or precision >= max_precision:
            break
        precision = int(min(max_precision, max(need + 32, precision * 1.5)))
    return JointPmf.build(vals, "cheb", params, precision=precision,
                          marginal="supplied" if f_lo_float is not None else "extended")
