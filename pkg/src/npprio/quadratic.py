"""Quadratic-recurrence engine.

The low-priority marginal comes from a scaled nonlinear recurrence for the
power-series coefficients of its generating function.  The joint law is then
built column by column: column m is the previous column convolved with the
Taylor coefficients of the smaller root lambda_-(p) of

    lambda^2 - b(p) lambda + r_hi = 0,    b(p) = 1 + r - r_lo p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .model import ModelParams, ParameterError, joint_single_class, lo_marginal_single_class
from .pmf import JointPmf, PmfVector


@dataclass(frozen=True, eq=False)
class ScaledRecurrenceState:
    scale_factor: float
    c1: float
    c2: float
    d: float
    f_tilde: np.ndarray


@dataclass(frozen=True, eq=False)
class LambdaTaylor:
    sign: int
    coeffs: np.ndarray
    scaled: np.ndarray


def _scale(params: ModelParams, scale: float | None) -> float:
    lam = params.r_lo if scale is None else float(scale)
    if not lam > 0.0:
        raise ParameterError("scale factor must be positive")
    return lam


def _check_n(n_max: int) -> int:
    if int(n_max) != n_max or n_max < 0:
        raise ParameterError(f"truncation index must be a nonnegative integer, got {n_max!r}")
    return int(n_max)


def discriminant_root(params: ModelParams) -> float:
    """D = sqrt((1-r)^2 + 4 r_lo), the root separation of lambda_+- at p = 0."""
    return math.sqrt((1.0 - params.r) ** 2 + 4.0 * params.r_lo)


def scaled_recurrence(params: ModelParams, n_max: int, scale: float | None = None) -> ScaledRecurrenceState:
    n_max = _check_n(n_max)
    r = params.r
    d = discriminant_root(params)
    f0 = 2.0 / (1.0 - r + d)
    if params.r_lo == 0.0:
        # no low-priority arrivals: every coefficient past the first vanishes
        ft = np.zeros(n_max + 1)
        ft[0] = f0
        return ScaledRecurrenceState(1.0, 0.0, 0.0, d, ft)
    lam = _scale(params, scale)
    c1 = params.r_lo / lam
    c2 = lam / d
    ft = kernels.scaled_marginal(r, c1, c2, f0, n_max)
    return ScaledRecurrenceState(lam, c1, c2, d, ft)


def lo_marginal_qr(params: ModelParams, n_max: int, scale: float | None = None) -> PmfVector:
    """Low-priority marginal f_lo(0..n_max)."""
    n_max = _check_n(n_max)
    if params.degenerate:
        return PmfVector.build(lo_marginal_single_class(params, n_max), "lo_marginal", "qr", params)
    st = scaled_recurrence(params, n_max, scale)
    with np.errstate(over="ignore", invalid="ignore"):
        if st.c1 == 1.0:
            vals = (1.0 - params.r) * st.f_tilde
        else:
            vals = (1.0 - params.r) * np.power(st.c1, np.arange(n_max + 1)) * st.f_tilde
    return PmfVector.build(vals, "lo_marginal", "qr", params)


def lambda_taylor(params: ModelParams, n_max: int, sign: int = -1, scale: float | None = None) -> LambdaTaylor:
    """Taylor coefficients of lambda_+ (sign=+1) or lambda_- (sign=-1) about p = 0."""
    n_max = _check_n(n_max)
    if sign not in (1, -1):
        raise ParameterError("sign must be +1 or -1")
    r = params.r
    d = discriminant_root(params)
    f0 = 0.5 * (1.0 + r + sign * d)
    if params.r_lo == 0.0:
        # b(p) is constant, so both roots are constant series
        f = np.zeros(n_max + 1)
        f[0] = f0
        return LambdaTaylor(sign, f.copy(), f)
    lam = _scale(params, scale)
    f = kernels.lambda_series(-float(sign), 1.0 / d, lam, f0, n_max)
    c = params.r_lo / lam
    coeffs = f if c == 1.0 else np.power(c, np.arange(n_max + 1)) * f
    return LambdaTaylor(sign, coeffs, f)


def convolve(a, b, n_max: int | None = None) -> np.ndarray:
    """Cauchy product of two coefficient vectors, optionally truncated to n_max + 1 terms."""
    c = np.convolve(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
    if n_max is not None:
        c = c[: n_max + 1]
    return c


def joint_qr(params: ModelParams, n_max: int, m_max: int, scale: float | None = None) -> JointPmf:
    """Joint wait-conditional law f(n, m) on [0, n_max] x [0, m_max]."""
    n_max = _check_n(n_max)
    m_max = _check_n(m_max)
    if params.degenerate:
        return JointPmf.build(joint_single_class(params, n_max, m_max), "qr", params)
    f_lo = lo_marginal_qr(params, n_max, scale).values
    lam1 = lambda_taylor(params, n_max, -1, scale).coeffs
    one_minus = -lam1
    one_minus[0] += 1.0
    # f_lo / (1 - r) are the coefficients of 1/(lambda_+ - r)
    phi0 = convolve(f_lo, one_minus, n_max)
    vals = kernels.convolution_chain(phi0, lam1, m_max)
    return JointPmf.build(vals, "qr", params)
