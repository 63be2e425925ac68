"""Model parameters, derived root constants and exact closed-form laws.

All queue-length laws in this package are *wait-conditional* (conditioned on
every server being busy) unless stated otherwise.  They depend only on the
total intensity ``r`` and the high-priority fraction ``nu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammaln


class ParameterError(ValueError):
    """Raised for inputs outside the model's domain."""


def _check_r(r: float, allow_zero: bool = False) -> float:
    r = float(r)
    if not math.isfinite(r):
        raise ParameterError(f"r must be finite, got {r!r}")
    if r >= 1.0:
        raise ParameterError(f"r must be < 1 for a stable queue, got {r!r}")
    if r < 0.0 or (r == 0.0 and not allow_zero):
        raise ParameterError(f"r must be in (0, 1), got {r!r}")
    return r


def _check_servers(n_servers) -> int:
    if isinstance(n_servers, bool) or int(n_servers) != n_servers or n_servers < 1:
        raise ParameterError(f"n_servers must be a positive integer, got {n_servers!r}")
    return int(n_servers)


def split_intensity(r: float, nu: float) -> tuple[float, float]:
    """(r_hi, r_lo) with r_hi ~ nu*r and r_hi + r_lo == r exactly in binary64.

    r_lo is the rounded remainder r - r_hi.  When that rounding lands on an
    exact tie the sum can miss r by one ulp; r_hi is then replaced by
    r - r_lo, which Sterbenz makes exact (r_lo >= r/2 in that case).
    """
    r_hi = nu * r
    r_lo = r - r_hi
    if r_hi + r_lo != r:
        r_hi = r - r_lo
    return r_hi, r_lo


@dataclass(frozen=True)
class ModelParams:
    """Total intensity ``r``, high-priority fraction ``nu``, optional servers and rate."""

    r: float
    nu: float
    n_servers: int | None = None
    mu: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "r", _check_r(self.r))
        nu = float(self.nu)
        if not (0.0 <= nu <= 1.0):
            raise ParameterError(f"nu must be in [0, 1], got {self.nu!r}")
        object.__setattr__(self, "nu", nu)
        if self.n_servers is not None:
            object.__setattr__(self, "n_servers", _check_servers(self.n_servers))
        mu = float(self.mu)
        if not (mu > 0.0 and math.isfinite(mu)):
            raise ParameterError(f"mu must be positive, got {self.mu!r}")
        object.__setattr__(self, "mu", mu)

    @property
    def r_hi(self) -> float:
        return split_intensity(self.r, self.nu)[0]

    @property
    def r_lo(self) -> float:
        return split_intensity(self.r, self.nu)[1]

    @property
    def degenerate(self) -> bool:
        return self.nu == 0.0 or self.nu == 1.0


@dataclass(frozen=True)
class DerivedConstants:
    """Roots z0 < ... and the series constants built from them.

    ``kappa``, ``a_ratio``, ``b_ratio``, ``gamma_ratio`` and ``chi`` are None
    when ``nu`` is 0 or 1, where two of the poles collide.
    """

    r_hi: float
    r_lo: float
    z0: float
    z1: float
    z2: float
    kappa: float | None
    a_ratio: float | None
    b_ratio: float | None
    gamma_ratio: float | None
    chi: float | None

    @property
    def degenerate(self) -> bool:
        return self.kappa is None


def roots(r: float, nu: float) -> tuple[float, float, float]:
    """Return (z0, z1, z2): z0 = nu and the two roots of z^2 - (1+r)z + nu*r."""
    if nu == 1.0:
        # the discriminant is (1-r)^2, so the roots are exactly r and 1
        return 1.0, r, 1.0
    r_hi = nu * r
    disc = (1.0 + r) ** 2 - 4.0 * r_hi
    z2 = 0.5 * (1.0 + r + math.sqrt(disc))
    # product form avoids the cancellation in the "-" root as nu -> 0
    z1 = r_hi / z2
    return nu, z1, z2


def series_constants(r: float, nu: float) -> tuple[float, float, float, float]:
    """(kappa, a, b, gamma) of the scaled series; finite for 0 < nu <= 1."""
    z0, z1, z2 = roots(r, nu)
    r_lo = split_intensity(r, nu)[1]
    w = z2 - z1
    x = z1 / z0
    kappa = 1.0 / (w * (1.0 - x))
    a = r_lo / (w * w)
    b = w / (1.0 - x)
    gamma = r_lo / (w * (1.0 - x))
    return kappa, a, b, gamma


def derive_constants(params: ModelParams) -> DerivedConstants:
    r, nu = params.r, params.nu
    z0, z1, z2 = roots(r, nu)
    r_hi, r_lo = params.r_hi, params.r_lo
    if params.degenerate:
        return DerivedConstants(r_hi, r_lo, z0, z1, z2, None, None, None, None, None)
    kappa, a, b, gamma = series_constants(r, nu)
    chi = 1.0 + (1.0 - math.sqrt(r_hi)) ** 2 / r_lo
    return DerivedConstants(r_hi, r_lo, z0, z1, z2, kappa, a, b, gamma, chi)


def no_wait_probability(r: float, n_servers: int) -> float:
    """Probability that an arrival finds an idle server (complement of Erlang C).

    ``r = 0`` returns 1, the limit of an empty system.
    """
    r = _check_r(r, allow_zero=True)
    n = _check_servers(n_servers)
    if r == 0.0:
        return 1.0
    # S = N!/(Nr)^N * sum_{k<N} (Nr)^k/k!, summed from k = N-1 downwards
    a = n * r
    term = 1.0 / r
    s = term
    for k in range(n - 1, 0, -1):
        term *= k / a
        s += term
    w = (1.0 - r) * s
    return w / (1.0 + w)


def scaled_upper_incomplete_gamma(x: float, shape: float) -> float:
    """shape * e^x * x^(-shape) * Gamma(shape, x)."""
    x = float(x)
    shape = float(shape)
    if not (x > 0.0 and shape > 0.0) or not (math.isfinite(x) and math.isfinite(shape)):
        raise ParameterError("scaled_upper_incomplete_gamma needs x > 0 and shape > 0")
    q = gammaincc(shape, x)
    return shape * q * math.exp(x - shape * math.log(x) + gammaln(shape))


def empty_system_probability(r: float, n_servers: int) -> float:
    """Unconditional probability that the system holds no clients."""
    r = _check_r(r, allow_zero=True)
    n = _check_servers(n_servers)
    if r == 0.0:
        return 1.0
    x = n * r
    # log of (x^N / N!) times each bracket term
    lead = n * math.log(x) - gammaln(n + 1.0)
    t1 = lead - math.log1p(-r)
    t2 = lead + math.log(scaled_upper_incomplete_gamma(x, n))
    return math.exp(-np.logaddexp(t1, t2))


def _as_index(m):
    m = np.asarray(m)
    if np.any(m < 0):
        raise ParameterError("queue lengths must be nonnegative")
    return m


_libm_pow = np.frompyfunc(math.pow, 2, 1)


def powers(q: float, k) -> np.ndarray:
    """q**k elementwise through libm pow.

    numpy's vectorised power is not correctly rounded and is off by an ulp
    for a few percent of exponents, which would make the closed forms depend
    on the SIMD path taken.
    """
    k = np.asarray(k)
    return np.asarray(_libm_pow(float(q), k.astype(np.float64)), dtype=np.float64)


def hi_marginal_exact(params: ModelParams, m):
    """(1 - r_hi) r_hi^m."""
    m = _as_index(m)
    r_hi = params.r_hi
    return (1.0 - r_hi) * powers(r_hi, m)


def agg_exact(r: float, k):
    """(1 - r) r^k: law of the total queue length."""
    r = _check_r(r)
    k = _as_index(k)
    return (1.0 - r) * powers(r, k)


def xhi_exact(params: ModelParams, m):
    """Probability of m high-priority clients waiting and no low-priority ones."""
    m = _as_index(m)
    _, _, z2 = roots(params.r, params.nu)
    return (1.0 - params.r) * powers(params.r_hi / z2, m)


def lo_marginal_single_class(params: ModelParams, n_max: int) -> np.ndarray:
    """Low-priority marginal at nu = 0 (geometric) or nu = 1 (point mass at 0)."""
    n = np.arange(n_max + 1)
    if params.nu == 0.0:
        return (1.0 - params.r) * powers(params.r, n)
    if params.nu == 1.0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    raise ParameterError("single-class reduction needs nu in {0, 1}")


def joint_single_class(params: ModelParams, n_max: int, m_max: int) -> np.ndarray:
    """Joint law f(n, m) at nu = 0 or nu = 1."""
    out = np.zeros((n_max + 1, m_max + 1))
    if params.nu == 0.0:
        out[:, 0] = (1.0 - params.r) * powers(params.r, np.arange(n_max + 1))
    elif params.nu == 1.0:
        out[0, :] = (1.0 - params.r) * powers(params.r, np.arange(m_max + 1))
    else:
        raise ParameterError("single-class reduction needs nu in {0, 1}")
    return out


def condition_decomposition(params: ModelParams, wait_conditional):
    """Mix a wait-conditional law with the no-wait atom at the origin.

    Accepts a PmfVector, JointPmf or a bare array; returns the same kind.
    """
    if params.n_servers is None:
        raise ParameterError("condition_decomposition needs n_servers")
    p_nw = no_wait_probability(params.r, params.n_servers)
    values = getattr(wait_conditional, "values", wait_conditional)
    out = (1.0 - p_nw) * np.asarray(values, dtype=np.float64)
    out[(0,) * out.ndim] += p_nw
    if hasattr(wait_conditional, "with_values"):
        return wait_conditional.with_values(out, conditional=False)
    return out
