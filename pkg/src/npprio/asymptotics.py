"""Large-n behaviour of the low-priority marginal.

Three regimes, decided by the sign of r^2 - r_hi:

* critical (r_hi = r^2, i.e. nu = r): f_lo(n) ~ sqrt((1-r)/(pi r)) r^n / sqrt(n)
* pole_plus_cut (r_hi < r^2): a geometric r^n term plus a branch-cut term
* cut_only (r_hi > r^2): the branch-cut term alone, decaying like chi^-n n^-3/2
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, ParameterError

#: relative band around nu = r routed to the critical formula
CRITICAL_RTOL = 1e-12


@dataclass(frozen=True)
class TailAsymptote:
    regime: str
    pole_coeff: float
    cut_coeff: float
    chi: float


def regime(params: ModelParams) -> str:
    r, nu = params.r, params.nu
    if abs(nu - r) <= CRITICAL_RTOL * r:
        return "critical"
    return "pole_plus_cut" if r * r - params.r_hi >= 0.0 else "cut_only"


def tail_asymptote(params: ModelParams) -> TailAsymptote:
    if params.degenerate:
        raise ParameterError("tail asymptotics need 0 < nu < 1")
    r, r_hi, r_lo = params.r, params.r_hi, params.r_lo
    chi = 1.0 + (1.0 - math.sqrt(r_hi)) ** 2 / r_lo
    reg = regime(params)
    if reg == "critical":
        return TailAsymptote(reg, math.sqrt((1.0 - r) / (math.pi * r)), 0.0, chi)
    # pole: [1 - r(1-r)/r_lo](1-r) r^(n-1); present only when r^2 >= r_hi
    pole = (1.0 - r * (1.0 - r) / r_lo) * (1.0 - r) / r if reg == "pole_plus_cut" else 0.0
    cut = (math.sqrt(math.sqrt(r_hi) / r_lo) / (2.0 * math.sqrt(math.pi) * r)
           * (1.0 - r) / (chi - 1.0 / r))
    return TailAsymptote(reg, pole, cut, chi)


def lo_tail_asymptote(params: ModelParams, n):
    """Asymptotic value of f_lo(n) for n >= 1 (scalar or array)."""
    n_arr = np.asarray(n, dtype=np.float64)
    if np.any(n_arr < 1):
        raise ParameterError("n must be >= 1")
    t = tail_asymptote(params)
    r = params.r
    if t.regime == "critical":
        out = t.pole_coeff * np.power(r, n_arr) / np.sqrt(n_arr)
    else:
        # chi^-(n - 1/2) in log form to stay finite for large n
        out = t.cut_coeff * np.exp(-(n_arr - 0.5) * math.log(t.chi)) / n_arr ** 1.5
        if t.pole_coeff:
            out = out + t.pole_coeff * np.power(r, n_arr)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    n: np.ndarray
    f_lo: np.ndarray
    asymptote: np.ndarray
    rel_error: np.ndarray
    regime: str
    monotone: bool
    floor: float


def asymptote_convergence_report(params: ModelParams, n_range, f_lo=None, floor: float = 1e-12) -> ConvergenceReport:
    """|f_lo(n)/asym(n) - 1| over ``n_range``.

    ``monotone`` is True when the error never grows by more than ``floor``
    from one n to the next, so round-off jitter at the bottom is tolerated.
    Points where either value underflows to zero get a NaN error and are
    skipped by the monotonicity check.
    """
    n = np.asarray(list(n_range), dtype=np.int64)
    if n.size == 0 or n.min() < 1:
        raise ParameterError("n_range must be a nonempty range of n >= 1")
    if f_lo is None:
        from .quadratic import lo_marginal_qr
        f_lo = lo_marginal_qr(params, int(n.max())).values
    f = np.asarray(getattr(f_lo, "values", f_lo))[n]
    asym = np.asarray(lo_tail_asymptote(params, n))
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.where((asym > 0) & (f > 0), np.abs(f / asym - 1.0), np.nan)
    fin = err[np.isfinite(err)]
    monotone = bool(fin.size > 0 and np.all(np.diff(fin) <= floor))
    return ConvergenceReport(n, f, asym, err, regime(params), monotone, floor)
