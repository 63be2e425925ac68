"""Agreement measures and the self-consistency tests for computed laws.

The measure of agreement between a computed law f and a reference g is

    xi = -log10 max |ln f - ln g|

over the points where the reference exceeds ``p_lim``, capped at 16.  It is
the number of decimal places to which the two agree in relative terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, agg_exact, xhi_exact
from .pmf import JointPmf, PmfVector

XI_CAP = 16.0
DEFAULT_N_LIM = 1000
DEFAULT_P_LIM = 1e-20
XHI_P_LIM = 1e-30
THRESHOLD = 8.0
METHODS = ("qr", "ri", "cheb")


class EmptyComparisonError(ValueError):
    """No point passed the probability floor, so there is nothing to compare."""


@dataclass(frozen=True)
class MopReport:
    test_name: str
    xi: float
    worst_point: tuple
    n_lim: int
    p_lim: float
    grid: tuple
    passed: bool
    method: str = ""
    threshold: float = THRESHOLD
    n_points: int = 0
    extra: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {
            "test": self.test_name,
            "r": self.grid[0],
            "nu": self.grid[1],
            "method": self.method,
            "xi": self.xi,
            "threshold": self.threshold,
            "passed": self.passed,
            "worst_point": list(self.worst_point),
            "n_lim": self.n_lim,
            "p_lim": self.p_lim,
            "n_points": self.n_points,
        }
        rec.update(self.extra)
        return rec


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def mop(computed, reference, p_lim: float = DEFAULT_P_LIM, n_lim: int | None = None,
        mask=None, test_name: str = "mop", grid: tuple = (math.nan, math.nan),
        method: str = "", threshold: float = THRESHOLD, qualify_on=None) -> MopReport:
    """Decimal places of agreement between ``computed`` and ``reference``.

    Points qualify when the reference (or ``qualify_on`` if given) exceeds
    ``p_lim``, every index is <= ``n_lim``, and ``mask`` (if given) is True.
    A zero or negative computed value at a qualifying point scores xi = 0.
    """
    f = _values(computed)
    g = _values(reference)
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {g.shape}")
    q = g if qualify_on is None else _values(qualify_on)
    ok = q > p_lim
    if mask is not None:
        ok &= np.asarray(mask, dtype=bool)
    if n_lim is not None:
        for ax in range(f.ndim):
            idx = np.arange(f.shape[ax]).reshape([-1 if a == ax else 1 for a in range(f.ndim)])
            ok &= idx <= n_lim
    pts = np.argwhere(ok)
    if pts.size == 0:
        raise EmptyComparisonError(f"{test_name}: no points above p_lim={p_lim:g}")
    fv, gv = f[ok], g[ok]
    bad = ~(fv > 0.0) | ~(gv > 0.0)
    if bad.any():
        worst = tuple(int(i) for i in pts[np.argmax(bad)])
        xi = 0.0
    else:
        d = np.abs(np.log(fv) - np.log(gv))
        j = int(np.argmax(d))
        worst = tuple(int(i) for i in pts[j])
        xi = XI_CAP if d[j] == 0.0 else min(XI_CAP, -math.log10(d[j]))
    return MopReport(test_name, float(xi), worst, int(n_lim if n_lim is not None else max(f.shape) - 1),
                     float(p_lim), tuple(grid), bool(xi >= threshold), method, threshold, int(pts.shape[0]))


def engine(method: str):
    """(joint, lo_marginal) callables for a method tag."""
    if method == "qr":
        from .quadratic import joint_qr, lo_marginal_qr
        return joint_qr, lo_marginal_qr
    if method == "ri":
        from .rintegral import joint_ri, lo_marginal_ri
        return joint_ri, lo_marginal_ri
    if method == "cheb":
        from .chebyshev import joint_via_convolution, lo_marginal_extended
        return joint_via_convolution, lo_marginal_extended
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _grid(params):
    return (params.r, params.nu)


def aggregation_test(params: ModelParams, method: str = "ri", n_lim: int = DEFAULT_N_LIM,
                     p_lim: float = DEFAULT_P_LIM, joint: JointPmf | None = None) -> MopReport:
    """Anti-diagonal sums of the joint law against (1-r) r^k."""
    if joint is None:
        joint = engine(method)[0](params, n_lim, n_lim)
    v = _values(joint)[: n_lim + 1, : n_lim + 1]
    sums = JointPmf(v, method).antidiagonal_sums(n_lim)
    ref = agg_exact(params.r, np.arange(n_lim + 1))
    return mop(sums, ref, p_lim, n_lim, test_name="agg", grid=_grid(params), method=method)


def xhi_test(params: ModelParams, method: str = "ri", n_lim: int = DEFAULT_N_LIM,
             p_lim: float = XHI_P_LIM, joint: JointPmf | None = None) -> MopReport:
    """f(0, m) against (1-r)(r_hi/z2)^m."""
    if joint is None:
        joint = engine(method)[0](params, 0, n_lim)
    row = _values(joint)[0, : n_lim + 1]
    ref = xhi_exact(params, np.arange(row.shape[0]))
    return mop(row, ref, p_lim, n_lim, test_name="xhi", grid=_grid(params), method=method)


def xlo_test(params: ModelParams, method: str = "ri", n_lim: int = DEFAULT_N_LIM,
             p_lim: float = DEFAULT_P_LIM, joint: JointPmf | None = None,
             lo_marginal: PmfVector | None = None) -> MopReport:
    """f(n, 0) against r_lo f_lo(n-1) for n > 0."""
    joint_fn, lo_fn = engine(method)
    if joint is None:
        joint = joint_fn(params, n_lim, 0)
    if lo_marginal is None:
        lo_marginal = lo_fn(params, n_lim)
    col = _values(joint)[: n_lim + 1, 0]
    ref = np.zeros_like(col)
    ref[1:] = params.r_lo * _values(lo_marginal)[: col.shape[0] - 1]
    ref[0] = 1.0 - params.r
    mask = np.arange(col.shape[0]) > 0
    return mop(col, ref, p_lim, n_lim, mask=mask, test_name="xlo", grid=_grid(params),
               method=method, qualify_on=col)


def nn_test(params: ModelParams, method: str = "ri", n_lim: int = DEFAULT_N_LIM,
            p_lim: float = DEFAULT_P_LIM, joint: JointPmf | None = None) -> MopReport:
    """f(n, m) against [f(n, m+1) + r_lo f(n-1, m) + r_hi f(n, m-1)]/(1+r) for n, m > 0."""
    if joint is None:
        joint = engine(method)[0](params, n_lim, n_lim + 1)
    f = _values(joint)
    if f.shape[1] < n_lim + 2 or f.shape[0] < n_lim + 1:
        raise ValueError("nn_test needs the joint law on [0, n_lim] x [0, n_lim + 1]")
    f = f[: n_lim + 1, : n_lim + 2]
    core = f[1:, 1:-1]
    nn = (f[1:, 2:] + params.r_lo * f[:-1, 1:-1] + params.r_hi * f[1:, :-2]) / (1.0 + params.r)
    rep = mop(core, nn, p_lim, None, test_name="nn", grid=_grid(params), method=method, qualify_on=core)
    # shift the worst point back to (n, m) coordinates
    n0, m0 = rep.worst_point
    return MopReport(rep.test_name, rep.xi, (n0 + 1, m0 + 1), n_lim, rep.p_lim, rep.grid, rep.passed,
                     rep.method, rep.threshold, rep.n_points)


def support_extent(values: np.ndarray, p_lim: float) -> tuple[int, int, float]:
    """(n_hi, n_lo, p_min): largest m and n with f > p_lim, and the smallest such f."""
    ok = values > p_lim
    pts = np.argwhere(ok)
    if pts.size == 0:
        raise EmptyComparisonError("no point above p_lim")
    return int(pts[:, 1].max()), int(pts[:, 0].max()), float(values[ok].min())


def quadratic_test(params: ModelParams, n_lim: int = DEFAULT_N_LIM, p_lim: float = DEFAULT_P_LIM,
                   include_axes: bool = True, joint_qr_values=None, joint_ri_values=None) -> MopReport:
    """Joint law from the R-integral series against the quadratic recurrence.

    With ``include_axes`` (the default) the n = 0 and m = 0 lines are part of
    the comparison; at nu = 1 they are the only lines with mass.  At nu = 1
    the series is evaluated at the endpoint rather than replaced by the
    single-class law, so the comparison stays non-trivial.
    """
    from .quadratic import joint_qr
    from .rintegral import joint_ri
    fq = _values(joint_qr_values) if joint_qr_values is not None else joint_qr(params, n_lim, n_lim).values
    if joint_ri_values is not None:
        fr = _values(joint_ri_values)
    else:
        fr = joint_ri(params, n_lim, n_lim, at_endpoint=params.nu == 1.0).values
    fq = fq[: n_lim + 1, : n_lim + 1]
    fr = fr[: n_lim + 1, : n_lim + 1]
    mask = None
    if not include_axes:
        mask = np.zeros(fq.shape, dtype=bool)
        mask[1:, 1:] = True
    rep = mop(fr, fq, p_lim, n_lim, mask=mask, test_name="qr", grid=_grid(params), method="ri")
    n_hi, n_lo, p_min = support_extent(fq, p_lim)
    extra = {"n_hi": n_hi, "n_lo": n_lo, "p_min": p_min, "include_axes": include_axes}
    return MopReport(rep.test_name, rep.xi, rep.worst_point, rep.n_lim, rep.p_lim, rep.grid, rep.passed,
                     rep.method, rep.threshold, rep.n_points, extra)


def run_battery(params: ModelParams, method: str = "ri", n_lim: int = DEFAULT_N_LIM,
                p_lim: float = DEFAULT_P_LIM, xhi_p_lim: float = XHI_P_LIM,
                tests=("agg", "xhi", "xlo", "nn")) -> list[MopReport]:
    """Run the self-consistency tests on one joint computation."""
    joint_fn, lo_fn = engine(method)
    joint = joint_fn(params, n_lim, n_lim + 1)
    out = []
    for t in tests:
        if t == "agg":
            out.append(aggregation_test(params, method, n_lim, p_lim, joint=joint))
        elif t == "xhi":
            out.append(xhi_test(params, method, n_lim, xhi_p_lim, joint=joint))
        elif t == "xlo":
            out.append(xlo_test(params, method, n_lim, p_lim, joint=joint, lo_marginal=lo_fn(params, n_lim)))
        elif t == "nn":
            out.append(nn_test(params, method, n_lim, p_lim, joint=joint))
        else:
            raise ValueError(f"unknown test {t!r}")
    return out
