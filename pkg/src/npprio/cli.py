"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 usage or domain error.
CSV output uses ``%.17e`` for floats; JSON output holds one object per
record with snake_case keys.  Both round-trip binary64 values exactly.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .model import ModelParams, ParameterError

GRID_R = (0.5, 0.75, 0.9, 0.95, 0.99, 0.999, 0.9999)
GRID_NU = tuple(round(0.05 * k, 2) for k in range(1, 20))
TESTS = ("agg", "xhi", "xlo", "nn", "qr", "oracle", "mc")
TABLE_GRID = tuple((r, nu) for r in (0.99, 0.999, 0.9999) for nu in (0.95, 0.99, 0.999, 1.0))
ORACLE_TOL = 1e-10
ORACLE_BOX = 20
MC_SIGMA = 3.0
MC_MIN_P = 1e-3


class CliError(Exception):
    """Usage or domain problem; reported in one line with exit code 2."""


# formatting ---------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17e" % v
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def write_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def write_json(records) -> str:
    return "".join(json.dumps(_jsonable(rec)) + "\n" for rec in records)


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _floats(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"--{name}: expected a comma-separated list of numbers, got {text!r}") from None


def _params(r: float, nu: float) -> ModelParams:
    try:
        return ModelParams(r, nu)
    except ParameterError as exc:
        raise CliError(str(exc)) from None


def _meta(args, **extra) -> dict:
    meta = {"command": args.command, "version": __version__}
    meta.update(extra)
    return meta


def neglog10(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return -np.log10(values)


def logmap(values: np.ndarray) -> np.ndarray:
    """max{0, 1 + log10(f/f_max)/20}, with zero cells mapped to 0."""
    values = np.asarray(values, dtype=np.float64)
    fmax = values.max()
    out = np.zeros_like(values)
    pos = values > 0
    out[pos] = np.maximum(0.0, 1.0 + np.log10(values[pos] / fmax) / 20.0)
    return out


# computations -------------------------------------------------------------

def _lo_marginal(params, n_max, method):
    from .validation import engine
    return engine(method)[1](params, n_max)


def _joint(params, n_max, m_max, method):
    from .validation import engine
    return engine(method)[0](params, n_max, m_max)


# subcommands --------------------------------------------------------------

def cmd_marginal(args) -> int:
    nu = _floats(args.nu, "nu")
    if len(nu) != 1:
        raise CliError("marginal takes a single --nu")
    params = _params(args.r, nu[0])
    f = np.asarray(_lo_marginal(params, args.nmax, args.method).values)
    nl = neglog10(f)
    if args.format == "csv":
        text = write_csv(["n", "f_lo", "neglog10"], [(n, f[n], nl[n]) for n in range(f.shape[0])])
    else:
        rec = _meta(args, r=params.r, nu=params.nu, method=args.method)
        rec.update(n=list(range(f.shape[0])), f_lo=f, neglog10=nl)
        text = write_json([rec])
    _emit(text, args.out)
    return 0


def cmd_joint(args) -> int:
    nu = _floats(args.nu, "nu")
    if len(nu) != 1:
        raise CliError("joint takes a single --nu")
    params = _params(args.r, nu[0])
    m_max = args.nmax if args.mmax is None else args.mmax
    f = np.asarray(_joint(params, args.nmax, m_max, args.method).values)
    if args.logmap:
        f = logmap(f)
    if args.format == "csv":
        header = ["n"] + [f"m{m}" for m in range(f.shape[1])]
        text = write_csv(header, [[n, *f[n]] for n in range(f.shape[0])])
    else:
        rec = _meta(args, r=params.r, nu=params.nu, method=args.method, logmap=bool(args.logmap))
        rec["values"] = f
        text = write_json([rec])
    _emit(text, args.out)
    return 0


def cmd_asymptote(args) -> int:
    from .asymptotics import asymptote_convergence_report
    nus = _floats(args.nu, "nu")
    if args.nmin < 1 or args.nmin > args.nmax:
        raise CliError("need 1 <= --nmin <= --nmax")
    reports = []
    for nu in nus:
        params = _params(args.r, nu)
        try:
            reports.append((params, asymptote_convergence_report(params, range(args.nmin, args.nmax + 1))))
        except ParameterError as exc:
            raise CliError(str(exc)) from None
    if args.format == "csv":
        rows = []
        for params, rep in reports:
            for i, n in enumerate(rep.n):
                rows.append((params.r, params.nu, rep.regime, n, rep.f_lo[i], rep.asymptote[i], rep.rel_error[i]))
        text = write_csv(["r", "nu", "regime", "n", "f_lo", "asym", "rel_error"], rows)
    else:
        recs = []
        for params, rep in reports:
            rec = _meta(args, r=params.r, nu=params.nu, regime=rep.regime, monotone=rep.monotone)
            rec.update(n=rep.n, f_lo=rep.f_lo, asym=rep.asymptote, rel_error=rep.rel_error)
            recs.append(rec)
        text = write_json(recs)
    _emit(text, args.out)
    return 0


def _oracle_records(params, methods):
    from .oracle import ctmc_oracle
    orc = ctmc_oracle(params)
    box = min(ORACLE_BOX, orc.truncation)
    ref = orc.values[: box + 1, : box + 1]
    out = []
    for method in methods:
        f = np.asarray(_joint(params, box, box, method).values)[: box + 1, : box + 1]
        d = np.abs(f - ref)
        worst = np.unravel_index(int(np.argmax(d)), d.shape)
        out.append({"test": "oracle", "r": params.r, "nu": params.nu, "method": method,
                    "max_abs_diff": float(d.max()), "threshold": ORACLE_TOL,
                    "passed": bool(d.max() <= ORACLE_TOL), "worst_point": [int(worst[0]), int(worst[1])],
                    "truncation": orc.truncation, "tail_bound": orc.tail_bound})
    return out


def mc_record(params, n_servers, n_events, seed):
    """Monte-Carlo estimate against the recurrence: worst |z| over well-populated cells."""
    from .model import agg_exact
    from .quadratic import joint_qr
    from .simulation import monte_carlo
    res = monte_carlo(params, n_servers=n_servers, n_events=n_events, seed=seed)
    cap = res.joint.shape[0] - 1
    exact = np.asarray(joint_qr(params, cap, cap).values)
    cells = exact > MC_MIN_P
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (res.joint - exact) / res.stderr
    z_cells = np.abs(z[cells])
    k = np.arange(cap + 1)
    agg = agg_exact(params.r, k)
    ks = agg > MC_MIN_P
    z_agg = np.abs((res.aggregate[ks] - agg[ks]) / res.aggregate_stderr[ks])
    zc, za = float(np.max(z_cells)), float(np.max(z_agg))
    return {"test": "mc", "r": params.r, "nu": params.nu, "method": "qr",
            "max_abs_z": zc, "max_abs_z_agg": za, "threshold": MC_SIGMA,
            "passed": bool(zc <= MC_SIGMA and za <= MC_SIGMA),
            "n_cells": int(cells.sum()), "n_agg": int(ks.sum()), "seed": int(seed),
            "events": int(n_events), "servers": int(n_servers), "backend": res.backend}


def _grid_point(params, tests, methods, args) -> list[dict]:
    from .validation import EmptyComparisonError, quadratic_test, run_battery
    recs = []
    battery = [t for t in tests if t in ("agg", "xhi", "xlo", "nn")]
    p_lim = args.plim
    xhi_p_lim = args.plim if args.xhi_plim is None else args.xhi_plim
    for method in methods if battery else ():
        try:
            reps = run_battery(params, method, args.nlim, p_lim, xhi_p_lim, tests=battery)
        except EmptyComparisonError as exc:
            raise CliError(str(exc)) from None
        recs.extend(rep.to_record() for rep in reps)
    if "qr" in tests:
        recs.append(quadratic_test(params, args.nlim, p_lim).to_record())
    if "oracle" in tests:
        recs.extend(_oracle_records(params, methods))
    if "mc" in tests:
        recs.append(mc_record(params, args.servers, args.events, args.seed))
    return recs


def _sort_key(rec):
    return (rec["r"], rec["nu"], TESTS.index(rec["test"]), rec.get("method", ""))


BASE_COLUMNS = ["test", "r", "nu", "method", "xi", "threshold", "passed", "worst_point", "n_lim", "p_lim", "n_points"]


def cmd_validate(args) -> int:
    tests = [t.strip() for t in args.tests.split(",") if t.strip()]
    bad = [t for t in tests if t not in TESTS]
    if bad or not tests:
        raise CliError(f"--tests must be a subset of {','.join(TESTS)}")
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    if any(m not in ("qr", "ri") for m in methods) or not methods:
        raise CliError("validate --method takes qr, ri or qr,ri")
    rs = _floats(args.r, "r") if args.r is not None else list(GRID_R)
    nus = _floats(args.nu, "nu") if args.nu is not None else list(GRID_NU)
    points = [_params(r, nu) for r in rs for nu in nus]
    if args.jobs > 1:
        with ThreadPoolExecutor(args.jobs) as pool:
            chunks = list(pool.map(lambda p: _grid_point(p, tests, methods, args), points))
    else:
        chunks = [_grid_point(p, tests, methods, args) for p in points]
    recs = sorted((rec for chunk in chunks for rec in chunk), key=_sort_key)
    for rec in recs:
        rec["version"] = __version__
    if args.format == "csv":
        extra = sorted({k for rec in recs for k in rec} - set(BASE_COLUMNS))
        header = BASE_COLUMNS + extra
        text = write_csv(header, [[rec.get(k) for k in header] for rec in recs])
    else:
        text = write_json(recs)
    _emit(text, args.out)
    return 0 if all(rec["passed"] for rec in recs) else 1


def cmd_figures(args) -> int:
    """Data files behind the published figures and the accuracy table."""
    from .asymptotics import asymptote_convergence_report, regime
    from .quadratic import joint_qr, lo_marginal_qr
    from .validation import quadratic_test
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    written = []

    def overlay(path, r, nus, n_max):
        rows = []
        for nu in nus:
            params = _params(r, nu)
            f = np.asarray(lo_marginal_qr(params, n_max).values)
            rep = asymptote_convergence_report(params, range(1, n_max + 1), f_lo=f)
            asym = np.concatenate([[math.nan], rep.asymptote])
            nl, al = neglog10(f), neglog10(asym)
            for n in range(n_max + 1):
                rows.append((r, nu, regime(params), n, f[n], nl[n], asym[n], al[n]))
        header = ["r", "nu", "regime", "n", "f_lo", "neglog10", "asym", "asym_neglog10"]
        _emit(write_csv(header, rows), path)
        written.append(path)

    overlay(os.path.join(out, "figure2.csv"), 0.9, [0.1, 0.3, 0.5, 0.7, 0.9], 400)
    overlay(os.path.join(out, "figure3.csv"), 0.99, [0.9], 1000)

    params = _params(0.75, 0.9)
    f = logmap(joint_qr(params, 160, 160).values)
    path = os.path.join(out, "figure4.csv")
    _emit(write_csv(["n"] + [f"m{m}" for m in range(f.shape[1])], [[n, *f[n]] for n in range(f.shape[0])]), path)
    written.append(path)

    if not args.skip_table:
        rows = []
        for r, nu in TABLE_GRID:
            rep = quadratic_test(ModelParams(r, nu), args.nlim, args.plim)
            rows.append((r, nu, rep.xi, rep.extra["n_hi"], rep.extra["n_lo"], rep.extra["p_min"]))
        path = os.path.join(out, "table1.csv")
        _emit(write_csv(["r", "nu", "xi_qr", "n_hi", "n_lo", "p_min"], rows), path)
        written.append(path)
    for path in written:
        print(path)
    return 0


# parser -------------------------------------------------------------------

def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _events(text):
    return int(float(text))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="npprio", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"npprio {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, nu_default=None, method_default="qr", methods=("qr", "ri", "cheb")):
        sp.add_argument("--r", type=float, required=True, help="total traffic intensity, 0 < r < 1")
        sp.add_argument("--nu", default=nu_default, required=nu_default is None,
                        help="high-priority fraction in [0, 1]")
        sp.add_argument("--method", default=method_default, choices=methods)
        sp.add_argument("--format", default="csv", choices=("csv", "json"))
        sp.add_argument("--out", default=None, help="output file (default stdout)")

    sp = sub.add_parser("marginal", help="low-priority marginal f_lo(0..nmax)")
    common(sp)
    sp.add_argument("--nmax", type=_nonneg_int, default=200)
    sp.set_defaults(func=cmd_marginal)

    sp = sub.add_parser("joint", help="wait-conditional joint law on [0,nmax] x [0,mmax]")
    common(sp)
    sp.add_argument("--nmax", type=_nonneg_int, default=100)
    sp.add_argument("--mmax", type=_nonneg_int, default=None)
    sp.add_argument("--logmap", action="store_true", help="apply max{0, 1 + log10(f/f_max)/20}")
    sp.set_defaults(func=cmd_joint)

    sp = sub.add_parser("asymptote", help="f_lo against its large-n asymptote")
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--nu", required=True, help="one value or a comma-separated list")
    sp.add_argument("--nmin", type=int, default=1)
    sp.add_argument("--nmax", type=int, default=1000)
    sp.add_argument("--format", default="csv", choices=("csv", "json"))
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_asymptote)

    sp = sub.add_parser("validate", help="run the consistency tests over a grid")
    sp.add_argument("--r", default=None, help="comma-separated r values (default: full grid)")
    sp.add_argument("--nu", default=None, help="comma-separated nu values (default: 0.05..0.95)")
    sp.add_argument("--tests", default="agg,xhi,xlo,nn", help=f"subset of {','.join(TESTS)}")
    sp.add_argument("--method", default="qr,ri", help="qr, ri or qr,ri")
    sp.add_argument("--nlim", type=_nonneg_int, default=1000)
    sp.add_argument("--plim", type=float, default=1e-20)
    sp.add_argument("--xhi-plim", dest="xhi_plim", type=float, default=1e-30)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--events", type=_events, default=10_000_000)
    sp.add_argument("--servers", type=int, default=3)
    sp.add_argument("--jobs", type=int, default=1, help="worker threads over grid points")
    sp.add_argument("--format", default="json", choices=("csv", "json"))
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("figures", help="write figure and table data files into --out")
    sp.add_argument("--out", default=None, help="output directory (default .)")
    sp.add_argument("--nlim", type=_nonneg_int, default=1000)
    sp.add_argument("--plim", type=float, default=1e-20)
    sp.add_argument("--skip-table", action="store_true")
    sp.set_defaults(func=cmd_figures)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ParameterError) as exc:
        print(f"npprio: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
