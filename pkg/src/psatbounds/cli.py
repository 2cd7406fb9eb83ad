"""Command-line interface: ``psatbounds <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 domain error, 3 numerical failure.
Machine outputs (JSON/CSV) are byte-stable for fixed flags and seed; the run
manifest (version, parameters, wall clock, threads) goes to a sidecar file
``<out>.manifest.json``, or to stderr when writing to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, fields

import numpy as np

from psatbounds import __version__
from psatbounds.analytic import ProblemParams, density_bounds
from psatbounds.certify import (
    CURVE_COLUMNS, CertifyConfig, bound_curve, certify_density, max_certified_density,
)
from psatbounds.errors import DegenerateTuning, DomainError, NumericalFailure
from psatbounds.moments import WeightPair, log_first_moment, log_second_moment_sum
from psatbounds import empirical as emp
from psatbounds.tuning import tuned_weights
from psatbounds.verify import SUITES, run_suite

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3

EPILOG = (
    f"Environment: {emp.THREADS_ENV} sets the worker thread count for experiments "
    "(default: all available cores). A formula counts as p-satisfiable when some "
    "assignment leaves at most floor(u0*m + 1e-9) clauses unsatisfied, u0 = (1-p)/2^k."
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


class _Fmt(argparse.ArgumentDefaultsHelpFormatter):
    def _get_help_string(self, action):
        if action.default is None or action.default is False:
            return action.help
        return super()._get_help_string(action)


# --------------------------------------------------------------------- parser

def _add_problem(p, need_p=True):
    p.add_argument("--k", type=int, required=True, help="clause width (k >= 2)")
    if need_p:
        p.add_argument("--p", type=float, required=True,
                       help="satisfiability margin, 0 < p <= 1")


def _add_config(p):
    d = CertifyConfig()
    p.add_argument("--grid", type=int, default=d.grid_points,
                   help="grid points on (1/2, 1]")
    p.add_argument("--room", type=float, default=d.room,
                   help="required margin below the value at 1/2")
    p.add_argument("--deriv-safety", type=float, default=d.deriv_safety,
                   help="multiplier on the sampled derivative bound")
    p.add_argument("--refine", type=int, default=d.refine_factor,
                   help="derivative samples per grid cell")
    p.add_argument("--r-tol", type=float, default=d.r_tolerance,
                   help="relative bisection tolerance in r")
    p.add_argument("--window-A", type=float, default=d.window_A,
                   help="truncation window width (recorded only)")
    p.add_argument("--sweeps", type=int, default=d.sweeps,
                   help="coordinate descent sweeps per point")
    p.add_argument("--line-tol", type=float, default=d.line_tol,
                   help="golden-section tolerance, relative to the bracket")


def _add_output(p, formats=("json",), default="json"):
    p.add_argument("--format", choices=formats, default=default, help="output format")
    p.add_argument("--out", default=None, help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="psatbounds", formatter_class=_Fmt, epilog=EPILOG,
                 description="Density bounds for p-satisfiability of random k-CNF.")
    ap.add_argument("--version", action="version", version=f"psatbounds {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bounds", formatter_class=_Fmt, epilog=EPILOG,
                       help="closed-form bounds and tuned weights")
    _add_problem(p)
    _add_output(p, ("human", "json"), "human")

    p = sub.add_parser("certify", formatter_class=_Fmt, epilog=EPILOG,
                       help="certify the dominance condition at one density")
    _add_problem(p)
    p.add_argument("--r", type=float, required=True, help="clause density")
    p.add_argument("--summary", action="store_true",
                   help="omit the per-point list from the certificate")
    _add_config(p)
    _add_output(p)

    p = sub.add_parser("maxdensity", formatter_class=_Fmt, epilog=EPILOG,
                       help="largest certified density by bisection")
    _add_problem(p)
    p.add_argument("--summary", action="store_true",
                   help="omit the per-point list from the certificate")
    _add_config(p)
    _add_output(p)

    p = sub.add_parser("curve", formatter_class=_Fmt, epilog=EPILOG,
                       help="bound curves over a q grid (CSV)")
    _add_problem(p, need_p=False)
    p.add_argument("--q-min", type=float, default=0.01, help="smallest q = 1 - p")
    p.add_argument("--q-max", type=float, default=0.99, help="largest q")
    p.add_argument("--points", type=int, default=100, help="number of q values")
    p.add_argument("--gnuplot", default=None, help="also write a gnuplot script here")
    _add_config(p)
    _add_output(p, ("csv", "json"), "csv")

    p = sub.add_parser("verify", formatter_class=_Fmt, epilog=EPILOG,
                       help="run internal oracle and identity checks")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all", help="suite")

    p = sub.add_parser("experiment", formatter_class=_Fmt, epilog=EPILOG,
                       help="Monte Carlo experiments on random formulas")
    esub = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)

    def common(e, need_p=False):
        _add_problem(e, need_p)
        e.add_argument("--n", type=int, required=True, help="number of variables")
        e.add_argument("--samples", type=int, default=100, help="number of formulas")
        e.add_argument("--seed", type=int, default=0, help="master seed")
        e.add_argument("--dimacs", default=None,
                       help="directory to write every sampled formula as DIMACS CNF")
        _add_output(e)

    e = esub.add_parser("psat", formatter_class=_Fmt, epilog=EPILOG,
                        help="frequency of p-satisfiable formulas")
    common(e, need_p=True)
    e.add_argument("--r", type=float, required=True, help="clause density, m = round(r n)")
    e.add_argument("--solver", choices=("exact", "local"), default="exact",
                   help="exact branch and bound (n <= 25) or local search (lower bound)")
    e.add_argument("--steps", type=int, default=None,
                   help="local search flips (default 1000 n)")

    e = esub.add_parser("moments", formatter_class=_Fmt, epilog=EPILOG,
                        help="Monte Carlo E[X], E[X^2] against the exact formulas")
    common(e, need_p=True)
    e.add_argument("--m", type=int, required=True, help="number of clauses")
    e.add_argument("--gamma", type=float, default=None, help="gamma (default: tuned)")
    e.add_argument("--eta", type=float, default=None, help="eta (default: tuned)")

    e = esub.add_parser("concentration", formatter_class=_Fmt, epilog=EPILOG,
                        help="tails of the MAX-SAT value vs 2 exp(-2 t^2 / m)")
    common(e)
    e.add_argument("--m", type=int, required=True, help="number of clauses")
    e.add_argument("--t", type=float, nargs="+", default=[5.0, 10.0], help="deviations")

    e = esub.add_parser("sample", formatter_class=_Fmt, epilog=EPILOG,
                        help="draw formulas and report improper-clause counts")
    common(e)
    e.add_argument("--m", type=int, required=True, help="number of clauses")
    e.add_argument("--model", choices=emp.MODELS, default="iid", help="clause model")
    return ap


def _validate(args) -> None:
    try:
        if getattr(args, "p", None) is not None:
            ProblemParams(args.k, args.p)
        elif getattr(args, "k", None) is not None and args.k < 2:
            raise DomainError(f"k >= 2 required (got k={args.k})")
    except DomainError as exc:
        raise UsageError(str(exc))
    if getattr(args, "r", None) is not None and not args.r > 0:
        raise UsageError(f"r > 0 required (got r={args.r})")
    if hasattr(args, "grid"):
        try:
            _config(args)
        except DomainError as exc:
            raise UsageError(str(exc))
    if args.command == "curve":
        if not (0.0 <= args.q_min <= args.q_max < 1.0):
            raise UsageError("0 <= q-min <= q-max < 1 required")
        if args.points < 1:
            raise UsageError("points >= 1 required")
    if args.command == "experiment":
        if args.n < 1 or args.samples < 1:
            raise UsageError("n >= 1 and samples >= 1 required")
        if getattr(args, "m", 0) < 0:
            raise UsageError("m >= 0 required")


def parse_args(argv=None) -> argparse.Namespace:
    args = build_parser().parse_args(argv)
    _validate(args)
    return args


# ------------------------------------------------------------------- output

def _clean(x):
    """Make a structure JSON-safe: numpy scalars to Python, non-finite to null."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _g6(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".6g")


def curve_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for row in curve.rows:
        w.writerow([_g6(getattr(row, c)) for c in CURVE_COLUMNS])
    return buf.getvalue()


def gnuplot_script(csv_path: str, k: int) -> str:
    c = {name: i + 1 for i, name in enumerate(CURVE_COLUMNS)}
    return (
        "set datafile separator ','\n"
        "set datafile missing 'nan'\n"
        "set key autotitle columnhead\n"
        f"set title 'Density bounds, k = {k}'\n"
        "set xlabel 'q = 1 - p'\nset ylabel 'r'\nset logscale y\n"
        f"plot '{csv_path}' using {c['q']}:{c['upper_lemma2']} with lines title 'upper', \\\n"
        f"     '{csv_path}' using {c['q']}:{c['certified_lower']} with lines title 'certified lower', \\\n"
        f"     '{csv_path}' using {c['q']}:{c['T_k']} with lines dashtype 2 title 'T_k'\n"
        "pause -1\n"
    )


def _emit(args, text: str, manifest: dict | None) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        if manifest is not None:
            with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
                fh.write(dumps(manifest))
    else:
        sys.stdout.write(text)
        if manifest is not None:
            sys.stderr.write(dumps({"manifest": manifest}))


def _manifest(args, start: float, status: str, seed=None) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("out",)}
    return {"tool": "psatbounds", "version": __version__, "parameters": params,
            "seed": seed, "threads": emp.thread_count(),
            "wall_clock_seconds": round(time.perf_counter() - start, 3),
            "status": status}


def _config(args) -> CertifyConfig:
    return CertifyConfig(grid_points=args.grid, room=args.room,
                         deriv_safety=args.deriv_safety, refine_factor=args.refine,
                         r_tolerance=args.r_tol, window_A=args.window_A,
                         sweeps=args.sweeps, line_tol=args.line_tol)


# ----------------------------------------------------------------- commands

def _bounds(args, start):
    params = ProblemParams(args.k, args.p)
    b = density_bounds(params)
    try:
        w = tuned_weights(params)
        tuned = {f.name: getattr(w, f.name) for f in fields(w)}
    except DegenerateTuning as exc:
        tuned = {"degenerate": str(exc)}
    rec = {"k": params.k, "p": params.p, "q": params.q, "u0": params.u0,
           "T_k": b.t_big, "upper_lemma2": b.upper, "t_k": b.t_small, "delta": b.delta,
           "t_k_vacuous": b.vacuous, "cghs_lower_leading_order": b.cghs_lower,
           "cghs_upper": b.cghs_upper, "tuned": tuned}
    if args.format == "json":
        _emit(args, dumps(rec), _manifest(args, start, "ok"))
        return EXIT_OK
    lines = [f"k = {params.k}, p = {params.p:.6g} (q = {params.q:.6g}, u0 = {params.u0:.6g})",
             f"  first-moment scale T_k           {b.t_big:.6g}",
             f"  upper bound (first moment)       {b.upper:.6g}",
             "  lower target t_k                 "
             + ("vacuous" if b.vacuous else f"{b.t_small:.6g}") + f"  (delta = {b.delta:.6g})",
             "  CGHS lower (leading order)       "
             + ("n/a at p = 1" if math.isnan(b.cghs_lower) else f"{b.cghs_lower:.6g}"),
             "  CGHS upper                       "
             + ("n/a at p = 1" if math.isnan(b.cghs_upper) else f"{b.cghs_upper:.6g}")]
    if "degenerate" in tuned:
        lines.append(f"  tuned weights: {tuned['degenerate']}")
    else:
        lines.append(f"  tuned weights: eps0 = {tuned['eps0']:.6g}, gamma0 = "
                     f"{tuned['gamma0']:.6g}, eta0 = {tuned['eta0']:.6g}")
    _emit(args, "\n".join(lines) + "\n", None)
    return EXIT_OK


def _cert_dict(cert, summary: bool) -> dict:
    d = cert.to_dict()
    if summary:
        d["points"] = f"{len(cert.points)} points omitted"
    return d


def _certify(args, start):
    cert = certify_density(ProblemParams(args.k, args.p), args.r, _config(args))
    _emit(args, dumps(_cert_dict(cert, args.summary)), _manifest(args, start, cert.status))
    return EXIT_OK


def _maxdensity(args, start):
    r_low, cert = max_certified_density(ProblemParams(args.k, args.p), _config(args))
    rec = {"k": args.k, "p": args.p, "certified_lower": r_low,
           "certificate": _cert_dict(cert, args.summary)}
    _emit(args, dumps(rec), _manifest(args, start, cert.status))
    return EXIT_OK


def _curve(args, start):
    qs = np.linspace(args.q_min, args.q_max, args.points)
    curve = bound_curve(args.k, qs, _config(args))
    if args.format == "csv":
        text = curve_csv(curve)
    else:
        text = dumps({"k": curve.k, "rows": [asdict(r) for r in curve.rows]})
    _emit(args, text, _manifest(args, start, "ok"))
    if args.gnuplot:
        with open(args.gnuplot, "w", encoding="utf-8") as fh:
            fh.write(gnuplot_script(args.out or "curve.csv", args.k))
    return EXIT_OK


def _verify(args, start):
    checks = run_suite(args.suite)
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    print(f"{'all checks passed' if ok else 'FAILED'} ({len(checks)} checks)")
    return EXIT_OK if ok else 4


def _dump_dimacs(args, m: int, model: str = "iid"):
    os.makedirs(args.dimacs, exist_ok=True)
    for i in range(args.samples):
        f = emp.sample_formula(args.n, m, args.k, model, emp.sample_rng(args.seed, i))
        with open(os.path.join(args.dimacs, f"sample_{i:06d}.cnf"), "w") as fh:
            emp.write_dimacs(f, fh, f"seed {args.seed} sample {i} model {model}")


def _experiment(args, start):
    if args.kind == "psat":
        params = ProblemParams(args.k, args.p)
        st = emp.psat_frequency(args.n, args.r, params, args.samples, args.solver,
                                args.seed, args.steps)
        rec, m, model = st.to_dict(), st.params["m"], "iid"
    elif args.kind == "moments":
        params = ProblemParams(args.k, args.p)
        if args.gamma is None or args.eta is None:
            tw = tuned_weights(params)
        w = WeightPair(args.gamma if args.gamma is not None else tw.gamma0,
                       args.eta if args.eta is not None else tw.eta0)
        est = emp.estimate_moments(args.n, args.m, args.k, args.p, w, args.samples, args.seed)
        rec = {"kind": "moments", "params": {"n": args.n, "m": args.m, "k": args.k,
                                             "p": args.p, "gamma": w.gamma, "eta": w.eta},
               **est,
               "exact_mean_x": math.exp(log_first_moment(args.n, params, args.m / args.n, w)),
               "exact_mean_x2": math.exp(log_second_moment_sum(args.n, args.m, args.k,
                                                               params.u0, w))}
        m, model = args.m, "iid"
    elif args.kind == "concentration":
        st = emp.concentration_check(args.n, args.m, args.k, args.samples, args.t, args.seed)
        rec, m, model = st.to_dict(), args.m, "iid"
    else:
        improper = []
        for i in range(args.samples):
            f = emp.sample_formula(args.n, args.m, args.k, args.model,
                                   emp.sample_rng(args.seed, i))
            improper.append(f.improper_count())
        mean, se = emp._mean_stderr(np.array(improper))
        rec = {"kind": "sample", "samples": args.samples, "seed": args.seed, "rng": emp.RNG_NAME,
               "params": {"n": args.n, "m": args.m, "k": args.k, "model": args.model},
               "mean": mean, "stderr": se, "values": improper}
        m, model = args.m, args.model
    _emit(args, dumps(rec), _manifest(args, start, "ok", seed=args.seed))
    if args.dimacs:
        _dump_dimacs(args, m, model)
    return EXIT_OK


COMMANDS = {"bounds": _bounds, "certify": _certify, "maxdensity": _maxdensity,
            "curve": _curve, "verify": _verify, "experiment": _experiment}


def execute(args) -> int:
    start = time.perf_counter()
    try:
        return COMMANDS[args.command](args, start)
    except DomainError as exc:
        sys.stderr.write(f"domain error: {exc}\n")
        return EXIT_DOMAIN
    except (NumericalFailure, FloatingPointError, OverflowError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"psatbounds: usage error: {exc}\n")
        return EXIT_USAGE
    return execute(args)


if __name__ == "__main__":
    sys.exit(main())
