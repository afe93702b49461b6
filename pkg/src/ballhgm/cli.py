"""Command-line front end.

Subcommands
-----------
prob           ball probability at one radius (JSON record)
cdf            G(r) on a grid (CSV ``r,G``)
laplace-ratio  HGM / large-radius asymptotics per component
bench          a parameter family over a range of dimensions
selftest       cross-oracle and invariant suites

Exit status is 0 on success, 1 when the solver fails and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .diagnostics import laplace_ratios
from .errors import HgmError, NonFinite, NonPositiveVariance, SolverError
from .families import CLOSED_FORM_FAMILIES, FAMILIES, MU_PATTERNS, family_params
from .integrator import SolveOptions, solve_ball_probability, solve_f_trace
from .model import ModelParams
from .oracle import chi_closed_form, exp_product_closed_form
from .selftest import LEVELS, run_suites

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_USAGE = 2

PROB_KEYS = ("p", "one_minus_p", "steps", "rescales", "wall_time_s")
CDF_HEADER = ("r", "G")
RATIO_HEADER = ("r", "component", "hgm_over_asymptotic", "diagnostic")
BENCH_HEADER = ("family", "d", "r", "hgm", "one_minus_p", "exact", "exact_minus_hgm", "steps", "wall_time_s")


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Numbers with 12 significant digits; None becomes an empty field."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def _json_value(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        # JSON has no NaN or infinity
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _parse_list(text: str, name: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated decimals, got {text!r}") from None
    if not vals:
        raise UsageError(f"--{name}: empty list")
    return vals


def parse_dims(text: str) -> list[int]:
    """``a:b[:step]``, inclusive of ``b``."""
    parts = text.split(":")
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        raise UsageError(f"--dims: expected a:b[:step], got {text!r}") from None
    if len(nums) == 1:
        nums = [nums[0], nums[0]]
    if len(nums) not in (2, 3):
        raise UsageError(f"--dims: expected a:b[:step], got {text!r}")
    a, b = nums[:2]
    step = nums[2] if len(nums) == 3 else 1
    if a < 1 or b < a or step < 1:
        raise UsageError(f"--dims: need 1 <= a <= b and step >= 1, got {text!r}")
    return list(range(a, b + 1, step))


def _params_from_args(args) -> ModelParams:
    sources = sum(x is not None for x in (args.sigma2, args.params, args.family))
    if sources != 1:
        raise UsageError("give exactly one of --sigma2, --params or --family")
    try:
        if args.family is not None:
            if args.dim is None:
                raise UsageError("--family needs --dim")
            return family_params(args.family, args.dim, args.mu_pattern)
        if args.params is not None:
            try:
                with open(args.params) as fh:
                    obj = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"--params: {exc}") from None
            if not isinstance(obj, dict) or "sigma2" not in obj:
                raise UsageError("--params: expected a JSON object with a 'sigma2' array")
            sigma2, mu = obj["sigma2"], obj.get("mu")
        else:
            sigma2 = _parse_list(args.sigma2, "sigma2")
            mu = _parse_list(args.mu, "mu") if args.mu is not None else None
        if mu is not None and len(mu) != len(sigma2):
            raise UsageError(f"sigma2 has {len(sigma2)} entries but mu has {len(mu)}")
        return ModelParams(sigma2, mu)
    except (NonPositiveVariance, NonFinite, ValueError, TypeError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(str(exc)) from None


def _solve_options(args, **extra) -> SolveOptions:
    try:
        return SolveOptions(r0=args.r0, switch_radius=args.switch, rel_tol=args.rtol, abs_tol=args.atol, **extra)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _emit(rows, header, fmt_name, out):
    if fmt_name == "json":
        recs = [{k: _json_value(v) for k, v in zip(header, row)} for row in rows]
        out.write(json.dumps(recs, indent=None) + "\n")
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


def _timing(args, t):
    return None if args.no_timing else t


def cmd_prob(args, out) -> int:
    params = _params_from_args(args)
    if not args.r > 0:
        raise UsageError("--r must be positive")
    res = solve_ball_probability(params, args.r, _solve_options(args))
    rec = {
        "p": res.p,
        "one_minus_p": res.one_minus_p,
        "steps": res.stats["steps"],
        "rescales": res.stats["rescales"],
        "wall_time_s": _timing(args, res.stats["wall_time_s"]),
    }
    if args.format == "csv":
        _emit([[rec[k] for k in PROB_KEYS]], PROB_KEYS, "csv", out)
    else:
        out.write(json.dumps({k: _json_value(rec[k]) for k in PROB_KEYS}) + "\n")
    return EXIT_OK


def cmd_cdf(args, out) -> int:
    params = _params_from_args(args)
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    if not args.rmax >= args.r0:
        raise UsageError("--rmax must be >= --r0")
    radii = sorted({float(x) for x in np.linspace(args.r0, args.rmax, args.points)})
    res = solve_ball_probability(params, args.rmax, _solve_options(args, checkpoint_radii=tuple(radii)))
    rows = [(r, g) for r, g in res.checkpoints]
    _emit(rows, CDF_HEADER, args.format, out)
    return EXIT_OK


def cmd_laplace_ratio(args, out) -> int:
    params = _params_from_args(args)
    radii = _parse_list(args.radii, "radii")
    if min(radii) <= 0:
        raise UsageError("--radii must be positive")
    rows = []
    for row in laplace_ratios(params, radii, _solve_options(args), tie_tol=args.tie_tol):
        if row.error:
            rows.append((row.r, "*", math.nan, row.error))
            continue
        rows.append((row.r, "f", row.f, row.branch))
        for name, vals in (("dtau", row.dtau), ("dlambda", row.dlambda)):
            for i, v in enumerate(vals, start=1):
                rows.append((row.r, f"{name}_{i}", v, "" if math.isfinite(v) else "zero_asymptotic"))
    _emit(rows, RATIO_HEADER, args.format, out)
    return EXIT_OK


def bench_row(family: str, d: int, r: float, mu_pattern: str, opts: SolveOptions) -> tuple:
    """One row of the bench table (module level so worker processes can run it)."""
    params = family_params(family, d, mu_pattern)
    if family == "chi":
        pt = solve_f_trace(params, [r], opts)[0]
        hgm = math.exp(pt.log_f)
        exact = chi_closed_form(d, r)
        return (family, d, r, hgm, None, exact, exact - hgm, None, None)
    res = solve_ball_probability(params, r, opts)
    exact = exp_product_closed_form(d // 2, r) if family == "exp-product" else None
    diff = exact - res.p if exact is not None else None
    return (family, d, r, res.p, res.one_minus_p, exact, diff, res.stats["steps"], res.stats["wall_time_s"])


def _timed_bench_row(family, d, r, mu_pattern, opts):
    t = time.perf_counter()
    row = bench_row(family, d, r, mu_pattern, opts)
    if row[-1] is None:
        row = row[:-1] + (time.perf_counter() - t,)
    return row


def cmd_bench(args, out) -> int:
    if args.family not in FAMILIES:
        raise UsageError(f"--family must be one of {', '.join(FAMILIES)}")
    dims = parse_dims(args.dims)
    if args.family == "exp-product" and any(d % 2 for d in dims):
        raise UsageError("exp-product needs even dimensions")
    if args.family in CLOSED_FORM_FAMILIES and args.mu_pattern != "zero":
        raise UsageError(f"{args.family} is defined with zero mean")
    if not args.r > 0:
        raise UsageError("--r must be positive")
    opts = _solve_options(args)
    jobs = [(args.family, d, args.r, args.mu_pattern, opts) for d in dims]
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_timed_bench_row, *zip(*jobs)))
    else:
        rows = [_timed_bench_row(*j) for j in jobs]
    if args.no_timing:
        rows = [row[:-1] + (None,) for row in rows]
    _emit(rows, BENCH_HEADER, args.format, out)
    return EXIT_OK


def cmd_selftest(args, out) -> int:
    results = run_suites(args.level, seed=args.seed)
    for s in results:
        out.write(f"{'PASS' if s.passed else 'FAIL'} {s.name}: {s.detail}\n")
    ok = all(s.passed for s in results)
    out.write(f"{sum(s.passed for s in results)}/{len(results)} suites passed\n")
    return EXIT_OK if ok else EXIT_SOLVER


def _add_params(p):
    g = p.add_argument_group("model parameters")
    g.add_argument("--sigma2", help="comma-separated variances")
    g.add_argument("--mu", help="comma-separated means (default zeros)")
    g.add_argument("--params", metavar="FILE", help="JSON object with sigma2 and optional mu arrays")
    g.add_argument("--family", choices=FAMILIES, help="generate parameters from a named family")
    g.add_argument("--dim", type=int, help="dimension for --family")
    g.add_argument("--mu-pattern", choices=MU_PATTERNS, default="zero", help="mean vector for --family")


def _add_solver(p):
    g = p.add_argument_group("solver")
    d = SolveOptions()
    g.add_argument("--r0", type=float, default=d.r0, help="starting radius (default %(default)g)")
    g.add_argument("--switch", type=float, default=d.switch_radius, help="radius of the gauge switch (default %(default)g)")
    g.add_argument("--rtol", type=float, default=d.rel_tol, help="relative tolerance (default %(default)g)")
    g.add_argument("--atol", type=float, default=d.abs_tol, help="absolute tolerance, relative to the state size (default %(default)g)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ballhgm", description="Ball probabilities of diagonal normal vectors by the holonomic gradient method.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prob", help="P(||X|| <= r)")
    _add_params(p)
    _add_solver(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--no-timing", action="store_true", help="report wall_time_s as null for reproducible output")
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("cdf", help="G(r) on an even grid from r0 to rmax")
    _add_params(p)
    _add_solver(p)
    p.add_argument("--rmax", type=float, required=True)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(func=cmd_cdf)

    p = sub.add_parser("laplace-ratio", help="HGM values over their large-radius asymptotics")
    _add_params(p)
    _add_solver(p)
    p.add_argument("--radii", default="5,10,20", help="comma-separated radii (default %(default)s)")
    p.add_argument("--tie-tol", type=float, default=1e-8)
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(func=cmd_laplace_ratio)

    p = sub.add_parser("bench", help="run a parameter family over a range of dimensions")
    _add_solver(p)
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--dims", required=True, help="a:b[:step], inclusive")
    p.add_argument("--mu-pattern", choices=MU_PATTERNS, default="zero")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--jobs", type=int, default=1, help="worker processes; row order is unaffected")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--no-timing", action="store_true", help="leave wall_time_s empty for reproducible output")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("selftest", help="cross-oracle and invariant suites")
    p.add_argument("--level", choices=LEVELS, default="quick")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"ballhgm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, HgmError, ArithmeticError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc)}
        radius = getattr(exc, "radius", None)
        if radius is not None:
            diag["radius"] = radius
        out.write(json.dumps(diag) + "\n")
        print(f"ballhgm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
