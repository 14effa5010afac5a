"""Command-line front end: bound sweeps, simulation, comparison and inverse solves.

Every subcommand reads one scenario file (a path, or the name of a bundled
recipe) and writes a CSV with a fixed header to stdout or ``--out``.
Exit codes: 0 success, 1 a validity check failed or every row errored,
2 bad input or an unreachable target.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from itertools import groupby
from typing import Optional, Sequence

import numpy as np

from . import __version__, _core
from .bounds import FAMILIES, bound, bound_backlog
from .config import ConfigError, ScenarioFile, SweepPoint, list_recipes, load
from .optimize import UnreachableTarget, delay_for_epsilon, snr_for_epsilon
from .sim import estimate_backlog_violation, estimate_violation

__all__ = ["main", "build_parser", "bound_rows", "simulate_rows", "compare_rows", "inverse_rows"]

BACKLOG_COLUMN = "wtb_backlog"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(header, rows, out: Optional[str]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def _axes(sf: ScenarioFile):
    return sf.swept_axes()


# ---------------------------------------------------------------------------
# row builders (pure functions of the parsed file and options)


def _bound_point(sf: ScenarioFile, fams, p: SweepPoint):
    sc = sf.scenario(p)
    if p.x is not None:
        try:
            return [bound_backlog(sc, float(p.x)).probability]
        except (ArithmeticError, ValueError) as e:
            warnings.warn(f"backlog bound failed at {p}: {e}")
            return [math.nan]
    vals = []
    for fam in fams:
        try:
            vals.append(bound(sc, fam).probability)
        except (ArithmeticError, ValueError) as e:
            warnings.warn(f"{fam} failed at {p}: {e}")
            vals.append(math.nan)
    return vals


def _bound_columns(sf: ScenarioFile, fams):
    return [BACKLOG_COLUMN] if sf.axis("x") != [None] else list(fams)


def bound_rows(sf: ScenarioFile, fams: Sequence[str], workers: int = 1):
    axes = _axes(sf)
    pts = sf.points()
    vals = _map(lambda p: _bound_point(sf, fams, p), pts, workers)
    header = list(axes) + _bound_columns(sf, fams)
    return header, [list(p.key(axes)) + v for p, v in zip(pts, vals)]


def simulate_rows(sf: ScenarioFile, sim_over: dict):
    """One simulation per (snr, d) pair; w and x are read off the same trials."""
    axes = _axes(sf)
    rows = []
    pts = sf.points()
    for _, group in groupby(pts, key=lambda p: (p.snr_db, p.d)):
        group = list(group)
        base = group[0]
        cfg = sf.sim_config(sf.scenario(replace(base, w=0)), **sim_over)
        if base.x is None:
            ws = sorted({p.w for p in group})
            est = estimate_violation(cfg, ws)
            by_w = {int(w): i for i, w in enumerate(est.grid)}
            for p in group:
                i = by_w[p.w]
                rows.append(list(p.key(axes)) + [est.p_hat[i], est.ci_lo[i], est.ci_hi[i], est.se[i], est.trials])
        else:
            cache = {}
            for p in group:
                if p.w not in cache:
                    xs = sorted({q.x for q in group if q.w == p.w})
                    sc = sf.scenario(replace(base, w=p.w))
                    cfg_w = replace(cfg, scenario=sc)
                    est = estimate_backlog_violation(cfg_w, xs)
                    cache[p.w] = (est, {float(x): i for i, x in enumerate(est.grid)})
                est, idx = cache[p.w]
                i = idx[float(p.x)]
                rows.append(list(p.key(axes)) + [est.p_hat[i], est.ci_lo[i], est.ci_hi[i], est.se[i], est.trials])
    return list(axes) + ["p_hat", "ci_lo", "ci_hi", "se", "trials"], rows


def verdict(bound_value: float, p_hat: float, se: float, trials: int) -> str:
    if not math.isfinite(bound_value):
        return "error"
    if p_hat < 10.0 / trials:
        return "inconclusive"
    return "pass" if bound_value >= p_hat - 3.0 * se else "fail"


def compare_rows(sf: ScenarioFile, fams, sim_over: dict, workers: int = 1):
    bh, brows = bound_rows(sf, fams, workers)
    sh, srows = simulate_rows(sf, sim_over)
    k = len(_axes(sf))
    cols = bh[k:]
    header = bh + sh[k:] + [f"{c}_verdict" for c in cols]
    rows = []
    for br, sr in zip(brows, srows):
        assert br[:k] == sr[:k]
        p_hat, se, trials = sr[k], sr[k + 3], sr[k + 4]
        rows.append(br + sr[k:] + [verdict(b, p_hat, se, trials) for b in br[k:]])
    return header, rows


def inverse_rows(sf: ScenarioFile, fams, mode: str, eps: float):
    pts = sf.points()
    if mode == "delay":
        axes = tuple(a for a in _axes(sf) if a not in ("w", "x"))
        w_cap = int(sf._get("eval", "w_cap", 10_000))
        rows, seen = [], set()
        for p in pts:
            key = p.key(axes)
            if key in seen:
                continue
            seen.add(key)
            sc = sf.scenario(replace(p, w=0))
            rows.append(list(key) + [delay_for_epsilon(sc, f, eps, w_cap) for f in fams])
        return list(axes) + [f"{f}_w" for f in fams], rows
    axes = tuple(a for a in _axes(sf) if a not in ("snr_db", "x"))
    floor = float(sf._get("eval", "snr_floor_db", -20.0))
    cap = float(sf._get("eval", "snr_cap_db", 60.0))
    tol = float(sf._get("eval", "snr_tol_db", 0.01))
    rows, seen = [], set()
    for p in pts:
        key = p.key(axes)
        if key in seen:
            continue
        seen.add(key)
        sc = sf.scenario(p)
        vals = [10.0 * math.log10(snr_for_epsilon(sc, f, eps, p.w, floor, cap, tol)) for f in fams]
        rows.append(list(key) + vals)
    return list(axes) + [f"{f}_snr_db" for f in fams], rows


# ---------------------------------------------------------------------------
# argument handling


def _families(arg: Optional[str], sf: ScenarioFile):
    if arg is None:
        return sf.families()
    if arg == "all":
        # Every family that applies to the file's information delay.
        return ["wtb_delayed"] if any(d > 0 for d in sf.axis("d")) else ["stationary", "sotat", "wtb"]
    fams = [f.strip() for f in arg.split(",") if f.strip()]
    bad = [f for f in fams if f not in FAMILIES]
    if bad:
        raise ConfigError(f"unknown family {bad[0]!r}; choose from {', '.join(FAMILIES)} or 'all'")
    return fams


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be an integer >= 1")
    return v


def _eps(s: str) -> float:
    v = float(s)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("eps must lie in (0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wtbound", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="scenario TOML file or bundled recipe name")
    common.add_argument("--out", help="CSV destination (default stdout)")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set a config value, e.g. snr_db=10 or eval.w=[0,5]; repeatable")
    common.add_argument("--t-eval", type=int, help="evaluation slot t (default: message length T)")
    common.add_argument("--meta", help="write a JSON provenance sidecar to this path")
    common.add_argument("--workers", type=_positive_int, default=1,
                        help="worker threads; results do not depend on this")

    fam = argparse.ArgumentParser(add_help=False)
    fam.add_argument("--family", help="comma-separated bound families, or 'all'")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--trials", type=_positive_int, help="Monte Carlo trials (default [sim] trials)")
    sim.add_argument("--seed", type=int, help="base seed (default [sim] seed)")
    sim.add_argument("--timing", choices=("cut_through", "store_and_forward"),
                     help="hand-off between hops (default cut_through)")
    sim.add_argument("--delay-mode", choices=("at_t", "max"),
                     help="delay at t_eval, or worst over t <= t_eval (default at_t)")

    sub.add_parser("bound", parents=[common, fam], help="sweep bound families")
    sub.add_parser("simulate", parents=[common, sim], help="Monte Carlo violation estimates")
    sub.add_parser("compare", parents=[common, fam, sim], help="bounds next to simulation, with verdicts")
    inv = sub.add_parser("inverse", parents=[common, fam], help="smallest delay or SNR meeting eps")
    inv.add_argument("--mode", choices=("delay", "snr"), default="delay",
                     help="solve for the smallest w, or the smallest mean SNR per w")
    inv.add_argument("--eps", type=_eps, help="target violation probability (default [eval] eps)")
    sub.add_parser("recipes", help="list bundled recipe names")
    return ap


def _write_meta(path, sf: ScenarioFile, args, header):
    meta = {
        "scenario_sha256": sf.digest(),
        "source": sf.source,
        "command": args.command,
        "overrides": args.override,
        "columns": header,
        "wtbound": __version__,
        "backend": _core.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "recipes":
        print("\n".join(list_recipes()))
        return 0
    overrides = list(args.override)
    if args.t_eval is not None:
        overrides.append(f"eval.t={args.t_eval}")
    try:
        sf = load(args.file, overrides)
        sim_over = {k: getattr(args, k, None) for k in ("trials", "seed", "timing", "delay_mode")}
        sim_over["workers"] = args.workers
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if args.command == "bound":
                header, rows = bound_rows(sf, _families(args.family, sf), args.workers)
            elif args.command == "simulate":
                header, rows = simulate_rows(sf, sim_over)
            elif args.command == "compare":
                header, rows = compare_rows(sf, _families(args.family, sf), sim_over, args.workers)
            else:
                eps = args.eps if args.eps is not None else sf._get("eval", "eps")
                if eps is None:
                    raise ConfigError("inverse needs --eps or [eval] eps")
                header, rows = inverse_rows(sf, _families(args.family, sf), args.mode, float(eps))
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except (ConfigError, UnreachableTarget) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    _write_csv(header, rows, args.out)
    if args.meta:
        _write_meta(args.meta, sf, args, header)

    if args.command in ("bound", "compare"):
        k = len(_axes(sf))
        ncols = len(_bound_columns(sf, _families(args.family, sf)))
        if rows and all(all(isinstance(v, float) and math.isnan(v) for v in r[k:k + ncols]) for r in rows):
            print("error: every row failed to evaluate", file=sys.stderr)
            return 1
    if args.command == "compare":
        fails = sum(r.count("fail") for r in rows)
        if fails:
            print(f"error: {fails} validity check(s) failed", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
