"""Command-line interface.

Exit codes: 0 success, 2 unparseable input, 3 failed precondition, 4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, _rng
from .estimators import (
    PlanInputs,
    estimate_chapman,
    estimate_psi,
    estimate_psi_star,
    estimate_rs,
    plan_sampling_rate,
)
from .intervals import (
    PosteriorConfig,
    dirichlet_unadjusted_interval,
    jeffreys_fpc_interval,
    psi_posterior_draws,
    select_credible_interval,
    wald_interval,
)
from .means import BootstrapConfig, MeanData, Target, bootstrap_mean
from .simlab import (
    Series1Config,
    Series2Config,
    default_workers,
    rows_to_csv,
    rows_to_json,
    run_series1,
    run_series2,
)
from .tableau import CellCounts, DesignError, IndividualRecord, design_context, tabulate, validate_design

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_INTERNAL = 4

WORKED_EXAMPLE_CELLS = (6, 5, 100, 46, 33, 6, 304)
WORKED_EXAMPLE_SEED = 2022
WORKED_EXAMPLE_REFERENCE = {
    "RS": (110.0, 28.1, 63.5, 171.5),
    "Psi": (111.0, 23.2, 76.8, 167.9),
    "PsiStar": (103.8, 21.9, 72.3, 164.4),
}

LOW_PREVALENCE_LIMIT = 0.2


class InputError(Exception):
    """Malformed input file or arguments."""


# ---------------------------------------------------------------- input parsing

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


def _parse_bool(value, where, optional=False):
    if value is None or (isinstance(value, str) and value.strip() == ""):
        if optional:
            return None
        raise InputError(f"{where}: missing boolean")
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise InputError(f"{where}: cannot read {value!r} as a boolean")


def _parse_float(value, where):
    if value is None or (isinstance(value, str) and value.strip() == ""):
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise InputError(f"{where}: cannot read {value!r} as a number") from None


def _make_record(row, where):
    if "id" not in row or row["id"] in (None, ""):
        raise InputError(f"{where}: missing id")
    try:
        return IndividualRecord(
            id=str(row["id"]),
            in_stream1=_parse_bool(row.get("stream1"), f"{where}, stream1"),
            in_stream2=_parse_bool(row.get("stream2"), f"{where}, stream2"),
            is_case=_parse_bool(row.get("case"), f"{where}, case", optional=True),
            x_value=_parse_float(row.get("x"), f"{where}, x"),
        )
    except DesignError as exc:
        raise InputError(f"{where}: {exc}") from None


def read_records(path) -> list:
    """Read a record roster from CSV (``id,stream1,stream2,case,x``) or JSON."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if path.suffix.lower() == ".json":
        try:
            rows = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        if isinstance(rows, dict):
            rows = rows.get("records")
        if not isinstance(rows, list):
            raise InputError(f"{path}: expected a list of record objects")
        return [_make_record(row, f"{path} record {i + 1}") for i, row in enumerate(rows)]
    reader = csv.DictReader(io.StringIO(text))
    required = {"id", "stream1", "stream2", "case", "x"}
    if reader.fieldnames is None or not required <= set(reader.fieldnames):
        raise InputError(f"{path} line 1: header must contain id,stream1,stream2,case,x")
    return [_make_record(row, f"{path} line {reader.line_num}") for row in reader]


# ---------------------------------------------------------------- output helpers

def _interval_dict(iv):
    if iv is None:
        return None
    return {"lower": iv.lower, "upper": iv.upper, "method": iv.method.value, "floored": iv.floored}


def _emit(payload, fmt, table_rows=None, columns=None, out=None):
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(payload, indent=2) + "\n")
        return
    rows = table_rows if table_rows is not None else []
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow(["" if v is None else v for v in r])
        return
    widths = [max(len(str(c)), *(len(_cell(r[i])) for r in rows)) if rows else len(str(c))
              for i, c in enumerate(columns)]
    out.write("  ".join(str(c).ljust(w) for c, w in zip(columns, widths)) + "\n")
    for r in rows:
        out.write("  ".join(_cell(v).ljust(w) for v, w in zip(r, widths)) + "\n")


def _cell(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return "-" if math.isnan(v) else f"{v:.4g}" if abs(v) < 1e-3 and v else f"{v:.3f}"
    return str(v)


def _seed(args):
    if args.seed is None:
        args.seed = _rng.fresh_seed()
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


# ---------------------------------------------------------------- commands

def _count_report(cells, ctx, seed, draws, floor):
    cfg = PosteriorConfig(draws, seed)
    n_c = ctx.n_c if floor else None
    report = {"n_tot": ctx.n_tot, "n_rs": ctx.n_rs, "psi": ctx.psi, "n_c": ctx.n_c,
              "seed": seed, "draws": draws, "floor": floor,
              "warnings": validate_design(cells, ctx), "estimates": []}
    try:
        posterior = psi_posterior_draws(cells, ctx, cfg)
    except DesignError as exc:
        posterior, posterior_error = None, str(exc)

    def credible(fn):
        if posterior is None:
            raise DesignError(posterior_error)
        return fn(cells, ctx, cfg, floor=floor, draws=posterior)

    plans = [
        ("RS", estimate_rs, lambda: jeffreys_fpc_interval(cells, ctx, floor=floor)),
        ("Chapman", estimate_chapman, None),
        ("Psi", estimate_psi, lambda: credible(dirichlet_unadjusted_interval)),
        ("PsiStar", estimate_psi_star, lambda: credible(select_credible_interval)),
    ]
    for name, estimator, interval_fn in plans:
        row = {"estimator": name}
        try:
            est = estimator(cells, ctx)
        except DesignError as exc:
            row["error"] = str(exc)
            report["estimates"].append(row)
            continue
        wald = wald_interval(est, floor=n_c)
        row.update(n_hat=est.n_hat, se=est.se, prevalence=est.prevalence_hat)
        if interval_fn is None:
            row["interval"] = _interval_dict(wald)
        else:
            try:
                row["interval"] = _interval_dict(interval_fn())
            except DesignError as exc:
                row["interval"] = None
                row["interval_error"] = str(exc)
        row["wald"] = _interval_dict(wald)
        report["estimates"].append(row)
    return report


_COUNT_COLUMNS = ["estimator", "n_hat", "se", "lower", "upper", "method", "floored",
                  "wald_lower", "wald_upper"]


def _count_rows(report):
    rows = []
    for r in report["estimates"]:
        iv, wd = r.get("interval") or {}, r.get("wald") or {}
        rows.append([r["estimator"], r.get("n_hat"), r.get("se"), iv.get("lower"), iv.get("upper"),
                     iv.get("method"), iv.get("floored"), wd.get("lower"), wd.get("upper")])
    return rows


def cmd_estimate_count(args):
    inline = [getattr(args, f"n{i}") for i in range(1, 8)]
    given = [v is not None for v in inline]
    if args.records and any(given):
        raise InputError("give either --records or inline cell counts, not both")
    if args.records:
        if args.ntot is None:
            raise InputError("--records needs --ntot")
        cells, ctx = tabulate(read_records(args.records), args.ntot)
    else:
        if not all(given):
            raise InputError("inline input needs all of --n1 .. --n7")
        cells = CellCounts.from_sequence(inline)
        ctx = design_context(cells, args.ntot)
    seed = _seed(args)
    report = _count_report(cells, ctx, seed, args.draws, not args.no_floor)
    _emit(report, args.format, _count_rows(report), _COUNT_COLUMNS)
    return EXIT_OK


def cmd_estimate_mean(args):
    records = read_records(args.records)
    _, ctx = tabulate(records, args.ntot)
    data = MeanData.from_records(records, ctx)
    seed = _seed(args)
    targets = list(Target) if args.target == "all" else [Target(_TARGETS[args.target])]
    report = {"n_tot": ctx.n_tot, "seed": seed, "B": args.bootstrap, "results": []}
    failures = 0
    for i, target in enumerate(targets):
        cfg = BootstrapConfig(args.bootstrap, seed)
        try:
            est = bootstrap_mean(data, ctx, target, cfg, rng=_rng.stream(seed, i))
        except DesignError as exc:
            failures += 1
            report["results"].append({"target": target.value, "error": str(exc)})
            continue
        report["results"].append({
            "target": target.value, "mu_hat": est.mu_hat, "se": est.se,
            "lower": est.interval[0], "upper": est.interval[1],
            "b_used": est.b_used, "b_requested": est.b_requested, "warnings": list(est.warnings),
        })
    rows = [[r["target"], r.get("mu_hat"), r.get("se"), r.get("lower"), r.get("upper"),
             r.get("b_used"), r.get("error", "")] for r in report["results"]]
    _emit(report, args.format, rows, ["target", "mu_hat", "se", "lower", "upper", "b_used", "error"])
    if failures == len(targets):
        for r in report["results"]:
            print(f"error: {r['target']}: {r['error']}", file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


_TARGETS = {"overall": "Overall", "cases": "Cases", "noncases": "NonCases", "difference": "Difference"}


def cmd_plan(args):
    inputs = PlanInputs(args.p, args.phi1, args.ntot, args.sigma_p)
    psi = plan_sampling_rate(inputs)
    n_rs = math.ceil(psi * inputs.n_tot - 1e-9)
    notes = ["intended for relatively low prevalence settings (p <= 0.2)"]
    if inputs.p > LOW_PREVALENCE_LIMIT:
        notes.append("warning: above p = 0.2 this planner tends to overestimate the stream-2 sampling rate")
        print(notes[-1], file=sys.stderr)
    report = {"psi": psi, "n_rs": n_rs, "notes": notes}
    _emit(report, args.format, [[psi, n_rs]], ["psi", "n_rs"])
    return EXIT_OK


def _write_outputs(rows, cfg, args, wall):
    if not args.out:
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(rows_to_csv(rows))
    (out / "summary.json").write_text(rows_to_json(rows) + "\n")
    manifest = {
        "command": args.command,
        "config": {k: (str(v) if k == "strata_params" else v) for k, v in asdict(cfg).items()},
        "seed": cfg.seed,
        "workers": args.threads,
        "wall_time_s": wall,
        "versions": {"anchorstream": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _emit_rows(rows, fmt):
    if fmt == "csv":
        sys.stdout.write(rows_to_csv(rows))
    elif fmt == "json":
        sys.stdout.write(rows_to_json(rows) + "\n")
    else:
        cols = ["estimator", "interval", "truth", "mc_mean", "mc_sd", "avg_se", "coverage", "avg_width",
                "excluded_estimate", "excluded_interval"]
        _emit(None, "text", [[getattr(r, c) for c in cols] for r in rows], cols)


def cmd_simulate(args):
    seed = _seed(args)
    common = dict(n_tot=args.ntot, p=args.prev, psi=args.psi, reps=args.reps,
                  posterior_draws=args.draws, seed=seed,
                  case_count="binomial" if args.binomial_cases else "fixed")
    if args.threads is None:
        args.threads = default_workers()
    start = time.perf_counter()
    if args.command == "simulate-series1":
        cfg = Series1Config(**common)
        rows = run_series1(cfg, workers=args.threads)
    else:
        cfg = Series2Config(**common, bootstrap_b=args.bootstrap)
        rows = run_series2(cfg, workers=args.threads)
    wall = time.perf_counter() - start
    _write_outputs(rows, cfg, args, wall)
    _emit_rows(rows, args.format)
    return EXIT_OK


def cmd_reproduce_worked_example(args):
    cells = CellCounts.from_sequence(WORKED_EXAMPLE_CELLS)
    ctx = design_context(cells)
    report = _count_report(cells, ctx, WORKED_EXAMPLE_SEED, 10000, True)
    report["reference"] = {k: dict(zip(("n_hat", "se", "lower", "upper"), v))
                           for k, v in WORKED_EXAMPLE_REFERENCE.items()}
    rows = []
    for r in report["estimates"]:
        ref = WORKED_EXAMPLE_REFERENCE.get(r["estimator"], (None,) * 4)
        iv = r["interval"]
        rows.append([r["estimator"], r["n_hat"], ref[0], r["se"], ref[1],
                     iv["lower"], ref[2], iv["upper"], ref[3], iv["method"]])
    print(f"seed: {WORKED_EXAMPLE_SEED}", file=sys.stderr)
    _emit(report, args.format, rows,
          ["estimator", "n_hat", "reference", "se", "reference", "lower", "reference",
           "upper", "reference", "method"])
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _threads_default():
    env = os.environ.get("ANCHORSTREAM_THREADS")
    return int(env) if env else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anchorstream",
                                     description="Anchor-stream capture-recapture estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def fmt(p, default="text"):
        p.add_argument("--format", choices=("json", "csv", "text"), default=default)

    p = sub.add_parser("estimate-count", help="case-count point and interval estimates")
    for i in range(1, 8):
        p.add_argument(f"--n{i}", type=int)
    p.add_argument("--records", help="CSV or JSON roster")
    p.add_argument("--ntot", type=int, help="population size (required with --records)")
    p.add_argument("--seed", type=int)
    p.add_argument("--draws", type=int, default=10000, help="posterior draws")
    p.add_argument("--no-floor", action="store_true", help="do not floor lower limits at n_c")
    fmt(p)
    p.set_defaults(func=cmd_estimate_count)

    p = sub.add_parser("estimate-mean", help="standardized means with bootstrap intervals")
    p.add_argument("--records", required=True)
    p.add_argument("--ntot", type=int, required=True)
    p.add_argument("--target", choices=("all", *_TARGETS), default="all")
    p.add_argument("-B", "--bootstrap", type=int, default=1000)
    p.add_argument("--seed", type=int)
    fmt(p)
    p.set_defaults(func=cmd_estimate_mean)

    p = sub.add_parser("plan", help="stream-2 sampling rate for a target SE")
    p.add_argument("--p", type=float, required=True, help="assumed prevalence")
    p.add_argument("--phi1", type=float, required=True, help="share of cases found by stream 1")
    p.add_argument("--ntot", type=int, required=True)
    p.add_argument("--sigma-p", type=float, required=True, help="target SE of the prevalence")
    fmt(p)
    p.set_defaults(func=cmd_plan)

    for name in ("simulate-series1", "simulate-series2"):
        p = sub.add_parser(name, help="Monte Carlo study")
        p.add_argument("--ntot", type=int, required=True)
        p.add_argument("--prev", type=float, required=True)
        p.add_argument("--psi", type=float, required=True)
        p.add_argument("--reps", type=int, default=10000)
        p.add_argument("--draws", type=int, default=10000)
        if name == "simulate-series2":
            p.add_argument("-B", "--bootstrap", type=int, default=1000)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, default=_threads_default())
        p.add_argument("--binomial-cases", action="store_true",
                       help="draw the case count as Binomial(n_tot, p)")
        p.add_argument("--out", help="directory for summary.csv, summary.json, manifest.json")
        fmt(p)
        p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce-appendix-c", help="worked example with embedded counts")
    fmt(p)
    p.set_defaults(func=cmd_reproduce_worked_example)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_PARSE
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
