"""Command-line interface.

Subcommands: aggregate, frontier, prevalence, cost, predictive, simulate.
Machine-readable output (json, csv) is the contract and uses fractions;
the text format is for people and uses percentages.  Every json document
embeds a ``manifest`` object and every csv starts with a ``# manifest:``
comment line carrying the same object.

Exit codes: 0 success, 2 unparsable input, 3 arity or validity error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from .aggregation import aggregate, aggregate_rates
from .core import (
    ArityError,
    DiagAggError,
    RateEstimate,
    RateError,
    TestSet,
    UndefinedRatioError,
    ValidityError,
    load_tests,
)
from .fixtures import resolve
from .frontier import EnumerationLimitError, cloud_arrays, roc_frontier
from .metrics import critical_prevalence, npv, ppv, series_cost, series_cost_general
from .oracle import simulate
from .prevalence import (
    StratumRecord,
    load_strata,
    rogan_gladen,
    rogan_gladen_ci,
    severity_ratios,
)
from .rules import AggregationRule, RuleSyntaxError, format_rule, rule_from_spec
from .uncertainty import BetaFitError, MonteCarloConfig, MonteCarloError, mc_samples

EXIT_PARSE = 2
EXIT_VALIDITY = 3
EXIT_NUMERIC = 4


class InputError(Exception):
    """Input that could not be read or parsed."""


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0+unknown"


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the clock for byte-identical reruns
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return moment.isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    inputs: dict
    seed: int
    tool_version: str = field(default_factory=tool_version)
    timestamp: str = field(default_factory=_timestamp)

    def to_dict(self) -> dict:
        return asdict(self)


# ----------------------------------------------------------------- output

def _emit_json(manifest: RunManifest, body: dict, out) -> None:
    json.dump({"manifest": manifest.to_dict(), **body}, out, indent=2, allow_nan=False)
    out.write("\n")


def _emit_csv(manifest: RunManifest, columns, rows, out) -> None:
    out.write("# manifest: " + json.dumps(manifest.to_dict(), sort_keys=True) + "\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else (repr(r[c]) if isinstance(r[c], float) else r[c])
                    for c in columns])


def read_csv_output(text: str) -> tuple:
    """Split csv produced by this tool into (manifest dict, list of row dicts)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# manifest: "):
        raise ValueError("missing manifest line")
    manifest = json.loads(lines[0][len("# manifest: "):])
    return manifest, list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def _pct(x: float | None, digits: int = 4) -> str:
    return "n/a" if x is None else f"{100.0 * x:.{digits}g}%"


def _pct_est(e: RateEstimate | None) -> str:
    if e is None:
        return "n/a"
    if not e.has_ci:
        return _pct(e.median)
    return f"{_pct(e.median)} ({_pct(e.ci_low)} - {_pct(e.ci_high)})"


# ----------------------------------------------------------------- inputs

def _load_tests(spec: str) -> TestSet:
    path = resolve(spec)
    try:
        return load_tests(path)
    except FileNotFoundError:
        raise InputError(f"test file not found: {path}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise InputError(f"cannot parse test file {path}: {e}") from None
    except ValueError as e:
        if isinstance(e, DiagAggError):
            raise
        raise InputError(f"cannot parse test file {path}: {e}") from None


def _file_extras(spec: str) -> dict:
    """Top-level keys other than "tests" of a json test file (rule, overall stratum)."""
    path = resolve(spec)
    if path.suffix.lower() != ".json":
        return {}
    data = json.loads(path.read_text())
    return data if isinstance(data, dict) else {}


def _grid(args) -> np.ndarray:
    if args.f_step <= 0:
        raise ValidityError("--f-step must be positive")
    count = int(round((args.f_stop - args.f_start) / args.f_step)) + 1
    if count < 1:
        raise ValidityError("empty prevalence grid")
    grid = args.f_start + args.f_step * np.arange(count)
    return np.clip(np.round(grid, 12), 0.0, 1.0)


def _mc(args) -> MonteCarloConfig:
    return MonteCarloConfig(n_samples=args.samples, seed=args.seed, threads=args.threads)


def _first_test(args) -> tuple:
    if args.tests:
        t = _load_tests(args.tests)[0]
        return t.tpr.median, t.tnr.median
    if args.tpr is None or args.tnr is None:
        raise InputError("give --tests or both --tpr and --tnr")
    return args.tpr, args.tnr


# --------------------------------------------------------------- commands

def cmd_aggregate(args, out) -> None:
    tests = _load_tests(args.tests)
    n = len(tests)
    rule = rule_from_spec(args.rule, n)
    agg = aggregate(tests, rule)
    point = {"tpr": agg.tpr, "tnr": agg.tnr, "fpr": agg.fpr}
    intervals = {}
    uncertain = any(not t.tpr.is_exact or not t.tnr.is_exact for t in tests)
    if uncertain:
        # the same seed gives the same input draws for both quantities
        inputs = [t.tpr for t in tests] + [t.tnr for t in tests]
        for key, pick in (("tpr", 0), ("tnr", 1)):
            draws = mc_samples(inputs, lambda d, k=pick: aggregate_rates(d[:n], d[n:], rule)[k], _mc(args))
            intervals[key] = draws.estimate()
        t = intervals["tnr"]
        intervals["fpr"] = RateEstimate(1.0 - t.median, 1.0 - t.ci_high, 1.0 - t.ci_low)
    manifest = RunManifest("aggregate", {"tests": str(resolve(args.tests)), "rule": args.rule,
                                         "samples": args.samples if uncertain else None}, args.seed)
    fmt = args.format or "text"
    if fmt == "json":
        body = {"rule": format_rule(rule), "table": hex(rule.table), **point}
        body["monte_carlo"] = {k: v.to_dict() for k, v in intervals.items()} or None
        _emit_json(manifest, body, out)
    elif fmt == "csv":
        rows = [{"quantity": k, "value": v, "mc_median": intervals[k].median if intervals else None,
                 "lo": intervals[k].ci_low if intervals else None,
                 "hi": intervals[k].ci_high if intervals else None} for k, v in point.items()]
        _emit_csv(manifest, ("quantity", "value", "mc_median", "lo", "hi"), rows, out)
    else:
        out.write(f"rule   {format_rule(rule)}\n")
        for k, v in point.items():
            line = f"{k.upper()}_S  {_pct(v, 6)}"
            if intervals:
                e = intervals[k]
                line += f"   95% interval {_pct(e.ci_low)} - {_pct(e.ci_high)}"
            out.write(line + "\n")


def cmd_frontier(args, out) -> None:
    tests = _load_tests(args.tests)
    n = len(tests)
    manifest = RunManifest(
        "frontier",
        {"tests": str(resolve(args.tests)), "monotone": args.monotone,
         "exhaustive": args.exhaustive, "cloud": args.cloud, "pareto": args.pareto},
        args.seed,
    )
    if args.cloud:
        tables, fpr, tpr = cloud_arrays(tests, args.monotone, args.exhaustive)
        rows = [{"fpr": float(x), "tpr": float(y), "rule": format_rule(AggregationRule(n, int(t)))}
                for t, x, y in zip(tables.tolist(), fpr.tolist(), tpr.tolist())]
    else:
        front = roc_frontier(tests, args.monotone, args.exhaustive, threads=args.threads,
                             pareto=args.pareto)
        rows = front.to_rows(pareto=args.pareto)
    fmt = args.format or "csv"
    if fmt == "json":
        _emit_json(manifest, {"points": rows}, out)
    elif fmt == "csv":
        _emit_csv(manifest, ("fpr", "tpr", "rule"), rows, out)
    else:
        for r in rows:
            out.write(f"FPR {_pct(r['fpr']):>10}  TPR {_pct(r['tpr']):>10}  {r['rule']}\n")


def _prevalence_row(stratum: StratumRecord, tests, rule, args) -> dict:
    if stratum.apparent_prevalence.is_exact:
        res = rogan_gladen(stratum.apparent_prevalence.median, aggregate(tests, rule))
    else:
        res = rogan_gladen_ci(stratum.apparent_prevalence, tests, rule, _mc(args))
    row = {"label": stratum.label, "population": stratum.population,
           "deaths": stratum.deaths, "hospitalizations": stratum.hospitalizations, **res.to_dict()}
    row.update(ifr=None, ihr=None, ifr_uncorrected=None, ihr_uncorrected=None)
    if stratum.population > 0 and (stratum.deaths is not None or stratum.hospitalizations is not None):
        ratios = severity_ratios(stratum, res)
        row["ifr"] = ratios.ifr.to_dict() if ratios.ifr else None
        row["ihr"] = ratios.ihr.to_dict() if ratios.ihr else None
        ap = stratum.apparent_prevalence.median
        if ap > 0:
            if stratum.deaths is not None:
                row["ifr_uncorrected"] = stratum.deaths / (ap * stratum.population)
            if stratum.hospitalizations is not None:
                row["ihr_uncorrected"] = stratum.hospitalizations / (ap * stratum.population)
    return row


def cmd_prevalence(args, out) -> None:
    tests = _load_tests(args.tests)
    extras = _file_extras(args.tests)
    rule_spec = args.rule or extras.get("rule")
    if rule_spec is None:
        raise InputError("no --rule given and the test file names none")
    rule = rule_from_spec(rule_spec, len(tests))
    if args.strata:
        try:
            strata = load_strata(resolve(args.strata))
        except FileNotFoundError:
            raise InputError(f"strata file not found: {resolve(args.strata)}") from None
        except (KeyError, ValueError) as e:
            raise InputError(f"cannot parse strata file: {e}") from None
    elif args.apparent:
        if len(args.apparent) not in (1, 3):
            raise InputError("--apparent takes MEDIAN or MEDIAN LO HI")
        ap = RateEstimate(*args.apparent)
        strata = [StratumRecord("overall", args.population or 0, args.deaths, args.hospitalizations, ap)]
    elif "overall" in extras:
        o = extras["overall"]
        strata = [StratumRecord(
            o.get("label", "overall"), args.population or o["population"],
            o.get("deaths") if args.deaths is None else args.deaths,
            o.get("hospitalizations") if args.hospitalizations is None else args.hospitalizations,
            RateEstimate.from_dict(o["apparent"]),
        )]
    else:
        raise InputError("give --apparent or --strata")
    rows = [_prevalence_row(s, tests, rule, args) for s in strata]
    agg = aggregate(tests, rule)
    manifest = RunManifest(
        "prevalence",
        {"tests": str(resolve(args.tests)), "rule": rule_spec,
         "strata": str(resolve(args.strata)) if args.strata else None,
         "apparent": args.apparent, "population": args.population, "deaths": args.deaths,
         "hospitalizations": args.hospitalizations, "samples": args.samples},
        args.seed,
    )
    fmt = args.format or "json"
    if fmt == "json":
        _emit_json(manifest, {"rule": format_rule(rule),
                              "aggregate": {"tpr": agg.tpr, "tnr": agg.tnr}, "strata": rows}, out)
    elif fmt == "csv":
        columns = ("label", "population", "deaths", "hospitalizations", "apparent", "corrected",
                   "corrected_lo", "corrected_hi", "clamped", "clamp_fraction",
                   "ifr", "ifr_lo", "ifr_hi", "ifr_uncorrected",
                   "ihr", "ihr_lo", "ihr_hi", "ihr_uncorrected")
        flat = []
        for r in rows:
            c = r["corrected"]
            row = {k: r[k] for k in ("label", "population", "deaths", "hospitalizations",
                                     "clamped", "clamp_fraction", "ifr_uncorrected", "ihr_uncorrected")}
            row.update(apparent=r["apparent"]["median"], corrected=c["median"],
                       corrected_lo=c.get("lo"), corrected_hi=c.get("hi"))
            for key in ("ifr", "ihr"):
                e = r[key] or {}
                row.update({key: e.get("median"), f"{key}_lo": e.get("lo"), f"{key}_hi": e.get("hi")})
            flat.append(row)
        _emit_csv(manifest, columns, flat, out)
    else:
        out.write(f"rule {format_rule(rule)}: TPR_S {_pct(agg.tpr)}, TNR_S {_pct(agg.tnr)}\n")
        for r in rows:
            corr = RateEstimate.from_dict(r["corrected"])
            out.write(f"{r['label']}: apparent {_pct_est(RateEstimate.from_dict(r['apparent']))}, "
                      f"corrected {_pct_est(corr)}{' (clamped)' if r['clamped'] else ''}\n")
            for key in ("ifr", "ihr"):
                if r[key]:
                    out.write(f"  {key.upper()} {_pct_est(RateEstimate.from_dict(r[key]))}, "
                              f"uncorrected {_pct(r[key + '_uncorrected'])}\n")


def cmd_cost(args, out) -> None:
    grid = _grid(args)
    rows = []
    extra = {}
    if args.rule:
        if not args.tests:
            raise InputError("--rule needs --tests")
        tests = _load_tests(args.tests)
        rule = rule_from_spec(args.rule, len(tests))
        order = _order(args.order)
        for f in grid:
            rep = series_cost_general(float(f), tests, rule, order)
            rows.append({"f": float(f), "expected_tests": rep.expected_tests_series, "ratio": rep.ratio})
    else:
        first = _first_test(args)
        for f in grid:
            rep = series_cost(float(f), first, args.kind)
            rows.append({"f": float(f), "expected_tests": rep.expected_tests_series, "ratio": rep.ratio})
        try:
            extra["critical_prevalence"] = critical_prevalence(first)
        except ValidityError:
            extra["critical_prevalence"] = None
    manifest = RunManifest(
        "cost",
        {"tests": str(resolve(args.tests)) if args.tests else None, "tpr": args.tpr, "tnr": args.tnr,
         "kind": args.kind, "rule": args.rule, "order": args.order,
         "grid": [args.f_start, args.f_stop, args.f_step]},
        args.seed,
    )
    fmt = args.format or "csv"
    if fmt == "json":
        # a rule that needs no tests has an infinite ratio, which JSON cannot carry
        curve = [{**r, "ratio": r["ratio"] if math.isfinite(r["ratio"]) else None} for r in rows]
        _emit_json(manifest, {**extra, "curve": curve}, out)
    elif fmt == "csv":
        _emit_csv(manifest, ("f", "expected_tests", "ratio"), rows, out)
    else:
        if extra.get("critical_prevalence") is not None:
            out.write(f"critical prevalence {_pct(extra['critical_prevalence'])}\n")
        for r in rows:
            out.write(f"f {_pct(r['f']):>8}  tests {r['expected_tests']:.4f}  ratio {r['ratio']:.4f}\n")


def cmd_predictive(args, out) -> None:
    grid = _grid(args)
    if args.rule:
        if not args.tests:
            raise InputError("--rule needs --tests")
        tests = _load_tests(args.tests)
        agg = aggregate(tests, rule_from_spec(args.rule, len(tests)))
        tpr, tnr = agg.tpr, agg.tnr
    else:
        tpr, tnr = _first_test(args)
    rows = []
    for f in grid:
        row = {"f": float(f), "ppv": None, "npv": None}
        # points where a predictive value is undefined are left blank
        for key, fn in (("ppv", ppv), ("npv", npv)):
            try:
                row[key] = fn(float(f), tpr, tnr)
            except UndefinedRatioError:
                pass
        rows.append(row)
    manifest = RunManifest(
        "predictive",
        {"tests": str(resolve(args.tests)) if args.tests else None, "rule": args.rule,
         "tpr": tpr, "tnr": tnr, "grid": [args.f_start, args.f_stop, args.f_step]},
        args.seed,
    )
    fmt = args.format or "csv"
    if fmt == "json":
        _emit_json(manifest, {"curve": rows}, out)
    elif fmt == "csv":
        _emit_csv(manifest, ("f", "ppv", "npv"), rows, out)
    else:
        for r in rows:
            out.write(f"f {_pct(r['f']):>8}  PPV {_pct(r['ppv']):>9}  NPV {_pct(r['npv']):>9}\n")


def _order(text: str | None):
    if text is None:
        return None
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"--order must be comma-separated test indices, got {text!r}") from None


def cmd_simulate(args, out) -> None:
    tests = _load_tests(args.tests)
    rule = rule_from_spec(args.rule, len(tests))
    order = _order(args.order)
    try:
        report = simulate(args.f, tests, rule, order, args.individuals, args.seed, args.threads)
    except ValueError as e:
        raise ValidityError(str(e)) from None
    manifest = RunManifest(
        "simulate",
        {"tests": str(resolve(args.tests)), "rule": args.rule, "f": args.f, "order": args.order,
         "individuals": args.individuals},
        args.seed,
    )
    fmt = args.format or "json"
    body = report.to_dict()
    if fmt == "json":
        _emit_json(manifest, {"rule": format_rule(rule), "report": body}, out)
    elif fmt == "csv":
        _emit_csv(manifest, tuple(body), [body], out)
    else:
        for k, v in body.items():
            out.write(f"{k:32s} {v}\n")


# ----------------------------------------------------------------- parser

def _common(defaults: bool) -> argparse.ArgumentParser:
    # subcommands inherit these with SUPPRESS so a flag given before the
    # subcommand is not overwritten by the subparser default
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=d(0), help="master random seed (default 0)")
    p.add_argument("--samples", type=int, default=d(1_000_000),
                   help="Monte Carlo samples (default 1000000)")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads (default 1)")
    p.add_argument("--format", choices=("text", "json", "csv"), default=d(None),
                   help="output format (default depends on the command)")
    return p


def _grid_args(p) -> None:
    p.add_argument("--f-start", type=float, default=0.0)
    p.add_argument("--f-stop", type=float, default=1.0)
    p.add_argument("--f-step", type=float, default=0.001)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diagagg", parents=[_common(True)],
        description="Aggregate repeated diagnostic tests: rates, ROC frontiers, prevalence.",
        epilog="Test files may be given as builtin:antigen3 or builtin:norrbotten.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(False)

    p = sub.add_parser("aggregate", parents=[common], help="aggregate rates of one rule")
    p.add_argument("--tests", required=True, help="test set (.json or .csv)")
    p.add_argument("--rule", required=True, help='rule spec, e.g. and, kofn:2, "(Y1&Y2)|Y3"')
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("frontier", parents=[common], help="efficient ROC frontier")
    p.add_argument("--tests", required=True)
    p.add_argument("--monotone", action="store_true", help="scan monotone rules only")
    p.add_argument("--exhaustive", action="store_true", help="allow the full n=5 scan")
    p.add_argument("--cloud", action="store_true", help="emit every rule's ROC point")
    p.add_argument("--pareto", action="store_true", help="emit all efficient rules")
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("prevalence", parents=[common], help="corrected prevalence and severity")
    p.add_argument("--tests", required=True)
    p.add_argument("--rule", help="rule spec (default: the test file's rule)")
    p.add_argument("--apparent", type=float, nargs="+", metavar="P",
                   help="apparent prevalence: MEDIAN or MEDIAN LO HI")
    p.add_argument("--strata", help="strata csv")
    p.add_argument("--population", type=int)
    p.add_argument("--deaths", type=int)
    p.add_argument("--hospitalizations", type=int)
    p.set_defaults(func=cmd_prevalence)

    for name, func, hlp in (("cost", cmd_cost, "series versus parallel test counts"),
                            ("predictive", cmd_predictive, "PPV and NPV curves")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        p.add_argument("--tests")
        p.add_argument("--tpr", type=float)
        p.add_argument("--tnr", type=float)
        p.add_argument("--rule")
        if name == "cost":
            p.add_argument("--kind", choices=("and", "or"), default="and")
            p.add_argument("--order", help="administration order, e.g. 2,1,3")
        _grid_args(p)
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", parents=[common], help="stochastic protocol simulation")
    p.add_argument("--tests", required=True)
    p.add_argument("--rule", required=True)
    p.add_argument("--f", type=float, required=True, help="true prevalence")
    p.add_argument("--order", help="series order, e.g. 1,2 (default: parallel)")
    p.add_argument("--individuals", type=int, default=1_000_000)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args.func(args, out)
    except (InputError, RuleSyntaxError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (ArityError, ValidityError, EnumerationLimitError, RateError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDITY
    except (UndefinedRatioError, BetaFitError, MonteCarloError, ArithmeticError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDITY
    return 0


def main_exit() -> None:
    sys.exit(main())
