"""Command-line interface.

Subcommands ``boot``, ``perm``, ``calc``, ``coverage`` and ``regress``
write JSON (or CSV) to standard output and diagnostics to standard error.
Exit status is 0 on success, 1 for invalid input and 2 for a numerical
degeneracy.

Data files are CSV with a header row. A bare file name that does not
exist on disk is looked up among the bundled datasets (``tv.csv``,
``skating.csv``, ``relrisk.csv``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analytic, bootstrap, coverage, permtest, regression
from .errors import DegenerateError, InvalidInputError, ResampleError
from .estimators import (
    PAIRED_KINDS,
    STATISTIC_KINDS,
    TWO_SAMPLE_KINDS,
    PairedSample,
    Sample,
    StatisticSpec,
    TwoSample,
)
from .sampling import SAMPLER_VARIANTS, RandomSource, SamplerSpec

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 1, 2

STAT_ALIASES = {"mean-diff": "mean-difference", "rr": "relative-risk", "log-rr": "log-relative-risk",
                "slope": "ols-slope", "var": "variance-unbiased", "cor": "correlation"}
CI_METHODS = ("percentile", "expanded", "reverse", "t", "bootstrap-t")
CALC_COMMANDS = ("alpha-prime", "narrowness", "required-n", "required-r", "edgeworth", "special")


class _Parser(argparse.ArgumentParser):
    # usage mistakes are input errors, not argparse's default status 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InvalidInputError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- data

class Table:
    """Columns of a header-row CSV file, kept as strings until requested."""

    def __init__(self, header, rows, source):
        self.header = header
        self.rows = rows  # list of (line_number, fields)
        self.source = source

    def _index(self, name):
        if name not in self.header:
            raise InvalidInputError(
                f"{self.source}: no column {name!r}; columns: {', '.join(self.header)}"
            )
        return self.header.index(name)

    def strings(self, name):
        j = self._index(name)
        return [fields[j] for _, fields in self.rows]

    def numeric(self, name, rows=None) -> np.ndarray:
        j = self._index(name)
        out = []
        for line, fields in (self.rows if rows is None else rows):
            cell = fields[j].strip()
            if cell == "":
                continue
            try:
                out.append(float(cell))
            except ValueError:
                raise InvalidInputError(
                    f"{self.source}, line {line}: column {name!r} value {cell!r} is not a number"
                ) from None
        if not out:
            raise InvalidInputError(f"{self.source}: column {name!r} is empty")
        return np.array(out)

    def is_numeric(self, name) -> bool:
        j = self._index(name)
        try:
            for _, fields in self.rows:
                if fields[j].strip():
                    float(fields[j])
        except ValueError:
            return False
        return True

    def levels(self, name):
        seen = []
        for v in self.strings(name):
            if v not in seen:
                seen.append(v)
        return seen

    def subset(self, name, level):
        j = self._index(name)
        return [(line, f) for line, f in self.rows if f[j] == level]


def resolve_path(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("resamplekit") / "data" / p.name
    if p.parent == Path(".") and bundled.is_file():
        return Path(str(bundled))
    raise InvalidInputError(f"data file not found: {path}")


def read_table(path: str) -> Table:
    p = resolve_path(path)
    with open(p, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{p.name}: file is empty") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header) or any(h == "" for h in header):
            raise InvalidInputError(f"{p.name}, line 1: header names must be unique and nonempty")
        rows = []
        for fields in reader:
            line = reader.line_num
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                raise InvalidInputError(
                    f"{p.name}, line {line}: expected {len(header)} fields, found {len(fields)}"
                )
            rows.append((line, fields))
    return Table(header, rows, p.name)


def _statistic(name: str) -> StatisticSpec:
    kind = STAT_ALIASES.get(name, name)
    if kind not in STATISTIC_KINDS:
        raise InvalidInputError(
            f"unknown statistic {name!r}; valid: {', '.join(STATISTIC_KINDS)}"
        )
    return kind


def _counts_two_sample(table: Table, args) -> TwoSample:
    # rows of (group, cases, total) expand to 0/1 outcomes per group
    groups = table.strings(args.groups or table.header[0])
    cases, totals = table.numeric("cases"), table.numeric("total")
    if len(groups) != 2:
        raise InvalidInputError(f"{table.source}: counts format needs exactly two group rows")
    samples = []
    for c, t in zip(cases, totals):
        if c != int(c) or t != int(t) or not 0 <= c <= t or t < 1:
            raise InvalidInputError(f"{table.source}: cases and totals must be counts with cases <= total")
        samples.append(Sample(np.r_[np.ones(int(c)), np.zeros(int(t - c))]))
    return TwoSample(*samples)


def _value_column(table: Table, args, exclude=()):
    if args.value:
        return args.value
    numeric = [h for h in table.header if h not in exclude and table.is_numeric(h)]
    if len(numeric) != 1:
        raise InvalidInputError(
            f"{table.source}: choose the value column with --value (numeric columns: {', '.join(numeric)})"
        )
    return numeric[0]


def _one_sample(table: Table, args) -> Sample:
    if args.col is None:
        return Sample(table.numeric(_value_column(table, args)))
    if args.col in table.header:
        return Sample(table.numeric(args.col))
    # long format: --col names a level of the single text column
    text = [h for h in table.header if not table.is_numeric(h)]
    for h in text:
        if args.col in table.levels(h):
            value = _value_column(table, args, exclude=(h,))
            return Sample(table.numeric(value, table.subset(h, args.col)))
    raise InvalidInputError(
        f"{table.source}: {args.col!r} is neither a column nor a group level; columns: {', '.join(table.header)}"
    )


def _two_sample(table: Table, args) -> TwoSample:
    if "cases" in table.header and "total" in table.header:
        return _counts_two_sample(table, args)
    if not args.groups:
        text = [h for h in table.header if not table.is_numeric(h)]
        if len(text) != 1:
            raise InvalidInputError("two-sample statistics need --groups COLUMN")
        args.groups = text[0]
    levels = args.levels.split(",") if args.levels else table.levels(args.groups)
    if len(levels) != 2:
        raise InvalidInputError(
            f"{table.source}: column {args.groups!r} has levels {levels}; pick two with --levels A,B"
        )
    value = _value_column(table, args, exclude=(args.groups,))
    groups = []
    for lev in levels:
        rows = table.subset(args.groups, lev)
        if not rows:
            raise InvalidInputError(f"{table.source}: group {lev!r} has no rows")
        groups.append(Sample(table.numeric(value, rows)))
    return TwoSample(*groups)


def _paired(table: Table, args) -> PairedSample:
    if not (args.x and args.y):
        raise InvalidInputError("paired statistics need --x and --y columns")
    jx, jy = table._index(args.x), table._index(args.y)
    rows = [(ln, f) for ln, f in table.rows if f[jx].strip() and f[jy].strip()]
    return PairedSample(table.numeric(args.x, rows), table.numeric(args.y, rows))


def load_data(args, kind: str):
    table = read_table(args.data)
    if kind in TWO_SAMPLE_KINDS:
        return _two_sample(table, args)
    if kind in PAIRED_KINDS:
        return _paired(table, args)
    return _one_sample(table, args)


# ------------------------------------------------------------ commands

def _sampler(args) -> SamplerSpec:
    return SamplerSpec(variant=args.sampler, n_out=args.n_out, bandwidth=args.bandwidth,
                       log_scale=args.log_scale, population_size=args.population_size,
                       rounding=args.rounding)


def _ci_list(text: str):
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in CI_METHODS]
    if bad:
        raise InvalidInputError(f"unknown interval method(s) {bad}; valid: {', '.join(CI_METHODS)}")
    return methods


def cmd_boot(args) -> dict:
    kind = _statistic(args.stat)
    methods = _ci_list(args.ci)
    data = load_data(args, kind)
    r = args.r if args.r is not None else bootstrap.DEFAULT_R
    seed = RandomSource(args.seed)
    bd = bootstrap.run_bootstrap(data, kind, r=r, sampler=_sampler(args), seed=seed,
                                 workers=args.workers)
    s = bootstrap.summarize(bd)
    intervals = []
    for m in methods:
        if m == "percentile":
            iv = bootstrap.percentile_interval(bd, args.conf, mc_se=True, mc_seed=args.seed)
        elif m == "expanded":
            iv = bootstrap.expanded_percentile_interval(bd, args.conf, mc_se=True, mc_seed=args.seed)
        elif m == "reverse":
            iv = bootstrap.reverse_percentile_interval(bd, args.conf, mc_se=True, mc_seed=args.seed)
        elif m == "t":
            iv = bootstrap.t_with_bootstrap_se(bd, args.conf)
        else:
            iv = bootstrap.bootstrap_t_interval(data, kind, se_provider=args.se_provider, r=r,
                                                confidence=args.conf, seed=seed.child(1),
                                                r2=args.r2, workers=args.workers)
        intervals.append(iv.as_dict())
    report = {
        "command": "boot",
        "statistic": kind,
        "sampler": args.sampler,
        "r": bd.r,
        "seed": args.seed,
        "n": list(bd.sample_sizes),
        "n_excluded": bd.n_excluded,
        "summary": {"observed": s.observed, "se": s.se, "mean": s.mean, "bias": s.bias,
                    "se_mc_se": bootstrap.mc_error("se", s_b=s.se, r=bd.r),
                    "bias_mc_se": bootstrap.mc_error("mean", s_b=s.se, r=bd.r)},
        "intervals": intervals,
    }
    if args.histogram:
        report["histogram"] = bootstrap.histogram_table(bd.replicates)
    if args.replicates_out:
        Path(args.replicates_out).write_text(bd.to_text())
    return report


def cmd_perm(args) -> dict:
    r = args.r if args.r is not None else permtest.DEFAULT_R
    if args.design == "fisher":
        table = read_table(args.data)
        cases, totals = table.numeric("cases"), table.numeric("total")
        if cases.size != 2:
            raise InvalidInputError("fisher needs exactly two group rows")
        t = [[cases[0], totals[0] - cases[0]], [cases[1], totals[1] - cases[1]]]
        lo, up, two = permtest.fisher_exact(t)
        return {"command": "perm fisher", "table": [[int(v) for v in row] for row in t],
                "p_lower": lo, "p_upper": up, "p_two_sided": two, "exhaustive": True}
    default = "mean-difference" if args.design == "two-sample" else "correlation"
    kind = _statistic(args.stat or default)
    data = load_data(args, kind)
    if args.design == "two-sample":
        if kind not in TWO_SAMPLE_KINDS:
            raise InvalidInputError(f"two-sample tests use one of: {', '.join(TWO_SAMPLE_KINDS)}")
        res = permtest.two_sample_permutation(data, kind, r=r, seed=args.seed, mode=args.mode,
                                              workers=args.workers)
    else:
        if kind not in ("correlation", "ols-slope"):
            raise InvalidInputError("independence tests use one of: correlation, ols-slope")
        mode = "sampled" if args.mode == "auto" else args.mode
        res = permtest.independence_permutation(data.x, data.y, kind, r=r, seed=args.seed,
                                                mode=mode, workers=args.workers)
    out = {"command": f"perm {args.design}", "statistic": kind, "seed": args.seed}
    out.update(res.as_dict())
    return out


def cmd_calc(args) -> dict:
    what = args.what
    alpha = 1 - args.conf
    if what == "alpha-prime":
        rows = [{"n": n, "alpha_prime_half": analytic.alpha_prime_half(n, alpha)} for n in args.n]
    elif what == "narrowness":
        rows = [dict(n=n, **analytic.narrowness_table(n, alpha)._asdict()) for n in args.n]
    elif what == "required-n":
        rows = [{"skewness": args.skewness, "alpha": args.alpha, "rel_err": args.rel_err,
                 "n": analytic.required_n_for_t(args.skewness, args.alpha, args.rel_err)}]
    elif what == "required-r":
        kind = args.kind or "quantile"
        rows = [{"kind": kind, "p": args.p, "rel_err": args.rel_err,
                 "r": analytic.required_r(kind, p=args.p, rel_err=args.rel_err,
                                          confidence=args.conf, alpha=args.alpha * 2)}]
    elif what == "edgeworth":
        if not args.n:
            raise InvalidInputError("edgeworth needs --n")
        rows = [{"x": x, "n": n, "skewness": args.skewness,
                 "cdf": float(analytic.edgeworth_cdf(args.kind or "t", x, args.skewness, n))}
                for n in args.n for x in args.x]
    else:
        rows = [{"fn": args.fn, "x": x,
                 "value": float(analytic.special(args.fn.replace("-", "_"), x, *args.params))} for x in args.x]
    return {"command": f"calc {what}", "rows": rows}


def cmd_coverage(args):
    pop = coverage.PopulationSpec.parse(args.population)
    methods = [m.strip() for m in args.methods.split(",")] if args.methods else coverage.METHODS
    r = args.r if args.r is not None else 1000
    rep = coverage.run_coverage(pop, args.n, methods, nsim=args.nsim, r=r, seed=args.seed,
                                vr=not args.no_vr, confidence=args.conf, workers=args.workers)
    if rep.n_fallback:
        print(f"coverage: {rep.n_fallback} endpoint(s) fell back to indicators", file=sys.stderr)
    return rep


def cmd_regress(args):
    table = read_table(args.data)
    X, y = table.numeric(args.x), table.numeric(args.y)
    if X.size != y.size:
        raise InvalidInputError(f"columns {args.x!r} and {args.y!r} differ in length")
    r = args.r if args.r is not None else bootstrap.DEFAULT_R
    probs = table.numeric(args.probabilities) if args.probabilities else None
    if args.band:
        grid = np.linspace(X.min(), X.max(), args.grid_points)
        band = regression.emit_fit_band(X, y, args.scheme, r=r, grid=grid, seed=args.seed,
                                        probabilities=probs, k=args.k)
        return ("band", grid, band)
    bd = regression.bootstrap_regression(X, y, args.scheme, args.stat, r=r, seed=args.seed,
                                         probabilities=probs, k=args.k)
    s = bootstrap.summarize(bd)
    pi = bootstrap.percentile_interval(bd, args.conf, mc_se=True, mc_seed=args.seed)
    fit = regression.fit_ols(X, y)
    return {"command": "regress", "scheme": args.scheme, "statistic": args.stat, "r": bd.r,
            "seed": args.seed, "n_excluded": bd.n_excluded,
            "fit": {"intercept": fit.intercept, "slope": fit.slope, "r_squared": fit.r_squared,
                    "residual_sd": fit.residual_sd},
            "summary": {"observed": s.observed, "se": s.se, "mean": s.mean, "bias": s.bias},
            "intervals": [pi.as_dict()]}


# -------------------------------------------------------------- output

def _flatten_csv(report: dict) -> str:
    # tabular part of a JSON report: its list of row dicts, else key/value pairs
    rows = report.get("rows") or report.get("intervals")
    buf = io.StringIO()
    if rows:
        keys = list(dict.fromkeys(k for row in rows for k in row))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for row in rows:
            w.writerow([_cell(row.get(k, "")) for k in keys])
    else:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in report.items():
            if not isinstance(v, (dict, list)):
                w.writerow([k, _cell(v)])
    return buf.getvalue()


def _cell(v):
    return repr(v) if isinstance(v, float) else v


def _histogram_csv(h: dict) -> str:
    lines = ["bin_left,bin_right,count"]
    for a, b, c in zip(h["edges"][:-1], h["edges"][1:], h["counts"]):
        lines.append(f"{a!r},{b!r},{c}")
    return "\n".join(lines) + "\n"


def _emit(result, fmt: str) -> str:
    if isinstance(result, coverage.CoverageReport):
        return result.to_csv() if fmt == "csv" else json.dumps(result.as_dict(), indent=2) + "\n"
    if isinstance(result, tuple) and result[0] == "band":
        _, grid, band = result
        if fmt == "csv":
            return regression.band_csv(grid, band)
        return json.dumps({"command": "regress band", "grid": grid.tolist(),
                           "predictions": band.tolist()}) + "\n"
    if fmt == "csv":
        if "histogram" in result:
            return _histogram_csv(result["histogram"])
        return _flatten_csv(result)
    return json.dumps(result, indent=2) + "\n"


# -------------------------------------------------------------- parser

def _common(p, r_help="resamples"):
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--r", type=int, default=None, help=r_help)
    p.add_argument("--conf", type=float, default=0.95, help="two-sided confidence level")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--workers", type=int, default=1, help="worker processes")


def _data_args(p):
    p.add_argument("--data", required=True, help="CSV file or bundled dataset name")
    p.add_argument("--col", help="numeric column, or a group level in long-format data")
    p.add_argument("--value", help="numeric column holding the measurements")
    p.add_argument("--groups", help="column defining the two groups")
    p.add_argument("--levels", help="two group levels A,B (default: order of appearance)")
    p.add_argument("--x", help="first paired column")
    p.add_argument("--y", help="second paired column")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="resamplekit", description="Bootstrap and permutation inference.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("boot", help="bootstrap a statistic")
    _common(b, "resamples (default 10000)")
    _data_args(b)
    b.add_argument("--stat", default="mean", help="statistic name")
    b.add_argument("--ci", default="percentile", help=f"comma list of {', '.join(CI_METHODS)}")
    b.add_argument("--sampler", default="with-replacement", choices=SAMPLER_VARIANTS)
    b.add_argument("--n-out", type=int, help="resample size override")
    b.add_argument("--bandwidth", type=float, help="smoothed bootstrap kernel SD")
    b.add_argument("--log-scale", action="store_true", help="smooth on the log scale")
    b.add_argument("--population-size", type=int, help="N for the finite-population bootstrap")
    b.add_argument("--rounding", default="up", choices=("up", "down", "randomized"))
    b.add_argument("--se-provider", default="formula", choices=("formula", "iterated"))
    b.add_argument("--r2", type=int, default=bootstrap.DEFAULT_R2, help="second-level resamples")
    b.add_argument("--histogram", action="store_true", help="add a Freedman-Diaconis histogram")
    b.add_argument("--replicates-out", help="write replicates in text form to this file")

    p = sub.add_parser("perm", help="permutation tests")
    p.add_argument("design", choices=("two-sample", "independence", "fisher"))
    _common(p, "permutation resamples (default 9999)")
    _data_args(p)
    p.add_argument("--stat", help="statistic name")
    p.add_argument("--mode", default="auto", choices=("auto", "sampled", "exhaustive"))

    c = sub.add_parser("calc", help="analytic calculators")
    c.add_argument("what", choices=CALC_COMMANDS)
    _common(c)
    c.add_argument("--n", type=float, nargs="+", default=[], help="sample size(s); inf allowed")
    c.add_argument("--alpha", type=float, default=0.025, help="one-sided level")
    c.add_argument("--skewness", type=float, default=0.0)
    c.add_argument("--rel-err", type=float, default=0.1)
    c.add_argument("--kind", help="required-r: quantile or se; edgeworth: mean or t")
    c.add_argument("--p", type=float, default=0.025)
    c.add_argument("--x", type=float, nargs="+", default=[0.0])
    c.add_argument("--fn", default="normal-cdf", help="special function name")
    c.add_argument("--params", type=float, nargs="*", default=[])

    v = sub.add_parser("coverage", help="interval coverage simulation")
    _common(v, "resamples per simulated sample (default 1000)")
    v.add_argument("--population", required=True, help="e.g. normal:0,1 or exponential:1")
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--nsim", type=int, default=2000)
    v.add_argument("--methods", help=f"comma list of {', '.join(coverage.METHODS)}")
    v.add_argument("--no-vr", action="store_true", help="plain indicators, no conditioning")

    g = sub.add_parser("regress", help="regression bootstrap")
    _common(g, "resamples (default 10000)")
    g.add_argument("--data", required=True)
    g.add_argument("--x", required=True)
    g.add_argument("--y", required=True)
    g.add_argument("--scheme", default="residuals", choices=regression.REGRESSION_SCHEMES)
    g.add_argument("--stat", default="slope")
    g.add_argument("--probabilities", help="column of success probabilities")
    g.add_argument("--k", type=int, default=20, help="window for residuals-nearby")
    g.add_argument("--band", action="store_true", help="emit bootstrapped fit lines on a grid")
    g.add_argument("--grid-points", type=int, default=11)
    return parser


def _normalize(args):
    if args.command == "calc":
        args.n = [math.inf if n == math.inf else int(n) for n in args.n]
        if args.what in ("alpha-prime", "narrowness") and not args.n:
            raise InvalidInputError(f"{args.what} needs --n")
    if args.r is not None and args.r < 1:
        raise InvalidInputError("--r must be positive")
    if args.workers < 1:
        raise InvalidInputError("--workers must be positive")


COMMANDS = {"boot": cmd_boot, "perm": cmd_perm, "calc": cmd_calc,
            "coverage": cmd_coverage, "regress": cmd_regress}


def main(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        _normalize(args)
        result = COMMANDS[args.command](args)
        fmt = args.format or ("csv" if args.command == "coverage" else "json")
        stdout.write(_emit(result, fmt))
    except DegenerateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (InvalidInputError, ResampleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
