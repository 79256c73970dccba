"""Command-line entry point: ``bounds``, ``classify``, ``simulate`` and ``report``.

Exit codes: 0 success, 1 invalid input or flags, 2 infeasible linear program,
3 internal error. The resolved configuration is logged to stderr on every
run; JSON output carries no timestamps, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bounds import (
    BoundInterval,
    BoundsSpec,
    bound_interval,
    build_constraints_interval,
    interval_boxes,
    interval_from_constraints,
    screen,
)
from .classify import classify_abstain, classify_random
from .confidence import halfwidths
from .data import CsvSchema, ValidationError, group, ingest_csv
from .montecarlo import (
    ExperimentReport,
    appendix_b,
    kls,
    rng_for,
    run_bounds_experiment,
    run_classification_experiment,
)

log = logging.getLogger("scorebounds")

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3


class InfeasibleError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# shared plumbing


def _add_estimation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="training CSV with a header row")
    p.add_argument("--outcome", default="y", help="outcome column (default: y)")
    p.add_argument("--covariates", help="comma-separated covariate columns (default: all others)")
    p.add_argument("--weight-col", default="w", help="weight column, used if present")
    p.add_argument("--cluster-col", default="cluster", help="cluster column, used if present")
    p.add_argument("--add-intercept", action="store_true", help="append a constant column 'const'")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--design", choices=("fixed", "random"), default="fixed")
    p.add_argument("--inference", choices=("none", "finite", "asymptotic"), default="finite")
    p.add_argument("--cluster", choices=("on", "off"), default="off")
    p.add_argument("--box", type=float, nargs=2, default=(-10.0, 10.0), metavar=("LO", "HI"))
    p.add_argument("--normalize", help="coefficient pinned to +1 (default: first covariate)")
    p.add_argument("--epsilon", type=float, default=0.0)


def _add_output_flags(p: argparse.ArgumentParser, formats=("json", "table")) -> None:
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--output", help="write to this file instead of stdout")


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dumps(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True)


def _table(header: list[str], rows: list[list]) -> str:
    cells = [[_cell(v) for v in r] for r in rows]
    widths = [max([len(h)] + [len(r[i]) for r in cells]) for i, h in enumerate(header)]
    out = ["  ".join(h.rjust(w) for h, w in zip(header, widths)),
           "  ".join("-" * w for w in widths)]
    out += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells]
    return "\n".join(out)


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if v is None:
        return "-"
    return str(v)


def _load(args):
    if args.box[0] > args.box[1]:
        raise ValidationError(f"--box: lower {args.box[0]} exceeds upper {args.box[1]}")
    covs = [c.strip() for c in args.covariates.split(",")] if args.covariates else None
    schema = CsvSchema(outcome=args.outcome, covariates=covs, weight=args.weight_col,
                       cluster=args.cluster_col)
    try:
        data = ingest_csv(args.data, schema, tau=args.tau, design=args.design)
    except OSError as exc:
        raise ValidationError(f"--data: cannot read {args.data!r}: {exc.strerror}") from None
    if args.cluster == "on" and not _has_column(args.data, args.cluster_col):
        raise ValidationError(f"--cluster on requires a {args.cluster_col!r} column in --data")
    if args.add_intercept:
        from dataclasses import replace
        data = replace(data, X=np.column_stack([data.X, np.ones(data.n)]),
                       covariate_names=data.covariate_names + ("const",))
    return data


def _has_column(path: str, name: str) -> bool:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    return name in [h.strip() for h in header]


def _names(data) -> list[str]:
    return list(data.covariate_names) + list(data.interval_names or ())


def _index_of(name: str, names: list[str], flag: str) -> int:
    if name not in names:
        raise ValidationError(f"{flag}: unknown coefficient {name!r}; choose from {names}")
    return names.index(name)


def _target_vector(text: str, names: list[str]) -> np.ndarray:
    """A coefficient name, or a comma-separated vector ``r`` of length ``q``."""
    if text in names:
        r = np.zeros(len(names))
        r[names.index(text)] = 1.0
        return r
    try:
        r = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ValidationError(f"--target: unknown coefficient {text!r}; choose from {names} "
                              "or give a comma-separated vector") from None
    if r.size != len(names):
        raise ValidationError(f"--target: vector has {r.size} entries, expected {len(names)}")
    return r


def _resolved_config(args) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items())
            if k != "func"}


def _prepare(args):
    data = _load(args)
    grouped = group(data)
    hw = halfwidths(grouped, args.alpha, args.inference, args.design, cluster=args.cluster == "on")
    names = _names(data)
    norm = _index_of(args.normalize, names, "--normalize") if args.normalize else 0
    return data, grouped, hw, names, norm


# ---------------------------------------------------------------------------
# bounds


def cmd_bounds(args) -> int:
    data, grouped, hw, names, norm = _prepare(args)
    targets = args.target or [n for k, n in enumerate(names) if k != norm]
    d = screen(grouped.g_hat, hw)
    results = {}
    for name in targets:
        r = _target_vector(name, names)
        spec = BoundsSpec(r, tuple(args.box), norm, args.epsilon)
        results[name] = bound_interval(grouped, hw, spec)
    infeasible = [n for n, iv in results.items() if not iv.feasible]
    payload = {
        "alpha": args.alpha,
        "variant": hw.variant.value,
        "groups": grouped.J,
        "n": grouped.n,
        "normalized": names[norm],
        "screening": {"positive": int(np.sum(d > 0)), "negative": int(np.sum(d < 0)),
                      "skipped": int(np.sum(d == 0))},
        "bounds": {n: iv.to_dict() for n, iv in results.items()},
    }
    if args.format == "json":
        _emit(_dumps(payload), args.output)
    else:
        rows = [[n, iv.lower, iv.upper, iv.lower_status.value, iv.upper_status.value]
                for n, iv in results.items()]
        _emit(_table(["target", "lower", "upper", "lower_status", "upper_status"], rows), args.output)
    if infeasible:
        raise InfeasibleError(f"empty feasible set for target(s) {infeasible}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# classify


def _read_queries(path: str, data) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"--queries: cannot read {path!r}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        header = [h.strip() for h in (reader.fieldnames or [])]
    if not rows:
        raise ValidationError("--queries: file has no query rows")
    cov = [c for c in data.covariate_names if c != "const" or c in header]
    missing = [c for c in cov if c not in header]
    inter = list(data.interval_names or ())
    missing += [f"{v}_{s}" for v in inter for s in ("lo", "hi") if f"{v}_{s}" not in header]
    if missing:
        raise ValidationError(f"--queries: missing column(s) {missing}")

    def num(row, col, line):
        try:
            return float(row[col])
        except (TypeError, ValueError):
            raise ValidationError(f"--queries line {line}: column {col!r} is not a number") from None

    X, lo, hi = [], [], []
    for i, row in enumerate(rows):
        line = i + 2
        X.append([num(row, c, line) if c in header else 1.0 for c in data.covariate_names])
        if inter:
            lo.append([num(row, f"{v}_lo", line) for v in inter])
            hi.append([num(row, f"{v}_hi", line) for v in inter])
            if np.any(np.array(lo[-1]) > np.array(hi[-1])):
                raise ValidationError(f"--queries line {line}: interval lower endpoint exceeds upper")
    if not inter:
        return np.array(X), None, None
    return np.array(X), np.array(lo), np.array(hi)


def query_interval(grouped, hw, x_star, w_lo, w_hi, box, norm, epsilon) -> BoundInterval:
    """Bounds on ``x*'b`` (plus ``w*'delta`` over the query interval when present).

    Interval coefficients are nonnegative, so the smallest value uses the lower
    query endpoints and the largest value the upper ones.
    """
    d = screen(grouped.g_hat, hw)
    if w_lo is None:
        spec = BoundsSpec(x_star, box, norm, epsilon)
        return bound_interval(grouped, hw, spec)
    spec_lo = BoundsSpec(np.concatenate([x_star, w_lo]), box, norm, epsilon)
    spec_hi = BoundsSpec(np.concatenate([x_star, w_hi]), box, norm, epsilon)
    A, senses, rhs = build_constraints_interval(grouped.support, grouped.v_lo, grouped.v_hi, d, spec_lo)
    boxes = interval_boxes(spec_lo, grouped.support.shape[1])
    lo = interval_from_constraints(A, senses, rhs, spec_lo, boxes)
    hi = interval_from_constraints(A, senses, rhs, spec_hi, boxes)
    return BoundInterval(lo.lower, hi.upper, lo.lower_status, hi.upper_status,
                         lo.lower_binding, hi.upper_binding, lo.lower_witness, hi.upper_witness)


def cmd_classify(args) -> int:
    data, grouped, hw, names, norm = _prepare(args)
    X, w_lo, w_hi = _read_queries(args.queries, data)
    bits = rng_for(args.seed, 0).integers(0, 2, size=X.shape[0])
    out = []
    for i, x in enumerate(X):
        lo = None if w_lo is None else w_lo[i]
        hi = None if w_hi is None else w_hi[i]
        iv = query_interval(grouped, hw, x, lo, hi, tuple(args.box), norm, args.epsilon)
        if not iv.feasible:
            raise InfeasibleError(f"query row {i + 2}: no classification possible: empty feasible set")
        if args.rule == "abstain":
            dec = classify_abstain(iv)
        else:
            dec = classify_random(iv, int(bits[i]))
        out.append({
            "x_star": x.tolist() + ([] if lo is None else [lo.tolist(), hi.tolist()]),
            "lower": iv.lower,
            "upper": iv.upper,
            "decision": dec.outcome.value,
            "draw_used": dec.draw_used,
        })
    if args.format == "json":
        _emit(_dumps({"rule": args.rule, "queries": out}), args.output)
    else:
        rows = [[json.dumps(q["x_star"]), q["lower"], q["upper"], q["decision"], q["draw_used"]]
                for q in out]
        _emit(_table(["x_star", "lower", "upper", "decision", "draw_used"], rows), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / report


SCENARIO_DEFAULTS = {
    # the bound tables come from random-design regions; the classification
    # experiment uses fixed-design asymptotic half-widths
    "appendixB": {"inference": "finite", "design": "random"},
    "kls": {"inference": "asymptotic", "design": "fixed"},
}


def cmd_simulate(args) -> int:
    for key, value in SCENARIO_DEFAULTS[args.scenario].items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    reports = []
    if args.scenario == "appendixB":
        dgp = appendix_b()
        cluster_size = args.cluster_size if args.cluster == "on" else None
        for n in args.n:
            reports.append(run_bounds_experiment(
                dgp, n, args.reps, args.alpha, args.inference, args.design, args.seed,
                cluster_size=cluster_size, cluster_corr=args.cluster_corr))
    else:
        if args.inference != "asymptotic" or args.design != "fixed" or args.cluster == "on":
            raise ValidationError("--scenario kls runs with --inference asymptotic --design fixed "
                                  "--cluster off only")
        dgp = kls(args.noise)
        for n in args.n:
            if n % 12:
                raise ValidationError(f"--n: {n} is not a multiple of 12 (equal cells)")
            reports.append(run_classification_experiment(dgp, n, args.reps, args.alpha,
                                                         args.rules, args.seed))
    report = ExperimentReport.merge(reports)
    log.info("simulation finished in %.2fs", report.runtime)
    if args.format == "json":
        _emit(report.to_json(), args.output)
    else:
        _emit(report.to_table(), args.output)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        text = Path(args.input).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"--input: cannot read {args.input!r}: {exc.strerror}") from None
    try:
        report = ExperimentReport.from_json(text)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"--input: not a simulation report: {exc}") from None
    render = {"table": report.to_table, "csv": report.to_csv, "json": report.to_json}
    _emit(render[args.format](), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scorebounds", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="INFO",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", parents=[common], help="bounds on coefficients from a CSV sample")
    _add_estimation_flags(p)
    p.add_argument("--target", action="append",
                   help="coefficient name or comma-separated r vector (repeatable)")
    _add_output_flags(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("classify", parents=[common], help="classify query covariate vectors")
    _add_estimation_flags(p)
    p.add_argument("--queries", required=True, help="CSV of query covariates")
    p.add_argument("--rule", choices=("abstain", "random"), default="abstain")
    p.add_argument("--seed", type=int, default=0, help="seed for the randomization bits")
    _add_output_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo experiment")
    p.add_argument("--scenario", choices=("appendixB", "kls"), required=True)
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--inference", choices=("none", "finite", "asymptotic"),
                   help="default: finite for appendixB, asymptotic for kls")
    p.add_argument("--design", choices=("fixed", "random"),
                   help="default: random for appendixB, fixed for kls")
    p.add_argument("--cluster", choices=("on", "off"), default="off")
    p.add_argument("--cluster-size", type=int, default=5)
    p.add_argument("--cluster-corr", type=float, default=0.0)
    p.add_argument("--noise", choices=("homoskedastic", "heteroskedastic"), default="homoskedastic")
    p.add_argument("--rules", nargs="+", default=["abstain", "random", "sample-frequency"],
                   choices=("abstain", "random", "sample-frequency"))
    p.add_argument("--seed", type=int, default=0)
    _add_output_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="render a stored simulation report")
    p.add_argument("--input", required=True)
    _add_output_flags(p, formats=("table", "csv", "json"))
    p.set_defaults(func=cmd_report)
    return parser


def _configure_logging(level: str) -> None:
    # bind to the current stderr on every call so repeated in-process runs log correctly
    for h in list(log.handlers):
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(level)
    log.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.log_level)
    log.info("config %s", json.dumps(_resolved_config(args), sort_keys=True))
    try:
        return args.func(args)
    except InfeasibleError as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.error("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
