"""Command-line entry point: ``omest estimate|compare|posterior|batch|simulate``.

Exit codes: 0 success, 1 invalid input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import posterior, simulate
from .moments import InvalidCounts, Scenario, SearchCounts
from .report import (
    BATCH_COLUMNS,
    EstimateRequest,
    batch_row,
    build_report,
    default_precision,
    format_value,
)

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _scenario(text: str) -> Scenario:
    try:
        return Scenario.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_counts(p):
    p.add_argument("--na", type=int, required=True, help="items found by A")
    p.add_argument("--nb", type=int, required=True, help="items found by B")
    p.add_argument("--nab", type=int, required=True, help="items found by both")
    p.add_argument(
        "--scenario",
        type=_scenario,
        default=Scenario.full_search(),
        help="fixed | full | partial | proper-prior | shift:<s> (default: full)",
    )


def _add_precision(p):
    p.add_argument("--precision", type=int, default=None, help="significant figures")


def _add_posterior_opts(p, mass_default):
    p.add_argument("--mass", type=float, default=mass_default, help="credible interval mass")
    p.add_argument("--tail-tol", type=float, default=posterior.DEFAULT_TAIL_TOL)
    p.add_argument(
        "--flat-prior",
        action="store_true",
        help="full search with a flat prior on N instead of the almost-constant prior",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="omest", description="Estimate items missed by two searches.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in ("estimate", "compare"):
        p = sub.add_parser(name, help="moments of the missed-item count")
        _add_counts(p)
        _add_precision(p)
        _add_posterior_opts(p, 0.68)
        if name == "estimate":
            p.add_argument("--compare", action="store_true", help="add classical estimators")
        p.add_argument("--posterior", action="store_true", help="add posterior mode and interval")
        p.add_argument("--json", action="store_true", help="print the report as JSON")

    p = sub.add_parser("posterior", help="tabulate the posterior distribution")
    _add_counts(p)
    _add_precision(p)
    _add_posterior_opts(p, 0.68)
    p.add_argument("--output", default="-", help="CSV path for x,pmf,cdf ('-' for stdout)")
    p.add_argument("--json-output", help="also write the table as JSON")

    p = sub.add_parser("batch", help="estimate every row of a CSV file")
    p.add_argument("input", help="CSV with columns id,na,nb,nab")
    p.add_argument("output", help="output CSV ('-' for stdout)")
    p.add_argument("--scenario", type=_scenario, default=Scenario.full_search())
    _add_precision(p)

    p = sub.add_parser("simulate", help="Monte Carlo calibration of the estimators")
    p.add_argument("--config", help="JSON file with a SimConfig; flags override it")
    p.add_argument("--true-n", type=int)
    p.add_argument("--mode", choices=["fixed", "full"])
    p.add_argument("--na", type=int)
    p.add_argument("--nb", type=int)
    p.add_argument("--pa", type=float)
    p.add_argument("--pb", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--estimators", help=f"comma-separated subset of {','.join(simulate.ESTIMATORS)}")
    p.add_argument("--mass", type=float, help="interval mass (default 0.9545, i.e. mean +/- 2 sd)")
    p.add_argument("--shift", type=int, help="estimator prior shift, overriding the mode's default")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", help="write the SimResult JSON here")
    p.add_argument("--summary-csv", help="write per-estimator summary CSV here")
    p.add_argument("--log-csv", help="write per-replicate CSV here")
    _add_precision(p)
    return parser


def _counts(args) -> SearchCounts:
    return SearchCounts(args.na, args.nb, args.nab)


def _precision(args) -> int:
    return args.precision if args.precision is not None else default_precision()


def cmd_estimate(args, out) -> int:
    request = EstimateRequest(
        counts=_counts(args),
        scenario=args.scenario,
        include_classical=args.command == "compare" or getattr(args, "compare", False),
        include_posterior=args.posterior,
        flat_prior=args.flat_prior,
        interval_mass=args.mass,
        tail_tol=args.tail_tol,
    )
    report = build_report(request)
    if args.json:
        json.dump(report.to_dict(), out, indent=2)
        out.write("\n")
    else:
        out.write(report.render(_precision(args)) + "\n")
    return EXIT_OK


def cmd_posterior(args, out) -> int:
    table = posterior.build_table(
        _counts(args), args.scenario, args.tail_tol, flat_prior=args.flat_prior, moment_order=1
    )
    ci = posterior.credible_interval(table, args.mass)
    mean = posterior.table_moment(table, 1)
    fmt = lambda v: format_value(v, _precision(args))  # noqa: E731
    if args.output == "-":
        table.to_csv(out)
        summary = sys.stderr
    else:
        with open(args.output, "w", newline="") as fh:
            table.to_csv(fh)
        summary = out
    if args.json_output:
        with open(args.json_output, "w") as fh:
            table.to_json(fh)
    summary.write(f"mode              {posterior.mode(table)}\n")
    if mean.divergent:
        summary.write("mean              undefined\n")
    else:
        summary.write(f"mean              {fmt(mean.value)} (+/- {mean.error_bound:.2g})\n")
    summary.write(f"{args.mass:g} credible interval  [{ci.lower}, {ci.upper}]\n")
    summary.write(f"tail mass bound   {table.tail_mass_bound:.3g}\n")
    summary.write(f"x_max             {table.x_max}\n")
    return EXIT_OK


def cmd_batch(args, out) -> int:
    precision = _precision(args)
    with open(args.input, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "na", "nb", "nab"} - set(reader.fieldnames or [])
        if missing:
            raise UsageError(f"input header lacks columns: {', '.join(sorted(missing))}")
        rows = [batch_row(row, args.scenario, precision) for row in reader]
    for row in rows:
        if row["status"] == "error":
            sys.stderr.write(f"row {row['id'] or '?'}: {row.get('error', 'invalid counts')}\n")

    def write(fh):
        writer = csv.DictWriter(fh, fieldnames=BATCH_COLUMNS, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

    if args.output == "-":
        write(out)
    else:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            write(fh)
    return EXIT_OK


def _sim_config(args) -> simulate.SimConfig:
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
    mode = dict(base.get("mode", {}))
    if args.mode:
        mode["kind"] = args.mode
    for flag, key in (("na", "n_a"), ("nb", "n_b"), ("pa", "p_a"), ("pb", "p_b")):
        value = getattr(args, flag)
        if value is not None:
            mode[key] = value
    if "kind" not in mode:
        raise UsageError("simulate needs --mode (or a config file with a mode)")
    try:
        mode = {"kind": mode["kind"], **(
            {"p_a": mode["p_a"], "p_b": mode["p_b"]} if mode["kind"] == "full"
            else {"n_a": mode["n_a"], "n_b": mode["n_b"]}
        )}
    except KeyError as exc:
        raise UsageError(f"simulate mode {mode['kind']!r} needs {exc.args[0]}") from None
    base["mode"] = mode
    for flag, key in (("true_n", "true_n"), ("reps", "replicates"), ("seed", "seed"),
                      ("mass", "interval_mass"), ("shift", "estimator_shift")):
        value = getattr(args, flag)
        if value is not None:
            base[key] = value
    if args.estimators:
        base["estimators"] = [e.strip() for e in args.estimators.split(",") if e.strip()]
    if args.log_csv:
        base["keep_log"] = True
    if "true_n" not in base:
        raise UsageError("simulate needs --true-n (or a config file with true_n)")
    return simulate.SimConfig.from_dict(base)


def cmd_simulate(args, out) -> int:
    config = _sim_config(args)
    result = simulate.run(config, workers=args.workers)
    if args.output:
        with open(args.output, "w") as fh:
            result.to_json(fh, indent=2)
    if args.summary_csv:
        with open(args.summary_csv, "w", newline="") as fh:
            result.write_summary_csv(fh)
    if args.log_csv:
        with open(args.log_csv, "w", newline="") as fh:
            result.write_log_csv(fh)
    fmt = lambda v: "-" if v is None else format_value(v, _precision(args))  # noqa: E731
    out.write(
        f"replicates {config.replicates}  seed {config.seed}  scenario {config.scenario.selector}\n"
        f"mean true missed {fmt(result.mean_true_missed)} (se {fmt(result.true_missed_se)})  "
        f"mean n_ab {fmt(result.mean_n_ab)} (se {fmt(result.n_ab_se)})\n"
    )
    header = f"{'estimator':<18}{'bias':>12}{'bias se':>12}{'rmse':>12}{'undefined':>11}{'coverage':>10}\n"
    out.write(header)
    for s in result.estimators.values():
        out.write(
            f"{s.name:<18}{fmt(s.mean_bias):>12}{fmt(s.bias_se):>12}{fmt(s.rmse):>12}"
            f"{fmt(s.fraction_undefined):>11}{fmt(s.coverage):>10}\n"
        )
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "compare": cmd_estimate,
    "posterior": cmd_posterior,
    "batch": cmd_batch,
    "simulate": cmd_simulate,
}


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except posterior.DivergentSeriesError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except (UsageError, InvalidCounts, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except (posterior.BudgetExceededError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
