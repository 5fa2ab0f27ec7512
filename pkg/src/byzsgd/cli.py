"""Command-line front end: ``byzsgd aggregate | simulate | bounds | bench``.

Exit codes: 0 success, 2 malformed input (CSV, config schema), 3 rule or
bound constraint violated.  ``BYZSGD_OUTPUT_DIR`` sets the default directory
for metrics files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as config_io
from .aggregation import AggregationRule, RuleKind, as_batch
from .analysis import BoundInputs, bound_report
from .errors import ConstraintError, InvalidInputError
from .training import run_experiment

EXIT_OK, EXIT_INPUT, EXIT_CONSTRAINT = 0, 2, 3
OUTPUT_DIR_ENV = "BYZSGD_OUTPUT_DIR"
METRICS_HEADER = ["round", "train_loss", "test_accuracy", "agg_deviation", "dist_to_opt", "agg_time_ns"]


def format_float(value) -> str:
    """Shortest round-trip text; integral values print without a fraction."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def read_matrix(text: str) -> np.ndarray:
    rows = []
    for line_no, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            rows.append([float(cell) for cell in row])
        except ValueError as exc:
            raise InvalidInputError(f"line {line_no}: {exc}") from exc
    if len({len(r) for r in rows}) > 1:
        raise InvalidInputError("rows have different lengths")
    return as_batch(rows)


def _rule_from_args(args) -> AggregationRule:
    return AggregationRule(RuleKind(args.rule), q=args.q, b=args.b, c=args.c, strict=not args.relaxed)


def cmd_aggregate(args) -> int:
    text = sys.stdin.read() if args.input == "-" else Path(args.input).read_text()
    batch = read_matrix(text)
    rule = _rule_from_args(args)
    out = rule.aggregate(batch)
    print(",".join(format_float(v) for v in out.vector))
    if out.chosen_index is not None and args.verbose:
        print(f"chosen_index={out.chosen_index}", file=sys.stderr)
    return EXIT_OK


def _metrics_rows(records) -> list[list[str]]:
    return [
        [format_float(getattr(r, name)) for name in METRICS_HEADER]
        for r in records
    ]


def _average_records(runs):
    """Pointwise mean over seeds; a field stays empty unless every run defines it."""
    averaged = []
    for per_round in zip(*runs):
        row = {}
        for name in METRICS_HEADER:
            values = [getattr(r, name) for r in per_round]
            if name == "round":
                row[name] = values[0]
            elif any(v is None for v in values):
                row[name] = None
            else:
                with np.errstate(invalid="ignore", over="ignore"):
                    row[name] = float(np.mean(values))
        averaged.append(row)
    return averaged


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def resolve_output(cli_path: str | None, config_path: str | None) -> Path:
    chosen = cli_path or config_path or "metrics.csv"
    path = Path(chosen)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if not path.is_absolute() and base and not cli_path:
        path = Path(base) / path
    return path


def cmd_simulate(args) -> int:
    experiment = config_io.load(args.config)
    base = experiment.training
    seeds = range(args.repeat) if args.repeat else [base.seed]
    runs = [run_experiment(replace(base, seed=s)) for s in seeds]
    rows = [
        {name: getattr(r, name) for name in METRICS_HEADER} for r in runs[0]
    ] if len(runs) == 1 else _average_records(runs)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for row in rows:
        writer.writerow([format_float(row[name]) for name in METRICS_HEADER])
    path = resolve_output(args.output, experiment.output_path)
    write_atomic(path, buf.getvalue())

    last = rows[-1]
    summary = [f"rounds={last['round']}", f"seeds={len(runs)}", f"train_loss={format_float(last['train_loss'])}"]
    if last["test_accuracy"] is not None:
        summary.append(f"test_accuracy={format_float(last['test_accuracy'])}")
    if last["dist_to_opt"] is not None:
        summary.append(f"dist_to_opt={format_float(last['dist_to_opt'])}")
    summary.append(f"metrics={path}")
    print(" ".join(summary))
    return EXIT_OK


def cmd_bounds(args) -> int:
    inputs = BoundInputs(m=args.m, q=args.q, b=args.b, V=args.V, mu=args.mu, L=args.L,
                         gamma=args.gamma, T=args.T, dist0=args.dist0, gap0=args.gap0)
    print(json.dumps(bound_report(inputs).to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def bench(ms, ds, rules, repeats: int = 5, seed: int = 0):
    """Median wall time (ns) of each rule on random ``m x d`` batches."""
    rng = np.random.default_rng(seed)
    results = []
    for d in ds:
        for m in ms:
            batch = rng.normal(size=(m, d))
            for rule in rules:
                rule.validate(m)
                times = []
                for _ in range(repeats):
                    start = time.perf_counter_ns()
                    rule(batch)
                    times.append(time.perf_counter_ns() - start)
                results.append((str(rule), m, d, int(np.median(times))))
    return results


def _bench_rules(names, q, b):
    return [AggregationRule(RuleKind(n), q=q, b=b) for n in names]


def cmd_bench(args) -> int:
    rules = _bench_rules(args.rules, args.q, args.b)
    rows = bench(args.m, args.d, rules, args.repeats, args.seed)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["rule", "m", "d", "median_ns"])
    writer.writerows(rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="byzsgd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    agg = sub.add_parser("aggregate", help="aggregate a CSV matrix (one worker per line)")
    agg.add_argument("input", help="CSV file, or - for stdin")
    agg.add_argument("--rule", choices=[k.value for k in RuleKind], default="mean")
    agg.add_argument("--q", type=int, default=0, help="assumed Byzantine count (krum, multikrum)")
    agg.add_argument("--b", type=int, default=0, help="trim count (trmean, phocas)")
    agg.add_argument("--c", type=int, default=None, help="selection count (multikrum)")
    agg.add_argument("--relaxed", action="store_true", help="multikrum: allow rounds with < 1 neighbour")
    agg.add_argument("--verbose", action="store_true")
    agg.set_defaults(func=cmd_aggregate)

    sim = sub.add_parser("simulate", help="run a training simulation from a JSON config")
    sim.add_argument("config")
    sim.add_argument("--repeat", type=int, default=0, help="average seeds 0..k-1")
    sim.add_argument("--output", default=None, help="metrics CSV path")
    sim.set_defaults(func=cmd_simulate)

    bnd = sub.add_parser("bounds", help="evaluate resilience and convergence bounds as JSON")
    bnd.add_argument("--m", type=int, required=True)
    bnd.add_argument("--q", type=int, required=True)
    bnd.add_argument("--b", type=int, default=0)
    bnd.add_argument("--V", type=float, default=1.0)
    for name in ("mu", "L", "gamma", "dist0", "gap0"):
        bnd.add_argument(f"--{name}", type=float, default=None)
    bnd.add_argument("--T", type=int, default=None)
    bnd.set_defaults(func=cmd_bounds)

    bch = sub.add_parser("bench", help="time each rule over an (m, d) grid")
    bch.add_argument("--m", type=int, nargs="+", default=[10, 20, 40])
    bch.add_argument("--d", type=int, nargs="+", default=[100_000])
    bch.add_argument("--rules", nargs="+", choices=[k.value for k in RuleKind],
                     default=["mean", "krum", "trmean", "phocas"])
    bch.add_argument("--q", type=int, default=0)
    bch.add_argument("--b", type=int, default=0)
    bch.add_argument("--repeats", type=int, default=5)
    bch.add_argument("--seed", type=int, default=0)
    bch.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.repeat < 0:
        parser.error("--repeat must be >= 0")
    try:
        return args.func(args)
    except ConstraintError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except (InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
