"""Command-line front end: ``mtppquery simulate | query | bench``.

Exit codes: 0 success, 2 bad configuration or query, 3 trajectory budget
exhausted, 4 overlapping A and B in an A-before-B query.  Data goes to
stdout (or ``--out``); diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import sys

from .bench import ConfigError, ExperimentConfig, run_experiment, write_outputs
from .core import EventSequence, validate_sequence
from .hawkes import ModelConfigError, load_model
from .queries import ABeforeB, InvalidQuery, OverlappingMarkSets, estimate, query_from_json
from .sampling import BudgetExceeded, RngStream, TrajectoryBudget, sample_thinning

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_OVERLAP = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message, code=EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _load_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {what} {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{what} {path} is not valid JSON: {exc}") from exc


def _model(path):
    try:
        return load_model(path)
    except OSError as exc:
        raise CliError(f"cannot read model {path}: {exc.strerror}") from exc
    except ModelConfigError as exc:
        raise CliError(str(exc)) from exc


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8")


def cmd_simulate(args) -> int:
    model = _model(args.model)
    if not args.horizon > 0:
        raise CliError("--horizon must be positive")
    if args.n < 0:
        raise CliError("-n must be non-negative")
    budget = TrajectoryBudget(max_events=args.max_events)
    code = EXIT_OK
    out = _open_out(args.out)
    try:
        for i in range(args.n):
            try:
                seq = sample_thinning(model, 0.0, args.horizon, rng=RngStream(args.seed, i),
                                      budget=budget)
                out.write(json.dumps(seq.to_json()) + "\n")
            except BudgetExceeded as exc:
                partial = exc.partial.to_json() if exc.partial is not None else {"events": []}
                partial["T"] = args.horizon
                partial["partial"] = True
                out.write(json.dumps(partial) + "\n")
                print(f"trajectory {i}: {exc}", file=sys.stderr)
                code = EXIT_BUDGET
    finally:
        if out is not sys.stdout:
            out.close()
    return code


def cmd_query(args) -> int:
    model = _model(args.model)
    obj = _load_json(args.query, "query")
    try:
        spec, condition = query_from_json(obj)
    except OverlappingMarkSets as exc:
        raise CliError(str(exc), EXIT_OVERLAP) from exc
    except InvalidQuery as exc:
        raise CliError(str(exc)) from exc
    if args.condition:
        try:
            condition = EventSequence.from_json(_load_json(args.condition, "condition"))
        except (KeyError, TypeError) as exc:
            raise CliError(f"bad condition file: {exc}") from exc
    if isinstance(spec, ABeforeB) and args.precision is not None:
        spec = ABeforeB(spec.A, spec.B, args.precision)
    if args.integration_points < 2:
        raise CliError("--integration-points must be at least 2")
    model.quad_points = args.integration_points
    kw = dict(history=condition, n_samples=args.samples, seed=args.seed, workers=args.workers)
    if args.method == "naive":
        kw["horizon"] = args.horizon
    else:
        kw["n_points"] = args.integration_points
    try:
        if condition is not None:
            validate_sequence(condition, model.mark_count)
        result = estimate(model, spec, args.method, **kw)
    except (InvalidQuery, ValueError) as exc:
        raise CliError(str(exc)) from exc
    out = _open_out(args.out)
    try:
        json.dump(result.to_dict(), out, sort_keys=True)
        out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.workers is not None:
            cfg.workers = args.workers
        records, summary = run_experiment(cfg)
    except OSError as exc:
        raise CliError(f"cannot read config {args.config}: {exc.strerror}") from exc
    except (ConfigError, InvalidQuery, ModelConfigError) as exc:
        raise CliError(str(exc)) from exc
    write_outputs(records, summary, args.out)
    json.dump({"mean_rae": summary["mean_rae"],
               "median_efficiency": summary["median_efficiency"]}, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mtppquery",
                                description="Query marked temporal point processes.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="sample trajectories from a model")
    s.add_argument("--model", required=True)
    s.add_argument("--horizon", type=float, required=True)
    s.add_argument("-n", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--max-events", type=int, default=10_000)
    s.set_defaults(func=cmd_simulate)

    q = sub.add_parser("query", help="estimate a query probability")
    q.add_argument("--model", required=True)
    q.add_argument("--query", required=True)
    q.add_argument("--condition")
    q.add_argument("--samples", type=int, default=1000)
    q.add_argument("--method", choices=["importance", "naive"], default="importance")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--precision", type=float, default=None,
                   help="A-before-B residual threshold (default: query file, else 0.01)")
    q.add_argument("--integration-points", type=int, default=1000)
    q.add_argument("--workers", type=int, default=1)
    q.add_argument("--horizon", type=float, default=None,
                   help="simulation cutoff for naive estimates of open-ended queries")
    q.add_argument("--out")
    q.set_defaults(func=cmd_query)

    b = sub.add_parser("bench", help="run an experiment config")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--workers", type=int, default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
