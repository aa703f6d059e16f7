"""Command line entry point ``regsat``.

Exit codes: 0 success, 1 a statistical claim failed, 2 usage or domain
error, 3 a resource cap was hit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from regsat import codec, experiments
from regsat.analytic import core
from regsat.analytic.rates import rate_table
from regsat.counting import count_all, normalized_log_count, MAX_COUNT_N
from regsat.cycles import cycle_census, u_statistic
from regsat.errors import (DomainError, FormatError, RegsatError, ResourceError,
                            SamplingError)
from regsat.model import sample_formula
from regsat.rng import replicate_rng

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"{self.prog}: error: {message}") from None


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def _rows_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["replicate", "statistic", "value"])
    writer.writerows(rows)
    return buf.getvalue()


def cmd_q(args) -> int:
    print(f"{core.solve_q(args.k):.10f}")
    return EXIT_OK


def cmd_rates(args) -> int:
    table = rate_table(args.k, args.d, args.max_len)
    obj = table.to_dict()
    obj["lambda_agg"] = [{"l": l, "t": t, "value": v} for (l, t), v in sorted(table.lambda_agg.items())]
    _emit(_dump(obj), args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    params = core.ModelParams(args.n, args.d, args.k)
    formula = sample_formula(params, replicate_rng(args.seed, args.replicate))
    text = codec.to_json(formula).decode() if args.format == "json" else codec.to_dimacs(formula)
    _emit(text, args.out)
    return EXIT_OK


def cmd_count(args) -> int:
    formula = codec.load_formula(args.input)
    cap = max(formula.params.n, MAX_COUNT_N) if args.unsafe_caps else MAX_COUNT_N
    z, hist = count_all(formula, want_histogram=args.histogram, max_n=cap)
    out = {"params": formula.params.as_dict(), "Z": str(z),
           "normalized_log_Z": normalized_log_count(formula, z) if z > 0 else None,
           "log_normalizer": core.log_normalizer(formula.params)}
    if hist is not None:
        out["histogram"] = hist.to_list()
        out["window_omega"] = args.omega
        out["window"] = [{"mu": [list(p) for p in key], "z_mu": str(v)}
                         for key, v in sorted(hist.window(args.omega).items())]
        out["balance_ok"] = hist.balance_ok()
    _emit(_dump(out), args.out)
    return EXIT_OK


def cmd_cycles(args) -> int:
    formula = codec.load_formula(args.input)
    if args.max_len > experiments.DEFAULT_CAPS["L"] and not args.unsafe_caps:
        raise ResourceError(f"max-len above cap {experiments.DEFAULT_CAPS['L']}; "
                            "pass --unsafe-caps to override")
    census = cycle_census(formula, args.max_len)
    out = {"L": census.max_len, "counts": census.as_dict(nonzero_only=False)}
    try:
        rates = rate_table(formula.params.k, formula.params.d, args.max_len)
        out["U"] = {str(ell): u_statistic(census, rates, ell) for ell in range(1, args.max_len + 1)}
    except DomainError as exc:
        out["U"] = None
        out["U_error"] = str(exc)
    _emit(_dump(out), args.out)
    return EXIT_OK


def _experiment_config(args, name: str, **extra) -> experiments.ExperimentConfig:
    workers = args.workers if args.workers is not None else experiments.default_workers()
    return experiments.ExperimentConfig(
        experiment=name, n=getattr(args, "n", None), d=getattr(args, "d", None),
        k=getattr(args, "k", None), reps=getattr(args, "reps", 1), seed=args.seed,
        max_len=getattr(args, "max_len", 1), omega=getattr(args, "omega", 3.0),
        workers=workers, unsafe_caps=args.unsafe_caps, extra=extra)


def cmd_exp(args) -> int:
    name = args.experiment
    if name == "first-moment":
        report, rows = experiments.first_moment(_experiment_config(args, name))
    elif name == "cycle-poisson":
        report, rows = experiments.cycle_poisson(_experiment_config(args, name))
    elif name == "planted-cycles":
        report, rows = experiments.planted_cycles(_experiment_config(args, name))
    elif name == "second-moment":
        report, rows = experiments.second_moment(_experiment_config(args, name))
    elif name == "w-moments":
        if args.draws > experiments.DEFAULT_CAPS["N"] and not args.unsafe_caps:
            raise ResourceError("draws above cap; pass --unsafe-caps to override")
        cfg = _experiment_config(args, name, ell=args.ell, draws=args.draws)
        report, rows = experiments.w_moments(cfg, args.ell, args.draws)
    elif name == "a-stat":
        args.reps = args.draws
        cfg = _experiment_config(args, name, m=args.m)
        report, rows = experiments.a_stat(cfg, args.m)
    elif name == "overlap":
        grid = None
        if args.rho_grid:
            try:
                grid = [float(x) for x in args.rho_grid.split(",")]
            except ValueError as exc:
                raise DomainError(f"bad --rho-grid {args.rho_grid!r}") from exc
        cfg = _experiment_config(args, name, rho_grid=grid)
        report, rows = experiments.overlap_scan(cfg, grid)
    else:  # argparse restricts choices
        raise DomainError(f"unknown experiment {name!r}")
    _emit(_rows_csv(rows) if args.format == "csv" else _dump(report), args.out)
    failed = [c["name"] for c in report["claims"] if not c["pass"]]
    for c in report["claims"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['name']} value={c['value']!r} "
              f"target={c['target']!r} tol={c['tolerance']!r}", file=sys.stderr)
    if failed:
        print(f"statistical check failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _add_common(p):
    p.add_argument("--out", help="write output to this file instead of stdout")
    p.add_argument("--unsafe-caps", action="store_true",
                   help="lift the default caps on n, L and replicate counts")


def _add_exp_common(p, model=True, reps=True, max_len=False):
    if model:
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--d", type=int, required=True)
        p.add_argument("--k", type=int, required=True)
    if reps:
        p.add_argument("--reps", type=int, required=True)
    if max_len:
        p.add_argument("--max-len", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: REGSAT_WORKERS or logical cores)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    _add_common(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regsat", description="Random regular k-SAT laboratory")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("q", help="root of 2q = 1 - (1-q)^k")
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_q)

    p = sub.add_parser("rates", help="dump the cycle rate table")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--max-len", type=int, default=3)
    _add_common(p)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("gen", help="sample a uniform regular formula")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--format", choices=["json", "dimacs"], default="json")
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("count", help="exact solution count of a formula file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--histogram", action="store_true")
    p.add_argument("--omega", type=float, default=3.0)
    _add_common(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("cycles", help="signed cycle census of a formula file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--max-len", type=int, default=2)
    _add_common(p)
    p.set_defaults(func=cmd_cycles)

    p = sub.add_parser("exp", help="run a Monte Carlo or numerical campaign")
    exp = p.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name in ("first-moment", "second-moment"):
        _add_exp_common(exp.add_parser(name))
    for name in ("cycle-poisson", "planted-cycles"):
        _add_exp_common(exp.add_parser(name), max_len=True)
    q = exp.add_parser("w-moments")
    q.add_argument("--k", type=int, default=3)
    q.add_argument("--d", type=int, default=2)
    q.add_argument("--ell", type=int, default=3)
    q.add_argument("--draws", type=int, default=10 ** 6)
    _add_exp_common(q, model=False, reps=False)
    q = exp.add_parser("a-stat")
    q.add_argument("--k", type=int, default=3)
    q.add_argument("--m", type=int, default=2000)
    q.add_argument("--draws", type=int, default=5000)
    _add_exp_common(q, model=False, reps=False)
    q = exp.add_parser("overlap")
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--d", type=float, default=None,
                   help="degree (real); default is the largest admissible value")
    q.add_argument("--rho-grid", default=None, help="comma separated rho11 values")
    _add_exp_common(q, model=False, reps=False)
    p.set_defaults(func=cmd_exp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return EXIT_USAGE
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ResourceError, SamplingError) as exc:
        print(f"regsat: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (DomainError, FormatError, OSError) as exc:
        print(f"regsat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RegsatError as exc:
        print(f"regsat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

