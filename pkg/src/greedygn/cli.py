"""Command-line front end.

Exit codes: 0 success, 1 non-convergence, 2 usage or input error.
Relative output paths are resolved against ``$GREEDYGN_OUTPUT_DIR`` when set.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .greedy import SolverConfig, Strategy, solve
from .l1 import l1_solve
from .numlin import InvalidInputError
from .problems import (
    load_instance,
    make_exponential,
    make_quadratic,
    save_instance,
    small_problem,
    verification_summary,
)
from .report import TraceRow, report_to_json, report_to_table, trace_header

OUTPUT_DIR_ENV = "GREEDYGN_OUTPUT_DIR"

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _resolve(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _emit(text: str, output: Path | None):
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _num(v: float) -> str:
    return format(float(v), ".17g")


# --------------------------------------------------------------------------
# demo-small


def _matrix_text(X: np.ndarray) -> str:
    return "\n".join(" ".join(f"{v:>10.3g}" for v in row) for row in X) + "\n"


def cmd_demo_small(args) -> int:
    system = small_problem()
    cfg = SolverConfig(strategy=Strategy(args.strategy), seed=args.seed)
    greedy = solve(system, cfg)
    l1 = l1_solve(system, SolverConfig(seed=args.seed))
    X = np.array(greedy.iterates).T
    X_l1 = np.array(l1.iterates).T

    if args.format == "json":
        doc = {
            "strategy": args.strategy,
            "greedy": {**greedy.summary(), "iterates": X.T.tolist()},
            "l1": {**l1.summary(), "iterates": X_l1.T.tolist()},
        }
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        rows = [["method", "k"] + [f"x{i}" for i in range(system.n_vars)]]
        for name, rep in ((args.strategy, greedy), ("l1", l1)):
            for k, x in enumerate(rep.iterates, start=1):
                rows.append([name, k] + [_num(v) for v in x])
        text = "".join(",".join(map(str, r)) + "\n" for r in rows)
    else:
        text = (
            f"X ({args.strategy}), columns are iterates x_1..x_{greedy.iterations}:\n"
            + _matrix_text(X)
            + f"||f|| = {greedy.f_norm:.3e}, support = {greedy.support}\n\n"
            + f"X_l1, columns are iterates x_1..x_{l1.iterations}:\n"
            + _matrix_text(X_l1)
            + f"||f|| = {l1.f_norm:.3e}, support = {l1.support}\n"
        )
    _emit(text, _resolve(args.output))
    if not (greedy.converged and l1.converged):
        print("demo-small: a method failed to converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# --------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    if args.kind == "small":
        out = _resolve(args.output) or _resolve("small.npz")
        save_instance(out, "small")
        sys.stdout.write(f"path: {out}\n")
        return EXIT_OK
    missing = [f"--{k}" for k in ("m", "n", "s") if getattr(args, k) is None]
    if missing:
        raise UsageError(f"--kind {args.kind} requires {', '.join(missing)}")
    if args.kind == "quadratic":
        _, spec, family = make_quadratic(args.N, args.m, args.n, args.s, args.seed)
    else:
        _, spec, family = make_exponential(args.N, args.m, args.n, args.s, args.p, args.seed)
    out = _resolve(args.output) or _resolve(
        f"{args.kind}_N{args.N}_m{args.m}_n{args.n}_s{args.s}_seed{args.seed}.npz"
    )
    save_instance(out, spec)
    summary = {"path": str(out), **verification_summary(spec, family)}
    if args.format == "json":
        text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        keys = sorted(summary)
        vals = [_num(summary[k]) if isinstance(summary[k], float) else str(summary[k])
                for k in keys]
        text = ",".join(keys) + "\n" + ",".join(vals) + "\n"
    else:
        text = "".join(f"{k}: {v}\n" for k, v in summary.items())
    sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# solve

_CONFIG_FLAGS = (
    # (flag, SolverConfig field, type)
    ("--kmax", "k_max", int),
    ("--eps-f", "eps_f", float),
    ("--delta-x", "delta_x", float),
    ("--delta-alpha", "delta_alpha", float),
    ("--tol", "sel_tol", float),
    ("--delta-grad", "delta_grad", float),
    ("--prob", "prob", float),
    ("--divergence-bound", "divergence_bound", float),
    ("--c1", "c1", float),
    ("--shrink", "shrink", float),
    ("--alpha-init", "alpha_init", float),
)


def _config_from_args(args, default_prob: float) -> SolverConfig:
    opts = {"seed": args.seed, "prob": default_prob}
    for _, name, _ in _CONFIG_FLAGS:
        value = getattr(args, name)
        if value is not None:
            opts[name] = value
    if args.strategy != "l1":
        opts["strategy"] = Strategy(args.strategy)
    return SolverConfig(**opts)


class _TraceStream:
    """Writes trace rows to a csv file as they are produced."""

    def __init__(self, path: Path | None):
        self.fh = open(path, "w", newline="") if path else None
        if self.fh:
            self.writer = csv.writer(self.fh, lineterminator="\n")
            self.writer.writerow(trace_header())
            self.fh.flush()

    def __call__(self, row: TraceRow):
        if self.fh:
            self.writer.writerow(row.as_list())
            self.fh.flush()

    def close(self):
        if self.fh:
            self.fh.close()


def cmd_solve(args) -> int:
    system, spec = load_instance(args.instance)
    m = system.n_eqs
    cfg = _config_from_args(args, bench.default_prob(system.kind, m))
    output = _resolve(args.output)

    stream = _TraceStream(_resolve(args.trace_out))
    live = args.format == "csv" and output is None
    if live:
        sys.stdout.write(",".join(trace_header()) + "\n")

    def on_row(row):
        stream(row)
        if live:
            sys.stdout.write(",".join(map(str, row.as_list())) + "\n")
            sys.stdout.flush()

    try:
        runner = l1_solve if args.strategy == "l1" else solve
        report = runner(system, cfg, on_row=on_row)
    finally:
        stream.close()

    if args.format == "json":
        _emit(report_to_json(report), output)
    elif args.format == "csv":
        if not live:
            lines = [",".join(trace_header())]
            lines += [",".join(map(str, r.as_list())) for r in report.trace]
            _emit("\n".join(lines) + "\n", output)
    else:
        _emit(report_to_table(report), output)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


# --------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    defaults = {"quadratic": {"s": 2}, "exponential": {"s": 4}}[args.kind]
    overrides = {}
    for _, name, _ in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    spec = bench.GridSpec(
        kind=args.kind,
        N=args.N,
        s=args.s if args.s is not None else defaults["s"],
        p=args.p,
        m_values=tuple(args.m),
        n_values=tuple(args.n),
        trials=args.trials,
        base_seed=args.seed,
        strategies=tuple(args.strategies.split(",")),
        solver_overrides=overrides,
    )
    if not spec.cells():
        raise UsageError("no admissible (m, n) cells in the requested grid")
    result = bench.run_grid(spec, workers=args.workers)
    output = _resolve(args.output)
    if args.format == "table":
        sys.stdout.write(bench.grid_to_table(result))
        if output is not None:
            bench.export_grid(result, output, "csv", timing=args.timing)
    else:
        _emit(bench.grid_to_text(result, args.format, timing=args.timing), output)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("-o", "--output", help="output path (default: stdout)")
    common.add_argument("--format", choices=("table", "csv", "json"), default="table")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="greedygn",
        description="Sparse solutions of underdetermined nonlinear systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo-small", parents=[common],
                       help="run greedy and l1 on the fixed 8-variable problem")
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="md")
    p.set_defaults(func=cmd_demo_small)

    p = sub.add_parser("gen", parents=[common], help="generate a problem instance")
    p.add_argument("--kind", choices=("quadratic", "exponential", "small"), required=True)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--p", type=int, default=2, help="rank deficiency of A (exponential)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", parents=[common], help="solve a saved instance")
    p.add_argument("instance")
    p.add_argument("--strategy", choices=("md", "om", "omf", "l1"), default="md")
    p.add_argument("--trace-out", help="stream the trace as csv to this file")
    for flag, name, typ in _CONFIG_FLAGS:
        p.add_argument(flag, dest=name, type=typ, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", parents=[common], help="run an (m, n) experiment grid")
    p.add_argument("--kind", choices=("quadratic", "exponential"), default="quadratic")
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--s", type=int, default=None, help="default 2 (quadratic), 4 (exponential)")
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--m", type=_int_list, default=[20])
    p.add_argument("--n", type=_int_list, default=[6])
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--strategies", default="md")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true",
                   help="include wall time (makes output non-reproducible)")
    for flag, name, typ in _CONFIG_FLAGS:
        p.add_argument(flag, dest=name, type=typ, default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidInputError, ValueError) as exc:
        print(f"greedygn {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"greedygn {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
