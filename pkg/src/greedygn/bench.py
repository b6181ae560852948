"""Experiment grids over (m, n) for the quadratic and exponential problems.

Every trial is seeded from ``(base_seed, m, n, trial)`` only, so all
strategies see identical instances and the result does not depend on the
order (or parallelism) in which cells are evaluated.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .greedy import SolverConfig, Strategy, solve
from .l1 import l1_solve
from .numlin import InvalidInputError
from .problems import make_exponential, make_quadratic

GRID_FORMAT = "greedygn-grid"
GRID_VERSION = 1

STRATEGIES = ("md", "om", "omf", "l1")
DEFAULT_MARGIN = {"quadratic": 6, "exponential": 10}


def recovery_boundary(N: int, m: int) -> float:
    """Sparsity up to which OMP provably recovers linear signals: ``m / (2 ln N)``."""
    if N <= 1:
        raise InvalidInputError("N must exceed 1")
    return m / (2.0 * math.log(N))


def default_prob(kind: str, m: int) -> float:
    if kind == "exponential":
        return (2 + m / 10) / 100
    return 0.02


@dataclass
class GridSpec:
    kind: str = "quadratic"
    N: int = 100
    s: int = 2
    p: int = 2
    m_values: tuple[int, ...] = (20,)
    n_values: tuple[int, ...] = (6,)
    trials: int = 10
    base_seed: int = 0
    strategies: tuple[str, ...] = ("md",)
    margin: int | None = None  # keep n <= m - margin; default per kind
    solver_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DEFAULT_MARGIN:
            raise InvalidInputError(f"unknown problem kind {self.kind!r}")
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad:
            raise InvalidInputError(f"unknown strategies {bad}")
        if self.trials < 0:
            raise InvalidInputError("trials must be >= 0")
        if self.margin is None:
            self.margin = DEFAULT_MARGIN[self.kind]
        self.m_values = tuple(int(m) for m in self.m_values)
        self.n_values = tuple(int(n) for n in self.n_values)
        self.strategies = tuple(self.strategies)

    def admissible(self, m: int, n: int) -> bool:
        if n < 1 or n > m - self.margin or not m < self.N:
            return False
        if self.kind == "quadratic":
            return 1 <= self.s and n + self.s <= self.N
        return n + self.s < m and 0 <= self.p < m

    def cells(self) -> list[tuple[int, int]]:
        return [(m, n) for m in self.m_values for n in self.n_values
                if self.admissible(m, n)]


@dataclass
class CellResult:
    m: int
    n: int
    strategy: str
    trials: int
    successes: int
    failures: int
    generation_failures: int
    success_rate: float | None
    recovery_rate: float | None  # converged with sparsity <= n
    mean_sparsity: float | None
    mean_iterations: float | None
    mean_restarts: float | None
    mean_wall_time: float | None
    boundary: float


@dataclass
class GridResult:
    spec: GridSpec
    cells: list[CellResult]

    def cell(self, m, n, strategy="md") -> CellResult:
        for c in self.cells:
            if (c.m, c.n, c.strategy) == (m, n, strategy):
                return c
        raise KeyError((m, n, strategy))


def trial_seeds(base_seed: int, m: int, n: int, trial: int) -> tuple[int, int]:
    """(instance seed, solver seed) for one trial; independent of strategy."""
    ss = np.random.SeedSequence([base_seed, m, n, trial])
    a, b = ss.generate_state(2, dtype=np.uint64)
    return int(a), int(b)


def make_instance(spec: GridSpec, m: int, n: int, seed: int):
    if spec.kind == "quadratic":
        return make_quadratic(spec.N, m, n, spec.s, seed)
    return make_exponential(spec.N, m, n, spec.s, spec.p, seed)


def run_trial(spec: GridSpec, m: int, n: int, trial: int) -> list[dict]:
    """Per-strategy records (success, sparsity, iterations, ...) for one trial."""
    inst_seed, solver_seed = trial_seeds(spec.base_seed, m, n, trial)
    try:
        system, _, _ = make_instance(spec, m, n, inst_seed)
    except (InvalidInputError, np.linalg.LinAlgError) as exc:
        return [{"strategy": s, "generated": False, "error": str(exc)}
                for s in spec.strategies]
    out = []
    for strategy in spec.strategies:
        opts = {"prob": default_prob(spec.kind, m), "seed": solver_seed,
                **spec.solver_overrides}
        if strategy != "l1":
            opts["strategy"] = Strategy(strategy)
        cfg = SolverConfig(**opts)
        t0 = time.perf_counter()
        report = l1_solve(system, cfg) if strategy == "l1" else solve(system, cfg)
        wall = time.perf_counter() - t0
        finite = all(math.isfinite(r.f_norm) for r in report.trace)
        ok = bool(report.converged and finite)
        out.append({
            "strategy": strategy,
            "generated": True,
            "success": ok,
            "recovered": ok and report.sparsity <= n,
            "sparsity": report.sparsity,
            "iterations": report.iterations,
            "restarts": report.restarts,
            "wall": wall,
        })
    return out


def _task(args):
    spec, m, n, trial = args
    return (m, n, trial), run_trial(spec, m, n, trial)


def _mean(xs):
    return float(np.mean(xs)) if xs else None


def _aggregate(spec: GridSpec, m: int, n: int, strategy: str, records) -> CellResult:
    runs = [r for r in records if r["generated"]]
    trials = len(records)
    successes = sum(r["success"] for r in runs)
    has = trials > 0
    return CellResult(
        m=m,
        n=n,
        strategy=strategy,
        trials=trials,
        successes=successes,
        failures=trials - successes,
        generation_failures=trials - len(runs),
        success_rate=successes / trials if has else None,
        recovery_rate=sum(r["recovered"] for r in runs) / trials if has else None,
        mean_sparsity=_mean([r["sparsity"] for r in runs]),
        mean_iterations=_mean([r["iterations"] for r in runs]),
        mean_restarts=_mean([r["restarts"] for r in runs]),
        mean_wall_time=_mean([r["wall"] for r in runs]),
        boundary=recovery_boundary(spec.N, m),
    )


def run_grid(spec: GridSpec, workers: int = 1) -> GridResult:
    """Run every (cell, trial, strategy) and aggregate per cell and strategy."""
    tasks = [(spec, m, n, t) for (m, n) in spec.cells() for t in range(spec.trials)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = dict(pool.map(_task, tasks, chunksize=1))
    else:
        done = dict(map(_task, tasks))

    cells = []
    for m, n in spec.cells():
        per_trial = [done[(m, n, t)] for t in range(spec.trials)]
        for strategy in spec.strategies:
            records = [next(r for r in recs if r["strategy"] == strategy)
                       for recs in per_trial]
            cells.append(_aggregate(spec, m, n, strategy, records))
    return GridResult(spec, cells)


# --------------------------------------------------------------------------
# export / import

_INT_FIELDS = ("m", "n", "trials", "successes", "failures", "generation_failures")
_FLOAT_FIELDS = ("success_rate", "recovery_rate", "mean_sparsity", "mean_iterations",
                 "mean_restarts", "mean_wall_time", "boundary")


def _columns(timing: bool) -> list[str]:
    cols = ["kind", "N", "s", "p", "m", "n", "strategy", "trials", "successes",
            "failures", "generation_failures", "success_rate", "recovery_rate",
            "mean_sparsity", "mean_iterations", "mean_restarts", "boundary"]
    if timing:
        cols.append("mean_wall_time")
    return cols


def _row(result: GridResult, c: CellResult) -> dict:
    s = result.spec
    return {"kind": s.kind, "N": s.N, "s": s.s, "p": s.p, **asdict(c)}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def grid_to_text(result: GridResult, fmt: str = "csv", timing: bool = False) -> str:
    """Serialize a grid result; one row per (m, n, strategy).

    csv: a ``# greedygn-grid v1`` line, then a header row; absent values
    (cells with no trials) are empty fields. json: an object with
    ``format``, ``version``, ``columns`` and ``rows``. Wall time is only
    included when ``timing`` is set, so default output is reproducible.
    """
    cols = _columns(timing)
    rows = [_row(result, c) for c in result.cells]
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# {GRID_FORMAT} v{GRID_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "format": GRID_FORMAT,
            "version": GRID_VERSION,
            "columns": cols,
            "rows": [{c: r[c] for c in cols} for r in rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    raise InvalidInputError(f"unknown grid format {fmt!r}")


def grid_to_table(result: GridResult) -> str:
    lines = [f"{'m':>4} {'n':>4} {'strategy':>8} {'trials':>6} {'success':>8} "
             f"{'recovery':>8} {'sparsity':>8} {'iters':>7} {'restarts':>8}"]

    def f(v, spec):
        return format(v, spec) if v is not None else "-"

    for c in result.cells:
        lines.append(
            f"{c.m:>4} {c.n:>4} {c.strategy:>8} {c.trials:>6} {f(c.success_rate, '>8.2f')} "
            f"{f(c.recovery_rate, '>8.2f')} {f(c.mean_sparsity, '>8.2f')} "
            f"{f(c.mean_iterations, '>7.1f')} {f(c.mean_restarts, '>8.2f')}"
        )
    return "\n".join(lines) + "\n"


def export_grid(result: GridResult, path, fmt: str = "csv", timing: bool = False) -> Path:
    """Write :func:`grid_to_text` output to ``path``."""
    path = Path(path)
    text = grid_to_text(result, fmt, timing)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write grid to {path}: {exc}") from exc
    return path


def _parse(col, text):
    if col in _INT_FIELDS or col in ("N", "s", "p"):
        return int(text)
    if col in _FLOAT_FIELDS:
        return float(text) if text != "" else None
    return text


def read_grid(path) -> list[dict]:
    """Read a file written by :func:`export_grid` back into row dicts."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read grid {path}: {exc}") from exc
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        if doc.get("format") != GRID_FORMAT or doc.get("version") != GRID_VERSION:
            raise ValueError(f"{path}: not a {GRID_FORMAT} v{GRID_VERSION} file")
        return doc["rows"]
    lines = text.splitlines()
    if not lines or lines[0] != f"# {GRID_FORMAT} v{GRID_VERSION}":
        raise ValueError(f"{path}: not a {GRID_FORMAT} v{GRID_VERSION} file")
    reader = csv.reader(lines[1:])
    cols = next(reader)
    return [{c: _parse(c, v) for c, v in zip(cols, row)} for row in reader]
