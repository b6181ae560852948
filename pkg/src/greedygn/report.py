"""Solve reports and their text serializations (csv, json, table)."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

TRACE_FIELDS = ("k", "f_norm", "support_size", "added", "alpha", "restart", "score")


@dataclass
class TraceRow:
    """State at iterate ``k`` and the step taken from it.

    ``added`` is the column appended to the support (-1 if none), ``alpha``
    the accepted step length (0.0 on the final row, where no step is taken).
    """

    k: int
    f_norm: float
    support_size: int
    added: int = -1
    alpha: float = 0.0
    restart: bool = False
    score: float = 0.0

    def as_list(self):
        return [
            self.k,
            _fmt(self.f_norm),
            self.support_size,
            self.added,
            _fmt(self.alpha),
            int(self.restart),
            _fmt(self.score),
        ]


@dataclass
class SolveReport:
    x: np.ndarray
    support: list[int]
    converged: bool
    iterations: int
    restarts: int
    trace: list[TraceRow] = field(default_factory=list)
    status: str = ""
    method: str = ""
    f_norm: float = float("nan")  # ||f(x)|| after final thresholding
    iterates: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def sparsity(self) -> int:
        return int(np.count_nonzero(self.x))

    def summary(self) -> dict:
        return {
            "method": self.method,
            "status": self.status,
            "converged": self.converged,
            "iterations": self.iterations,
            "restarts": self.restarts,
            "sparsity": self.sparsity,
            "f_norm": self.f_norm,
            "support": list(self.support),
            "x": [float(v) for v in self.x],
        }


def _fmt(v: float) -> str:
    """17 significant digits: enough to round-trip a double exactly."""
    return format(float(v), ".17g")


def trace_header() -> list[str]:
    return list(TRACE_FIELDS)


def report_to_csv(report: SolveReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header())
    for row in report.trace:
        w.writerow(row.as_list())
    return buf.getvalue()


def report_to_json(report: SolveReport) -> str:
    out = report.summary()
    out["trace"] = [asdict(r) for r in report.trace]
    return json.dumps(out, indent=2, sort_keys=True) + "\n"


def report_to_table(report: SolveReport) -> str:
    lines = [
        f"{'k':>4} {'||f||':>12} {'|supp|':>6} {'added':>6} {'alpha':>10} restart",
    ]
    for r in report.trace:
        lines.append(
            f"{r.k:>4} {r.f_norm:>12.4e} {r.support_size:>6} {r.added:>6} "
            f"{r.alpha:>10.4g} {'yes' if r.restart else ''}"
        )
    lines.append(
        f"{report.method}: {report.status}, iterations={report.iterations}, "
        f"restarts={report.restarts}, sparsity={report.sparsity}"
    )
    return "\n".join(lines) + "\n"


def read_trace_csv(text: str) -> list[TraceRow]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != trace_header():
        raise ValueError("not a trace file: bad header")
    return [
        TraceRow(
            k=int(r[0]),
            f_norm=float(r[1]),
            support_size=int(r[2]),
            added=int(r[3]),
            alpha=float(r[4]),
            restart=bool(int(r[5])),
            score=float(r[6]),
        )
        for r in rows[1:]
    ]
