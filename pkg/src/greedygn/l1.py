"""l1 linearization baseline.

From ``x = 0`` take full steps ``x += p`` where ``p`` minimizes ``||p||_1``
subject to ``f(x) + J(x) p = 0``. Each subproblem is written as the standard
form LP ``min 1^T w  s.t. (J, -J) w = -f, w >= 0`` with ``p = u - v``, and
solved by the dense two-phase simplex below.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .greedy import SolverConfig
from .problems import DomainError, NonlinearSystem
from .report import SolveReport, TraceRow

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
DIVERGENCE_LIMIT = 1e6

_PIVOT_TOL = 1e-9
_OPT_TOL = 1e-9


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"


@dataclass(frozen=True, eq=False)
class LpStandardForm:
    """``min c^T w  s.t.  A w = b,  w >= 0``."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        m, n = self.A.shape
        if self.c.shape != (n,) or self.b.shape != (m,):
            raise ValueError(
                f"inconsistent LP dimensions: A {self.A.shape}, c {self.c.shape}, b {self.b.shape}"
            )
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))
                and np.all(np.isfinite(self.c))):
            raise ValueError("LP data must be finite")

    @classmethod
    def l1(cls, J, f) -> "LpStandardForm":
        J = np.asarray(J, dtype=float)
        f = np.asarray(f, dtype=float)
        return cls(c=np.ones(2 * J.shape[1]), A=np.hstack([J, -J]), b=-f)


@dataclass(frozen=True, eq=False)
class LpSolution:
    w: np.ndarray
    objective: float
    status: LpStatus
    pivots: int = 0


class _Tableau:
    """Dense simplex tableau; last row holds reduced costs, last column the rhs."""

    def __init__(self, T, basis, n_allowed, max_pivots):
        self.T = T
        self.basis = basis
        self.n_allowed = n_allowed
        self.max_pivots = max_pivots
        self.pivots = 0

    def pivot(self, r, e):
        T = self.T
        T[r] /= T[r, e]
        col = T[:, e].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = e
        self.pivots += 1

    def run(self):
        """Iterate to optimality. Returns a status string."""
        T = self.T
        m = T.shape[0] - 1
        stall = 0
        bland = False
        while True:
            rc = T[-1, : self.n_allowed]
            if bland:
                neg = np.flatnonzero(rc < -_OPT_TOL)
                if neg.size == 0:
                    return LpStatus.OPTIMAL
                e = int(neg[0])
            else:
                e = int(np.argmin(rc))
                if rc[e] >= -_OPT_TOL:
                    return LpStatus.OPTIMAL
            col = T[:m, e]
            rows = np.flatnonzero(col > _PIVOT_TOL)
            if rows.size == 0:
                return LpStatus.UNBOUNDED
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            if bland:
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(ties[np.argmax(col[ties])])
            if self.pivots >= self.max_pivots:
                return LpStatus.ITERATION_LIMIT
            stall = stall + 1 if best <= 1e-12 else 0
            # Bland's rule once we've made 2m degenerate pivots in a row
            if stall >= 2 * m:
                bland = True
            self.pivot(r, e)


def simplex_solve(lp: LpStandardForm, feas_tol: float = FEAS_TOL,
                  max_pivots: int | None = None) -> LpSolution:
    """Two-phase primal simplex with Dantzig pricing and a Bland fallback."""
    A = np.array(lp.A, dtype=float)
    b = np.array(lp.b, dtype=float)
    c = np.asarray(lp.c, dtype=float)
    m, n = A.shape
    if max_pivots is None:
        max_pivots = 50 * (m + n)

    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    # the LP is homogeneous in b: solve with unit rhs, rescale at the end
    b_scale = float(np.max(b)) if m else 0.0
    if b_scale > 0:
        b = b / b_scale
    else:
        b_scale = 1.0

    # phase 1: minimize the sum of artificials
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    tab = _Tableau(T, list(range(n, n + m)), n, max_pivots)
    status = tab.run()
    if status is LpStatus.ITERATION_LIMIT:
        return LpSolution(np.zeros(n), math.nan, status, tab.pivots)
    if -T[-1, -1] > feas_tol * (1.0 + np.linalg.norm(b)):
        return LpSolution(np.zeros(n), math.nan, LpStatus.INFEASIBLE, tab.pivots)

    # drive remaining (zero-level) artificials out; drop redundant rows
    keep = []
    for r in range(m):
        if tab.basis[r] >= n:
            cand = np.flatnonzero(np.abs(T[r, :n]) > _PIVOT_TOL)
            if cand.size == 0:
                continue
            tab.pivot(r, int(cand[np.argmax(np.abs(T[r, cand]))]))
        keep.append(r)

    # phase 2 on the original columns
    rows = keep + [m]
    T2 = np.hstack([T[np.ix_(rows, range(n))], T[rows, -1:]])
    basis = [tab.basis[r] for r in keep]
    cB = c[basis]
    T2[-1, :n] = c - cB @ T2[:-1, :n]
    T2[-1, -1] = -cB @ T2[:-1, -1]
    tab2 = _Tableau(T2, basis, n, max_pivots - tab.pivots)
    status = tab2.run()
    pivots = tab.pivots + tab2.pivots
    if status is not LpStatus.OPTIMAL:
        return LpSolution(np.zeros(n), math.nan, status, pivots)

    w = np.zeros(n)
    w[tab2.basis] = T2[:-1, -1]
    # recompute basic values from the original data to shed tableau roundoff
    try:
        wB = np.linalg.solve(A[np.ix_(keep, tab2.basis)], b[keep])
        if np.all(wB >= -feas_tol):
            w[tab2.basis] = wB
    except np.linalg.LinAlgError:
        pass
    w = np.maximum(w, 0.0) * b_scale
    return LpSolution(w, float(c @ w), LpStatus.OPTIMAL, pivots)


class L1StepError(RuntimeError):
    def __init__(self, status: LpStatus):
        super().__init__(f"l1 subproblem failed: {status.value}")
        self.status = status


def l1_step(J, f, feas_tol: float = FEAS_TOL) -> np.ndarray:
    """Minimum l1-norm ``p`` with ``f + J p = 0``."""
    J = np.asarray(J, dtype=float)
    N = J.shape[1]
    sol = simplex_solve(LpStandardForm.l1(J, f), feas_tol=feas_tol)
    if sol.status is not LpStatus.OPTIMAL:
        raise L1StepError(sol.status)
    u, v = sol.w[:N], sol.w[N:]
    overlap = np.minimum(u, v)
    return (u - overlap) - (v - overlap)


def l1_solve(system: NonlinearSystem, cfg: SolverConfig | None = None,
             on_row=None) -> SolveReport:
    """Full-step l1 iteration from ``x = 0``; no line search, no restarts.

    Stops when ``||f|| <= eps_f``, at ``k_max``, or on LP failure /
    divergence (``||x|| > 1e6``), recorded in ``status``. The result is
    thresholded at ``delta_x`` exactly as for the greedy solver and
    ``report.f_norm`` is measured after thresholding, but ``converged`` refers
    to the unthresholded iteration.
    """
    cfg = cfg or SolverConfig()
    N = system.n_vars
    x = np.zeros(N)
    trace: list[TraceRow] = []
    iterates: list[np.ndarray] = []
    status = "max_iter"
    k = 1

    def emit(row):
        trace.append(row)
        if on_row is not None:
            on_row(row)

    while True:
        iterates.append(x.copy())
        try:
            fx = np.asarray(system.f(x), dtype=float)
        except DomainError:
            fx = None
        if fx is None or not np.all(np.isfinite(fx)):
            status = "non_finite"
            emit(TraceRow(k, math.inf, int(np.count_nonzero(x))))
            break
        f_norm = float(np.linalg.norm(fx))
        row = TraceRow(k, f_norm, int(np.count_nonzero(x)))
        if f_norm <= cfg.eps_f or k >= cfg.k_max:
            status = "converged" if f_norm <= cfg.eps_f else "max_iter"
            emit(row)
            break
        try:
            p = l1_step(system.jacobian(x), fx)
        except L1StepError as exc:
            log.debug("iteration %d: %s", k, exc)
            status = f"lp_{exc.status.value}"
            emit(row)
            break
        except DomainError:
            status = "non_finite"
            emit(row)
            break
        row.alpha = 1.0
        emit(row)
        x = x + p
        k += 1
        if np.linalg.norm(x) > DIVERGENCE_LIMIT:
            status = "diverged"
            iterates.append(x.copy())
            emit(TraceRow(k, math.nan, int(np.count_nonzero(x))))
            break

    x = x.copy()
    x[np.abs(x) <= cfg.delta_x] = 0.0
    try:
        final_norm = float(np.linalg.norm(system.f(x)))
    except DomainError:
        final_norm = math.inf
    # The dense l1 iterate can lose its residual to thresholding, so
    # convergence is judged on the iteration itself; f_norm is post-threshold.
    converged = status == "converged"
    return SolveReport(
        x=x,
        support=[int(i) for i in np.flatnonzero(x)],
        converged=converged,
        iterations=len(trace),
        restarts=0,
        trace=trace,
        status=status,
        method="l1",
        f_norm=final_norm,
        iterates=iterates,
    )
