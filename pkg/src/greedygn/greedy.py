"""Greedy Gauss-Newton solver.

Each iteration appends (at most) one Jacobian column to the active support,
takes a minimum-norm Gauss-Newton step restricted to that support and
globalizes it with an Armijo backtracking line search. Restarts from a sparse
random point when the step collapses or the scaled gradient vanishes.

Column selection rules, with ``L = J[:, support]``, ``P = I - L L^+`` and
``a = J[:, t]``:

* ``MD`` (maximum descent):        maximize ``|f^T P a| / ||P a||``
* ``OM`` (orthogonal matching):    maximize ``|f^T P a| / ||a||``
* ``OMF`` (OM, fixed front):       OM selection, but the step keeps
  ``d = -L^+ f`` on the old support and appends the 1-D coefficient
  ``delta = -a^T P f / ||a||^2`` instead of re-solving jointly.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .numlin import (
    InvalidInputError,
    min_norm_lstsq,
    project_columns,
    residual_projection,
)
from .problems import DomainError, NonlinearSystem
from .report import SolveReport, TraceRow

log = logging.getLogger(__name__)

# Columns with ||P a|| <= CANDIDATE_FLOOR * ||a|| lie in range(L) numerically.
CANDIDATE_FLOOR = 1e-12


class Strategy(str, enum.Enum):
    MD = "md"
    OM = "om"
    OMF = "omf"


class SupportSet:
    """Ordered set of active column indices (0-based)."""

    def __init__(self, n_vars: int, active: Iterable[int] = ()):
        self.n_vars = n_vars
        self.active: list[int] = []
        for i in active:
            self.add(i)

    def add(self, i: int) -> None:
        i = int(i)
        if not 0 <= i < self.n_vars:
            raise InvalidInputError(f"index {i} out of range 0..{self.n_vars - 1}")
        if i in self.active:
            raise InvalidInputError(f"index {i} already active")
        self.active.append(i)

    def complement(self) -> np.ndarray:
        mask = np.ones(self.n_vars, dtype=bool)
        mask[self.active] = False
        return np.flatnonzero(mask)

    def union(self, i: int) -> "SupportSet":
        return SupportSet(self.n_vars, [*self.active, i])

    @classmethod
    def from_vector(cls, x, threshold: float) -> "SupportSet":
        x = np.asarray(x)
        return cls(x.size, np.flatnonzero(np.abs(x) > threshold))

    def __len__(self):
        return len(self.active)

    def __iter__(self):
        return iter(self.active)

    def __contains__(self, i):
        return i in self.active

    def __repr__(self):
        return f"SupportSet({self.active}, n_vars={self.n_vars})"


@dataclass
class SolverConfig:
    """Tolerances and limits of the greedy iteration.

    ``prob`` is the per-entry probability of a nonzero in a restart vector.
    The divergence guard (``max |x_i| > divergence_bound`` forces a restart)
    is applied only to exponential problems.
    """

    k_max: int = 200
    eps_f: float = 1e-13
    delta_x: float = 1e-8
    delta_alpha: float = 1e-3
    sel_tol: float = 1e-10
    delta_grad: float = 1e-16
    prob: float = 0.02
    divergence_bound: float = 1e3
    c1: float = 1e-4
    shrink: float = 0.5
    alpha_init: float = 1.0
    seed: int = 0
    strategy: Strategy = Strategy.MD

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        if self.k_max < 1:
            raise InvalidInputError("k_max must be >= 1")
        for name in ("eps_f", "delta_x", "delta_alpha", "sel_tol", "delta_grad",
                     "divergence_bound", "c1", "alpha_init"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")
        if not 0 < self.prob <= 1:
            raise InvalidInputError("prob must lie in (0, 1]")
        if not 0 < self.shrink < 1:
            raise InvalidInputError("shrink must lie in (0, 1)")
        if not self.c1 < 1:
            raise InvalidInputError("c1 must lie in (0, 1)")


@dataclass(frozen=True)
class SelectionScore:
    index: int
    score: float
    descent: float  # -p_t^T J^T f for the jointly re-solved step


def _check_dims(J, f, support):
    J = np.asarray(J, dtype=float)
    f = np.asarray(f, dtype=float).reshape(-1)
    if J.ndim != 2 or J.shape[0] != f.size:
        raise InvalidInputError(f"J shape {J.shape} incompatible with f of length {f.size}")
    if support.n_vars != J.shape[1]:
        raise InvalidInputError("support size does not match Jacobian width")
    return J, f


def _candidate_scores(J, f, support, rule):
    """Scores for every column outside ``support``; -inf marks ineligible ones."""
    J, f = _check_dims(J, f, support)
    L = J[:, support.active]
    comp = support.complement()
    cols = J[:, comp]
    Pf = residual_projection(L, f)
    PA = project_columns(L, cols)
    corr = np.abs(Pf @ PA)
    a_norm = np.linalg.norm(cols, axis=0)
    pa_norm = np.linalg.norm(PA, axis=0)
    in_range = pa_norm <= CANDIDATE_FLOOR * a_norm
    with np.errstate(divide="ignore", invalid="ignore"):
        if rule is Strategy.MD:
            scores = np.where(in_range, -np.inf, corr / pa_norm)
        else:
            scores = np.where(a_norm > 0, corr / a_norm, -np.inf)
        gain = np.where(in_range, 0.0, corr**2 / pa_norm**2)
    base = max(float(f @ f - Pf @ Pf), 0.0)  # f^T L L^+ f
    return comp, scores, base + gain, Pf


def _argmax(comp, scores, descent, sel_tol):
    if comp.size == 0 or not np.any(np.isfinite(scores)):
        return None
    j = int(np.argmax(scores))  # first maximum -> smallest index
    if not scores[j] > sel_tol:
        return None
    return SelectionScore(int(comp[j]), float(scores[j]), float(descent[j]))


def select_column_md(J, f, support: SupportSet, sel_tol: float = 1e-10):
    """Maximum-descent column, or ``None`` if no score exceeds ``sel_tol``."""
    comp, scores, descent, _ = _candidate_scores(J, f, support, Strategy.MD)
    return _argmax(comp, scores, descent, sel_tol)


def select_column_om(J, f, support: SupportSet, sel_tol: float = 1e-10):
    """Orthogonal-matching column, or ``None`` if no score exceeds ``sel_tol``."""
    comp, scores, descent, _ = _candidate_scores(J, f, support, Strategy.OM)
    return _argmax(comp, scores, descent, sel_tol)


def select_column_omf(J, f, support: SupportSet, sel_tol: float = 1e-10):
    """OM selection plus the fixed-front coefficients.

    Returns ``(selection, delta_t, d)`` where ``d = -L^+ f`` is the step on the
    current support and ``delta_t`` the coefficient of the new column.
    """
    comp, scores, descent, Pf = _candidate_scores(J, f, support, Strategy.OM)
    sel = _argmax(comp, scores, descent, sel_tol)
    if sel is None:
        return None
    J = np.asarray(J, dtype=float)
    f = np.asarray(f, dtype=float).reshape(-1)
    a = J[:, sel.index]
    delta = -float(a @ Pf) / float(a @ a)
    d = -min_norm_lstsq(J[:, support.active], f)
    return sel, delta, d


def descent_direction(J, f, support: SupportSet) -> np.ndarray:
    """``p`` with ``p[support] = -J[:, support]^+ f`` and zeros elsewhere."""
    J, f = _check_dims(J, f, support)
    p = np.zeros(J.shape[1])
    if len(support):
        p[support.active] = -min_norm_lstsq(J[:, support.active], f)
    return p


def fixed_front_direction(n_vars, support: SupportSet, d, t, delta) -> np.ndarray:
    p = np.zeros(n_vars)
    p[support.active] = d
    p[t] = delta
    return p


def line_search(phi: Callable[[float], float], phi0: float, slope0: float,
                cfg: SolverConfig) -> tuple[float, bool]:
    """Armijo backtracking on the merit function ``phi``.

    Tries ``alpha_init, alpha_init*shrink, ...`` while ``alpha >= delta_alpha``.
    A non-finite ``phi(alpha)`` (or a ``DomainError``) rejects that trial.
    Returns the last ``alpha`` tried and whether it was accepted; a
    non-negative ``slope0`` is never accepted.
    """
    alpha = cfg.alpha_init
    if not slope0 < 0:
        return alpha, False
    while alpha >= cfg.delta_alpha:
        try:
            val = phi(alpha)
        except DomainError:
            val = math.inf
        if math.isfinite(val) and val <= phi0 + cfg.c1 * alpha * slope0:
            return alpha, True
        alpha *= cfg.shrink
    return alpha, False


def restart_vector(N: int, prob: float, rng: np.random.Generator) -> np.ndarray:
    """Sparse random vector: each entry is uniform(-1, 1) with probability ``prob``, else 0."""
    if not 0 < prob <= 1:
        raise InvalidInputError("prob must lie in (0, 1]")
    values = 2.0 * rng.random(N) - 1.0
    keep = rng.random(N) < prob
    return values * keep


def _safe_f(system, x):
    try:
        fx = np.asarray(system.f(x), dtype=float)
    except DomainError:
        return None
    return fx if np.all(np.isfinite(fx)) else None


@dataclass
class _Step:
    support: SupportSet
    p: np.ndarray | None
    added: int = -1
    score: float = 0.0


def _choose_step(J, fx, support: SupportSet, cfg: SolverConfig) -> _Step:
    if cfg.strategy is Strategy.OMF:
        res = select_column_omf(J, fx, support, cfg.sel_tol)
        if res is None:
            if not len(support):
                return _Step(support, None)
            return _Step(support, descent_direction(J, fx, support))
        sel, delta, d = res
        p = fixed_front_direction(J.shape[1], support, d, sel.index, delta)
        return _Step(support.union(sel.index), p, sel.index, sel.score)

    select = select_column_md if cfg.strategy is Strategy.MD else select_column_om
    sel = select(J, fx, support, cfg.sel_tol)
    if sel is not None:
        support = support.union(sel.index)
    if not len(support):
        return _Step(support, None)
    added, score = (sel.index, sel.score) if sel else (-1, 0.0)
    return _Step(support, descent_direction(J, fx, support), added, score)


def solve(system: NonlinearSystem, cfg: SolverConfig | None = None,
          on_row: Callable[[TraceRow], None] | None = None) -> SolveReport:
    """Run the greedy Gauss-Newton iteration from ``x = 0``.

    ``on_row`` is called with each trace row as soon as it is complete.
    """
    cfg = cfg or SolverConfig()
    N = system.n_vars
    rng = np.random.default_rng(cfg.seed)
    guard = system.kind == "exponential"

    x = np.zeros(N)
    support = SupportSet(N)
    trace: list[TraceRow] = []
    iterates: list[np.ndarray] = []
    restarts = 0
    k = 1

    def emit(row):
        trace.append(row)
        if on_row is not None:
            on_row(row)

    while True:
        iterates.append(x.copy())
        fx = _safe_f(system, x)
        f_norm = float(np.linalg.norm(fx)) if fx is not None else math.inf
        if f_norm <= cfg.eps_f or k >= cfg.k_max:
            emit(TraceRow(k, f_norm, len(support)))
            break

        row = TraceRow(k, f_norm, len(support))
        need_restart = True
        x_new = x
        if fx is not None:
            try:
                J = np.asarray(system.jacobian(x), dtype=float)
                grad_ratio = float(np.linalg.norm(J.T @ fx)) / f_norm
                step = _choose_step(J, fx, support, cfg)
                row.added, row.score = step.added, step.score
                if step.p is not None:
                    support = step.support
                    p = step.p
                    slope0 = float((J @ p) @ fx)

                    def phi(alpha):
                        with np.errstate(over="ignore", invalid="ignore"):
                            fa = system.f(x + alpha * p)
                            return 0.5 * float(fa @ fa)

                    alpha, ok = line_search(phi, 0.5 * f_norm**2, slope0, cfg)
                    row.alpha = alpha
                    x_new = x + alpha * p
                    need_restart = (
                        not ok
                        or grad_ratio < cfg.delta_grad
                        or (guard and np.max(np.abs(x_new)) > cfg.divergence_bound)
                    )
            except (DomainError, np.linalg.LinAlgError) as exc:
                log.debug("iteration %d failed: %s", k, exc)
                need_restart = True

        if need_restart:
            restarts += 1
            row.restart = True
            x_new = restart_vector(N, cfg.prob, rng)
            support = SupportSet.from_vector(x_new, cfg.delta_x)
        emit(row)
        x = x_new
        k += 1

    x = x.copy()
    x[np.abs(x) <= cfg.delta_x] = 0.0
    fx = _safe_f(system, x)
    final_norm = float(np.linalg.norm(fx)) if fx is not None else math.inf
    converged = final_norm <= cfg.eps_f
    return SolveReport(
        x=x,
        support=[int(i) for i in np.flatnonzero(x)],
        converged=converged,
        iterations=len(trace),
        restarts=restarts,
        trace=trace,
        status="converged" if converged else "max_iter",
        method=cfg.strategy.value,
        f_norm=final_norm,
        iterates=iterates,
    )
