"""Test problems with known sparse solution families.

Three constructions are provided:

* :func:`small_problem` -- a fixed 5 x 8 bilinear system whose sparse
  solution is ``(0, 0, 0, 0, -0.1, 0.05, 0, 0)``.
* :func:`make_quadratic` -- ``f(x) = A (x - xbar) + 1/2 [(x - xbar)^T H_i (x - xbar)]_i``
  with a planted ``s``-dimensional family of solutions, some ``n``-sparse.
* :func:`make_exponential` -- ``f(x) = A exp(B x) - b`` with rank-deficient
  ``A`` and a planted null-space family.

Random data come from numpy's PCG64 generator (``numpy.random.default_rng``),
which is deterministic across platforms for a given 64-bit seed. All uniform
draws are on ``(-1, 1)``. Indices are 0-based throughout.

Instances are stored as ``.npz`` archives (see :func:`save_instance`): one
``.npy`` member per array plus a ``meta.json`` member, written with a fixed
zip timestamp so identical instances give identical bytes.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg

from .numlin import InvalidInputError, numerical_rank

FORMAT_NAME = "greedygn-instance"
FORMAT_VERSION = 1

# |B x| beyond this overflows exp() in double precision (exp(709.8) ~ 1.8e308).
EXP_ARG_LIMIT = 700.0


class DomainError(ArithmeticError):
    """The evaluator was called outside the domain where it is finite."""


@dataclass(frozen=True, eq=False)
class NonlinearSystem:
    n_vars: int
    n_eqs: int
    f: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    kind: str = "generic"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.n_eqs < self.n_vars:
            raise InvalidInputError(
                f"need m < N, got m={self.n_eqs}, N={self.n_vars}"
            )


def linear_system(M, b) -> NonlinearSystem:
    """``f(x) = M x - b``; mostly useful as a test fixture."""
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    return NonlinearSystem(
        n_vars=M.shape[1],
        n_eqs=M.shape[0],
        f=lambda x: M @ x - b,
        jacobian=lambda x: M.copy(),
        kind="linear",
        metadata={"label": "linear"},
    )


# --------------------------------------------------------------------------
# small fixed problem

SMALL_A = np.array(
    [
        [-3.933, 0.107, 0.126, 0.0, -9.99, 0.0, -48.83, -7.64],
        [0.0, -0.987, 0.0, -22.95, 0.0, -28.37, 0.0, 0.0],
        [0.0002, 0.0, -0.235, 0.0, 5.67, 0.0, -0.921, -6.51],
        [0.0, 1.0, 0.0, -1.0, 0.0, -0.168, 0.0, 0.0],
        [0.0, 0.0, -1.0, 0.0, -0.196, 0.0, -0.0071, 0.0],
    ]
)
SMALL_Y = np.array([0.999, -1.4185, -0.5670, -0.0084, 0.0196])
SMALL_SOLUTION = np.array([0.0, 0.0, 0.0, 0.0, -0.1, 0.05, 0.0, 0.0])

# (equation, coefficient, i, j): phi_eq += coef * x_i * x_j
_SMALL_BILINEAR = (
    (0, -0.727, 1, 2),
    (0, 8.39, 2, 3),
    (0, -684.4, 3, 4),
    (0, 63.5, 3, 6),
    (1, 0.949, 0, 1),
    (1, -1.578, 0, 3),
    (1, -1.132, 3, 6),
    (2, -0.716, 0, 1),
    (2, -1.578, 0, 3),
    (2, 1.132, 3, 6),
    (3, -1.0, 0, 4),
    (4, 1.0, 0, 3),
)


def _small_f(x):
    x = np.asarray(x, dtype=float)
    phi = np.zeros(5)
    for eq, c, i, j in _SMALL_BILINEAR:
        phi[eq] += c * x[i] * x[j]
    return SMALL_A @ x + phi - SMALL_Y


def _small_jac(x):
    x = np.asarray(x, dtype=float)
    J = SMALL_A.copy()
    for eq, c, i, j in _SMALL_BILINEAR:
        J[eq, i] += c * x[j]
        J[eq, j] += c * x[i]
    return J


def small_problem() -> NonlinearSystem:
    """The fixed 8-variable, 5-equation bilinear test system."""
    return NonlinearSystem(
        n_vars=8,
        n_eqs=5,
        f=_small_f,
        jacobian=_small_jac,
        kind="small",
        metadata={"label": "small"},
    )


# --------------------------------------------------------------------------
# solution families


@dataclass(frozen=True, eq=False)
class SolutionFamily:
    """Solutions ``x_bar + (basis @ y, 0)`` for arbitrary ``y``.

    ``sparse_solution`` is one member with exactly ``n`` leading-block
    nonzeros (generically), found by zeroing ``s`` coordinates.
    """

    x_bar: np.ndarray
    basis: np.ndarray
    n: int
    sparse_solution: np.ndarray

    def member(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(-1)
        x = self.x_bar.copy()
        x[: self.basis.shape[0]] += self.basis @ y
        return x


def _sparsify_family(x_bar, basis):
    """Pick ``y`` so that ``s`` coordinates of ``z_bar + basis @ y`` vanish.

    The coordinates are chosen by column-pivoted QR of ``basis.T``, which picks
    a well-conditioned ``s x s`` subsystem.
    """
    k, s = basis.shape
    z_bar = x_bar[:k]
    _, _, piv = scipy.linalg.qr(basis.T, pivoting=True)
    rows = np.sort(piv[:s])
    y = np.linalg.solve(basis[rows], -z_bar[rows])
    x = x_bar.copy()
    x[:k] = z_bar + basis @ y
    x[rows] = 0.0
    return x


def _uniform(rng, *shape):
    return rng.uniform(-1.0, 1.0, size=shape)


def _symmetric_uniform(rng, k):
    T = _uniform(rng, k, k)
    return np.triu(T) + np.triu(T, 1).T


# --------------------------------------------------------------------------
# quadratic problem


@dataclass(frozen=True, eq=False)
class QuadraticSpec:
    N: int
    m: int
    n: int
    s: int
    seed: int
    A: np.ndarray
    H: np.ndarray  # (m, N, N), each slice symmetric
    x_bar: np.ndarray
    Q: np.ndarray  # (n+s, n+s) orthogonal; Q1 = Q[:, :n], Q2 = Q[:, n:]
    B: np.ndarray
    C: np.ndarray
    T: np.ndarray
    S: np.ndarray
    R: np.ndarray

    @property
    def Q1(self):
        return self.Q[:, : self.n]

    @property
    def Q2(self):
        return self.Q[:, self.n :]

    def system(self) -> NonlinearSystem:
        A, H, x_bar = self.A, self.H, self.x_bar

        def f(x):
            d = np.asarray(x, dtype=float) - x_bar
            Hd = H @ d
            return A @ d + 0.5 * (Hd @ d)

        def jacobian(x):
            d = np.asarray(x, dtype=float) - x_bar
            return A + H @ d

        return NonlinearSystem(
            n_vars=self.N,
            n_eqs=self.m,
            f=f,
            jacobian=jacobian,
            kind="quadratic",
            metadata={
                "label": "quadratic",
                "N": self.N,
                "m": self.m,
                "n": self.n,
                "s": self.s,
                "seed": self.seed,
            },
        )

    def family(self) -> SolutionFamily:
        return SolutionFamily(
            x_bar=self.x_bar,
            basis=self.Q2,
            n=self.n,
            sparse_solution=_sparsify_family(self.x_bar, self.Q2),
        )


def _check_quadratic_args(N, m, n, s):
    if not (1 <= s < n + s <= N):
        raise InvalidInputError(f"need 1 <= s < n+s <= N, got N={N}, n={n}, s={s}")
    if not (1 <= m < N):
        raise InvalidInputError(f"need 1 <= m < N, got m={m}, N={N}")


def make_quadratic(N: int, m: int, n: int, s: int, seed: int):
    """Random quadratic system with a planted solution family.

    Returns ``(system, spec, family)``.
    """
    _check_quadratic_args(N, m, n, s)
    rng = np.random.default_rng(seed)
    k = n + s
    Q, _ = np.linalg.qr(_uniform(rng, k, k))
    B = _uniform(rng, m, n)
    C = _uniform(rng, m, N - k)
    T = np.stack([_symmetric_uniform(rng, n) for _ in range(m)])
    S = _uniform(rng, m, k, N - k)
    R = np.stack([_symmetric_uniform(rng, N - k) for _ in range(m)])
    x_bar = np.zeros(N)
    x_bar[:k] = _uniform(rng, k)

    Q1 = Q[:, :n]
    A = np.hstack([B @ Q1.T, C])
    H = np.zeros((m, N, N))
    for i in range(m):
        H[i, :k, :k] = Q1 @ T[i] @ Q1.T
        H[i, :k, k:] = S[i]
        H[i, k:, :k] = S[i].T
        H[i, k:, k:] = R[i]
    # Q1 T Q1^T is symmetric only up to roundoff
    H = 0.5 * (H + H.transpose(0, 2, 1))

    spec = QuadraticSpec(
        N=N, m=m, n=n, s=s, seed=seed, A=A, H=H, x_bar=x_bar,
        Q=Q, B=B, C=C, T=T, S=S, R=R,
    )
    return spec.system(), spec, spec.family()


# --------------------------------------------------------------------------
# exponential problem


@dataclass(frozen=True, eq=False)
class ExponentialSpec:
    N: int
    m: int
    n: int
    s: int
    p: int
    seed: int
    A: np.ndarray
    B: np.ndarray
    b_vec: np.ndarray
    x_bar: np.ndarray
    V2: np.ndarray

    def system(self) -> NonlinearSystem:
        A, B, b = self.A, self.B, self.b_vec

        def _exp_Bx(x):
            Bx = B @ np.asarray(x, dtype=float)
            if not np.all(np.abs(Bx) <= EXP_ARG_LIMIT):
                raise DomainError("|B x| exceeds the exponential domain guard")
            return np.exp(Bx)

        def f(x):
            return A @ _exp_Bx(x) - b

        def jacobian(x):
            # chain rule: d/dx A exp(Bx) = A diag(exp(Bx)) B
            return (A * _exp_Bx(x)) @ B

        return NonlinearSystem(
            n_vars=self.N,
            n_eqs=self.m,
            f=f,
            jacobian=jacobian,
            kind="exponential",
            metadata={
                "label": "exponential",
                "N": self.N,
                "m": self.m,
                "n": self.n,
                "s": self.s,
                "p": self.p,
                "seed": self.seed,
            },
        )

    def family(self) -> SolutionFamily:
        return SolutionFamily(
            x_bar=self.x_bar,
            basis=self.V2,
            n=self.n,
            sparse_solution=_sparsify_family(self.x_bar, self.V2),
        )


def _truncate_rank(M, r):
    """Recompose ``M`` from its SVD with all but the ``r`` largest singular values zeroed."""
    U, sv, Vt = np.linalg.svd(M, full_matrices=False)
    sv = sv.copy()
    sv[r:] = 0.0
    return (U * sv) @ Vt, Vt


def make_exponential(N: int, m: int, n: int, s: int, p: int, seed: int):
    """Random exponential system with rank(A) = m - p and a planted family.

    Returns ``(system, spec, family)``.
    """
    if not (n >= 1 and s >= 1):
        raise InvalidInputError(f"need n >= 1 and s >= 1, got n={n}, s={s}")
    if not n + s < m:
        raise InvalidInputError(f"need n+s < m, got n={n}, s={s}, m={m}")
    if not 0 <= p < m:
        raise InvalidInputError(f"need 0 <= p < m, got p={p}, m={m}")
    if not m < N:
        raise InvalidInputError(f"need m < N, got m={m}, N={N}")
    rng = np.random.default_rng(seed)
    k = n + s
    A, _ = _truncate_rank(_uniform(rng, m, N), m - p)
    B = _uniform(rng, N, N)
    lead, Vt = _truncate_rank(B[:, :k], n)
    B[:, :k] = lead
    V2 = Vt[n:].T.copy()
    x_bar = np.zeros(N)
    x_bar[:k] = _uniform(rng, k)
    b_vec = A @ np.exp(B @ x_bar)

    spec = ExponentialSpec(
        N=N, m=m, n=n, s=s, p=p, seed=seed, A=A, B=B, b_vec=b_vec,
        x_bar=x_bar, V2=V2,
    )
    return spec.system(), spec, spec.family()


# --------------------------------------------------------------------------
# diagnostics


def check_jacobian(system: NonlinearSystem, x, h: float = 1e-6) -> float:
    """Max relative error between central differences and ``system.jacobian``.

    Only entries whose analytic magnitude exceeds 1e-8 are compared.
    """
    if h <= 0:
        raise InvalidInputError("h must be positive")
    x = np.asarray(x, dtype=float)
    J = system.jacobian(x)
    fd = np.empty_like(J)
    for j in range(system.n_vars):
        e = np.zeros_like(x)
        e[j] = h
        fd[:, j] = (system.f(x + e) - system.f(x - e)) / (2 * h)
    mask = np.abs(J) > 1e-8
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(fd[mask] - J[mask]) / np.abs(J[mask])))


def verification_summary(spec, family: SolutionFamily, n_members: int = 10) -> dict:
    """Self-checks printed by ``greedygn gen``."""
    system = spec.system()
    rng = np.random.default_rng(spec.seed)
    s = family.basis.shape[1]
    residuals = [
        float(np.linalg.norm(system.f(family.member(rng.uniform(-1, 1, s)))))
        for _ in range(n_members)
    ]
    out = {
        "kind": system.kind,
        "family_residual_max": max(residuals),
        "sparse_solution_residual": float(
            np.linalg.norm(system.f(family.sparse_solution))
        ),
        "sparse_solution_nnz": int(np.count_nonzero(family.sparse_solution)),
        "jacobian_rank_at_xbar": numerical_rank(system.jacobian(spec.x_bar)),
    }
    if isinstance(spec, QuadraticSpec):
        out["orthogonality_error"] = float(
            np.max(np.abs(spec.Q.T @ spec.Q - np.eye(spec.Q.shape[0])))
        )
    else:
        out["rank_A"] = numerical_rank(spec.A)
        out["rank_B_lead"] = numerical_rank(spec.B[:, : spec.n + spec.s])
    return out


# --------------------------------------------------------------------------
# serialization

_ZIP_DATE = (1980, 1, 1, 0, 0, 0)

_QUADRATIC_ARRAYS = ("A", "H", "x_bar", "Q", "B", "C", "T", "S", "R")
_EXPONENTIAL_ARRAYS = ("A", "B", "b_vec", "x_bar", "V2")


def save_instance(path, spec) -> Path:
    """Write a generated instance to a deterministic ``.npz`` archive.

    Members: ``meta.json`` (format, version, kind, integer parameters) and one
    ``<name>.npy`` per array. ``numpy.load`` reads the arrays directly.
    """
    path = Path(path)
    if isinstance(spec, QuadraticSpec):
        kind, names = "quadratic", _QUADRATIC_ARRAYS
        params = {"N": spec.N, "m": spec.m, "n": spec.n, "s": spec.s}
    elif isinstance(spec, ExponentialSpec):
        kind, names = "exponential", _EXPONENTIAL_ARRAYS
        params = {"N": spec.N, "m": spec.m, "n": spec.n, "s": spec.s, "p": spec.p}
    elif spec == "small":
        kind, names, params = "small", (), {}
    else:
        raise InvalidInputError(f"cannot serialize {type(spec).__name__}")
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": kind,
        "params": params,
        "seed": getattr(spec, "seed", None),
    }
    try:
        with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
            _write_member(zf, "meta.json", json.dumps(meta, sort_keys=True).encode())
            for name in names:
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.ascontiguousarray(getattr(spec, name)))
                _write_member(zf, f"{name}.npy", buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write instance to {path}: {exc}") from exc
    return path


def _write_member(zf, name, data):
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def load_instance(path):
    """Inverse of :func:`save_instance`; returns ``(system, spec)``.

    ``spec`` is ``None`` for the small problem. Raises ``InvalidInputError``
    for anything that is not a well-formed instance file.
    """
    path = Path(path)
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
            if meta.get("format") != FORMAT_NAME:
                raise InvalidInputError(f"{path}: not a {FORMAT_NAME} file")
            if meta.get("version") != FORMAT_VERSION:
                raise InvalidInputError(
                    f"{path}: unsupported version {meta.get('version')}"
                )
            kind = meta["kind"]
            if kind == "small":
                return small_problem(), None
            names = _QUADRATIC_ARRAYS if kind == "quadratic" else _EXPONENTIAL_ARRAYS
            arrays = {
                name: np.lib.format.read_array(io.BytesIO(zf.read(f"{name}.npy")))
                for name in names
            }
    except (OSError, KeyError, ValueError, zipfile.BadZipFile) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"cannot read instance {path}: {exc}") from exc
    params = meta["params"]
    if kind == "quadratic":
        spec = QuadraticSpec(seed=meta["seed"], **params, **arrays)
    elif kind == "exponential":
        spec = ExponentialSpec(seed=meta["seed"], **params, **arrays)
    else:
        raise InvalidInputError(f"{path}: unknown problem kind {kind!r}")
    return spec.system(), spec
