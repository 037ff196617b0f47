"""Problem statement and the dense value types every other module consumes.

States and controls are plain 1-D float64 numpy arrays.  Matrices follow
the Jacobian convention throughout: for a dynamic f, ``A = d f / d x`` has
shape (n_x, n_x) and ``B = d f / d u`` has shape (n_x, n_u), so a linear
step reads ``y_next = A @ y + B @ v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericError, ShapeError

__all__ = [
    "StateVec",
    "CtrlVec",
    "LinearMap",
    "QuadraticCostModel",
    "QuadraticValueFunction",
    "AffinePolicy",
    "DynTensor",
    "TrajectoryProblem",
    "evaluate_quadratic",
    "finite_difference_dynamic",
    "linear_dynamics",
    "quadratic_cost",
    "quadratic_state_cost",
]

StateVec = np.ndarray
CtrlVec = np.ndarray


def _vector(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float).ravel()
    if not np.all(np.isfinite(a)):
        raise ShapeError(f"{name} must be finite")
    return a


def _matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be a matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ShapeError(f"{name} must be finite")
    return a


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class LinearMap:
    """First-order model of one dynamic: y_next = A @ y + B @ v."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _matrix(self.A, "A"))
        object.__setattr__(self, "B", _matrix(self.B, "B"))
        if self.A.shape[0] != self.A.shape[1]:
            raise ShapeError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != self.A.shape[0]:
            raise ShapeError(f"A and B row counts differ: {self.A.shape} vs {self.B.shape}")

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    def apply(self, y: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.A @ y + self.B @ v


@dataclass(frozen=True)
class QuadraticCostModel:
    """Quadratic stage cost 0.5 y'Hy + 0.5 v'Qv + y'Rv + p'y + q'v.

    H and Q are symmetrized on construction to absorb round-off from the
    derivative engine.
    """

    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        H = _sym(_matrix(self.H, "H"))
        Q = _sym(_matrix(self.Q, "Q"))
        R = _matrix(self.R, "R")
        p = _vector(self.p, "p")
        q = _vector(self.q, "q")
        n_x, n_u = p.size, q.size
        if H.shape != (n_x, n_x) or Q.shape != (n_u, n_u) or R.shape != (n_x, n_u):
            raise ShapeError(
                f"inconsistent quadratic model shapes: H{H.shape} Q{Q.shape} R{R.shape} "
                f"p({n_x},) q({n_u},)"
            )
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def n_x(self) -> int:
        return self.p.size

    @property
    def n_u(self) -> int:
        return self.q.size


def evaluate_quadratic(model: QuadraticCostModel, y, v) -> float:
    """Evaluate the quadratic stage model at (y, v)."""
    y = np.asarray(y, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if y.size != model.n_x or v.size != model.n_u:
        raise ShapeError(
            f"argument sizes ({y.size}, {v.size}) do not match model "
            f"({model.n_x}, {model.n_u})"
        )
    return float(
        0.5 * y @ model.H @ y
        + 0.5 * v @ model.Q @ v
        + y @ model.R @ v
        + model.p @ y
        + model.q @ v
    )


@dataclass(frozen=True)
class QuadraticValueFunction:
    """Cost-to-go c(y) = 0.5 y'Jy + j'y + j0; J is symmetrized on construction."""

    J: np.ndarray
    j: np.ndarray
    j0: float = 0.0

    def __post_init__(self):
        J = _sym(_matrix(self.J, "J"))
        j = _vector(self.j, "j")
        if J.shape != (j.size, j.size):
            raise ShapeError(f"J{J.shape} does not match j({j.size},)")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "j0", float(self.j0))

    def __call__(self, y) -> float:
        y = np.asarray(y, dtype=float).ravel()
        return float(0.5 * y @ self.J @ y + self.j @ y + self.j0)

    @classmethod
    def affine(cls, j, j0: float = 0.0) -> "QuadraticValueFunction":
        j = _vector(j, "j")
        return cls(np.zeros((j.size, j.size)), j, j0)


@dataclass(frozen=True)
class AffinePolicy:
    """State-feedback policy v = K @ y + k."""

    K: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        K = _matrix(self.K, "K")
        k = _vector(self.k, "k")
        if K.shape[0] != k.size:
            raise ShapeError(f"K{K.shape} does not match k({k.size},)")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "k", k)

    def __call__(self, y) -> np.ndarray:
        return self.K @ np.asarray(y, dtype=float).ravel() + self.k

    def scaled(self, gamma: float) -> "AffinePolicy":
        """Offset-scaled policy y -> gamma*k + K@y used by stepsize searches."""
        return AffinePolicy(self.K, gamma * self.k)

    @classmethod
    def zero(cls, n_u: int, n_x: int) -> "AffinePolicy":
        return cls(np.zeros((n_u, n_x)), np.zeros(n_u))


@dataclass(frozen=True)
class DynTensor:
    """Second-derivative blocks of one dynamic, per output coordinate.

    ``xx[i]``, ``xu[i]`` and ``uu[i]`` are the second-derivative blocks of
    output i.  Materialized only by the dense test oracles; solver backward
    passes obtain the lambda-contraction directly from the derivative
    engine.
    """

    xx: np.ndarray  # (n_out, n_x, n_x)
    xu: np.ndarray  # (n_out, n_x, n_u)
    uu: np.ndarray  # (n_out, n_u, n_u)

    def __post_init__(self):
        xx = np.asarray(self.xx, dtype=float)
        xu = np.asarray(self.xu, dtype=float)
        uu = np.asarray(self.uu, dtype=float)
        if xx.ndim != 3 or xu.ndim != 3 or uu.ndim != 3:
            raise ShapeError("DynTensor blocks must be 3-D (n_out, :, :)")
        if not (xx.shape[0] == xu.shape[0] == uu.shape[0]):
            raise ShapeError("DynTensor blocks disagree on the output dimension")
        object.__setattr__(self, "xx", 0.5 * (xx + xx.transpose(0, 2, 1)))
        object.__setattr__(self, "xu", xu)
        object.__setattr__(self, "uu", 0.5 * (uu + uu.transpose(0, 2, 1)))

    @property
    def n_x(self) -> int:
        return self.xx.shape[1]

    @property
    def n_u(self) -> int:
        return self.uu.shape[1]

    def contract(self, lam) -> np.ndarray:
        """Contraction against a vector: one symmetric (n_x+n_u) square matrix."""
        lam = _vector(lam, "lam")
        if lam.size != self.xx.shape[0]:
            raise ShapeError(f"lam has size {lam.size}, expected {self.xx.shape[0]}")
        wxx = np.einsum("i,ijk->jk", lam, self.xx)
        wxu = np.einsum("i,ijk->jk", lam, self.xu)
        wuu = np.einsum("i,ijk->jk", lam, self.uu)
        top = np.hstack([wxx, wxu])
        bot = np.hstack([wxu.T, wuu])
        return _sym(np.vstack([top, bot]))


@dataclass(frozen=True)
class TrajectoryProblem:
    """Finite-horizon discrete-time control problem.

    ``dynamics[t]`` maps (x, u) to the next state as a sequence of n_x
    scalars, ``running_costs[t]`` maps (x, u) to a scalar and
    ``final_cost`` maps x to a scalar.  All callables must be pure and
    built from the primitives of :mod:`trajopt.autodiff` so they can be
    differentiated.
    """

    dynamics: tuple
    running_costs: tuple
    final_cost: Callable
    x0: np.ndarray
    n_x: int
    n_u: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dynamics", tuple(self.dynamics))
        object.__setattr__(self, "running_costs", tuple(self.running_costs))
        object.__setattr__(self, "x0", _vector(self.x0, "x0"))
        if len(self.dynamics) < 1:
            raise ShapeError("horizon must be at least 1")
        if len(self.running_costs) != len(self.dynamics):
            raise ShapeError(
                f"{len(self.running_costs)} running costs for {len(self.dynamics)} dynamics"
            )
        if self.x0.size != self.n_x:
            raise ShapeError(f"x0 has size {self.x0.size}, expected n_x={self.n_x}")

    @property
    def horizon(self) -> int:
        return len(self.dynamics)


def finite_difference_dynamic(f, x, u, y, v, t: int | None = None) -> np.ndarray:
    """Increment map of a dynamic around (x, u): f(x+y, u+v) - f(x, u).

    This is the step map DDP roll-outs follow.  ``t`` is only used to label
    the error when the dynamic returns a non-finite value.
    """
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    # plain-float inputs: models stay numpy-free and overflow to inf silently
    base = np.asarray(f(x.tolist(), u.tolist()), dtype=float).ravel()
    moved = np.asarray(f((x + y).tolist(), (u + v).tolist()), dtype=float).ravel()
    out = moved - base
    if not np.all(np.isfinite(out)):
        where = "" if t is None else f" at t={t}"
        raise NumericError(f"dynamic returned a non-finite increment{where}")
    return out


# -- model-building helpers --------------------------------------------------
#
# The returned callables do their arithmetic entry by entry so they accept
# hyper-dual scalars as well as floats.


def linear_dynamics(A, B):
    """Dynamic f(x, u) = A @ x + B @ u as a generic-scalar callable."""
    A = _matrix(A, "A").tolist()
    B = _matrix(B, "B").tolist()

    def f(x, u):
        out = []
        for ai, bi in zip(A, B):
            acc = 0.0
            for a, xj in zip(ai, x):
                acc = acc + a * xj
            for b, uk in zip(bi, u):
                acc = acc + b * uk
            out.append(acc)
        return out

    return f


def quadratic_cost(H, Q, R, p, q):
    """Stage cost 0.5 x'Hx + 0.5 u'Qu + x'Ru + p'x + q'u as a generic callable."""
    model = QuadraticCostModel(H, Q, R, p, q)
    Hl, Ql, Rl = model.H.tolist(), model.Q.tolist(), model.R.tolist()
    pl, ql = model.p.tolist(), model.q.tolist()

    def h(x, u):
        acc = 0.0
        for i, xi in enumerate(x):
            acc = acc + pl[i] * xi
            for jj, xj in enumerate(x):
                acc = acc + 0.5 * Hl[i][jj] * xi * xj
            for kk, uk in enumerate(u):
                acc = acc + Rl[i][kk] * xi * uk
        for k, uk in enumerate(u):
            acc = acc + ql[k] * uk
            for kk, ul in enumerate(u):
                acc = acc + 0.5 * Ql[k][kk] * uk * ul
        return acc

    return h


def quadratic_state_cost(H, p):
    """Final cost 0.5 x'Hx + p'x as a generic-scalar callable."""
    H = _sym(_matrix(H, "H")).tolist()
    p = _vector(p, "p").tolist()

    def h(x):
        acc = 0.0
        for i, xi in enumerate(x):
            acc = acc + p[i] * xi
            for jj, xj in enumerate(x):
                acc = acc + 0.5 * H[i][jj] * xi * xj
        return acc

    return h
