"""Exact dynamic programming for linear-quadratic stages.

``lqbp`` solves one Bellman stage with linear dynamics and quadratic costs
in closed form, ``lbp`` is its degenerate linear-cost counterpart used by
the gradient oracle, ``check_subproblem`` validates a stage before solving
it, and ``dynprog`` chains the stage solutions into the global solution of
a convex linear-quadratic problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import autodiff
from .core import (
    AffinePolicy,
    LinearMap,
    QuadraticCostModel,
    QuadraticValueFunction,
    TrajectoryProblem,
    _sym,
)
from .errors import InfeasibleStageError, ParameterError, ShapeError

__all__ = [
    "LqStageProblem",
    "ValidityReport",
    "lqbp",
    "lbp",
    "check_subproblem",
    "dynprog",
]

# Round-off allowance for the descent check: a stage whose cost-to-go
# offset decrement is zero up to this relative level (a zero-slope stage)
# is still solvable and must not flip between valid and invalid on the
# sign of a rounding error.
DESCENT_STRICTNESS = 1e-14


@dataclass(frozen=True)
class LqStageProblem:
    """One Bellman stage: linear step, quadratic stage cost, next cost-to-go."""

    lin: LinearMap
    cost: QuadraticCostModel
    next_value: QuadraticValueFunction
    t: int | None = None

    def __post_init__(self):
        if self.cost.n_x != self.lin.n_x or self.cost.n_u != self.lin.n_u:
            raise ShapeError("stage cost dimensions do not match the linear map")
        if self.next_value.j.size != self.lin.n_x:
            raise ShapeError("next cost-to-go dimension does not match the linear map")

    def control_hessian(self) -> np.ndarray:
        """M = Q + B' J_next B, the Schur block the stage inverts."""
        B = self.lin.B
        return _sym(self.cost.Q + B.T @ self.next_value.J @ B)

    def control_slope(self) -> np.ndarray:
        """m = q + B' j_next."""
        return self.cost.q + self.lin.B.T @ self.next_value.j


@dataclass(frozen=True)
class ValidityReport:
    """Outcome of a stage check.

    In strong-convexity mode the witness is the minimum eigenvalue of the
    control Hessian; in descent mode it is the cost-to-go offset decrement
    (NaN when the factorization itself failed).
    """

    valid: bool
    mode: str
    witness: float


def _cho_factor(M: np.ndarray):
    return scipy.linalg.cho_factor(M, lower=True, check_finite=False)


def check_subproblem(stage: LqStageProblem, mode: str = "descent") -> ValidityReport:
    """Check that a stage is solvable before running ``lqbp`` on it.

    Strong-convexity mode tests the minimum eigenvalue of the control
    Hessian.  Descent mode is the cheap check the solver loops branch on:
    it factors the control Hessian and computes the cost-to-go offset
    decrement, rejecting the stage when the factorization fails or the
    decrement comes out positive beyond round-off.  A zero-slope stage
    (decrement zero, e.g. the last step of a problem started at a rest
    state) is solvable and passes; the overall descent test is the sign of
    the swept cost-to-go at time 0, which the caller owns.
    """
    if mode not in ("strong-convexity", "descent"):
        raise ParameterError(f"unknown check mode {mode!r}")
    M = stage.control_hessian()
    if mode == "strong-convexity":
        eig_min = float(np.linalg.eigvalsh(M)[0])
        return ValidityReport(eig_min > 0.0, mode, eig_min)
    try:
        factor = _cho_factor(M)
    except scipy.linalg.LinAlgError:
        return ValidityReport(False, mode, float("nan"))
    m = stage.control_slope()
    decrement = -0.5 * float(m @ scipy.linalg.cho_solve(factor, m, check_finite=False))
    threshold = DESCENT_STRICTNESS * (1.0 + abs(stage.next_value.j0))
    return ValidityReport(decrement < threshold, mode, decrement)


def lqbp(stage: LqStageProblem) -> tuple[QuadraticValueFunction, AffinePolicy]:
    """Closed-form solution of one linear-quadratic Bellman stage.

    Returns the cost-to-go at time t and the minimizing affine policy.
    The control Hessian must be positive definite; a failed factorization
    raises :class:`InfeasibleStageError` so solver loops can raise their
    regularization instead of falling back to a pseudo-inverse.
    """
    A, B = stage.lin.A, stage.lin.B
    cost, nxt = stage.cost, stage.next_value
    M = stage.control_hessian()
    try:
        factor = _cho_factor(M)
    except scipy.linalg.LinAlgError as err:
        raise InfeasibleStageError(stage.t) from err
    m = stage.control_slope()
    # Cross term between state and control of the stage-plus-to-go quadratic.
    N = cost.R + A.T @ nxt.J @ B  # (n_x, n_u)
    Minv_NT = scipy.linalg.cho_solve(factor, np.ascontiguousarray(N.T), check_finite=False)
    Minv_m = scipy.linalg.cho_solve(factor, m, check_finite=False)
    K = -Minv_NT
    k = -Minv_m
    J_t = _sym(cost.H + A.T @ nxt.J @ A - N @ Minv_NT)
    j_t = cost.p + A.T @ nxt.j - N @ Minv_m
    j0_t = nxt.j0 - 0.5 * float(m @ Minv_m)
    value = QuadraticValueFunction(J_t, j_t, j0_t)
    return value, AffinePolicy(K, k)


def lbp(
    lin: LinearMap,
    p: np.ndarray,
    q: np.ndarray,
    next_value: QuadraticValueFunction,
    nu: float,
) -> tuple[QuadraticValueFunction, AffinePolicy]:
    """Bellman stage with linear dynamics and linear costs ridge-regularized by nu.

    The cost-to-go stays affine and the policy is a constant offset; this
    is the stage operation behind gradient back-propagation.
    """
    if nu <= 0.0:
        raise ParameterError(f"lbp requires nu > 0, got {nu}")
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    g = q + lin.B.T @ next_value.j
    j_t = p + lin.A.T @ next_value.j
    j0_t = next_value.j0 - float(g @ g) / (2.0 * nu)
    policy = AffinePolicy(np.zeros((lin.n_u, lin.n_x)), -g / nu)
    return QuadraticValueFunction.affine(j_t, j0_t), policy


def dynprog(problem: TrajectoryProblem) -> np.ndarray:
    """Globally optimal controls for a convex linear-quadratic problem.

    The caller guarantees linear dynamics and convex quadratic costs with
    strongly convex control blocks; the stage data is then recovered
    exactly by differentiating the callables once at the origin.  Returns
    the controls as an array of shape (horizon, n_u).
    """
    tau, n_x, n_u = problem.horizon, problem.n_x, problem.n_u
    zx, zu = np.zeros(n_x), np.zeros(n_u)
    stages = []
    for t in range(tau):
        f, h = problem.dynamics[t], problem.running_costs[t]
        joint_f = lambda z, f=f: f(z[:n_x], z[n_x:])
        joint_h = lambda z, h=h: h(z[:n_x], z[n_x:])
        jac = autodiff.jacobian(joint_f, np.concatenate([zx, zu]))
        _, grad, hess = autodiff.value_gradient_hessian(joint_h, np.concatenate([zx, zu]))
        lin = LinearMap(jac[:, :n_x], jac[:, n_x:])
        cost = QuadraticCostModel(
            hess[:n_x, :n_x], hess[n_x:, n_x:], hess[:n_x, n_x:], grad[:n_x], grad[n_x:]
        )
        stages.append((lin, cost))
    _, fgrad, fhess = autodiff.value_gradient_hessian(problem.final_cost, zx)
    value = QuadraticValueFunction(fhess, fgrad)
    policies = [None] * tau
    for t in range(tau - 1, -1, -1):
        lin, cost = stages[t]
        value, policies[t] = lqbp(LqStageProblem(lin, cost, value, t=t))
    controls = np.zeros((tau, n_u))
    x = problem.x0.copy()
    for t in range(tau):
        controls[t] = policies[t](x)
        x = np.asarray(problem.dynamics[t](x, controls[t]), dtype=float).ravel()
    return controls
