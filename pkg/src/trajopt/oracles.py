"""Forward pass, backward passes and roll-outs for the five solver oracles.

Each oracle evaluation is one forward pass recording expansions of the
dynamics and costs along the visited trajectory, one backward Bellman
sweep producing affine policies and the cost-to-go at time 0, and one
roll-out of the policies along either the linearized step maps (gradient,
Gauss-Newton, Newton) or the original-dynamics increment maps (the two
DDP variants).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff
from .core import (
    AffinePolicy,
    LinearMap,
    QuadraticCostModel,
    QuadraticValueFunction,
    TrajectoryProblem,
    finite_difference_dynamic,
)
from .errors import DivergenceError, InfeasibleStageError, ParameterError
from .lqsolve import LqStageProblem, check_subproblem, lbp, lqbp

__all__ = [
    "ORACLE_KINDS",
    "ExpansionBundle",
    "OracleDirection",
    "forward",
    "objective_value",
    "backward_gd",
    "backward_gn",
    "backward_ne",
    "backward_ddp_q",
    "bundle_gradient",
    "rollout",
    "oracle",
]

ORACLE_KINDS = ("gd", "gn", "ne", "ddp-lq", "ddp-q")

# Forward-pass orders (dynamics, costs) per oracle kind.
ORACLE_ORDERS = {
    "gd": (1, 1),
    "gn": (1, 2),
    "ne": (2, 2),
    "ddp-lq": (1, 2),
    "ddp-q": (2, 2),
}

# Which backward pass each oracle runs and whether its roll-out follows the
# original dynamics instead of the linearized ones.
ORACLE_BACKWARD = {"gd": "gd", "gn": "gn", "ne": "ne", "ddp-lq": "gn", "ddp-q": "ddp-q"}
ORACLE_ROLLS_ORIGINAL = {"gd": False, "gn": False, "ne": False, "ddp-lq": True, "ddp-q": True}


@dataclass(frozen=True)
class ExpansionBundle:
    """Per-step derivative information recorded by one forward pass.

    Orders 0/1/2 control what is stored: nothing beyond the trajectory and
    cost, first derivatives, or second derivatives.  For order-2 dynamics
    the bundle keeps re-differentiation handles instead of full
    second-derivative tensors; the backward sweep contracts them against
    whatever vector it needs, which keeps the storage of a Newton or DDP
    pass at the Gauss-Newton level.
    """

    problem: TrajectoryProblem
    u: np.ndarray
    xs: tuple
    step_costs: tuple
    cost: float
    o_f: int
    o_h: int
    lin: tuple | None = None
    cost_p: tuple | None = None
    cost_q: tuple | None = None
    cost_quads: tuple | None = None
    final_slope: np.ndarray | None = None
    final_quad: np.ndarray | None = None
    f_handles: tuple | None = None

    @property
    def horizon(self) -> int:
        return self.problem.horizon

    def linear_steps(self) -> tuple:
        if self.lin is None:
            raise ParameterError("bundle was built with o_f=0; no linearized steps stored")
        return self.lin

    def finite_difference_steps(self) -> tuple:
        """Increment maps of the original dynamics around the visited points."""
        problem, u, xs = self.problem, self.u, self.xs

        def step(t):
            f, x_t, u_t = problem.dynamics[t], xs[t], u[t]
            return lambda y, v: finite_difference_dynamic(f, x_t, u_t, y, v, t=t)

        return tuple(step(t) for t in range(self.horizon))

    def cost_slope_norm(self) -> float:
        """Euclidean norm of all stage-cost gradients along the trajectory."""
        if self.cost_p is None:
            raise ParameterError("bundle was built with o_h=0; no cost slopes stored")
        total = float(self.final_slope @ self.final_slope)
        for p, q in zip(self.cost_p, self.cost_q):
            total += float(p @ p) + float(q @ q)
        return math.sqrt(total)


@dataclass(frozen=True)
class OracleDirection:
    """Result of one oracle evaluation.

    ``feasible`` is False when a stage check failed during the backward
    sweep; the cost-to-go value then reads as +inf so line-search loops can
    branch on it without exception handling.
    """

    policies: tuple
    c0: QuadraticValueFunction | None
    feasible: bool
    direction: np.ndarray | None = None

    @property
    def c0_zero(self) -> float:
        if not self.feasible or self.c0 is None:
            return math.inf
        return self.c0.j0


def _scalars(vec: np.ndarray) -> list:
    return [float(v) for v in vec]


def objective_value(problem: TrajectoryProblem, u: np.ndarray) -> float:
    """Total cost of rolling controls u through the problem (order-0 forward)."""
    return forward(problem, u, o_f=0, o_h=0).cost


def forward(problem: TrajectoryProblem, u, o_f: int = 1, o_h: int = 2) -> ExpansionBundle:
    """Roll the trajectory for controls ``u`` and record expansions.

    ``u`` has shape (horizon, n_u).  Raises :class:`DivergenceError` when a
    state or cost turns non-finite, carrying the offending step.
    """
    autodiff.DerivativeRequest(o_f)
    autodiff.DerivativeRequest(o_h)
    tau, n_x, n_u = problem.horizon, problem.n_x, problem.n_u
    u = np.asarray(u, dtype=float).reshape(tau, n_u)

    xs = [problem.x0.copy()]
    step_costs = []
    lin = [] if o_f >= 1 else None
    cost_p = [] if o_h >= 1 else None
    cost_q = [] if o_h >= 1 else None
    cost_quads = [] if o_h == 2 else None
    handles = [] if o_f == 2 else None

    total = 0.0
    x = xs[0]
    for t in range(tau):
        f, h = problem.dynamics[t], problem.running_costs[t]
        xu = np.concatenate([x, u[t]])
        x_list, u_list = _scalars(x), _scalars(u[t])
        try:
            if o_h == 2:
                joint_h = lambda z, h=h: h(z[:n_x], z[n_x:])
                h_val, grad, hess = autodiff.value_gradient_hessian(joint_h, xu)
                cost_quads.append(
                    QuadraticCostModel(
                        hess[:n_x, :n_x], hess[n_x:, n_x:], hess[:n_x, n_x:],
                        grad[:n_x], grad[n_x:],
                    )
                )
                cost_p.append(grad[:n_x])
                cost_q.append(grad[n_x:])
            elif o_h == 1:
                joint_h = lambda z, h=h: h(z[:n_x], z[n_x:])
                jac = autodiff.jacobian(joint_h, xu)[0]
                h_val = float(h(x_list, u_list))
                cost_p.append(jac[:n_x])
                cost_q.append(jac[n_x:])
            else:
                h_val = float(h(x_list, u_list))

            if o_f >= 1:
                joint_f = lambda z, f=f: f(z[:n_x], z[n_x:])
                jac_f = autodiff.jacobian(joint_f, xu)
                lin.append(LinearMap(jac_f[:, :n_x], jac_f[:, n_x:]))
                if o_f == 2:
                    handles.append(
                        lambda lam, f=joint_f, z=xu: autodiff.lambda_hessian(f, z, lam)
                    )
            x_next = np.asarray(f(x_list, u_list), dtype=float).ravel()
        except ArithmeticError as err:
            raise DivergenceError(t, f"model evaluation failed at t={t}: {err}") from err
        if not (math.isfinite(h_val) and np.all(np.isfinite(x_next))):
            raise DivergenceError(t)
        step_costs.append(h_val)
        total += h_val
        xs.append(x_next)
        x = x_next

    final_slope = final_quad = None
    try:
        if o_h == 2:
            h_val, final_slope, final_quad = autodiff.value_gradient_hessian(
                problem.final_cost, x
            )
        elif o_h == 1:
            final_slope = autodiff.gradient(problem.final_cost, x)
            h_val = float(problem.final_cost(_scalars(x)))
        else:
            h_val = float(problem.final_cost(_scalars(x)))
    except ArithmeticError as err:
        raise DivergenceError(tau, f"final cost evaluation failed: {err}") from err
    if not math.isfinite(h_val):
        raise DivergenceError(tau)
    total += h_val

    return ExpansionBundle(
        problem=problem,
        u=u,
        xs=tuple(xs),
        step_costs=tuple(step_costs) + (h_val,),
        cost=total,
        o_f=o_f,
        o_h=o_h,
        lin=tuple(lin) if lin is not None else None,
        cost_p=tuple(cost_p) if cost_p is not None else None,
        cost_q=tuple(cost_q) if cost_q is not None else None,
        cost_quads=tuple(cost_quads) if cost_quads is not None else None,
        final_slope=final_slope,
        final_quad=final_quad,
        f_handles=tuple(handles) if handles is not None else None,
    )


def _infeasible(bundle: ExpansionBundle) -> OracleDirection:
    zero = AffinePolicy.zero(bundle.problem.n_u, bundle.problem.n_x)
    return OracleDirection(
        policies=tuple(zero for _ in range(bundle.horizon)), c0=None, feasible=False
    )


def backward_gd(bundle: ExpansionBundle, nu: float) -> OracleDirection:
    """Backward sweep with linear models: gradient back-propagation.

    The policies are constant offsets -(q_t + B_t' j_{t+1}) / nu and the
    affine cost-to-go at 0 equals -|grad J|^2 / (2 nu).
    """
    if nu <= 0.0:
        raise ParameterError(f"gradient backward pass requires nu > 0, got {nu}")
    if bundle.o_h < 1 or bundle.o_f < 1:
        raise ParameterError("gradient backward pass needs order-1 information")
    value = QuadraticValueFunction.affine(bundle.final_slope)
    policies = [None] * bundle.horizon
    for t in range(bundle.horizon - 1, -1, -1):
        value, policies[t] = lbp(
            bundle.lin[t], bundle.cost_p[t], bundle.cost_q[t], value, nu
        )
    return OracleDirection(tuple(policies), value, True)


def _backward_quadratic(
    bundle: ExpansionBundle,
    nu: float,
    contraction: str | None,
    check_mode: str,
) -> OracleDirection:
    """Shared Bellman sweep for the GN / Newton / DDP-Q backward passes.

    ``contraction`` selects the vector the dynamics curvature is folded
    against: None (no curvature, Gauss-Newton), "adjoint" (Newton) or
    "value-slope" (DDP with quadratic models).
    """
    if nu < 0.0:
        raise ParameterError(f"regularization must be >= 0, got {nu}")
    if bundle.o_h != 2:
        raise ParameterError("quadratic backward passes need order-2 cost information")
    if contraction is not None and bundle.f_handles is None:
        raise ParameterError("curvature contraction needs order-2 dynamics information")
    tau, n_x, n_u = bundle.horizon, bundle.problem.n_x, bundle.problem.n_u
    ridge = nu * np.eye(n_u)

    value = QuadraticValueFunction(bundle.final_quad, bundle.final_slope)
    lam = bundle.final_slope
    policies = [None] * tau
    for t in range(tau - 1, -1, -1):
        quad = bundle.cost_quads[t]
        H, Q, R = quad.H, quad.Q + ridge, quad.R
        if contraction is not None:
            vec = lam if contraction == "adjoint" else value.j
            w = bundle.f_handles[t](vec)
            H = H + w[:n_x, :n_x]
            Q = Q + w[n_x:, n_x:]
            R = R + w[:n_x, n_x:]
        if contraction == "adjoint":
            lam = bundle.cost_p[t] + bundle.lin[t].A.T @ lam
        stage = LqStageProblem(
            bundle.lin[t],
            QuadraticCostModel(H, Q, R, quad.p, quad.q),
            value,
            t=t,
        )
        if not check_subproblem(stage, check_mode).valid:
            return _infeasible(bundle)
        try:
            value, policies[t] = lqbp(stage)
        except InfeasibleStageError:
            return _infeasible(bundle)
    return OracleDirection(tuple(policies), value, True)


def backward_gn(bundle: ExpansionBundle, nu: float = 0.0, check_mode: str = "descent") -> OracleDirection:
    """Backward sweep on linearized dynamics and quadratic costs (ILQR step)."""
    return _backward_quadratic(bundle, nu, None, check_mode)


def backward_ne(bundle: ExpansionBundle, nu: float = 0.0, check_mode: str = "descent") -> OracleDirection:
    """Backward sweep with dynamics curvature folded against the adjoint states.

    The adjoints follow lam_t = grad_x h_t + A_t' lam_{t+1} from the final
    cost slope, and each stage cost gains the curvature of f_t contracted
    against lam_{t+1}, making the swept subproblem the exact second-order
    model of the objective.
    """
    return _backward_quadratic(bundle, nu, "adjoint", check_mode)


def backward_ddp_q(bundle: ExpansionBundle, nu: float = 0.0, check_mode: str = "descent") -> OracleDirection:
    """Backward sweep with dynamics curvature folded against the cost-to-go slope.

    Identical to the Newton sweep except the contraction vector is the
    slope of the running cost-to-go at the origin instead of the adjoint
    state.
    """
    return _backward_quadratic(bundle, nu, "value-slope", check_mode)


_BACKWARD_FNS = {"gd": backward_gd, "gn": backward_gn, "ne": backward_ne, "ddp-q": backward_ddp_q}


def run_backward(bundle: ExpansionBundle, kind: str, nu: float, check_mode: str = "descent") -> OracleDirection:
    """Dispatch to the backward pass an oracle kind uses."""
    name = ORACLE_BACKWARD[kind]
    if name == "gd":
        return backward_gd(bundle, nu)
    return _BACKWARD_FNS[name](bundle, nu, check_mode)


def bundle_gradient(bundle: ExpansionBundle) -> np.ndarray:
    """Objective gradient (horizon, n_u) recovered from order-1 bundle data."""
    if bundle.o_h < 1 or bundle.o_f < 1:
        raise ParameterError("gradient recovery needs order-1 information")
    tau = bundle.horizon
    g = np.zeros((tau, bundle.problem.n_u))
    j = bundle.final_slope
    for t in range(tau - 1, -1, -1):
        g[t] = bundle.cost_q[t] + bundle.lin[t].B.T @ j
        j = bundle.cost_p[t] + bundle.lin[t].A.T @ j
    return g


def rollout(y0, policies, step_maps) -> np.ndarray:
    """Apply policies along step maps; returns the controls (horizon, n_u).

    Step maps are either :class:`LinearMap` objects or callables
    ``(y, v) -> y_next``.  A non-finite state raises
    :class:`DivergenceError` with the offending step.
    """
    y = np.asarray(y0, dtype=float).ravel()
    controls = []
    for t, (policy, step) in enumerate(zip(policies, step_maps)):
        v = policy(y)
        controls.append(v)
        y = step.apply(y, v) if isinstance(step, LinearMap) else np.asarray(step(y, v), dtype=float).ravel()
        if not np.all(np.isfinite(y)):
            raise DivergenceError(t)
    return np.array(controls)


def oracle(
    problem: TrajectoryProblem,
    u,
    kind: str,
    nu: float = 0.0,
    check_mode: str = "descent",
    gd_rollout: bool = False,
) -> OracleDirection:
    """One oracle evaluation: forward pass, backward pass and roll-out.

    The gradient oracle's constant policies make its roll-out a no-op, so
    by default it returns the stacked offsets directly; ``gd_rollout``
    forces the roll-out for equivalence testing.
    """
    if kind not in ORACLE_KINDS:
        raise ParameterError(f"unknown oracle kind {kind!r}; expected one of {ORACLE_KINDS}")
    o_f, o_h = ORACLE_ORDERS[kind]
    bundle = forward(problem, u, o_f=o_f, o_h=o_h)
    result = run_backward(bundle, kind, nu)
    if not result.feasible:
        return result
    if kind == "gd" and not gd_rollout:
        direction = np.array([p.k for p in result.policies])
    else:
        maps = (
            bundle.finite_difference_steps()
            if ORACLE_ROLLS_ORIGINAL[kind]
            else bundle.linear_steps()
        )
        direction = rollout(np.zeros(problem.n_x), result.policies, maps)
    return replace(result, direction=direction)
