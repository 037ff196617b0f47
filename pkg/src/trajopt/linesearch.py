"""Stepsize selection, the full solver iteration loop, and the stationarity check.

Two step rules are provided.  The directional rule fixes the policies from
one backward pass, scales their offsets by a stepsize gamma and accepts the
first gamma whose objective decrease beats gamma times the model decrease
(a sufficient-decrease test starting at gamma = 1).  The regularized rule
reruns the backward pass per trial with ridge 1/gamma and accepts when the
objective decrease beats the model value itself; its stepsize warm-starts
across iterations and is by default measured in units of the cost-slope
norm, which keeps acceptable raw stepsizes bounded as the iterates
approach stationarity.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import TrajectoryProblem
from .errors import DivergenceError, NumericError, ParameterError, StallError
from .oracles import (
    ORACLE_KINDS,
    ORACLE_ORDERS,
    ORACLE_ROLLS_ORIGINAL,
    ExpansionBundle,
    bundle_gradient,
    forward,
    objective_value,
    rollout,
    run_backward,
)

__all__ = [
    "LineSearchConfig",
    "StopCriteria",
    "SolveTrace",
    "TraceRow",
    "directional_search",
    "regularized_search",
    "solve",
    "stationarity_residual",
]

# Acceptance comparisons carry a relative tie tolerance so that exact-model
# steps (where decrease and model value agree to round-off) are not
# rejected on the last floating-point bit.  The value matches the relative
# cost-decrease resolution of the stopping rule.
ACCEPT_TIE_RTOL = 1e-12

# A run that stops on small cost decrease or a stalled search is reported
# as converged only if the stationarity residual is below this relative
# level, otherwise as stalled.
CONVERGED_RESIDUAL_RTOL = 1e-6

# Regularization escalation gives up beyond this value; the iterate is then
# classified by its stationarity residual.
NU_MAX = 1e40

# Fixed regularization for the gradient oracle under the directional rule,
# making the search direction exactly the negative gradient.
GD_DIRECTIONAL_NU = 1.0


@dataclass(frozen=True)
class LineSearchConfig:
    """Step-rule selection and its constants."""

    rule: str = "directional"
    rho_dec: float = 0.5
    rho_inc: float = 10.0
    gamma_min: float = 1e-12
    nu_init: float = 1e-6
    gradient_scaled: bool = True

    def __post_init__(self):
        if self.rule not in ("directional", "regularized"):
            raise ParameterError(f"unknown line-search rule {self.rule!r}")
        if not 0.0 < self.rho_dec < 1.0:
            raise ParameterError(f"rho_dec must be in (0, 1), got {self.rho_dec}")
        if self.rho_inc <= 1.0:
            raise ParameterError(f"rho_inc must be > 1, got {self.rho_inc}")
        if self.gamma_min <= 0.0 or self.nu_init <= 0.0:
            raise ParameterError("gamma_min and nu_init must be positive")


@dataclass(frozen=True)
class StopCriteria:
    """Iteration budget and termination tolerances."""

    max_iters: int = 100
    cost_rel_tol: float = 1e-12
    min_step: float = 1e-20

    def __post_init__(self):
        if self.max_iters < 0:
            raise ParameterError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.cost_rel_tol <= 0.0 or self.min_step <= 0.0:
            raise ParameterError("tolerances must be positive")


@dataclass(frozen=True)
class TraceRow:
    """State of the solve after ``iteration`` accepted steps."""

    iteration: int
    cost: float
    stepsize: float
    regularization: float
    model_decrease: float
    residual: float
    time_ms: float


@dataclass
class SolveTrace:
    """Per-iteration record of a solve, including the initial point as row 0."""

    rows: list = field(default_factory=list)
    status: str = "max-iters"

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.rows])

    @property
    def iterations(self) -> int:
        return len(self.rows) - 1


def _tie(j: float) -> float:
    return ACCEPT_TIE_RTOL * (1.0 + abs(j))


def _trial_value(problem: TrajectoryProblem, u) -> float:
    """Objective at a trial point; model failures read as +inf (rejection)."""
    try:
        return objective_value(problem, u)
    except (DivergenceError, NumericError):
        return math.inf


def directional_search(
    problem: TrajectoryProblem,
    u,
    policies,
    c0_zero: float,
    step_maps,
    cfg: LineSearchConfig,
    on_accept=None,
) -> tuple[np.ndarray, float]:
    """Backtracking on the scaled-offset policy family, starting at gamma = 1.

    Accepts the first gamma with J(u + v_gamma) <= J(u) + gamma * c0(0);
    on the linearized step maps v_gamma is exactly gamma times the unit
    roll-out.  Raises :class:`StallError` when gamma falls below the
    configured minimum, carrying the last candidate if it still decreased
    the objective.
    """
    if not c0_zero < 0.0:
        raise ParameterError(f"directional step needs a negative model value, got {c0_zero}")
    u = np.asarray(u, dtype=float)
    j_current = objective_value(problem, u)
    gamma = 1.0
    y0 = np.zeros(problem.n_x)
    last_candidate = None
    last_cost = math.inf
    while True:
        scaled = tuple(p.scaled(gamma) for p in policies)
        try:
            v = rollout(y0, scaled, step_maps)
        except (DivergenceError, NumericError):
            v = None
        if v is not None:
            candidate = u + v
            j_trial = _trial_value(problem, candidate)
            if j_trial - j_current <= gamma * c0_zero + _tie(j_current):
                if on_accept is not None:
                    on_accept(
                        gamma=gamma, c0=c0_zero, cost=j_current,
                        cost_next=j_trial, direction=v,
                    )
                return candidate, gamma
            if j_trial < last_cost:
                last_candidate, last_cost = candidate, j_trial
        gamma *= cfg.rho_dec
        if gamma < cfg.gamma_min:
            keep = last_candidate if last_cost < j_current else None
            raise StallError(gamma, keep, last_cost if keep is not None else None)


def regularized_search(
    problem: TrajectoryProblem,
    u,
    bundle: ExpansionBundle,
    backward_kind: str,
    roll_maps,
    cfg: LineSearchConfig,
    gamma_prev: float,
    check_mode: str = "descent",
    on_accept=None,
) -> tuple[np.ndarray, float]:
    """Step selection through the ridge: each trial reruns the backward pass.

    The trial stepsize starts at rho_inc times the previous accepted one
    (optionally divided by the cost-slope norm), the backward pass runs
    with ridge nu = 1/gamma, and the trial is accepted when the objective
    decrease is at least the swept model value c0(0).  Returns the
    accepted stepsize in unscaled units for warm-starting.
    """
    u = np.asarray(u, dtype=float)
    j_current = bundle.cost
    scale = bundle.cost_slope_norm() if cfg.gradient_scaled else 1.0
    if scale <= 0.0 or not math.isfinite(scale):
        scale = 1.0
    gamma = cfg.rho_inc * gamma_prev / scale
    y0 = np.zeros(problem.n_x)
    last_candidate = None
    last_cost = math.inf
    while True:
        result = run_backward(bundle, backward_kind, 1.0 / gamma, check_mode)
        if result.feasible and result.c0_zero < 0.0:
            try:
                v = rollout(y0, result.policies, roll_maps)
            except (DivergenceError, NumericError):
                v = None
            if v is not None:
                candidate = u + v
                j_trial = _trial_value(problem, candidate)
                if j_trial - j_current <= result.c0_zero + _tie(j_current):
                    if on_accept is not None:
                        on_accept(
                            gamma=gamma, nu=1.0 / gamma, c0=result.c0_zero,
                            cost=j_current, cost_next=j_trial, direction=v,
                        )
                    return candidate, gamma * scale
                if j_trial < last_cost:
                    last_candidate, last_cost = candidate, j_trial
        gamma *= cfg.rho_dec
        if gamma < cfg.gamma_min:
            keep = last_candidate if last_cost < j_current else None
            raise StallError(gamma, keep, last_cost if keep is not None else None)


def _escalate_directional(bundle: ExpansionBundle, kind: str, cfg: LineSearchConfig, check_mode: str):
    """Backward pass at nu = 0, escalating nu until a usable descent model.

    Returns (result, nu) or (None, nu) when escalation gave up, which
    happens at stationary points where no stage strictly decreases the
    cost-to-go.
    """
    nu = GD_DIRECTIONAL_NU if kind == "gd" else 0.0
    result = run_backward(bundle, kind, nu, check_mode)
    stationary = -1e-18 * (1.0 + abs(bundle.cost))
    while not result.feasible or not result.c0_zero < 0.0:
        if result.feasible and result.c0_zero >= stationary:
            return None, nu  # the model sees no decrease at any ridge
        nu = cfg.nu_init if nu == 0.0 else nu * cfg.rho_inc
        if kind == "gd" or nu > NU_MAX:
            return None, nu
        result = run_backward(bundle, kind, nu, check_mode)
    return result, nu


def _classify(residual: float, cost: float) -> str:
    if residual <= CONVERGED_RESIDUAL_RTOL * (1.0 + abs(cost)):
        return "converged"
    return "stalled"


def solve(
    problem: TrajectoryProblem,
    u0,
    kind: str,
    cfg: LineSearchConfig | None = None,
    stop: StopCriteria | None = None,
    check_mode: str = "descent",
    callback=None,
) -> tuple[np.ndarray, SolveTrace]:
    """Full iteration loop for one oracle kind under one step rule.

    Row 0 of the returned trace records the initial point; each further row
    one accepted step.  Costs are non-increasing across rows.  Divergence
    of an accepted iterate re-raises with the partial trace attached.
    """
    if kind not in ORACLE_KINDS:
        raise ParameterError(f"unknown oracle kind {kind!r}; expected one of {ORACLE_KINDS}")
    cfg = cfg or LineSearchConfig()
    stop = stop or StopCriteria()
    o_f, o_h = ORACLE_ORDERS[kind]
    rolls_original = ORACLE_ROLLS_ORIGINAL[kind]
    backward_kind = kind

    u = np.asarray(u0, dtype=float).reshape(problem.horizon, problem.n_u).copy()
    trace = SolveTrace()

    def _forward_timed(controls):
        t0 = time.perf_counter()
        b = forward(problem, controls, o_f=o_f, o_h=o_h)
        return b, (time.perf_counter() - t0)

    try:
        bundle, spent = _forward_timed(u)
    except DivergenceError as err:
        trace.status = "diverged"
        err.trace = trace
        raise
    j_current = bundle.cost
    residual = float(np.max(np.abs(bundle_gradient(bundle))))
    trace.rows.append(TraceRow(0, j_current, math.nan, math.nan, math.nan, residual, 0.0))
    cum_ms = 0.0
    carry = spent  # forward time attributed to the upcoming iteration
    gamma_prev = 1.0 / cfg.nu_init

    for k in range(1, stop.max_iters + 1):
        t0 = time.perf_counter()
        accepted = None
        if cfg.rule == "directional":
            result, nu = _escalate_directional(bundle, kind, cfg, check_mode)
            if result is None:
                trace.status = _classify(residual, j_current)
                break
            if kind == "gd":
                step_maps = bundle.linear_steps()  # constant policies: maps are inert
            elif rolls_original:
                step_maps = bundle.finite_difference_steps()
            else:
                step_maps = bundle.linear_steps()
            try:
                u_next, gamma = directional_search(
                    problem, u, result.policies, result.c0_zero, step_maps, cfg
                )
                accepted = (u_next, gamma, nu, result.c0_zero)
            except StallError as stall:
                if stall.candidate is None:
                    trace.status = _classify(residual, j_current)
                    break
                accepted = (stall.candidate, stall.gamma, nu, result.c0_zero)
        else:
            roll_maps = (
                bundle.finite_difference_steps() if rolls_original else bundle.linear_steps()
            )
            holder = {}
            try:
                u_next, gamma_bar = regularized_search(
                    problem, u, bundle, backward_kind, roll_maps, cfg, gamma_prev,
                    check_mode, on_accept=lambda **kw: holder.update(kw),
                )
                gamma_prev = gamma_bar
                accepted = (u_next, holder["gamma"], holder["nu"], holder["c0"])
            except StallError as stall:
                if stall.candidate is None:
                    trace.status = _classify(residual, j_current)
                    break
                accepted = (stall.candidate, stall.gamma, math.nan, math.nan)

        u_next, gamma, nu_used, c0_val = accepted
        try:
            bundle, _ = _forward_timed(u_next)
        except DivergenceError as err:
            trace.status = "diverged"
            err.trace = trace
            raise
        elapsed = time.perf_counter() - t0
        j_next = bundle.cost
        residual = float(np.max(np.abs(bundle_gradient(bundle))))
        cum_ms += (carry + elapsed) * 1e3
        carry = 0.0
        trace.rows.append(TraceRow(k, j_next, gamma, nu_used, c0_val, residual, cum_ms))
        if callback is not None:
            callback(iteration=k, u=u_next, cost=j_next, stepsize=gamma,
                     regularization=nu_used, model_decrease=c0_val, residual=residual)

        stop_small_cost = abs(j_current - j_next) <= stop.cost_rel_tol * (1.0 + abs(j_current))
        stop_small_step = gamma < stop.min_step
        u, j_current = u_next, j_next
        if stop_small_cost or stop_small_step:
            trace.status = _classify(residual, j_current)
            break
    else:
        trace.status = "max-iters"

    return u, trace


def stationarity_residual(problem: TrajectoryProblem, u) -> float:
    """First-order optimality certificate via the per-step control conditions.

    Writes each step as x_next = x + increment(x, u), back-propagates the
    multipliers of the step constraints from the final cost slope, and
    returns the largest max-norm over steps of the control gradient of the
    per-step function lam' increment(x, u) - h(x, u).  By construction this
    equals the max-norm of the objective gradient.
    """
    bundle = forward(problem, u, o_f=1, o_h=1)
    tau = problem.horizon
    eye = np.eye(problem.n_x)
    lam = -bundle.final_slope  # multiplier of the last step constraint
    worst = 0.0
    for t in range(tau - 1, -1, -1):
        A_inc = bundle.lin[t].A - eye  # Jacobian of the increment map
        B_inc = bundle.lin[t].B
        grad_u = B_inc.T @ lam - bundle.cost_q[t]
        worst = max(worst, float(np.max(np.abs(grad_u))))
        lam = lam + A_inc.T @ lam - bundle.cost_p[t]
    return worst
