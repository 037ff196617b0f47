"""Assembly of the benchmark control problems from models, costs and tracks."""

from __future__ import annotations


from .. import autodiff as ad
from ..core import TrajectoryProblem
from ..errors import ConfigError
from .cars import (
    BicycleParams,
    SimpleCarParams,
    bicycle_dynamics,
    simple_car_dynamics,
    squash_acceleration,
    squash_steering,
)
from .cartpole import CartPoleParams, cartpole_cost, cartpole_dynamics, stay_put_start
from .integrators import euler_step, rk4_step, rk4_varying_step
from .pendulum import PendulumParams, pendulum_cost, pendulum_dynamics
from .track import Track, bundled_track, contouring_errors, border_cost, track_eval

__all__ = ["ENV_KINDS", "DISCRETIZERS", "build_problem"]

ENV_KINDS = ("pendulum", "cartpole", "simple-car", "bicycle-car")
DISCRETIZERS = ("euler", "rk4", "rk4-varying")

DEFAULT_DISCRETIZER = {
    "pendulum": "euler",
    "cartpole": "euler",
    "simple-car": "euler",
    "bicycle-car": "rk4",
}

# The bicycle model augments its state with the curve parameter; that pair
# integrates with a plain Euler rule regardless of the physical scheme, so
# the varying-control stencil has no consistent meaning for it.
_ALLOWED = {
    "pendulum": ("euler", "rk4", "rk4-varying"),
    "cartpole": ("euler", "rk4", "rk4-varying"),
    "simple-car": ("euler", "rk4", "rk4-varying"),
    "bicycle-car": ("euler", "rk4"),
}


def _discretize(f_cont, scheme: str, dt: float):
    if scheme == "euler":
        return lambda z, u: euler_step(f_cont, z, u, dt)
    if scheme == "rk4":
        return lambda z, u: rk4_step(f_cont, z, u, dt)
    return lambda z, u: rk4_varying_step(f_cont, z, u, dt)


def build_problem(
    env: str,
    horizon: int,
    discretizer: str | None = None,
    track: Track | None = None,
    params=None,
) -> TrajectoryProblem:
    """Build one of the four benchmark problems at the given horizon.

    The step size is the model's total time divided by the horizon.  Car
    problems default to the bundled 'simple' track.  The returned problem
    carries build metadata (params, track, step size) in ``meta``.
    """
    if env not in ENV_KINDS:
        raise ConfigError("env", f"unknown environment {env!r}; expected one of {ENV_KINDS}")
    if horizon < 1:
        raise ConfigError("horizon", f"must be >= 1, got {horizon}")
    scheme = discretizer or DEFAULT_DISCRETIZER[env]
    if scheme not in DISCRETIZERS:
        raise ConfigError(
            "discretizer", f"unknown discretizer {scheme!r}; expected one of {DISCRETIZERS}"
        )
    if scheme not in _ALLOWED[env]:
        raise ConfigError("discretizer", f"{env} does not support the {scheme} scheme")

    if env == "pendulum":
        return _build_pendulum(horizon, scheme, params or PendulumParams())
    if env == "cartpole":
        return _build_cartpole(horizon, scheme, params or CartPoleParams())
    track = track or bundled_track("simple")
    if env == "simple-car":
        return _build_simple_car(horizon, scheme, track, params or SimpleCarParams())
    return _build_bicycle(horizon, scheme, track, params or BicycleParams())


def _ctrl_blocks(scheme: str) -> int:
    return 3 if scheme == "rk4-varying" else 1


def _build_pendulum(horizon, scheme, p: PendulumParams) -> TrajectoryProblem:
    dt = p.total_time / horizon
    f = _discretize(lambda z, u: pendulum_dynamics(z, u, p), scheme, dt)
    costs = tuple(
        (lambda x, u, t=t: pendulum_cost(t, x, u, horizon, p)) for t in range(horizon)
    )
    return TrajectoryProblem(
        dynamics=(f,) * horizon,
        running_costs=costs,
        final_cost=lambda x: pendulum_cost(horizon, x, (), horizon, p),
        x0=[0.0, 0.0],
        n_x=2,
        n_u=1 * _ctrl_blocks(scheme),
        meta={"env": "pendulum", "params": p, "dt": dt, "discretizer": scheme},
    )


def _build_cartpole(horizon, scheme, p: CartPoleParams) -> TrajectoryProblem:
    dt = p.total_time / horizon
    tbar = stay_put_start(horizon, p)
    f = _discretize(lambda z, u: cartpole_dynamics(z, u, p), scheme, dt)
    costs = tuple(
        (lambda x, u, t=t: cartpole_cost(t, x, u, horizon, tbar, p)) for t in range(horizon)
    )
    return TrajectoryProblem(
        dynamics=(f,) * horizon,
        running_costs=costs,
        final_cost=lambda x: cartpole_cost(horizon, x, (), horizon, tbar, p),
        x0=[0.0, 0.0, 0.0, 0.0],
        n_x=4,
        n_u=1 * _ctrl_blocks(scheme),
        meta={"env": "cartpole", "params": p, "dt": dt, "discretizer": scheme,
              "stay_put_from": tbar},
    )


def _start_pose(track: Track):
    pt = track_eval(track, 0.0)
    return float(pt.x), float(pt.y), float(pt.theta)


def _build_simple_car(horizon, scheme, track: Track, p: SimpleCarParams) -> TrajectoryProblem:
    dt = p.total_time / horizon

    def f_cont(z, u):
        # steering squashed into (-pi/3, pi/3); acceleration unconstrained
        return simple_car_dynamics(z, (u[0], squash_steering(u[1])), p)

    f = _discretize(f_cont, scheme, dt)

    def tracking(x, t):
        ref = track_eval(track, dt * p.v_ref * t)
        ex, ey = x[0] - float(ref.x), x[1] - float(ref.y)
        return ex * ex + ey * ey

    def running(x, u, t):
        acc = tracking(x, t) if t >= 1 else 0.0
        for uk in u:
            acc = acc + p.ctrl_weight * uk * uk
        return acc

    x0, y0, th0 = _start_pose(track)
    return TrajectoryProblem(
        dynamics=(f,) * horizon,
        running_costs=tuple((lambda x, u, t=t: running(x, u, t)) for t in range(horizon)),
        final_cost=lambda x: tracking(x, horizon),
        x0=[x0, y0, th0, p.v_init],
        n_x=4,
        n_u=2 * _ctrl_blocks(scheme),
        meta={"env": "simple-car", "params": p, "dt": dt, "discretizer": scheme,
              "track": track},
    )


def _build_bicycle(horizon, scheme, track: Track, p: BicycleParams) -> TrajectoryProblem:
    """Bicycle model with contouring costs.

    The state carries the curve parameter and its rate (s, s_rate) next to
    the six physical coordinates; a control component drives the rate so
    the reference point races along with the car.  The physical state
    integrates with the configured scheme while the curve pair uses a
    plain Euler update.
    """
    dt = p.total_time / horizon
    phys_step = _discretize(
        lambda z, u: bicycle_dynamics(z, u, p), "rk4" if scheme == "rk4" else "euler", dt
    )

    def f(x, u):
        phys, s, s_rate = x[:6], x[6], x[7]
        steer = squash_steering(u[1])
        accel = squash_acceleration(u[0])
        nxt = phys_step(phys, (accel, steer))
        return list(nxt) + [s + dt * s_rate, s_rate + dt * u[2]]

    def stage_cost(x, u=None):
        s, s_rate = x[6], x[7]
        e_c, e_l = contouring_errors(track, x[0], x[1], s)
        dv = s_rate - p.v_ref
        acc = (
            p.contour_weight * e_c * e_c
            + p.lag_weight * e_l * e_l
            + p.speed_weight * dv * dv
            - p.barrier_eps * ad.log(s_rate)
            + p.border_weight * border_cost(track, x[0], x[1], s, p.car_width)
        )
        if u is not None:
            for uk in u:
                acc = acc + p.ctrl_weight * uk * uk
        return acc

    x0, y0, th0 = _start_pose(track)
    return TrajectoryProblem(
        dynamics=(f,) * horizon,
        running_costs=(stage_cost,) * horizon,
        final_cost=lambda x: 0.0 * x[0],
        x0=[x0, y0, th0, p.v_init, 0.0, 0.0, 0.0, p.v_ref],
        n_x=8,
        n_u=3,
        meta={"env": "bicycle-car", "params": p, "dt": dt, "discretizer": scheme,
              "track": track},
    )
