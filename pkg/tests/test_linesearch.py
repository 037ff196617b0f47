"""Step acceptance rules, the solver loop, and the stationarity certificate."""

import math

import numpy as np
import pytest

from trajopt.core import TrajectoryProblem
from trajopt.dense import dense_gradient
from trajopt.errors import ParameterError, StallError
from trajopt.linesearch import (
    ACCEPT_TIE_RTOL,
    LineSearchConfig,
    StopCriteria,
    directional_search,
    regularized_search,
    solve,
    stationarity_residual,
)
from trajopt.lqsolve import dynprog
from trajopt.oracles import backward_gn, forward, objective_value, oracle

from conftest import random_lq_problem, random_smooth_problem


def quadratic_scalar_problem():
    """J(u) = 0.5 u^2 through f(x,u) = u, final cost x^2/2."""
    return TrajectoryProblem(
        dynamics=(lambda x, u: [u[0]],),
        running_costs=(lambda x, u: 0.0 * u[0],),
        final_cost=lambda x: 0.5 * x[0] * x[0],
        x0=[0.0],
        n_x=1,
        n_u=1,
    )


class TestDirectionalSearch:
    def test_full_step_accepted_on_quadratic(self):
        problem = quadratic_scalar_problem()
        u = np.array([[1.0]])
        bundle = forward(problem, u, 1, 2)
        result = backward_gn(bundle, nu=0.0)
        u_next, gamma = directional_search(
            problem, u, result.policies, result.c0_zero, bundle.linear_steps(),
            LineSearchConfig(),
        )
        assert gamma == 1.0
        assert u_next[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_rejects_non_descent_model_value(self):
        problem = quadratic_scalar_problem()
        with pytest.raises(ParameterError):
            directional_search(problem, np.zeros((1, 1)), (), 0.0, (), LineSearchConfig())

    def test_stall_on_pathological_objective(self):
        # a direction that increases the objective stalls the search
        problem = quadratic_scalar_problem()
        u = np.array([[1.0]])
        bundle = forward(problem, u, 1, 2)
        result = backward_gn(bundle, nu=0.0)
        uphill = tuple(p.scaled(-1.0) for p in result.policies)
        with pytest.raises(StallError):
            directional_search(
                problem, u, uphill, result.c0_zero, bundle.linear_steps(), LineSearchConfig()
            )

    def test_accepted_step_satisfies_sufficient_decrease(self, rng):
        problem = random_smooth_problem(rng, 4, 2, 1)
        u = rng.standard_normal((4, 1)) * 0.3
        bundle = forward(problem, u, 1, 2)
        result = backward_gn(bundle, nu=0.5)
        j0 = objective_value(problem, u)
        u_next, gamma = directional_search(
            problem, u, result.policies, result.c0_zero, bundle.linear_steps(),
            LineSearchConfig(),
        )
        j1 = objective_value(problem, u_next)
        assert j1 - j0 <= gamma * result.c0_zero + ACCEPT_TIE_RTOL * (1 + abs(j0))


class TestRegularizedSearch:
    def test_first_trial_accepted_on_lq_problem(self, rng):
        problem, _ = random_lq_problem(rng, 3, 2, 1)
        u = rng.standard_normal((3, 1))
        bundle = forward(problem, u, 1, 2)
        cfg = LineSearchConfig(rule="regularized", gradient_scaled=False)
        trials = []
        u_next, gamma_bar = regularized_search(
            problem, u, bundle, "gn", bundle.linear_steps(), cfg, gamma_prev=0.1,
            on_accept=lambda **kw: trials.append(kw),
        )
        # warm-start arithmetic: first trial is rho_inc * gamma_prev = 1.0
        assert trials[0]["gamma"] == pytest.approx(1.0)
        assert gamma_bar == pytest.approx(1.0)

    def test_accepted_step_satisfies_model_decrease(self, rng):
        problem = random_smooth_problem(rng, 4, 2, 1)
        u = rng.standard_normal((4, 1)) * 0.3
        bundle = forward(problem, u, 1, 2)
        cfg = LineSearchConfig(rule="regularized")
        info = {}
        u_next, _ = regularized_search(
            problem, u, bundle, "gn", bundle.linear_steps(), cfg, gamma_prev=1.0,
            on_accept=lambda **kw: info.update(kw),
        )
        j0, j1 = bundle.cost, objective_value(problem, u_next)
        assert j1 - j0 <= info["c0"] + ACCEPT_TIE_RTOL * (1 + abs(j0))

    def test_quartic_acceptance_matches_grid_search(self):
        """Accepted stepsize agrees with exhaustively scanning the same rule."""
        problem = TrajectoryProblem(
            dynamics=(lambda x, u: [u[0]],),
            running_costs=(lambda x, u: 0.0 * u[0],),
            final_cost=lambda x: x[0] * x[0] * x[0] * x[0],
            x0=[0.0],
            n_x=1,
            n_u=1,
        )
        u = np.array([[1.0]])
        bundle = forward(problem, u, 1, 2)
        cfg = LineSearchConfig(rule="regularized", gradient_scaled=False)
        info = {}
        u_next, gamma_bar = regularized_search(
            problem, u, bundle, "gn", bundle.linear_steps(), cfg, gamma_prev=1.0,
            on_accept=lambda **kw: info.update(kw),
        )
        # independent scan over the same geometric stepsize grid
        from trajopt.oracles import rollout, run_backward

        gamma = cfg.rho_inc * 1.0
        while True:
            result = run_backward(bundle, "gn", 1.0 / gamma)
            if result.feasible and result.c0_zero < 0.0:
                v = rollout(np.zeros(1), result.policies, bundle.linear_steps())
                j_trial = objective_value(problem, u + v)
                if j_trial - bundle.cost <= result.c0_zero + 1e-12 * (1 + abs(bundle.cost)):
                    break
            gamma *= cfg.rho_dec
        assert gamma_bar == pytest.approx(gamma)
        assert objective_value(problem, u_next) < bundle.cost


class TestSolve:
    def test_lq_converges_in_one_iteration(self, rng):
        problem, _ = random_lq_problem(rng, 4, 2, 2)
        u0 = rng.standard_normal((4, 2))
        u_final, trace = solve(problem, u0, "gn", LineSearchConfig(), StopCriteria(max_iters=10))
        assert trace.status == "converged"
        assert trace.rows[1].residual <= 1e-9
        assert trace.rows[1].stepsize == pytest.approx(1.0)

    def test_max_iters_zero_returns_initial_point(self, rng):
        problem, _ = random_lq_problem(rng, 3, 1, 1)
        u0 = rng.standard_normal((3, 1))
        u_final, trace = solve(problem, u0, "gn", stop=StopCriteria(max_iters=0))
        np.testing.assert_array_equal(u_final, u0)
        assert len(trace.rows) == 1
        assert trace.rows[0].cost == pytest.approx(objective_value(problem, u0))

    def test_costs_non_increasing_all_kinds(self, rng):
        problem = random_smooth_problem(rng, 5, 2, 1)
        u0 = rng.standard_normal((5, 1)) * 0.2
        for kind in ("gd", "gn", "ne", "ddp-lq", "ddp-q"):
            for rule in ("directional", "regularized"):
                _, trace = solve(
                    problem, u0, kind, LineSearchConfig(rule=rule), StopCriteria(max_iters=25)
                )
                costs = trace.costs
                assert np.all(np.diff(costs) <= 1e-12 * (1 + np.abs(costs[:-1])))

    def test_converged_endpoint_has_small_residual(self, rng):
        problem = random_smooth_problem(rng, 4, 2, 1)
        u0 = np.zeros((4, 1))
        u_final, trace = solve(
            problem, u0, "gn", LineSearchConfig(), StopCriteria(max_iters=200)
        )
        assert trace.status == "converged"
        j = trace.rows[-1].cost
        assert stationarity_residual(problem, u_final) <= 1e-6 * (1 + abs(j))

    def test_solve_from_the_optimum_stops_converged(self, rng):
        """Zero gradient: the model sees no decrease and the run reports converged."""
        problem, _ = random_lq_problem(rng, 4, 2, 1)
        u_star = dynprog(problem)
        for rule in ("directional", "regularized"):
            u_out, trace = solve(
                problem, u_star, "gn", LineSearchConfig(rule=rule), StopCriteria(max_iters=5)
            )
            assert trace.status == "converged"
            np.testing.assert_allclose(u_out, u_star, atol=1e-9)

    def test_trial_stepsizes_form_a_geometric_sequence(self):
        """Each rejection scales the trial stepsize by exactly rho_dec."""
        from trajopt import autodiff as ad

        # barrier objective: the unregularized step jumps past the wall at 0,
        # so the first trials get rejected before one is accepted
        problem = TrajectoryProblem(
            dynamics=(lambda x, u: [u[0]],),
            running_costs=(lambda x, u: 0.0 * u[0],),
            final_cost=lambda x: x[0] - ad.log(x[0]),
            x0=[2.0],
            n_x=1,
            n_u=1,
        )
        u = np.array([[2.0]])
        bundle = forward(problem, u, 1, 2)
        cfg = LineSearchConfig(rule="regularized", gradient_scaled=False)
        info = {}
        regularized_search(
            problem, u, bundle, "gn", bundle.linear_steps(), cfg, gamma_prev=1.0,
            on_accept=lambda **kw: info.update(kw),
        )
        ratio = info["gamma"] / (cfg.rho_inc * 1.0)
        k = math.log(ratio) / math.log(cfg.rho_dec)
        assert k == pytest.approx(round(k), abs=1e-9)
        assert round(k) >= 1  # at least one rejection before acceptance

    def test_callback_sees_every_accepted_step(self, rng):
        problem, _ = random_lq_problem(rng, 3, 1, 1)
        seen = []
        solve(
            problem, rng.standard_normal((3, 1)), "gn",
            LineSearchConfig(), StopCriteria(max_iters=5),
            callback=lambda **kw: seen.append(kw["iteration"]),
        )
        assert seen == list(range(1, len(seen) + 1))


class TestStationarityResidual:
    def test_zero_at_lq_minimizer(self, rng):
        problem, _ = random_lq_problem(rng, 4, 2, 2)
        u_star = dynprog(problem)
        assert stationarity_residual(problem, u_star) <= 1e-9

    def test_equals_scaled_gradient_direction(self, rng):
        problem = random_smooth_problem(rng, 4, 2, 2)
        u = rng.standard_normal((4, 2)) * 0.3
        nu = 3.0
        direction = oracle(problem, u, "gd", nu=nu).direction
        assert stationarity_residual(problem, u) == pytest.approx(
            nu * float(np.max(np.abs(direction))), abs=1e-10
        )

    def test_equals_dense_gradient_max_norm(self, rng):
        for _ in range(5):
            problem = random_smooth_problem(rng, 3, 2, 1)
            u = rng.standard_normal((3, 1)) * 0.3
            res = stationarity_residual(problem, u)
            dense = float(np.max(np.abs(dense_gradient(problem, u))))
            assert res == pytest.approx(dense, rel=1e-8, abs=1e-12)
