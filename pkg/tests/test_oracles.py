"""Forward/backward passes, roll-outs and the five oracle directions."""

import numpy as np
import pytest

from trajopt.core import AffinePolicy, LinearMap, TrajectoryProblem
from trajopt.dense import dense_costates, dense_gauss_newton_matrix, dense_gradient, dense_hessian
from trajopt.errors import DivergenceError, ParameterError
from trajopt.oracles import (
    backward_gd,
    backward_gn,
    bundle_gradient,
    forward,
    objective_value,
    oracle,
    rollout,
)

from conftest import random_lq_problem, random_smooth_problem


def tiny_problem():
    """tau=1, f(x,u)=u, h0=0, h1(x)=x^2/2; the gradient at u is u itself."""
    return TrajectoryProblem(
        dynamics=(lambda x, u: [u[0]],),
        running_costs=(lambda x, u: 0.0 * u[0],),
        final_cost=lambda x: 0.5 * x[0] * x[0],
        x0=[0.0],
        n_x=1,
        n_u=1,
    )


class TestForward:
    def test_orders_do_not_change_the_cost(self, rng):
        problem = random_smooth_problem(rng, 4, 2, 1)
        u = rng.standard_normal((4, 1)) * 0.3
        j0 = forward(problem, u, o_f=0, o_h=0).cost
        j2 = forward(problem, u, o_f=2, o_h=2).cost
        assert j0 == j2  # bit-for-bit: orders affect storage only

    def test_lq_cost_matches_dense_quadratic_form(self, rng):
        problem, _ = random_lq_problem(rng, 4, 2, 2)
        u = rng.standard_normal((4, 2))
        flat = u.ravel()
        j_at_zero = objective_value(problem, np.zeros((4, 2)))
        g = dense_gradient(problem, np.zeros((4, 2)))
        h = dense_hessian(problem, np.zeros((4, 2)))
        quadratic = j_at_zero + g @ flat + 0.5 * flat @ h @ flat
        assert forward(problem, u, 0, 0).cost == pytest.approx(quadratic, abs=1e-10)

    def test_divergence_carries_step_index(self):
        problem = TrajectoryProblem(
            dynamics=(lambda x, u: [x[0] * 1e200],) * 2,
            running_costs=(lambda x, u: 0.0 * u[0],) * 2,
            final_cost=lambda x: x[0],
            x0=[1.0],
            n_x=1,
            n_u=1,
        )
        with pytest.raises(DivergenceError) as err:
            forward(problem, np.zeros((2, 1)), 0, 0)
        assert err.value.t == 1

    def test_bundle_trajectory_satisfies_dynamics(self, rng):
        problem = random_smooth_problem(rng, 3, 2, 2)
        u = rng.standard_normal((3, 2)) * 0.2
        bundle = forward(problem, u, 1, 2)
        for t in range(3):
            x_next = problem.dynamics[t]([float(v) for v in bundle.xs[t]], list(u[t]))
            np.testing.assert_array_equal(bundle.xs[t + 1], np.asarray(x_next, dtype=float))


class TestBackwardGd:
    def test_hand_chain_rule(self):
        bundle = forward(tiny_problem(), [[3.0]], 1, 1)
        result = backward_gd(bundle, nu=1.0)
        np.testing.assert_allclose(result.policies[0].k, [-3.0])
        assert result.c0_zero == pytest.approx(-4.5)  # -|grad|^2 / 2

    def test_zero_direction_at_lq_minimizer(self, rng):
        problem, _ = random_lq_problem(rng, 4, 2, 1)
        from trajopt.lqsolve import dynprog

        u_star = dynprog(problem)
        direction = oracle(problem, u_star, "gd", nu=1.0).direction
        assert np.max(np.abs(direction)) <= 1e-9

    def test_nu_scaling_halves_direction(self, rng):
        problem = random_smooth_problem(rng, 3, 2, 1)
        u = rng.standard_normal((3, 1)) * 0.1
        bundle = forward(problem, u, 1, 1)
        d1 = backward_gd(bundle, nu=1.0)
        d2 = backward_gd(bundle, nu=2.0)
        for p1, p2 in zip(d1.policies, d2.policies):
            np.testing.assert_allclose(p2.k, 0.5 * p1.k)

    def test_rollout_equals_stacked_offsets(self, rng):
        problem = random_smooth_problem(rng, 3, 2, 1)
        u = rng.standard_normal((3, 1)) * 0.1
        with_roll = oracle(problem, u, "gd", nu=1.0, gd_rollout=True)
        without = oracle(problem, u, "gd", nu=1.0)
        np.testing.assert_allclose(with_roll.direction, without.direction)

    def test_matches_dense_gradient(self, rng):
        problem = random_smooth_problem(rng, 4, 2, 2)
        u = rng.standard_normal((4, 2)) * 0.2
        direction = oracle(problem, u, "gd", nu=2.0).direction
        dense = dense_gradient(problem, u).reshape(4, 2)
        np.testing.assert_allclose(-2.0 * direction, dense, rtol=1e-8, atol=1e-10)


class TestBackwardGn:
    def test_exact_on_lq_problem(self, rng):
        problem, _ = random_lq_problem(rng, 4, 2, 2)
        u = rng.standard_normal((4, 2))
        step = oracle(problem, u, "gn", nu=0.0)
        assert step.feasible
        landed = u + step.direction
        grad = dense_gradient(problem, landed)
        assert np.max(np.abs(grad)) <= 1e-9 * (1.0 + np.max(np.abs(dense_gradient(problem, u))))

    def test_matches_dense_normal_equations(self, rng):
        for _ in range(4):
            problem = random_smooth_problem(rng, 3, 1, 1)
            u = rng.standard_normal((3, 1)) * 0.2
            nu = 0.5
            step = oracle(problem, u, "gn", nu=nu)
            gn = dense_gauss_newton_matrix(problem, u)
            g = dense_gradient(problem, u)
            expected = np.linalg.solve(gn + nu * np.eye(3), -g)
            np.testing.assert_allclose(step.direction.ravel(), expected, rtol=1e-8, atol=1e-10)

    def test_indefinite_stage_is_infeasible_at_zero_nu(self):
        problem = TrajectoryProblem(
            dynamics=(lambda x, u: [x[0] + u[0]],),
            running_costs=(lambda x, u: -u[0] * u[0],),
            final_cost=lambda x: 0.1 * x[0],
            x0=[0.0],
            n_x=1,
            n_u=1,
        )
        step = oracle(problem, [[0.0]], "gn", nu=0.0)
        assert not step.feasible
        assert step.c0_zero == np.inf
        assert step.direction is None


class TestBackwardNe:
    def test_equals_gn_on_linear_dynamics(self, rng):
        problem, _ = random_lq_problem(rng, 4, 2, 1)
        u = rng.standard_normal((4, 1))
        gn = oracle(problem, u, "gn", nu=0.1)
        ne = oracle(problem, u, "ne", nu=0.1)
        np.testing.assert_allclose(ne.direction, gn.direction, atol=1e-12)

    def test_matches_dense_newton_system(self, rng):
        for _ in range(4):
            problem = random_smooth_problem(rng, 3, 1, 1)
            u = rng.standard_normal((3, 1)) * 0.2
            nu = 1.0
            step = oracle(problem, u, "ne", nu=nu)
            if not step.feasible:
                continue
            hess = dense_hessian(problem, u)
            g = dense_gradient(problem, u)
            expected = np.linalg.solve(hess + nu * np.eye(3), -g)
            np.testing.assert_allclose(step.direction.ravel(), expected, rtol=1e-8, atol=1e-10)

    def test_adjoint_recursion_hand_example(self):
        # f_t(x, u) = 2x + u over two steps, final cost x: costates 1 then 2
        problem = TrajectoryProblem(
            dynamics=(lambda x, u: [2.0 * x[0] + u[0]],) * 2,
            running_costs=(lambda x, u: 0.0 * u[0],) * 2,
            final_cost=lambda x: x[0],
            x0=[0.0],
            n_x=1,
            n_u=1,
        )
        lam = dense_costates(problem, np.zeros((2, 1)))
        np.testing.assert_allclose(lam, [[2.0], [1.0]])

    def test_adjoints_match_dense_solve(self, rng):
        problem = random_smooth_problem(rng, 4, 2, 2)
        u = rng.standard_normal((4, 2)) * 0.2
        bundle = forward(problem, u, 1, 1)
        # recursive adjoint sweep
        lam = bundle.final_slope
        rec = [lam]
        for t in range(3, 0, -1):
            lam = bundle.cost_p[t] + bundle.lin[t].A.T @ lam
            rec.append(lam)
        rec = np.array(rec[::-1])
        np.testing.assert_allclose(rec, dense_costates(problem, u), rtol=1e-8, atol=1e-10)


class TestBackwardDdpQ:
    def test_equals_gn_on_linear_dynamics(self, rng):
        problem, _ = random_lq_problem(rng, 4, 2, 1)
        u = rng.standard_normal((4, 1))
        gn = oracle(problem, u, "gn", nu=0.2)
        ddp = oracle(problem, u, "ddp-q", nu=0.2)
        np.testing.assert_allclose(ddp.direction, gn.direction, atol=1e-12)

    def test_scalar_recursion_oracle(self, rng):
        """c0(0) matches an independently coded scalar Bellman recursion."""
        problem = random_smooth_problem(rng, 2, 1, 1)
        u = rng.standard_normal((2, 1)) * 0.3
        nu = 0.3
        bundle = forward(problem, u, 2, 2)
        from trajopt.oracles import backward_ddp_q

        result = backward_ddp_q(bundle, nu)
        assert result.feasible

        # independent scalar recursion: J, j, j0 and curvature folded by hand
        Jv, jv, j0 = float(bundle.final_quad[0, 0]), float(bundle.final_slope[0]), 0.0
        for t in (1, 0):
            quad = bundle.cost_quads[t]
            w = bundle.f_handles[t](np.array([jv]))
            H = quad.H[0, 0] + w[0, 0]
            Q = quad.Q[0, 0] + nu + w[1, 1]
            R = quad.R[0, 0] + w[0, 1]
            A, B = bundle.lin[t].A[0, 0], bundle.lin[t].B[0, 0]
            p, q = quad.p[0], quad.q[0]
            M = Q + B * Jv * B
            m = q + B * jv
            j0 = j0 - 0.5 * m * m / M
            new_J = H + A * Jv * A - (R + A * Jv * B) ** 2 / M
            new_j = p + A * jv - (R + A * Jv * B) * m / M
            Jv, jv = new_J, new_j
        assert result.c0_zero == pytest.approx(j0, abs=1e-10)

    def test_huge_nu_approaches_gradient_offsets(self, rng):
        problem = random_smooth_problem(rng, 3, 2, 1)
        u = rng.standard_normal((3, 1)) * 0.2
        bundle = forward(problem, u, 2, 2)
        from trajopt.oracles import backward_ddp_q

        nu = 1e12
        result = backward_ddp_q(bundle, nu)
        grad = bundle_gradient(bundle)
        for t, pol in enumerate(result.policies):
            np.testing.assert_allclose(pol.k, -grad[t] / nu, rtol=1e-6)


class TestRollout:
    def test_zero_policies_roll_zero_controls(self):
        maps = [LinearMap([[1.0]], [[1.0]])] * 3
        policies = [AffinePolicy.zero(1, 1)] * 3
        np.testing.assert_allclose(rollout([0.0], policies, maps), np.zeros((3, 1)))

    def test_hand_rolled_constant_policies(self):
        maps = [LinearMap([[1.0]], [[1.0]])] * 2
        policies = [AffinePolicy([[0.0]], [1.0])] * 2
        controls = rollout([0.0], policies, maps)
        np.testing.assert_allclose(controls, [[1.0], [1.0]])

    def test_gamma_scaling_on_linear_maps(self, rng):
        problem = random_smooth_problem(rng, 5, 2, 2)
        u = rng.standard_normal((5, 2)) * 0.2
        bundle = forward(problem, u, 1, 2)
        result = backward_gn(bundle, nu=0.5)
        assert result.feasible
        base = rollout(np.zeros(2), result.policies, bundle.linear_steps())
        for gamma in (0.5, 0.25, 0.1):
            scaled = [p.scaled(gamma) for p in result.policies]
            got = rollout(np.zeros(2), scaled, bundle.linear_steps())
            np.testing.assert_allclose(got, gamma * base, atol=1e-12)


class TestOracleDispatch:
    def test_gn_and_ddp_lq_agree_on_linear_dynamics(self, rng):
        problem, _ = random_lq_problem(rng, 4, 2, 2)
        u = rng.standard_normal((4, 2))
        gn = oracle(problem, u, "gn", nu=0.3)
        ddp = oracle(problem, u, "ddp-lq", nu=0.3)
        np.testing.assert_allclose(gn.direction, ddp.direction, atol=1e-9)

    def test_ne_and_ddp_q_agree_on_linear_dynamics(self, rng):
        problem, _ = random_lq_problem(rng, 4, 2, 2)
        u = rng.standard_normal((4, 2))
        ne = oracle(problem, u, "ne", nu=0.3)
        ddp = oracle(problem, u, "ddp-q", nu=0.3)
        np.testing.assert_allclose(ne.direction, ddp.direction, atol=1e-9)

    def test_gn_and_ddp_lq_share_policies(self, rng):
        problem = random_smooth_problem(rng, 4, 2, 1)
        u = rng.standard_normal((4, 1)) * 0.2
        bundle = forward(problem, u, 1, 2)
        a = backward_gn(bundle, nu=0.4)
        b = backward_gn(bundle, nu=0.4)  # ddp-lq runs the same sweep
        for pa, pb in zip(a.policies, b.policies):
            np.testing.assert_array_equal(pa.K, pb.K)
            np.testing.assert_array_equal(pa.k, pb.k)

    def test_gd_direction_matches_finite_difference_gradient(self, rng):
        problem = random_smooth_problem(rng, 4, 2, 1)
        u = rng.standard_normal((4, 1)) * 0.2
        direction = oracle(problem, u, "gd", nu=1.0).direction
        h = 1e-6
        fd = np.zeros_like(u)
        for t in range(4):
            up, um = u.copy(), u.copy()
            up[t, 0] += h
            um[t, 0] -= h
            fd[t, 0] = (objective_value(problem, up) - objective_value(problem, um)) / (2 * h)
        np.testing.assert_allclose(-direction, fd, rtol=1e-5, atol=1e-7)

    def test_unknown_kind_rejected(self, rng):
        problem = random_smooth_problem(rng, 2, 1, 1)
        with pytest.raises(ParameterError):
            oracle(problem, np.zeros((2, 1)), "bfgs", nu=0.0)

    def test_model_value_is_half_gradient_dot_direction(self, rng):
        for kind in ("gn", "ne"):
            problem = random_smooth_problem(rng, 3, 2, 1)
            u = rng.standard_normal((3, 1)) * 0.2
            step = oracle(problem, u, kind, nu=0.8)
            if not step.feasible:
                continue
            g = dense_gradient(problem, u)
            expected = 0.5 * g @ step.direction.ravel()
            assert step.c0_zero == pytest.approx(expected, rel=1e-8)
