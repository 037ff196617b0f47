"""Test-support builders: random instances and independent reference solvers.

Shared by the pytest suite and the CLI verify command.  Everything here is
deliberately independent of the structured solver paths it is used to
check: the KKT solver assembles one dense saddle system, and the
finite-difference helpers never touch the derivative engine.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .core import (
    TrajectoryProblem,
    linear_dynamics,
    quadratic_cost,
    quadratic_state_cost,
)

__all__ = [
    "random_spd",
    "random_lq_problem",
    "kkt_solve_lq",
    "random_smooth_problem",
    "fd_jacobian",
    "fd_hessian",
    "env_interior_point",
    "concave_stage_problem",
]


def random_spd(rng, n, scale=1.0):
    G = rng.standard_normal((n, n))
    return scale * (G @ G.T / n + 0.5 * np.eye(n))


def random_lq_problem(rng, tau, n_x, n_u):
    """Random convex LQ instance; also returns the raw matrices for the KKT oracle.

    Stage Hessians are jointly positive semidefinite with strongly convex
    control blocks, so stagewise Bellman solves recover the global optimum.
    """
    data = {"A": [], "B": [], "H": [], "Q": [], "R": [], "p": [], "q": []}
    dyn, costs = [], []
    for _ in range(tau):
        A = rng.standard_normal((n_x, n_x)) * 0.6 / np.sqrt(n_x)
        B = rng.standard_normal((n_x, n_u)) / np.sqrt(n_u)
        G = rng.standard_normal((n_x + n_u, n_x + n_u)) * 0.7
        joint = G @ G.T / (n_x + n_u)
        joint[n_x:, n_x:] += 0.5 * np.eye(n_u)
        H, Q, R = joint[:n_x, :n_x], joint[n_x:, n_x:], joint[:n_x, n_x:]
        p = rng.standard_normal(n_x) * 0.5
        q = rng.standard_normal(n_u) * 0.5
        for key, val in zip("ABHQRpq", (A, B, H, Q, R, p, q)):
            data[key].append(val)
        dyn.append(linear_dynamics(A, B))
        costs.append(quadratic_cost(H, Q, R, p, q))
    Hf = random_spd(rng, n_x, 0.8)
    pf = rng.standard_normal(n_x) * 0.5
    data["Hf"], data["pf"] = Hf, pf
    x0 = rng.standard_normal(n_x)
    problem = TrajectoryProblem(
        dynamics=tuple(dyn),
        running_costs=tuple(costs),
        final_cost=quadratic_state_cost(Hf, pf),
        x0=x0,
        n_x=n_x,
        n_u=n_u,
    )
    return problem, data


def kkt_solve_lq(problem, data):
    """Equality-constrained QP solve of an LQ instance by one dense KKT system.

    Independent of the Bellman recursion: stacks z = (x_1..x_tau,
    u_0..u_{tau-1}), builds the quadratic objective and the step
    constraints explicitly, and solves the full KKT system.
    """
    tau, n_x, n_u = problem.horizon, problem.n_x, problem.n_u
    nz = tau * n_x + tau * n_u
    P = np.zeros((nz, nz))
    c = np.zeros(nz)
    xoff = lambda t: (t - 1) * n_x  # x_t lives at block t-1, t = 1..tau
    uoff = lambda t: tau * n_x + t * n_u
    for t in range(tau):
        H, Q, R = data["H"][t], data["Q"][t], data["R"][t]
        p, q = data["p"][t], data["q"][t]
        su = slice(uoff(t), uoff(t) + n_u)
        P[su, su] += Q
        c[su] += q
        if t == 0:
            c[su] += R.T @ problem.x0  # x0 fixed: its cross term turns linear
        if t >= 1:
            sx = slice(xoff(t), xoff(t) + n_x)
            P[sx, sx] += H
            P[sx, su] += R
            P[su, sx] += R.T
            c[sx] += p
    sxf = slice(xoff(tau), xoff(tau) + n_x)
    P[sxf, sxf] += data["Hf"]
    c[sxf] += data["pf"]

    E = np.zeros((tau * n_x, nz))
    d = np.zeros(tau * n_x)
    for t in range(tau):
        rows = slice(t * n_x, (t + 1) * n_x)
        E[rows, xoff(t + 1) : xoff(t + 1) + n_x] = np.eye(n_x)
        E[rows, uoff(t) : uoff(t) + n_u] = -data["B"][t]
        if t == 0:
            d[rows] = data["A"][0] @ problem.x0
        else:
            E[rows, xoff(t) : xoff(t) + n_x] = -data["A"][t]
    kkt = np.block([[P, E.T], [E, np.zeros((tau * n_x, tau * n_x))]])
    rhs = np.concatenate([-c, d])
    sol = np.linalg.solve(kkt, rhs)
    return sol[tau * n_x : nz].reshape(tau, n_u)


def random_smooth_problem(rng, tau, n_x, n_u, cost_curvature=1.0):
    """Random instance with polynomial/trig dynamics, smooth to all orders."""
    dyn, costs = [], []
    for _ in range(tau):
        A = rng.standard_normal((n_x, n_x)) * 0.5 / np.sqrt(n_x)
        B = rng.standard_normal((n_x, n_u)) / np.sqrt(n_u)
        w = rng.standard_normal((n_x, n_x + n_u)) * 0.4
        amp = rng.standard_normal(n_x) * 0.3
        phase = rng.uniform(-1.0, 1.0, n_x)
        bil = rng.standard_normal(n_x) * 0.2

        def f(x, u, A=A.tolist(), B=B.tolist(), w=w.tolist(), amp=amp, phase=phase, bil=bil):
            out = []
            for i in range(len(A)):
                acc = 0.0
                for j, xj in enumerate(x):
                    acc = acc + A[i][j] * xj
                for kcol, uk in enumerate(u):
                    acc = acc + B[i][kcol] * uk
                arg = phase[i]
                for j, zj in enumerate(list(x) + list(u)):
                    arg = arg + w[i][j] * zj
                acc = acc + amp[i] * ad.sin(arg) + bil[i] * x[0] * u[0]
                out.append(acc)
            return out

        hq = random_spd(rng, n_x + n_u, cost_curvature)
        hl = rng.standard_normal(n_x + n_u) * 0.5
        hamp = rng.standard_normal() * 0.2
        hw = rng.standard_normal(n_x + n_u) * 0.5

        def h(x, u, hq=hq.tolist(), hl=hl, hamp=hamp, hw=hw):
            z = list(x) + list(u)
            acc = 0.0
            arg = 0.0
            for i, zi in enumerate(z):
                acc = acc + hl[i] * zi
                arg = arg + hw[i] * zi
                for j, zj in enumerate(z):
                    acc = acc + 0.5 * hq[i][j] * zi * zj
            return acc + hamp * ad.cos(arg)

        dyn.append(f)
        costs.append(h)

    Hf = random_spd(rng, n_x, 1.0)
    pf = rng.standard_normal(n_x) * 0.5
    famp = rng.standard_normal() * 0.2
    fw = rng.standard_normal(n_x) * 0.5

    def final(x, Hf=Hf.tolist(), pf=pf, famp=famp, fw=fw):
        acc = 0.0
        arg = 0.0
        for i, xi in enumerate(x):
            acc = acc + pf[i] * xi
            arg = arg + fw[i] * xi
            for j, xj in enumerate(x):
                acc = acc + 0.5 * Hf[i][j] * xi * xj
        return acc + famp * ad.sin(arg)

    return TrajectoryProblem(
        dynamics=tuple(dyn),
        running_costs=tuple(costs),
        final_cost=final,
        x0=rng.standard_normal(n_x) * 0.5,
        n_x=n_x,
        n_u=n_u,
    )


def fd_jacobian(g, z, h=1e-5):
    """Central finite-difference Jacobian, the independent derivative check."""
    z = np.asarray(z, dtype=float)
    out0 = np.atleast_1d(np.asarray(g(list(z)), dtype=float))
    jac = np.zeros((out0.size, z.size))
    for j in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        fp = np.atleast_1d(np.asarray(g(list(zp)), dtype=float))
        fm = np.atleast_1d(np.asarray(g(list(zm)), dtype=float))
        jac[:, j] = (fp - fm) / (2.0 * h)
    return jac


def fd_hessian(g, z, h=1e-4):
    """Central finite-difference Hessian of a scalar function."""
    z = np.asarray(z, dtype=float)
    m = z.size
    hess = np.zeros((m, m))
    for i in range(m):
        for j in range(i, m):

            def val(di, dj):
                zz = z.copy()
                zz[i] += di
                zz[j] += dj
                return float(g(list(zz)))

            hess[i, j] = (val(h, h) - val(h, -h) - val(-h, h) + val(-h, -h)) / (4 * h * h)
            hess[j, i] = hess[i, j]
    return hess


def env_interior_point(env, rng, problem):
    """Random evaluation point inside the model's admissible region."""
    z = rng.uniform(-0.5, 0.5, problem.n_x + problem.n_u)
    if env == "bicycle-car":
        z[3] = rng.uniform(0.8, 2.5)  # forward speed
        z[6] = rng.uniform(0.5, 3.0)  # stay inside the spline domain
        z[7] = rng.uniform(0.5, 3.0)  # curve-parameter rate (log barrier)
    return z


def concave_stage_problem(a: float = 500.0, tau: int = 10, delta: float = 0.1):
    """Integrator chain whose stage costs are concave in the control.

    For a * delta^2 / 4 > 1 the overall objective is still strongly convex
    in the stacked controls, so the exact second-order step solves it even
    though every per-stage control curvature is negative.
    """
    f = linear_dynamics([[1.0]], [[delta]])

    def running(x, u):
        return delta * (a * x[0] * x[0] - u[0] * u[0])

    return TrajectoryProblem(
        dynamics=(f,) * tau,
        running_costs=(running,) * tau,
        final_cost=lambda x: a * x[0] * x[0],
        x0=[0.0],
        n_x=1,
        n_u=1,
        meta={"a": a, "delta": delta},
    )
