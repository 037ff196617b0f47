"""Iterative linear-quadratic solvers for discrete-time optimal control."""

from .core import (
    AffinePolicy,
    DynTensor,
    LinearMap,
    QuadraticCostModel,
    QuadraticValueFunction,
    TrajectoryProblem,
    evaluate_quadratic,
    finite_difference_dynamic,
    linear_dynamics,
    quadratic_cost,
    quadratic_state_cost,
)
from .lqsolve import LqStageProblem, ValidityReport, check_subproblem, dynprog, lbp, lqbp
from .oracles import (
    ORACLE_KINDS,
    ExpansionBundle,
    OracleDirection,
    backward_ddp_q,
    backward_gd,
    backward_gn,
    backward_ne,
    forward,
    objective_value,
    oracle,
    rollout,
)
from .dense import (
    dense_gauss_newton_matrix,
    dense_gradient,
    dense_hessian,
    smoothness_bounds,
    trajectory_jacobian,
)
from .linesearch import (
    LineSearchConfig,
    SolveTrace,
    StopCriteria,
    directional_search,
    regularized_search,
    solve,
    stationarity_residual,
)

__version__ = "0.1.0"
