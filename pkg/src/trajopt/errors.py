"""Exception types shared across the package."""

from __future__ import annotations


class TrajoptError(Exception):
    """Base class for all package errors."""


class ShapeError(TrajoptError, ValueError):
    """Dimension mismatch between vectors, matrices or problem parts."""


class ParameterError(TrajoptError, ValueError):
    """A scalar parameter is outside its admissible range."""


class ConfigError(TrajoptError, ValueError):
    """Invalid run configuration (CLI flags or config file)."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class NumericError(TrajoptError, ArithmeticError):
    """A numeric evaluation produced an invalid result."""


class DomainError(NumericError):
    """A differentiable primitive was evaluated outside its domain."""

    def __init__(self, primitive: str, value):
        super().__init__(f"{primitive} evaluated outside its domain (argument {value!r})")
        self.primitive = primitive
        self.value = value


class UnsupportedPrimitiveError(TrajoptError, TypeError):
    """A model used an operation the derivative engine does not support."""


class DivergenceError(NumericError):
    """A forward roll produced a non-finite state.

    Carries the time index ``t`` of the step that diverged.
    """

    def __init__(self, t: int, message: str = ""):
        detail = message or f"non-finite value while stepping dynamics at t={t}"
        super().__init__(detail)
        self.t = t
        # Optionally attached by the solver loop before re-raising.
        self.trace = None


class InfeasibleStageError(TrajoptError):
    """A Bellman stage could not be solved (control block not positive definite)."""

    def __init__(self, t: int | None, message: str = ""):
        where = "unknown stage" if t is None else f"stage t={t}"
        super().__init__(message or f"control-Hessian factorization failed at {where}")
        self.t = t


class StallError(TrajoptError):
    """A line search exhausted its stepsizes without acceptance.

    ``candidate`` holds the last tried iterate if it still decreased the
    objective (the caller may keep it), else None.
    """

    def __init__(self, gamma: float, candidate=None, candidate_cost: float | None = None):
        super().__init__(f"line search stalled (last stepsize {gamma:.3e})")
        self.gamma = gamma
        self.candidate = candidate
        self.candidate_cost = candidate_cost
