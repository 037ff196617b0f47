"""Second-order forward-mode differentiation on scalar computation graphs.

Models (dynamics and costs) are plain Python callables over sequences of
scalar-like values.  Evaluated on floats they return floats; evaluated on
:class:`HyperDual` numbers they carry exact first and second derivatives
along a batch of direction pairs.  The math functions in this module
(``sin``, ``exp``, ``arctan2``, ``smoothmax`` ...) dispatch on the argument
type so the same model code serves both paths.

A hyper-dual number stores, next to its value, three arrays of length k:
``d1[i]`` and ``d2[i]`` are directional derivatives along the i-th pair of
seed directions and ``d12[i]`` is the mixed second derivative along that
pair.  One evaluation therefore yields k second derivatives at once; no
truncation error is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError, UnsupportedPrimitiveError

__all__ = [
    "HyperDual",
    "DerivativeRequest",
    "jacobian",
    "gradient",
    "hessian",
    "value_gradient_hessian",
    "vector_hessian",
    "lambda_hessian",
    "sin",
    "cos",
    "tan",
    "arctan",
    "arctan2",
    "exp",
    "log",
    "sqrt",
    "sigmoid",
    "smoothmax",
    "power",
]


class HyperDual:
    """Scalar with two first-order and one mixed second-order slot.

    The derivative slots are numpy arrays of a common length k so that k
    direction pairs are propagated per evaluation.  Instances are treated
    as immutable; the slot arrays must never be mutated in place.
    """

    __slots__ = ("value", "d1", "d2", "d12")

    def __init__(self, value, d1, d2, d12):
        self.value = value
        self.d1 = d1
        self.d2 = d2
        self.d12 = d12

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(
                self.value + other.value,
                self.d1 + other.d1,
                self.d2 + other.d2,
                self.d12 + other.d12,
            )
        return HyperDual(self.value + other, self.d1, self.d2, self.d12)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(
                self.value - other.value,
                self.d1 - other.d1,
                self.d2 - other.d2,
                self.d12 - other.d12,
            )
        return HyperDual(self.value - other, self.d1, self.d2, self.d12)

    def __rsub__(self, other):
        return HyperDual(other - self.value, -self.d1, -self.d2, -self.d12)

    def __neg__(self):
        return HyperDual(-self.value, -self.d1, -self.d2, -self.d12)

    def __mul__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(
                self.value * other.value,
                self.value * other.d1 + self.d1 * other.value,
                self.value * other.d2 + self.d2 * other.value,
                self.value * other.d12
                + self.d1 * other.d2
                + self.d2 * other.d1
                + self.d12 * other.value,
            )
        return HyperDual(self.value * other, self.d1 * other, self.d2 * other, self.d12 * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, HyperDual):
            return self * other._reciprocal()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def _reciprocal(self):
        v = self.value
        iv = 1.0 / v
        return _unary(self, iv, -iv * iv, 2.0 * iv * iv * iv)

    def __pow__(self, p):
        return power(self, p)

    # -- comparisons on the value (used by branchless-at-second-order code) --

    def __lt__(self, other):
        return self.value < _val(other)

    def __le__(self, other):
        return self.value <= _val(other)

    def __gt__(self, other):
        return self.value > _val(other)

    def __ge__(self, other):
        return self.value >= _val(other)

    def __float__(self):
        raise UnsupportedPrimitiveError(
            "a hyper-dual number was coerced to float; the model uses an "
            "operation outside the supported primitives (+,-,*,/, sin, cos, "
            "tan, arctan, arctan2, exp, log, sqrt, sigmoid, smoothmax, power)"
        )

    def __repr__(self):
        return f"HyperDual({self.value!r}, d1={self.d1!r}, d2={self.d2!r}, d12={self.d12!r})"


def _val(x):
    return x.value if isinstance(x, HyperDual) else x


def _unary(x: HyperDual, f: float, fp: float, fpp: float) -> HyperDual:
    """Chain rule for a scalar primitive with derivatives fp, fpp at x.value."""
    return HyperDual(f, fp * x.d1, fp * x.d2, fp * x.d12 + fpp * (x.d1 * x.d2))


# -- primitives ------------------------------------------------------------


def sin(x):
    if isinstance(x, HyperDual):
        s, c = math.sin(x.value), math.cos(x.value)
        return _unary(x, s, c, -s)
    return math.sin(x)


def cos(x):
    if isinstance(x, HyperDual):
        s, c = math.sin(x.value), math.cos(x.value)
        return _unary(x, c, -s, -c)
    return math.cos(x)


def tan(x):
    if isinstance(x, HyperDual):
        t = math.tan(x.value)
        fp = 1.0 + t * t
        return _unary(x, t, fp, 2.0 * t * fp)
    return math.tan(x)


def arctan(x):
    if isinstance(x, HyperDual):
        v = x.value
        fp = 1.0 / (1.0 + v * v)
        return _unary(x, math.atan(v), fp, -2.0 * v * fp * fp)
    return math.atan(x)


def arctan2(y, x):
    """Two-argument arctangent, differentiable away from the origin."""
    yv, xv = _val(y), _val(x)
    if yv == 0.0 and xv == 0.0:
        raise DomainError("arctan2", (yv, xv))
    if not isinstance(y, HyperDual) and not isinstance(x, HyperDual):
        return math.atan2(y, x)
    k = y.d1.shape if isinstance(y, HyperDual) else x.d1.shape
    zeros = np.zeros(k)
    yd = y if isinstance(y, HyperDual) else HyperDual(yv, zeros, zeros, zeros)
    xd = x if isinstance(x, HyperDual) else HyperDual(xv, zeros, zeros, zeros)
    r2 = xv * xv + yv * yv
    gy = xv / r2
    gx = -yv / r2
    r4 = r2 * r2
    hyy = -2.0 * xv * yv / r4
    hxx = 2.0 * xv * yv / r4
    hyx = (yv * yv - xv * xv) / r4
    d1 = gy * yd.d1 + gx * xd.d1
    d2 = gy * yd.d2 + gx * xd.d2
    d12 = (
        gy * yd.d12
        + gx * xd.d12
        + hyy * yd.d1 * yd.d2
        + hyx * (yd.d1 * xd.d2 + xd.d1 * yd.d2)
        + hxx * xd.d1 * xd.d2
    )
    return HyperDual(math.atan2(yv, xv), d1, d2, d12)


def exp(x):
    if isinstance(x, HyperDual):
        e = math.exp(x.value)
        return _unary(x, e, e, e)
    return math.exp(x)


def log(x):
    v = _val(x)
    if v <= 0.0:
        raise DomainError("log", v)
    if isinstance(x, HyperDual):
        iv = 1.0 / v
        return _unary(x, math.log(v), iv, -iv * iv)
    return math.log(x)


def sqrt(x):
    v = _val(x)
    if v < 0.0:
        raise DomainError("sqrt", v)
    if isinstance(x, HyperDual):
        r = math.sqrt(v)
        return _unary(x, r, 0.5 / r, -0.25 / (r * v))
    return math.sqrt(x)


def _sigmoid_value(v: float) -> float:
    if v >= 0.0:
        return 1.0 / (1.0 + math.exp(-v))
    e = math.exp(v)
    return e / (1.0 + e)


def sigmoid(x):
    if isinstance(x, HyperDual):
        s = _sigmoid_value(x.value)
        fp = s * (1.0 - s)
        return _unary(x, s, fp, fp * (1.0 - 2.0 * s))
    return _sigmoid_value(x)


def _softplus_value(v: float) -> float:
    if v > 0.0:
        return v + math.log1p(math.exp(-v))
    return math.log1p(math.exp(v))


def smoothmax(x, sharpness: float = 0.01):
    """Smooth approximation of max(x, 0): sharpness * softplus(x / sharpness).

    Tends to the exact hinge as ``sharpness`` goes to 0; the value at the
    kink is sharpness*log(2).
    """
    if sharpness <= 0.0:
        raise ParameterError(f"smoothmax sharpness must be > 0, got {sharpness}")
    if isinstance(x, HyperDual):
        z = x.value / sharpness
        s = _sigmoid_value(z)
        return _unary(x, sharpness * _softplus_value(z), s, s * (1.0 - s) / sharpness)
    return sharpness * _softplus_value(x / sharpness)


def power(x, p):
    """x**p for a constant real exponent p."""
    if isinstance(p, HyperDual):
        raise UnsupportedPrimitiveError("power supports constant exponents only")
    if not isinstance(x, HyperDual):
        return x**p
    v = x.value
    if v < 0.0 and p != round(p):
        raise DomainError("power", v)
    f = v**p
    fp = p * v ** (p - 1) if p != 0 else 0.0
    fpp = p * (p - 1) * v ** (p - 2) if p not in (0, 1) else 0.0
    return _unary(x, f, fp, fpp)


# -- derivative extraction --------------------------------------------------


@dataclass(frozen=True)
class DerivativeRequest:
    """Order of derivative information to collect for one model.

    ``lam`` is a contraction vector for second-order dynamics information;
    it is only meaningful at order 2.
    """

    order: int
    lam: np.ndarray | None = None

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ParameterError(f"derivative order must be 0, 1 or 2, got {self.order}")
        if self.lam is not None and self.order != 2:
            raise ParameterError("a contraction vector requires order 2")


def _seed_first_order(z: np.ndarray) -> list[HyperDual]:
    m = z.size
    eye = np.eye(m)
    zeros = np.zeros(m)
    return [HyperDual(float(z[a]), eye[a], zeros, zeros) for a in range(m)]


def _pair_indices(m: int) -> tuple[np.ndarray, np.ndarray]:
    pi, pj = np.triu_indices(m)
    return pi, pj


def _seed_second_order(z: np.ndarray) -> tuple[list[HyperDual], np.ndarray, np.ndarray]:
    m = z.size
    pi, pj = _pair_indices(m)
    k = pi.size
    d1 = (pi[None, :] == np.arange(m)[:, None]).astype(float)
    d2 = (pj[None, :] == np.arange(m)[:, None]).astype(float)
    zeros = np.zeros(k)
    inputs = [HyperDual(float(z[a]), d1[a], d2[a], zeros) for a in range(m)]
    return inputs, pi, pj


def _as_output_list(out) -> list:
    if isinstance(out, (list, tuple)):
        return list(out)
    return [out]


def jacobian(g, z) -> np.ndarray:
    """Exact Jacobian of ``g`` at ``z`` via one batched forward sweep.

    ``g`` maps a sequence of m scalars to a scalar or a sequence of n
    scalars; the result has shape (n, m).
    """
    z = np.asarray(z, dtype=float).ravel()
    out = _as_output_list(g(_seed_first_order(z)))
    rows = [o.d1 if isinstance(o, HyperDual) else np.zeros(z.size) for o in out]
    return np.array(rows, dtype=float)


def gradient(g, z) -> np.ndarray:
    """Gradient of a scalar-valued ``g`` at ``z``, shape (m,)."""
    return jacobian(g, z)[0]


def value_gradient_hessian(g, z) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and symmetric Hessian of scalar ``g`` in one sweep batch."""
    z = np.asarray(z, dtype=float).ravel()
    m = z.size
    inputs, pi, pj = _seed_second_order(z)
    out = g(inputs)
    if not isinstance(out, HyperDual):
        return float(out), np.zeros(m), np.zeros((m, m))
    hess = np.zeros((m, m))
    hess[pi, pj] = out.d12
    hess[pj, pi] = out.d12
    grad = np.zeros(m)
    diag = pi == pj
    grad[pi[diag]] = out.d1[diag]
    return out.value, grad, hess


def hessian(g, z) -> np.ndarray:
    """Exact symmetric Hessian of scalar-valued ``g`` at ``z``, shape (m, m)."""
    return value_gradient_hessian(g, z)[2]


def vector_hessian(f, z) -> np.ndarray:
    """Per-output Hessians of ``f`` at ``z``, shape (n, m, m)."""
    z = np.asarray(z, dtype=float).ravel()
    m = z.size
    inputs, pi, pj = _seed_second_order(z)
    out = _as_output_list(f(inputs))
    hess = np.zeros((len(out), m, m))
    for i, o in enumerate(out):
        if isinstance(o, HyperDual):
            hess[i][pi, pj] = o.d12
            hess[i][pj, pi] = o.d12
    return hess


def lambda_hessian(f, z, lam) -> np.ndarray:
    """Hessian of the scalar z -> f(z)^T lam, shape (m, m).

    Costs one batched sweep over the m(m+1)/2 direction pairs regardless of
    the output dimension of ``f``; the full second-derivative tensor of
    ``f`` is never materialized.
    """
    z = np.asarray(z, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float).ravel()
    if not np.all(np.isfinite(lam)):
        raise ParameterError("contraction vector must be finite")
    m = z.size
    inputs, pi, pj = _seed_second_order(z)
    out = _as_output_list(f(inputs))
    if len(out) != lam.size:
        raise ParameterError(
            f"contraction vector has size {lam.size}, expected {len(out)} outputs"
        )
    d12 = np.zeros(pi.size)
    for li, o in zip(lam, out):
        if isinstance(o, HyperDual):
            d12 = d12 + li * o.d12
    hess = np.zeros((m, m))
    hess[pi, pj] = d12
    hess[pj, pi] = d12
    return hess
