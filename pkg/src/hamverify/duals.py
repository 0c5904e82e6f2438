"""Second-order forward-mode dual numbers.

A ``Dual2`` carries a value, a gradient vector and a Hessian matrix and
propagates all three exactly through arithmetic via the chain rule.  Seeding
variable ``v`` with ``(value, e_v, 0)`` and evaluating any composition of the
supported operations yields the value, gradient and Hessian of that
composition at the seed point, up to round-off only.

The module-level math functions (``sin``, ``atan2``, ...) accept both plain
floats and ``Dual2`` operands, so ordinary Python callables written against
them are differentiable without modification.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EvalError

__all__ = [
    "Dual2",
    "seed_variables",
    "sin",
    "cos",
    "tan",
    "exp",
    "log",
    "sqrt",
    "atan2",
    "fabs",
]


class Dual2:
    """Truncated second-order Taylor coefficient triple (value, first, second)."""

    __slots__ = ("value", "first", "second")

    def __init__(self, value: float, first: np.ndarray, second: np.ndarray):
        self.value = value
        self.first = first
        self.second = second

    @classmethod
    def constant(cls, value: float, nvars: int) -> "Dual2":
        return cls(float(value), np.zeros(nvars), np.zeros((nvars, nvars)))

    @classmethod
    def variable(cls, value: float, index: int, nvars: int) -> "Dual2":
        first = np.zeros(nvars)
        first[index] = 1.0
        return cls(float(value), first, np.zeros((nvars, nvars)))

    def __repr__(self):
        return f"Dual2({self.value!r}, grad={self.first!r})"

    # -- arithmetic ------------------------------------------------------

    def __neg__(self):
        return Dual2(-self.value, -self.first, -self.second)

    def __add__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.value + other.value, self.first + other.first,
                         self.second + other.second)
        return Dual2(self.value + other, self.first, self.second)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.value - other.value, self.first - other.first,
                         self.second - other.second)
        return Dual2(self.value - other, self.first, self.second)

    def __rsub__(self, other):
        return Dual2(other - self.value, -self.first, -self.second)

    def __mul__(self, other):
        if isinstance(other, Dual2):
            cross = np.outer(self.first, other.first)
            return Dual2(self.value * other.value,
                         self.first * other.value + other.first * self.value,
                         self.second * other.value + other.second * self.value
                         + cross + cross.T)
        return Dual2(self.value * other, self.first * other, self.second * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            return self * other._reciprocal()
        if other == 0.0:
            raise ZeroDivisionError("division by zero")
        return Dual2(self.value / other, self.first / other, self.second / other)

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def _reciprocal(self):
        if self.value == 0.0:
            raise ZeroDivisionError("division by zero")
        w = 1.0 / self.value
        outer = np.outer(self.first, self.first)
        return Dual2(w, -w * w * self.first,
                     -w * w * self.second + 2.0 * w ** 3 * outer)

    def __pow__(self, exponent):
        if isinstance(exponent, Dual2):
            # u^v = exp(v * log(u)); requires u > 0
            return exp(exponent * log(self))
        if isinstance(exponent, int) or float(exponent).is_integer():
            return self._int_pow(int(exponent))
        if self.value <= 0.0:
            raise EvalError(f"{self.value} cannot be raised to fractional power {exponent}")
        r = float(exponent)
        return self._chain(self.value ** r,
                           r * self.value ** (r - 1.0),
                           r * (r - 1.0) * self.value ** (r - 2.0))

    def _int_pow(self, k: int):
        if k == 0:
            return Dual2.constant(1.0, len(self.first))
        if k == 1:
            return Dual2(self.value, self.first.copy(), self.second.copy())
        if k < 0 and self.value == 0.0:
            raise ZeroDivisionError("0 raised to a negative power")
        v = self.value
        return self._chain(v ** k, k * v ** (k - 1), k * (k - 1) * v ** (k - 2))

    def _chain(self, f: float, df: float, d2f: float) -> "Dual2":
        """Compose with a scalar function given f, f', f'' at self.value."""
        return Dual2(f, df * self.first,
                     df * self.second + d2f * np.outer(self.first, self.first))

    def __abs__(self):
        s = 1.0 if self.value > 0.0 else (-1.0 if self.value < 0.0 else 0.0)
        return self._chain(abs(self.value), s, 0.0)


def seed_variables(values, nvars: int | None = None) -> list:
    """Seed a list of values as independent Dual2 variables."""
    values = [float(v) for v in values]
    n = len(values) if nvars is None else nvars
    return [Dual2.variable(v, i, n) for i, v in enumerate(values)]


def _lift(fn_float, name):
    def wrapper(x):
        if isinstance(x, Dual2):
            return _DUAL_RULES[name](x)
        return fn_float(x)

    wrapper.__name__ = name
    return wrapper


def _dual_sin(u):
    return u._chain(math.sin(u.value), math.cos(u.value), -math.sin(u.value))


def _dual_cos(u):
    return u._chain(math.cos(u.value), -math.sin(u.value), -math.cos(u.value))


def _dual_tan(u):
    t = math.tan(u.value)
    return u._chain(t, 1.0 + t * t, 2.0 * t * (1.0 + t * t))


def _dual_exp(u):
    e = math.exp(u.value)
    return u._chain(e, e, e)


def _dual_log(u):
    if u.value <= 0.0:
        raise EvalError(f"log of non-positive value {u.value}")
    w = 1.0 / u.value
    return u._chain(math.log(u.value), w, -w * w)


def _dual_sqrt(u):
    if u.value < 0.0:
        raise EvalError(f"sqrt of negative value {u.value}")
    s = math.sqrt(u.value)
    if s == 0.0:
        raise EvalError("sqrt not differentiable at 0")
    return u._chain(s, 0.5 / s, -0.25 / (s * u.value))


_DUAL_RULES = {
    "sin": _dual_sin,
    "cos": _dual_cos,
    "tan": _dual_tan,
    "exp": _dual_exp,
    "log": _dual_log,
    "sqrt": _dual_sqrt,
}

sin = _lift(math.sin, "sin")
cos = _lift(math.cos, "cos")
tan = _lift(math.tan, "tan")
exp = _lift(math.exp, "exp")
log = _lift(math.log, "log")
sqrt = _lift(math.sqrt, "sqrt")


def fabs(x):
    if isinstance(x, Dual2):
        return abs(x)
    return abs(x)


def atan2(y, x):
    """Two-argument arctangent for float or Dual2 operands."""
    if not isinstance(y, Dual2) and not isinstance(x, Dual2):
        return math.atan2(y, x)
    if not isinstance(y, Dual2):
        y = Dual2.constant(y, len(x.first))
    if not isinstance(x, Dual2):
        x = Dual2.constant(x, len(y.first))
    r2 = x.value * x.value + y.value * y.value
    if r2 == 0.0:
        raise EvalError("atan2 undefined at (0, 0)")
    v = math.atan2(y.value, x.value)
    fy = x.value / r2
    fx = -y.value / r2
    r4 = r2 * r2
    fyy = -2.0 * x.value * y.value / r4
    fyx = (y.value * y.value - x.value * x.value) / r4
    fxx = 2.0 * x.value * y.value / r4
    first = fy * y.first + fx * x.first
    oyy = np.outer(y.first, y.first)
    oxx = np.outer(x.first, x.first)
    oyx = np.outer(y.first, x.first)
    second = (fy * y.second + fx * x.second
              + fyy * oyy + fxx * oxx + fyx * (oyx + oyx.T))
    return Dual2(v, first, second)
