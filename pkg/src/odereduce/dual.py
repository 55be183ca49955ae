"""Second-order forward-mode automatic differentiation.

A :class:`Dual2` carries a value together with its first and second
derivatives along a single seed direction.  Feeding ``Dual2(y, yp, ypp)``
for a variable gives the derivatives of ``u(s)`` along the quadratic path
``y + yp*s + ypp*s^2/2``, which is how chain-rule identities such as
``(f(y))'' = f'(y) y'' + f''(y) y'^2`` are checked.
"""

from __future__ import annotations

import math
from typing import Mapping

from .errors import DivisionByZero, DomainError
from .expr import Expr, compile_expr


class Dual2:
    __slots__ = ("value", "d1", "d2")

    def __init__(self, value: float, d1: float = 0.0, d2: float = 0.0):
        self.value = float(value)
        self.d1 = float(d1)
        self.d2 = float(d2)

    def __repr__(self) -> str:
        return f"Dual2({self.value!r}, {self.d1!r}, {self.d2!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dual2):
            return NotImplemented
        return (self.value, self.d1, self.d2) == (other.value, other.d1, other.d2)

    __hash__ = None

    def __add__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.value + other.value, self.d1 + other.d1, self.d2 + other.d2)
        return Dual2(self.value + other, self.d1, self.d2)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.value - other.value, self.d1 - other.d1, self.d2 - other.d2)
        return Dual2(self.value - other, self.d1, self.d2)

    def __rsub__(self, other):
        return Dual2(other - self.value, -self.d1, -self.d2)

    def __neg__(self):
        return Dual2(-self.value, -self.d1, -self.d2)

    def __mul__(self, other):
        if isinstance(other, Dual2):
            a, b = self, other
            return Dual2(a.value * b.value,
                         a.d1 * b.value + a.value * b.d1,
                         a.d2 * b.value + 2.0 * a.d1 * b.d1 + a.value * b.d2)
        return Dual2(self.value * other, self.d1 * other, self.d2 * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return dual_div(self, other)

    def __rtruediv__(self, other):
        return dual_div(other, self)

    def chain(self, f0: float, f1: float, f2: float) -> "Dual2":
        """Apply a scalar function with value f0, derivative f1, second derivative f2."""
        return Dual2(f0, f1 * self.d1, f2 * self.d1 * self.d1 + f1 * self.d2)


def lift(u) -> Dual2:
    return u if isinstance(u, Dual2) else Dual2(u)


def _domain(name: str, u: float):
    return DomainError(f"{name}({u!r}) is outside the function domain",
                       operation="differentiate", argument=u)


def dual_div(a, b) -> Dual2:
    a, b = lift(a), lift(b)
    if b.value == 0.0:
        raise DivisionByZero("division by zero", operation="differentiate")
    inv = 1.0 / b.value
    return a * b.chain(inv, -inv * inv, 2.0 * inv * inv * inv)


def dual_pow(a, b) -> Dual2:
    a, b = lift(a), lift(b)
    if b.d1 == 0.0 and b.d2 == 0.0 and b.value.is_integer():
        n = int(b.value)
        if n == 0:
            return Dual2(1.0)
        u = a.value
        if u == 0.0:
            if n < 0:
                raise DivisionByZero("zero raised to a negative power",
                                     operation="differentiate")
            f1 = 1.0 if n == 1 else 0.0
            f2 = 2.0 if n == 2 else 0.0
            return a.chain(0.0, f1, f2)
        # u^(n-1) and u^(n-2) directly: f0/u underflows for tiny bases
        try:
            f0 = u ** n
            f1 = n * u ** (n - 1) if n != 1 else 1.0
            f2 = n * (n - 1) * u ** (n - 2) if n not in (1, 2) else (2.0 if n == 2 else 0.0)
        except (OverflowError, ZeroDivisionError):
            raise DomainError("overflow in power", operation="differentiate") from None
        return a.chain(f0, f1, f2)
    if a.value <= 0.0:
        raise DomainError(f"non-integer power of non-positive base {a.value!r}",
                          operation="differentiate")
    if b.d1 == 0.0 and b.d2 == 0.0:
        c = b.value
        u = a.value
        f0 = math.pow(u, c)
        return a.chain(f0, c * f0 / u, c * (c - 1.0) * f0 / (u * u))
    return _exp(b * _ln(a))


def _sin(u: Dual2) -> Dual2:
    s, c = math.sin(u.value), math.cos(u.value)
    return u.chain(s, c, -s)


def _cos(u: Dual2) -> Dual2:
    s, c = math.sin(u.value), math.cos(u.value)
    return u.chain(c, -s, -c)


def _tan(u: Dual2) -> Dual2:
    t = math.tan(u.value)
    sec2 = 1.0 + t * t
    return u.chain(t, sec2, 2.0 * t * sec2)


def _exp(u: Dual2) -> Dual2:
    try:
        e = math.exp(u.value)
    except OverflowError:
        raise DomainError(f"overflow in exp({u.value!r})", operation="differentiate") from None
    return u.chain(e, e, e)


def _ln(u: Dual2) -> Dual2:
    x = u.value
    if x <= 0.0:
        raise _domain("ln", x)
    return u.chain(math.log(x), 1.0 / x, -1.0 / (x * x))


def _sqrt(u: Dual2) -> Dual2:
    x = u.value
    if x < 0.0:
        raise _domain("sqrt", x)
    r = math.sqrt(x)
    if r == 0.0:
        if u.d1 == 0.0 and u.d2 == 0.0:
            return Dual2(0.0)
        raise DivisionByZero("sqrt is not differentiable at 0", operation="differentiate")
    return u.chain(r, 0.5 / r, -0.25 / (r * x))


def _asin(u: Dual2) -> Dual2:
    x = u.value
    if not -1.0 <= x <= 1.0:
        raise _domain("asin", x)
    q = 1.0 - x * x
    if q == 0.0:
        raise DivisionByZero("asin is not differentiable at +-1", operation="differentiate")
    r = math.sqrt(q)
    return u.chain(math.asin(x), 1.0 / r, x / (r * q))


def _acos(u: Dual2) -> Dual2:
    x = u.value
    if not -1.0 <= x <= 1.0:
        raise _domain("acos", x)
    q = 1.0 - x * x
    if q == 0.0:
        raise DivisionByZero("acos is not differentiable at +-1", operation="differentiate")
    r = math.sqrt(q)
    return u.chain(math.acos(x), -1.0 / r, -x / (r * q))


def _atan(u: Dual2) -> Dual2:
    x = u.value
    q = 1.0 / (1.0 + x * x)
    return u.chain(math.atan(x), q, -2.0 * x * q * q)


def _sinh(u: Dual2) -> Dual2:
    try:
        s, c = math.sinh(u.value), math.cosh(u.value)
    except OverflowError:
        raise DomainError("overflow in sinh", operation="differentiate") from None
    return u.chain(s, c, s)


def _cosh(u: Dual2) -> Dual2:
    try:
        s, c = math.sinh(u.value), math.cosh(u.value)
    except OverflowError:
        raise DomainError("overflow in cosh", operation="differentiate") from None
    return u.chain(c, s, c)


def _abs(u: Dual2) -> Dual2:
    sign = 1.0 if u.value >= 0.0 else -1.0
    return u.chain(abs(u.value), sign, 0.0)


def _lifted(fn):
    return lambda u: fn(lift(u))


class DualBackend:
    name = "dual2"
    div = staticmethod(dual_div)
    pow = staticmethod(dual_pow)
    functions = {name: _lifted(fn) for name, fn in {
        "sin": _sin, "cos": _cos, "tan": _tan, "exp": _exp, "ln": _ln, "sqrt": _sqrt,
        "asin": _asin, "acos": _acos, "atan": _atan, "sinh": _sinh, "cosh": _cosh,
        "abs": _abs,
    }.items()}

    @staticmethod
    def const(v: float):
        return Dual2(v)


def evaluate_dual(node: Expr, env: Mapping[str, float | Dual2]) -> Dual2:
    names = tuple(sorted(env))
    fn = compile_expr(node, names, DualBackend)
    return lift(fn(tuple(lift(env[n]) for n in names)))


def differentiate(node: Expr, wrt: str, env: Mapping[str, float], order: int = 1):
    """Derivative of ``node`` in the direction of variable ``wrt`` at ``env``.

    Returns ``(value, d1)`` for ``order=1`` and ``(value, d1, d2)`` for
    ``order=2``.  Other variables are held fixed, so this gives partials.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if wrt not in env:
        raise DomainError(f"variable {wrt!r} is not bound", operation="differentiate")
    seeded = {k: (Dual2(v, 1.0) if k == wrt else Dual2(v)) for k, v in env.items()}
    out = evaluate_dual(node, seeded)
    if order == 1:
        return out.value, out.d1
    return out.value, out.d1, out.d2


def partial(node: Expr, wrt: str, env: Mapping[str, float]) -> float:
    return differentiate(node, wrt, env, 1)[1]


def univariate(node: Expr, var: str):
    """Return ``g(u)`` giving a Dual2 of ``node`` with ``var`` bound to Dual2 ``u``."""
    fn = compile_expr(node, (var,), DualBackend)
    return lambda u: lift(fn((lift(u),)))
