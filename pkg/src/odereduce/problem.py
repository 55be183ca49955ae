"""Problem records and the original-equation evaluators used for verification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

import numpy as np

from .dual import Dual2, DualBackend, lift, univariate
from .errors import DomainError, LeadingCoefficientVanished, StructureMismatch
from .expr import Expr, Func, Variable, compile_expr, evaluate, lambdify, parse, substitute

# |a2| below this is treated as a vanishing leading coefficient
LEADING_FLOOR = 1e-13

KINDS = ("chebyshev_type", "linear_weighted", "f_type", "quasilinear")


@dataclass(frozen=True)
class InitialConditions:
    x: float
    y: float
    yp: float


@dataclass
class OdeProblem:
    """A class-tagged second-order ODE.

    Coefficient expressions are stored as they appear in the original
    equation; the class-specific weights (``p`` or ``P``) are the user's claim
    about its structure, which the reducers verify by sampling.
    """

    kind: str
    domain: tuple[float, float]
    name: str = "problem"
    x0: Optional[float] = None
    ics: Optional[InitialConditions] = None
    p: Optional[Expr] = None
    P: Optional[Expr] = None
    a2: Optional[Expr] = None
    a1: Optional[Expr] = None
    a0: Optional[Expr] = None
    f: Optional[Expr] = None
    alpha: Any = None
    beta: Any = None
    h: Optional[Expr] = None
    forcing: Any = None
    fspec: Any = None
    equation: Optional[Expr] = None
    mu: Optional[Expr] = None
    linear: bool = False
    constants: Optional[tuple[float, float]] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem class {self.kind!r}")
        a, b = self.domain
        if not a < b:
            raise ValueError(f"domain ({a}, {b}) must satisfy a < b")
        if self.ics is not None and not a <= self.ics.x <= b:
            raise ValueError(f"initial point {self.ics.x} lies outside the domain")

    def anchor(self) -> float:
        """Default lower limit of the t-transform."""
        if self.x0 is not None:
            return self.x0
        if self.ics is not None:
            return self.ics.x
        return 0.5 * (self.domain[0] + self.domain[1])


# ------------------------------------------------------------ equations

class Equation:
    """Residual R(x, y, y', y'') of an original equation, linear in y''."""

    label = "equation"

    def residual(self, x: float, y: float, yp: float, ypp: float) -> float:
        raise NotImplementedError

    def leading(self, x: float, y: float, yp: float) -> float:
        raise NotImplementedError

    def solve_ypp(self, x: float, y: float, yp: float) -> float:
        a = self.leading(x, y, yp)
        if not math.isfinite(a) or abs(a) <= LEADING_FLOOR:
            raise LeadingCoefficientVanished(
                f"leading coefficient vanishes at x={x!r}", operation="integrate_ivp",
                point={"x": x, "y": y, "yp": yp})
        ypp = -self.residual(x, y, yp, 0.0) / a
        # one correction absorbs rounding when R is only nearly linear in y''
        ypp -= self.residual(x, y, yp, ypp) / a
        return ypp


class ExprEquation(Equation):
    """Equation given as one expression in the variables x, y, yp, ypp."""

    NAMES = ("x", "y", "yp", "ypp")

    def __init__(self, expr: Expr, label: str = "equation"):
        self.expr = expr
        self.label = label
        self._f = compile_expr(expr, self.NAMES)
        self._d = compile_expr(expr, self.NAMES, DualBackend)

    def residual(self, x, y, yp, ypp):
        return float(self._f((x, y, yp, ypp)))

    def leading(self, x, y, yp):
        out = lift(self._d((Dual2(x), Dual2(y), Dual2(yp), Dual2(0.0, 1.0))))
        return out.d1

    def __str__(self):
        return f"{self.expr} = 0"


class FTypeEquation(Equation):
    """a2 (f'(y) y'' + f''(y) y'^2) + a1 f'(y) y' + a0 f(y) - g(x), f given by an FSpec.

    ``a2`` and ``a1`` may be expressions in x (the p(x) variant).
    """

    def __init__(self, a2: Expr, a1: Expr, a0: Expr, g: Expr, f_expr: Expr,
                 label: str = "f-type equation"):
        self.label = label
        self._a2 = lambdify(a2, ("x",))
        self._a1 = lambdify(a1, ("x",))
        self._a0 = lambdify(a0, ("x",))
        self._g = lambdify(g, ("x",))
        self._f = univariate(f_expr, "y")

    def residual(self, x, y, yp, ypp):
        fy = self._f(Dual2(y, 1.0))
        f0, f1, f2 = fy.value, fy.d1, fy.d2
        return (self._a2(x) * (f1 * ypp + f2 * yp * yp) + self._a1(x) * f1 * yp
                + self._a0(x) * f0 - self._g(x))

    def leading(self, x, y, yp):
        return self._a2(x) * self._f(Dual2(y, 1.0)).d1


def chebyshev_residual(a2: Expr, a1: Expr, p: Expr, f: Expr) -> Expr:
    """a2 y'' + a1 y' + f(sqrt(p) y', y) as an expression in x, y, yp, ypp."""
    y, yp, ypp = Variable("y"), Variable("yp"), Variable("ypp")
    inner = substitute(f, {"y_t": Func("sqrt", p) * yp, "y": y})
    return a2 * ypp + a1 * yp + inner


def linear_residual(a2: Expr, a1: Expr, a0: Expr, h: Expr | None) -> Expr:
    y, yp, ypp = Variable("y"), Variable("yp"), Variable("ypp")
    out = a2 * ypp + a1 * yp + a0 * y
    return out - h if h is not None else out


def quasilinear_residual(a2: Expr, a1: Expr, a0: Expr) -> Expr:
    """a2 z'' + a1 z' + a0 with (z, zp) renamed to (y, yp)."""
    ren = {"z": Variable("y"), "zp": Variable("yp")}
    return (substitute(a2, ren) * Variable("ypp") + substitute(a1, ren) * Variable("yp")
            + substitute(a0, ren))


def parse_number(value) -> "Fraction | float":
    """Accept ints, floats and rational strings such as ``"4/3"``.

    Numeric literals become exact decimal rationals; anything else is
    parsed as a constant expression (``"sqrt(2)/3"``) and becomes a float.
    Rational inputs stay exact so that resonance tests can be decided
    without a tolerance.
    """
    if isinstance(value, bool):
        raise TypeError("boolean is not a number")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, Fraction):
        return value
    text = str(value).strip()
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        pass
    return evaluate(parse(text, ()), {})


class ChebyshevEquation(Equation):
    """p y'' + p'/2 y' + f(sqrt(p) y', y), with p' from AD."""

    def __init__(self, p: Expr, f: Expr, label: str = "chebyshev-type model"):
        self.label = label
        self._p = univariate(p, "x")
        self._f = lambdify(f, ("y", "y_t"))

    def residual(self, x, y, yp, ypp):
        P = self._p(Dual2(x, 1.0))
        return P.value * ypp + 0.5 * P.d1 * yp + self._f(y, math.sqrt(P.value) * yp)

    def leading(self, x, y, yp):
        return self._p(Dual2(x)).value


class WeightedLinearEquation(Equation):
    """P^2 y'' + P (alpha + P') y' + beta y - h(x)."""

    def __init__(self, P: Expr, alpha, beta, h: Optional[Expr] = None,
                 label: str = "linear weighted model"):
        self.label = label
        self._P = univariate(P, "x")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self._h = lambdify(h, ("x",)) if h is not None else (lambda x: 0.0)

    def residual(self, x, y, yp, ypp):
        P = self._P(Dual2(x, 1.0))
        return (P.value ** 2 * ypp + P.value * (self.alpha + P.d1) * yp + self.beta * y
                - self._h(x))

    def leading(self, x, y, yp):
        return self._P(Dual2(x)).value ** 2


def check_equation_match(raw: Equation, model: Equation, domain, samples: int = 24,
                         y_range=(-1.5, 1.5), rtol: float = 1e-9, seed: int = 7,
                         operation: str = "reduce_problem") -> int:
    """Compare two equations at random (x, y, y', y'') points; returns points compared."""
    from .reduction import chebyshev_points  # reduction imports this module

    rng = np.random.default_rng(seed)
    used = 0
    for x in chebyshev_points(domain[0], domain[1], samples):
        y = float(rng.uniform(*y_range))
        yp, ypp = (float(v) for v in rng.uniform(-1.5, 1.5, 2))
        try:
            u = raw.residual(x, y, yp, ypp)
            v = model.residual(x, y, yp, ypp)
        except DomainError:
            continue
        used += 1
        if abs(u - v) > rtol * max(1.0, abs(u), abs(v)):
            raise StructureMismatch(
                f"equation does not match the {model.label} at (x, y, y', y'') = "
                f"({x!r}, {y!r}, {yp!r}, {ypp!r}): {u!r} vs {v!r}",
                operation=operation, point={"x": x, "y": y, "yp": yp, "ypp": ypp})
    if used == 0:
        raise StructureMismatch("no sample point could evaluate both equations",
                                operation=operation)
    return used
