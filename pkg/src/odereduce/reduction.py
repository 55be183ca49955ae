"""Change of independent variable t = ∫ dξ / w(ξ) and the reduced equations.

Two weights are supported: ``sqrt_p`` (w = √p, for p y'' + ½p' y' + f(√p y', y) = 0)
and ``direct_P`` (w = P, for P² y'' + P(α + P') y' + β y = h).
"""

from __future__ import annotations

import bisect
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .dual import differentiate, partial
from .errors import (DomainError, NegativeRadicand, NonPositiveWeight, OutOfRange,
                     StructureMismatch)
from .expr import Constant, Expr, Func, evaluate, lambdify, substitute, to_string
from .problem import InitialConditions, OdeProblem
from .quadrature import integrate

MIN_GRID = 512
PATTERN_SAMPLES = 32
PATTERN_RTOL = 1e-8
MODES = ("sqrt_p", "direct_P")


def chebyshev_points(a: float, b: float, n: int) -> list[float]:
    """Interior Chebyshev-Gauss points of (a, b), ascending."""
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return sorted(mid + half * math.cos((2 * j + 1) * math.pi / (2 * n)) for j in range(n))


class TransformMap:
    """Monotone map t(x) = ∫_{x0}^{x} dξ / w(ξ) on [a, b].

    Knot values are exact to the quadrature tolerance.  Off-knot values are
    computed by a short quadrature from the nearest knot; the cubic (PCHIP)
    interpolant is kept for fast approximate lookups and for seeding the
    inverse.
    """

    def __init__(self, weight: Expr, mode: str, domain: tuple[float, float], x0: float,
                 tol: float, xs: np.ndarray, ts: np.ndarray, interp_error: float):
        self.weight = weight
        self.mode = mode
        self.domain = domain
        self.x0 = x0
        self.tol = tol
        self.xs = xs
        self.ts = ts
        self.interp_error = interp_error
        self.w_expr = weight_expr(weight, mode)
        self._w = lambdify(self.w_expr, ("x",))
        self._cubic = PchipInterpolator(xs, ts, extrapolate=False)
        self._cubic_inv = PchipInterpolator(ts, xs, extrapolate=False)
        self._xl = xs.tolist()

    @property
    def t_range(self) -> tuple[float, float]:
        return float(self.ts[0]), float(self.ts[-1])

    def integrand(self, x: float) -> float:
        return 1.0 / self._w(x)

    def w(self, x: float) -> float:
        return self._w(x)

    def w_derivs(self, x: float) -> tuple[float, float, float]:
        return differentiate(self.w_expr, "x", {"x": x}, 2)

    def __call__(self, x: float) -> float:
        a, b = self.domain
        if not a <= x <= b:
            raise OutOfRange(f"x={x!r} outside the transform domain [{a}, {b}]",
                             operation="t", point=x)
        k = bisect.bisect_left(self._xl, x)
        if k < len(self._xl) and self._xl[k] == x:
            return float(self.ts[k])
        if k == 0:
            k = 1
        if k == len(self._xl):
            k -= 1
        # nearest knot, preferring one where the integrand is finite
        lo, hi = k - 1, k
        j = lo if (x - self._xl[lo]) <= (self._xl[hi] - x) else hi
        res = integrate(self.integrand, self._xl[j], x, self.tol * 1e-2)
        return float(self.ts[j]) + res.value

    t = __call__

    def interpolate(self, x: float) -> float:
        return float(self._cubic(x))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,t\n")
        for x, t in zip(self.xs, self.ts):
            buf.write(f"{float(x)!r},{float(t)!r}\n")
        return buf.getvalue()


def weight_expr(weight: Expr, mode: str) -> Expr:
    if mode == "sqrt_p":
        return Func("sqrt", weight)
    if mode == "direct_P":
        return weight
    raise ValueError(f"unknown weight mode {mode!r}")


def build_transform(weight: Expr, mode: str, domain: tuple[float, float], x0: float,
                    tol: float = 1e-10, n: int = MIN_GRID) -> TransformMap:
    a, b = float(domain[0]), float(domain[1])
    if not a <= x0 <= b:
        raise OutOfRange(f"x0={x0!r} outside [{a}, {b}]", operation="build_transform", point=x0)
    w = lambdify(weight_expr(weight, mode), ("x",))
    for x in chebyshev_points(a, b, 2 * PATTERN_SAMPLES):
        try:
            value = evaluate(weight, {"x": x})
        except DomainError as exc:
            raise NonPositiveWeight(f"weight undefined at interior point x={x!r}: {exc}",
                                    operation="build_transform", point=x) from None
        if not value > 0.0:
            raise NonPositiveWeight(f"weight {value!r} <= 0 at interior point x={x!r}",
                                    operation="build_transform", point=x)

    xs = np.linspace(a, b, max(n, MIN_GRID))
    if not np.any(xs == x0):
        xs = np.sort(np.append(xs, x0))
    g = lambda x: 1.0 / w(x)
    piece_tol = tol / len(xs)
    pieces = np.empty(len(xs) - 1)
    for k in range(len(xs) - 1):
        pieces[k] = integrate(g, float(xs[k]), float(xs[k + 1]), piece_tol).value
    if not np.all(pieces > 0.0):
        k = int(np.argmin(pieces > 0.0))
        raise NonPositiveWeight("transform is not strictly increasing",
                                operation="build_transform", point=float(xs[k]))
    ts = np.concatenate(([0.0], np.cumsum(pieces)))
    i0 = int(np.flatnonzero(xs == x0)[0])
    ts = ts - ts[i0]
    ts[i0] = 0.0

    tmap = TransformMap(weight, mode, (a, b), x0, tol, xs, ts, 0.0)
    rng = np.random.default_rng(20240601)
    errs = []
    for x in rng.uniform(a, b, 16):
        x = float(x)
        errs.append(abs(tmap(x) - tmap.interpolate(x)))
    tmap.interp_error = float(max(errs))
    return tmap


def invert_transform(tmap: TransformMap, t: float) -> float:
    """Unique x with t(x) = t, by knot bracketing refined with Newton steps."""
    lo_t, hi_t = tmap.t_range
    slack = 1e-12 * (1.0 + max(abs(lo_t), abs(hi_t)))
    if not lo_t - slack <= t <= hi_t + slack:
        raise OutOfRange(f"t={t!r} outside [{lo_t!r}, {hi_t!r}]",
                         operation="invert_transform", point=t)
    t = min(max(t, lo_t), hi_t)
    ts = tmap.ts
    k = int(np.searchsorted(ts, t))
    if k < len(ts) and ts[k] == t:
        return float(tmap.xs[k])
    k = min(max(k, 1), len(ts) - 1)
    xl, xr = float(tmap.xs[k - 1]), float(tmap.xs[k])
    x = float(tmap._cubic_inv(t))
    if not xl < x < xr:
        x = 0.5 * (xl + xr)
    goal = 1e-13 * (1.0 + abs(t))
    for _ in range(100):
        r = tmap(x) - t
        if abs(r) <= goal:
            return x
        if r > 0:
            xr = x
        else:
            xl = x
        try:
            step = r * tmap.w(x)
        except DomainError:
            step = math.nan
        xn = x - step
        if not (xl < xn < xr) or not math.isfinite(xn):
            xn = 0.5 * (xl + xr)
        if xn == x or xr - xl <= 4e-16 * max(1.0, abs(x)):
            break
        x = xn
    r = tmap(x) - t
    if abs(r) > 1e-10 * (1.0 + abs(t)):
        raise OutOfRange(f"inversion stalled at x={x!r} with |t(x)-t|={abs(r):.3g}",
                         operation="invert_transform", point=t)
    return x


# ------------------------------------------------------------ reduction

@dataclass
class ReducedIcs:
    t: float
    y: float
    v: float


@dataclass
class ReducedOde:
    """Reduced equation in t: either y_tt + f(y, y_t) = 0 or y_tt + α y_t + β y = H(t)."""

    form: str
    tmap: TransformMap
    f: Optional[Expr] = None
    alpha: object = None
    beta: object = None
    forcing: object = None
    ics: Optional[ReducedIcs] = None

    def describe(self) -> str:
        if self.form == "autonomous":
            body = to_string(self.f)
            if body.startswith("-"):
                return f"y_tt - {body[1:]} = 0"
            return f"y_tt + {body} = 0"
        return linear_cc_string(self.alpha, self.beta, self.forcing)

    def rhs(self):
        """y_tt as a function of (y, y_t) for the autonomous form."""
        f = lambdify(self.f, ("y", "y_t"))
        return lambda y, v: -f(y, v)

    def linear_coefficients(self, rtol: float = 1e-12):
        """Return (α, β, c) if f(y, y_t) = α y_t + β y + c on samples, else None."""
        if self.form != "autonomous":
            return None
        pts = [(-1.3, 0.7), (0.4, -2.1), (2.2, 1.9), (0.0, 0.0), (-0.6, -0.8), (1.1, 0.3)]
        coeffs = []
        try:
            for y, v in pts:
                env = {"y": y, "y_t": v}
                dv = partial(self.f, "y_t", env)
                dy = partial(self.f, "y", env)
                c = evaluate(self.f, env) - dv * v - dy * y
                coeffs.append((dv, dy, c))
        except DomainError:
            return None
        ref = coeffs[0]
        for row in coeffs[1:]:
            for u, r in zip(row, ref):
                if abs(u - r) > rtol * max(1.0, abs(r)):
                    return None
        return ref


def _fmt_num(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def linear_cc_string(alpha, beta, forcing, var: str = "t") -> str:
    out = "y_tt"
    for coef, term in ((alpha, "y_t"), (beta, "y")):
        c = float(coef)
        if c == 0.0:
            continue
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        out += f" {sign} {term}" if mag == 1.0 else f" {sign} {_fmt_num(mag)}*{term}"
    rhs = "0" if forcing is None or not forcing.terms else forcing.describe(var)
    return f"{out} = {rhs}"


def _close(u: float, v: float, rtol: float = PATTERN_RTOL) -> bool:
    return abs(u - v) <= rtol * max(abs(u), abs(v)) + 1e-14


def _pattern_check(label: str, points, lhs, rhs):
    for x in points:
        try:
            u, v = lhs(x), rhs(x)
        except DomainError as exc:
            raise StructureMismatch(f"{label}: coefficients undefined at x={x!r}: {exc}",
                                    operation="reduce_problem", point=x) from None
        if not _close(u, v):
            raise StructureMismatch(
                f"{label}: {u!r} != {v!r} at x={x!r}", operation="reduce_problem",
                point=x, lhs=u, rhs=v)


def reduce_problem(problem: OdeProblem, tmap: Optional[TransformMap] = None,
                   tol: float = 1e-10) -> ReducedOde:
    """Verify the class pattern by sampling, build t(x) and transform the equation."""
    a, b = problem.domain
    pts = chebyshev_points(a, b, PATTERN_SAMPLES)
    if problem.kind == "chebyshev_type":
        p = problem.p
        a2 = problem.a2 if problem.a2 is not None else p
        _pattern_check("y'' coefficient must equal p(x)", pts,
                       lambda x: evaluate(a2, {"x": x}), lambda x: evaluate(p, {"x": x}))
        if problem.a1 is not None:
            _pattern_check("y' coefficient must equal p'(x)/2", pts,
                           lambda x: evaluate(problem.a1, {"x": x}),
                           lambda x: 0.5 * partial(p, "x", {"x": x}))
        extra = problem.f.variables() - {"y", "y_t"}
        if extra:
            raise StructureMismatch(
                f"f(y, y_t) may not depend on {sorted(extra)}; the reduced form "
                f"must be autonomous", operation="reduce_problem")
        if tmap is None:
            tmap = build_transform(p, "sqrt_p", problem.domain, problem.anchor(), tol)
        ics = _transfer(problem.ics, tmap)
        return ReducedOde("autonomous", tmap, f=problem.f, ics=ics)

    if problem.kind == "linear_weighted":
        P = problem.P
        alpha, beta = problem.alpha, problem.beta
        if problem.a2 is not None:
            _pattern_check("y'' coefficient must equal P(x)^2", pts,
                           lambda x: evaluate(problem.a2, {"x": x}),
                           lambda x: evaluate(P, {"x": x}) ** 2)
        if problem.a1 is not None:
            def expected(x):
                val, der = differentiate(P, "x", {"x": x})
                return val * (float(alpha) + der)
            _pattern_check("y' coefficient must equal P(x)(alpha + P'(x))", pts,
                           lambda x: evaluate(problem.a1, {"x": x}), expected)
        if problem.a0 is not None:
            _pattern_check("y coefficient must equal beta", pts,
                           lambda x: evaluate(problem.a0, {"x": x}), lambda x: float(beta))
        if tmap is None:
            tmap = build_transform(P, "direct_P", problem.domain, problem.anchor(), tol)
        if problem.h is not None and problem.forcing is not None:
            forcing = problem.forcing
            _pattern_check("forcing h(x) must equal H(t(x))", pts,
                           lambda x: evaluate(problem.h, {"x": x}),
                           lambda x: forcing.evaluate(tmap(x)))
        ics = _transfer(problem.ics, tmap)
        return ReducedOde("linear_cc", tmap, alpha=alpha, beta=beta,
                          forcing=problem.forcing, ics=ics)

    raise StructureMismatch(f"class {problem.kind!r} is not handled by the t-reduction",
                            operation="reduce_problem")


def _transfer(ics: Optional[InitialConditions], tmap: TransformMap) -> Optional[ReducedIcs]:
    if ics is None:
        return None
    w = tmap.w(ics.x)
    return ReducedIcs(tmap(ics.x), ics.y, w * ics.yp)


# ------------------------------------------------------- energy integral

@dataclass
class EnergyIntegral:
    """v(y)^2 = c - 2 F(y) for y_tt + f(y) = 0, with F(y0) = 0."""

    f: Expr
    y0: float
    v0: float
    c: float
    sign: float
    tol: float = 1e-12

    def F(self, y: float) -> float:
        g = lambdify(self.f, ("y",))
        return integrate(g, self.y0, y, self.tol).value

    def v_squared(self, y: float) -> float:
        return self.c - 2.0 * self.F(y)

    def v(self, y: float) -> float:
        r = self.v_squared(y)
        if r < 0.0:
            if r < -1e-12 * max(1.0, abs(self.c)):
                raise NegativeRadicand(f"c - 2F(y) = {r!r} < 0 at y={y!r}",
                                       operation="energy_first_integral", point=y)
            r = 0.0
        return self.sign * math.sqrt(r)


@dataclass
class DampingIntegral:
    """y_t + G(y) = c for y_tt + g(y) y_t = 0, with G(y0) = 0 and c = v0."""

    g: Expr
    y0: float
    c: float
    tol: float = 1e-12

    def __post_init__(self):
        self._g = lambdify(self.g, ("y",))

    def G(self, y: float) -> float:
        return integrate(self._g, self.y0, y, self.tol).value

    def derivatives(self, y: float) -> tuple[float, float]:
        """(y_t, y_tt) on the level set through the initial point."""
        v = self.c - self.G(y)
        return v, -self._g(y) * v


def damping_first_integral(f: Expr, y0: float, v0: float, tol: float = 1e-12,
                           rtol: float = 1e-12) -> Optional[DampingIntegral]:
    """The first integral of y_tt + f(y, y_t) = 0 when f = g(y) y_t, else None.

    The product form is decided by sampling f(y, v) - v f(y, 1) at a small
    fixed set of points.
    """
    if f.variables() - {"y", "y_t"} or "y_t" not in f.variables():
        return None
    fv = lambdify(f, ("y", "y_t"))
    ys = (y0, y0 + 0.37, y0 - 0.61, 1.3 * y0 + 0.9)
    try:
        for y in ys:
            g1 = fv(y, 1.0)
            for v in (-2.3, -0.4, 0.0, 0.8, 3.1):
                if abs(fv(y, v) - v * g1) > rtol * max(1.0, abs(v * g1)):
                    return None
    except (DomainError, ZeroDivisionError, OverflowError):
        return None
    g = substitute(f, {"y_t": Constant(1.0)})
    return DampingIntegral(g, float(y0), float(v0), tol)


def energy_first_integral(f_of_y: Expr, y0: float, v0: float,
                          tol: float = 1e-12) -> EnergyIntegral:
    extra = f_of_y.variables() - {"y"}
    if extra:
        raise StructureMismatch(f"energy integral needs f(y) only; f depends on {sorted(extra)}",
                                operation="energy_first_integral")
    if v0 != 0.0:
        sign = math.copysign(1.0, v0)
    else:
        accel = -evaluate(f_of_y, {"y": y0})
        sign = -1.0 if accel < 0.0 else 1.0
    return EnergyIntegral(f_of_y, float(y0), float(v0), float(v0) ** 2, sign, tol)
