"""Substitution z = f(y) for f-type equations.

An f-type equation a2 (f'(y) y'' + f''(y) y'^2) + a1 f'(y) y' + a0 f(y) = g(x)
(or its p(x) variant) is linear in z = f(y).  The linear problem is solved in
closed form and y is recovered through the inverse of f on a declared branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .closedform import (ClosedForm, ForcingSpec, apply_initial_conditions, compose_solution,
                         general_solution, solve_homogeneous_cc, solve_particular_cc)
from .dual import Dual2, univariate
from .errors import (BranchRequired, DomainError, OutOfRange, RangeViolation,
                     StructureMismatch)
from .expr import Constant, Expr, Variable, evaluate, parse, to_string
from .problem import (ExprEquation, FTypeEquation, InitialConditions, OdeProblem,
                      parse_number)
from .reduction import chebyshev_points, reduce_problem

FKINDS = ("exp_y", "half_square", "custom")


@dataclass
class FSpec:
    kind: str
    expr: Optional[Expr] = None
    interval: Optional[tuple[float, float]] = None
    branch: Optional[str] = None

    def __post_init__(self):
        if self.kind not in FKINDS:
            raise ValueError(f"fspec kind must be one of {FKINDS}")
        if self.kind == "exp_y":
            self.expr = parse("exp(y)", ["y"])
        elif self.kind == "half_square":
            self.expr = parse("y^2/2", ["y"])
            if self.branch is not None and self.branch not in ("positive", "negative"):
                raise ValueError("half_square branch must be 'positive' or 'negative'")
        elif self.expr is None:
            raise ValueError("custom fspec needs an expression in y")
        if self.kind == "custom" and self.interval is None:
            raise ValueError("custom fspec needs a monotone interval")
        self._f = univariate(self.expr, "y")

    def describe(self) -> str:
        text = f"f(y) = {to_string(self.expr)}"
        if self.kind == "half_square" and self.branch:
            text += f", {self.branch} branch"
        return text

    def derivs(self, y: float) -> tuple[float, float, float]:
        d = self._f(Dual2(y, 1.0))
        return d.value, d.d1, d.d2

    def __call__(self, y: float) -> float:
        return self._f(Dual2(y)).value

    def monotone_interval(self) -> tuple[float, float]:
        if self.interval is not None:
            return self.interval
        if self.kind == "half_square":
            return (0.0, math.inf) if self.branch != "negative" else (-math.inf, 0.0)
        return (-math.inf, math.inf)

    def check(self, samples: int = 64) -> None:
        """f' must not vanish on the interior of the monotone interval."""
        lo, hi = self.monotone_interval()
        lo_s = lo if math.isfinite(lo) else (hi - 20.0 if math.isfinite(hi) else -10.0)
        hi_s = hi if math.isfinite(hi) else lo_s + 20.0
        signs = set()
        for y in chebyshev_points(lo_s, hi_s, samples):
            _, d1, _ = self.derivs(y)
            if d1 == 0.0:
                raise StructureMismatch(f"f'(y) vanishes at y={y!r}", module="f-subst",
                                        operation="check", point=y)
            signs.add(d1 > 0)
        if len(signs) > 1:
            raise StructureMismatch("f is not monotone on its declared interval",
                                    module="f-subst", operation="check")

    def in_range(self, z: float) -> bool:
        if self.kind == "exp_y":
            return z > 0.0
        if self.kind == "half_square":
            return z >= 0.0
        lo, hi = self.interval
        a, b = sorted((self(lo), self(hi)))
        return a <= z <= b

    def invert(self, z: float) -> float:
        return invert_f(self, z)


def invert_f(fspec: FSpec, z: float) -> float:
    if fspec.kind == "exp_y":
        if not z > 0.0:
            raise OutOfRange(f"z={z!r} outside the range of exp", module="f-subst",
                             operation="invert_f", point=z)
        return math.log(z)
    if fspec.kind == "half_square":
        if z < 0.0:
            raise OutOfRange(f"z={z!r} outside the range of y^2/2", module="f-subst",
                             operation="invert_f", point=z)
        if fspec.branch is None:
            raise BranchRequired("half_square inversion needs a branch selector",
                                 operation="invert_f", point=z)
        r = math.sqrt(2.0 * z)
        return r if fspec.branch == "positive" else -r
    return _invert_monotone(fspec, z)


def _invert_monotone(fspec: FSpec, z: float) -> float:
    lo, hi = fspec.interval
    flo, fhi = fspec(lo), fspec(hi)
    increasing = fhi > flo
    if not min(flo, fhi) <= z <= max(flo, fhi):
        raise OutOfRange(f"z={z!r} outside f([{lo}, {hi}]) = [{min(flo, fhi)}, {max(flo, fhi)}]",
                         module="f-subst", operation="invert_f", point=z)
    a, b = lo, hi
    for _ in range(200):
        m = 0.5 * (a + b)
        if (fspec(m) < z) == increasing:
            a = m
        else:
            b = m
        if b - a <= 1e-6 * max(1.0, abs(m)):
            break
    y = 0.5 * (a + b)
    for _ in range(50):
        v, d1, _ = fspec.derivs(y)
        if d1 == 0.0:
            break
        step = (v - z) / d1
        y_new = min(max(y - step, lo), hi)
        if abs(y_new - y) <= 1e-12 * max(1.0, abs(y)):
            y = y_new
            break
        y = y_new
    return y


# ------------------------------------------------------------ substitution

@dataclass
class LinearZProblem:
    """Linear equation in z produced by the substitution."""

    variant: str                     # "constant" or "weighted"
    fspec: FSpec
    domain: tuple[float, float]
    a2: object = None
    a1: object = None
    a0: object = None
    p: Optional[Expr] = None
    forcing: Optional[ForcingSpec] = None
    ics: Optional[InitialConditions] = None

    @property
    def alpha(self):
        return self.a1 / self.a2

    @property
    def beta(self):
        return self.a0 / self.a2

    def describe(self) -> str:
        if self.variant == "weighted":
            return (f"({to_string(self.p)})*z'' + (1/2)*d/dx({to_string(self.p)})*z' + "
                    f"{_num(self.a0)}*z = 0")
        out = []
        for c, term in ((self.a2, "z''"), (self.a1, "z'"), (self.a0, "z")):
            if c == 0:
                continue
            out.append(term if c == 1 else f"{_num(c)}*{term}")
        lhs = " + ".join(out) if out else "0"
        rhs = "0" if self.forcing is None or not self.forcing.terms else self.forcing.describe("x")
        return f"{lhs} = {rhs}"

    def as_problem(self, name: str = "z-problem") -> OdeProblem:
        """The weighted variant as a Chebyshev-type problem p z'' + ½p' z' + a0 z = 0."""
        return OdeProblem("chebyshev_type", self.domain, name=name, ics=self.ics, p=self.p,
                          f=float(self.a0) * Variable("y"))


def _num(c) -> str:
    v = float(c)
    return str(int(v)) if v.is_integer() else repr(v)


def original_equation(problem: OdeProblem):
    """The y-equation the user wrote, or the decomposition if none was given."""
    if problem.equation is not None:
        return ExprEquation(problem.equation, "original y-equation")
    return decomposition_equation(problem)


def decomposition_equation(problem: OdeProblem) -> FTypeEquation:
    fspec = problem.fspec
    if problem.p is not None:
        return _WeightedFType(problem.p, problem.a0, fspec.expr)
    g = problem.forcing.to_expr("x") if problem.forcing is not None else Constant(0.0)
    return FTypeEquation(problem.a2, problem.a1, problem.a0, g, fspec.expr,
                         "f-type decomposition")


class _WeightedFType(FTypeEquation):
    """p(x)(f' y'' + f'' y'^2) + ½p'(x) f' y' + a0 f(y) = 0."""

    def __init__(self, p: Expr, a0: Expr, f_expr: Expr):
        super().__init__(p, Constant(0.0), a0, Constant(0.0), f_expr, "f-type decomposition")
        self._p = univariate(p, "x")

    def residual(self, x, y, yp, ypp):
        pd = self._p(Dual2(x, 1.0))
        fy = self._f(Dual2(y, 1.0))
        return (pd.value * (fy.d1 * ypp + fy.d2 * yp * yp) + 0.5 * pd.d1 * fy.d1 * yp
                + self._a0(x) * fy.value)


def apply_substitution(problem: OdeProblem, samples: int = 24) -> LinearZProblem:
    if problem.kind != "f_type" or problem.fspec is None:
        raise StructureMismatch("apply_substitution needs an f_type problem with an fspec",
                                module="f-subst", operation="apply_substitution")
    fspec: FSpec = problem.fspec
    fspec.check()
    if problem.p is not None:
        a0 = _constant(problem.a0, "a0")
        if problem.a1 is not None:
            from .dual import partial
            for x in chebyshev_points(*problem.domain, 32):
                u = evaluate(problem.a1, {"x": x})
                v = 0.5 * partial(problem.p, "x", {"x": x})
                if abs(u - v) > 1e-8 * max(abs(u), abs(v)) + 1e-14:
                    raise StructureMismatch(f"a1 must equal p'(x)/2; {u!r} != {v!r} at x={x!r}",
                                            module="f-subst", operation="apply_substitution",
                                            point=x)
        z = LinearZProblem("weighted", fspec, problem.domain, a2=None, a1=None, a0=a0,
                           p=problem.p)
    else:
        a2 = _constant(problem.a2, "a2")
        a1 = _constant(problem.a1, "a1")
        a0 = _constant(problem.a0, "a0")
        if a2 == 0:
            raise StructureMismatch("a2 must be nonzero", module="f-subst",
                                    operation="apply_substitution")
        z = LinearZProblem("constant", fspec, problem.domain, a2=a2, a1=a1, a0=a0,
                           forcing=problem.forcing or ForcingSpec())

    if problem.equation is not None:
        _verify_decomposition(problem, samples)
    if problem.ics is not None:
        f0, f1, _ = fspec.derivs(problem.ics.y)
        z.ics = InitialConditions(problem.ics.x, f0, f1 * problem.ics.yp)
    return z


def _constant(e, label):
    if e is None:
        raise StructureMismatch(f"coefficient {label} is required", module="f-subst",
                                operation="apply_substitution")
    if isinstance(e, Expr):
        if e.variables():
            raise StructureMismatch(f"coefficient {label} must be constant", module="f-subst",
                                    operation="apply_substitution")
        return parse_number(to_string(e))
    return e


def _verify_decomposition(problem: OdeProblem, samples: int) -> None:
    raw = ExprEquation(problem.equation)
    dec = decomposition_equation(problem)
    lo, hi = problem.fspec.monotone_interval()
    lo = lo if math.isfinite(lo) else -2.0
    hi = hi if math.isfinite(hi) else lo + 4.0
    rng = np.random.default_rng(7)
    xs = chebyshev_points(*problem.domain, samples)
    for x in xs:
        y = float(rng.uniform(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo)))
        yp, ypp = (float(v) for v in rng.uniform(-1.5, 1.5, 2))
        try:
            u = raw.residual(x, y, yp, ypp)
            v = dec.residual(x, y, yp, ypp)
        except DomainError:
            continue
        if abs(u - v) > 1e-9 * max(1.0, abs(u), abs(v)):
            raise StructureMismatch(
                f"equation does not match the f-decomposition at "
                f"(x, y, y', y'') = ({x!r}, {y!r}, {yp!r}, {ypp!r}): {u!r} vs {v!r}",
                module="f-subst", operation="apply_substitution",
                point={"x": x, "y": y, "yp": yp, "ypp": ypp})


# ---------------------------------------------------------------- solving

@dataclass
class FTypeSolution:
    z_problem: LinearZProblem
    z: ClosedForm
    y: ClosedForm
    excluded: list = field(default_factory=list)


def solve_f_type(problem: OdeProblem, grid: int = 2001) -> FTypeSolution:
    zprob = apply_substitution(problem)
    fspec = zprob.fspec
    if fspec.kind == "half_square" and fspec.branch is None:
        if problem.ics is None:
            raise BranchRequired("half_square needs a branch when no initial conditions are given",
                                 operation="solve_f_type")
        fspec.branch = "negative" if problem.ics.y < 0 else "positive"

    if zprob.variant == "constant":
        alpha, beta = zprob.alpha, zprob.beta
        forcing = zprob.forcing.scaled(1 / zprob.a2) if zprob.forcing.terms else zprob.forcing
        basis = solve_homogeneous_cc(alpha, beta, "x")
        particular = solve_particular_cc(alpha, beta, forcing, "x", problem.domain)
        if zprob.ics is not None:
            z = apply_initial_conditions(basis, particular, zprob.ics.x, zprob.ics.y,
                                         zprob.ics.yp)
        else:
            c1, c2 = problem.constants or (1.0, 1.0)
            z = general_solution(basis, particular, c1, c2)
        z.domain = problem.domain
    else:
        zp = zprob.as_problem(problem.name + "-z")
        if problem.x0 is not None:
            zp.x0 = problem.x0
        reduced = reduce_problem(zp)
        lin = reduced.linear_coefficients()
        alpha, beta, c = lin
        forcing = ForcingSpec.from_dicts([{"A": -c}]) if c else ForcingSpec()
        basis = solve_homogeneous_cc(parse_number(repr(alpha)), parse_number(repr(beta)), "t")
        lo_t, hi_t = reduced.tmap.t_range
        particular = solve_particular_cc(alpha, beta, forcing, "t", (lo_t, hi_t))
        if reduced.ics is not None:
            Y = apply_initial_conditions(basis, particular, reduced.ics.t, reduced.ics.y,
                                         reduced.ics.v)
        else:
            c1, c2 = problem.constants or (1.0, 1.0)
            Y = general_solution(basis, particular, c1, c2)
        z = compose_solution(Y, reduced.tmap)

    anchor = problem.ics.x if problem.ics is not None else None
    domain, excluded = _trim_to_range(z, fspec, problem.domain, anchor, grid)
    z.domain = domain
    y = ClosedForm(z.expr, z.var, tmap=z.tmap, fspec=fspec, domain=domain, basis=z.basis,
                   coefficients=z.coefficients)
    if excluded:
        y.notes.append("solution domain trimmed where z leaves the range of f: "
                       + ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in excluded))
    return FTypeSolution(zprob, z, y, excluded)


def _trim_to_range(z: ClosedForm, fspec: FSpec, domain, anchor, n):
    a, b = domain
    xs = np.linspace(a, b, n)
    ok = []
    for x in xs:
        try:
            ok.append(fspec.in_range(z(float(x))))
        except DomainError:
            ok.append(False)
    ok = np.array(ok)
    if not ok.any():
        raise RangeViolation("z leaves the range of f on the whole domain",
                             operation="solve_f_type", interval=[a, b])
    # runs of admissible grid points
    runs = []
    start = None
    for i, good in enumerate(ok):
        if good and start is None:
            start = i
        if not good and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(ok) - 1))
    if anchor is not None:
        chosen = next((r for r in runs if xs[r[0]] <= anchor <= xs[r[1]]), None)
        if chosen is None:
            raise RangeViolation("z leaves the range of f at the initial point",
                                 operation="solve_f_type", point=anchor)
    else:
        chosen = max(runs, key=lambda r: r[1] - r[0])
    i, j = chosen
    lo = float(xs[i]) if i == 0 else _edge(z, fspec, float(xs[i - 1]), float(xs[i]))
    hi = float(xs[j]) if j == len(xs) - 1 else _edge(z, fspec, float(xs[j + 1]), float(xs[j]))
    excluded = []
    if lo > a:
        excluded.append((a, lo))
    if hi < b:
        excluded.append((hi, b))
    return (lo, hi), excluded


def _edge(z, fspec, bad: float, good: float) -> float:
    """Bisect toward the boundary of admissibility, returning an admissible point."""
    for _ in range(60):
        m = 0.5 * (bad + good)
        try:
            inside = fspec.in_range(z(m))
        except DomainError:
            inside = False
        if inside:
            good = m
        else:
            bad = m
    return good
