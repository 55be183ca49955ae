"""Constant-coefficient solutions y_tt + α y_t + β y = H(t) and solution records."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .dual import Dual2, differentiate, univariate
from .errors import InternalVerificationFailed, OutOfDomain, SingularWronskian
from .expr import Constant, Expr, Func, Variable, as_expr, to_string
from .problem import parse_number

KINDS = ("one", "cos", "sin")
RESONANCE_TOL = 1e-12


def _exact(*values) -> bool:
    return all(isinstance(v, (Fraction, int)) for v in values)


# ------------------------------------------------------------- forcing

@dataclass(frozen=True)
class ForcingTerm:
    """A * t^k * exp(a t) * {1 | sin(b t) | cos(b t)}."""

    A: object
    k: int = 0
    a: object = Fraction(0)
    b: object = Fraction(0)
    kind: str = "one"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"forcing kind must be one of {KINDS}")
        if self.k not in (0, 1, 2):
            raise ValueError("forcing power k must be 0, 1 or 2")

    def evaluate(self, t: float) -> float:
        v = float(self.A) * t ** self.k * math.exp(float(self.a) * t)
        if self.kind == "sin":
            v *= math.sin(float(self.b) * t)
        elif self.kind == "cos":
            v *= math.cos(float(self.b) * t)
        return v

    def to_expr(self, var: str = "t") -> Expr:
        t = Variable(var)
        out: Optional[Expr] = None
        if self.k:
            out = t if self.k == 1 else t ** 2
        if self.a != 0:
            e = Func("exp", _times(self.a, t))
            out = e if out is None else out * e
        if self.kind != "one":
            trig = Func(self.kind, _times(self.b, t))
            out = trig if out is None else out * trig
        if out is None:
            return as_expr(float(self.A))
        return out if self.A == 1 else _times(self.A, out)


def _times(c, e: Expr) -> Expr:
    c = float(c)
    if c == 1.0:
        return e
    if c == -1.0:
        return -e
    return as_expr(c) * e


@dataclass(frozen=True)
class ForcingSpec:
    """Finite sum of forcing terms, canonically ordered with like terms merged."""

    terms: tuple[ForcingTerm, ...] = ()

    @classmethod
    def from_terms(cls, terms: Sequence[ForcingTerm]) -> "ForcingSpec":
        merged: dict[tuple, object] = {}
        for term in terms:
            A, b, kind = term.A, term.b, term.kind
            if kind == "one":
                b = Fraction(0)
            elif b == 0:
                if kind == "sin":
                    continue
                kind = "one"
            elif b < 0:
                b = -b
                if kind == "sin":
                    A = -A
            key = (term.k, term.a, b, kind)
            merged[key] = merged.get(key, 0) + A
        order = {"one": 0, "cos": 1, "sin": 2}
        out = [ForcingTerm(A, k, a, b, kind) for (k, a, b, kind), A in merged.items() if A != 0]
        out.sort(key=lambda f: (float(f.a), float(f.b), order[f.kind], f.k))
        return cls(tuple(out))

    @classmethod
    def from_dicts(cls, items: Sequence[dict]) -> "ForcingSpec":
        terms = []
        for item in items:
            terms.append(ForcingTerm(parse_number(item.get("A", 1)), int(item.get("k", 0)),
                                     parse_number(item.get("a", 0)),
                                     parse_number(item.get("b", 0)),
                                     item.get("kind", "one")))
        return cls.from_terms(terms)

    def scaled(self, c) -> "ForcingSpec":
        return ForcingSpec.from_terms([ForcingTerm(t.A * c, t.k, t.a, t.b, t.kind)
                                       for t in self.terms])

    def evaluate(self, t: float) -> float:
        return sum(term.evaluate(t) for term in self.terms)

    def to_expr(self, var: str = "t") -> Expr:
        if not self.terms:
            return Constant(0.0)
        out = self.terms[0].to_expr(var)
        for term in self.terms[1:]:
            out = out + term.to_expr(var)
        return out

    def describe(self, var: str = "t") -> str:
        return to_string(self.to_expr(var)).replace(" + -", " - ")


# ------------------------------------------------------------ basis

@dataclass
class Basis:
    functions: tuple[Expr, Expr]
    case: str
    roots: tuple[complex, complex]
    var: str = "t"


def _exp_rt(r: float, t: Variable) -> Expr:
    return Constant(1.0) if r == 0.0 else Func("exp", _times(r, t))


def solve_homogeneous_cc(alpha, beta, var: str = "t") -> Basis:
    t = Variable(var)
    disc = alpha * alpha - 4 * beta
    if not _exact(alpha, beta) and abs(disc) <= RESONANCE_TOL * max(1.0, float(alpha) ** 2,
                                                                  abs(float(beta))):
        disc = 0
    al = float(alpha)
    if disc > 0:
        s = math.sqrt(float(disc))
        r1, r2 = (-al + s) / 2.0, (-al - s) / 2.0
        return Basis((_exp_rt(r1, t), _exp_rt(r2, t)), "distinct_real", (r1, r2), var)
    if disc == 0:
        r = -al / 2.0
        e = _exp_rt(r, t)
        return Basis((e, t if r == 0.0 else t * e), "double", (r, r), var)
    sigma = -al / 2.0
    omega = math.sqrt(-float(disc)) / 2.0
    c = Func("cos", _times(omega, t))
    s = Func("sin", _times(omega, t))
    if sigma != 0.0:
        e = _exp_rt(sigma, t)
        c, s = e * c, e * s
    return Basis((c, s), "complex", (complex(sigma, omega), complex(sigma, -omega)), var)


# ------------------------------------------------------- particular

def resonance_multiplicity(alpha, beta, a, b) -> int:
    """Multiplicity of a + ib as a root of r^2 + α r + β."""
    p_re = a * a - b * b + alpha * a + beta
    p_im = b * (2 * a + alpha)
    d_re = 2 * a + alpha
    d_im = 2 * b
    if _exact(alpha, beta, a, b):
        zero_p = p_re == 0 and p_im == 0
        zero_d = d_re == 0 and d_im == 0
    else:
        scale = max(1.0, abs(float(alpha)), abs(float(beta)), float(a) ** 2 + float(b) ** 2)
        zero_p = abs(complex(float(p_re), float(p_im))) <= RESONANCE_TOL * scale
        zero_d = abs(complex(float(d_re), float(d_im))) <= RESONANCE_TOL * scale
    if not zero_p:
        return 0
    return 2 if zero_d else 1


def _poly_solution(alpha, beta, lam: complex, k: int, A: float, s: int) -> list[complex]:
    """Coefficients u_m of u(t) with (D+λ)^2 u + α(D+λ) u + β u = A t^k."""
    c0 = lam * lam + float(alpha) * lam + float(beta) if s == 0 else 0.0
    c1 = 2.0 * lam + float(alpha) if s <= 1 else 0.0
    n = k + s + 1
    u = [0j] * (n + 2)
    q = [0j] * (k + 1)
    q[k] = complex(A)
    for m in range(k, -1, -1):
        rest = q[m]
        if s == 0:
            rest -= c1 * (m + 1) * u[m + 1] + (m + 2) * (m + 1) * u[m + 2]
            u[m] = rest / c0
        elif s == 1:
            rest -= (m + 2) * (m + 1) * u[m + 2]
            u[m + 1] = rest / (c1 * (m + 1))
        else:
            u[m + 2] = rest / ((m + 2) * (m + 1))
    return u[:n]


def _poly_expr(coeffs: Sequence[float], t: Variable) -> Optional[Expr]:
    big = max((abs(c) for c in coeffs), default=0.0)
    out: Optional[Expr] = None
    for m, c in enumerate(coeffs):
        if c == 0.0 or abs(c) <= 1e-14 * big:
            continue
        mono = Constant(1.0) if m == 0 else (t if m == 1 else t ** m)
        term = as_expr(c) if m == 0 else _times(c, mono)
        out = term if out is None else out + term
    return out


def _term_particular(alpha, beta, term: ForcingTerm, t: Variable) -> Optional[Expr]:
    s = resonance_multiplicity(alpha, beta, term.a, term.b if term.kind != "one" else 0)
    b = float(term.b) if term.kind != "one" else 0.0
    lam = complex(float(term.a), b)
    u = _poly_solution(alpha, beta, lam, term.k, float(term.A), s)
    if term.kind == "one":
        cos_part, sin_part = [c.real for c in u], None
    elif term.kind == "cos":
        cos_part, sin_part = [c.real for c in u], [-c.imag for c in u]
    else:
        cos_part, sin_part = [c.imag for c in u], [c.real for c in u]
    pieces = []
    pc = _poly_expr(cos_part, t)
    if pc is not None:
        pieces.append(pc if term.kind == "one" else pc * Func("cos", _times(b, t)))
    if sin_part is not None:
        ps = _poly_expr(sin_part, t)
        if ps is not None:
            pieces.append(ps * Func("sin", _times(b, t)))
    if not pieces:
        return None
    out = pieces[0] if len(pieces) == 1 else pieces[0] + pieces[1]
    if term.a != 0:
        out = Func("exp", _times(term.a, t)) * out
    return out


def solve_particular_cc(alpha, beta, forcing: ForcingSpec, var: str = "t",
                        sample_range: tuple[float, float] = (-1.0, 1.0)) -> Expr:
    """Undetermined-coefficients particular solution, verified by back-substitution."""
    t = Variable(var)
    out: Optional[Expr] = None
    for term in forcing.terms:
        piece = _term_particular(alpha, beta, term, t)
        if piece is not None:
            out = piece if out is None else out + piece
    if out is None:
        out = Constant(0.0)
    check_linear_cc(out, alpha, beta, forcing, var, sample_range, tol=1e-10,
                    operation="solve_particular_cc")
    return out


def linear_cc_residuals(expr: Expr, alpha, beta, forcing: Optional[ForcingSpec], var: str,
                        samples: Sequence[float]) -> list[tuple[float, float]]:
    """(residual, scale) of Y'' + αY' + βY - H at each sample."""
    g = univariate(expr, var)
    al, be = float(alpha), float(beta)
    out = []
    for s in samples:
        d = g(Dual2(s, 1.0))
        h = forcing.evaluate(s) if forcing is not None else 0.0
        r = d.d2 + al * d.d1 + be * d.value - h
        scale = 1.0 + abs(d.d2) + abs(al * d.d1) + abs(be * d.value) + abs(h)
        out.append((r, scale))
    return out


def check_linear_cc(expr, alpha, beta, forcing, var, sample_range, tol, operation):
    lo, hi = sample_range
    samples = [lo + (hi - lo) * (j + 0.5) / 16 for j in range(16)]
    for s, (r, scale) in zip(samples, linear_cc_residuals(expr, alpha, beta, forcing, var,
                                                           samples)):
        if abs(r) > tol * scale:
            raise InternalVerificationFailed(
                f"back-substitution residual {r:.3g} at {var}={s!r} exceeds {tol:g}",
                operation=operation, point=s, residual=r)


# ------------------------------------------------------------ solutions

class Solution:
    """y(x) built from an inner function of s, optionally composed with
    a t-map (s = t(x)) and an output inverse (y = f^{-1}(z)).
    """

    var = "x"
    tmap = None
    fspec = None
    domain: Optional[tuple[float, float]] = None

    def inner(self, s: float) -> tuple[float, float, float]:
        raise NotImplementedError

    def derivatives(self, x: float) -> tuple[float, float, float]:
        if self.domain is not None:
            lo, hi = self.domain
            if not lo <= x <= hi:
                raise OutOfDomain(f"x={x!r} outside the solution domain [{lo}, {hi}]",
                                  operation="evaluate", point=x)
        if self.tmap is not None:
            Y, Y1, Y2 = self.inner(self.tmap(x))
            w, w1, _ = self.tmap.w_derivs(x)
            z, z1, z2 = Y, Y1 / w, (Y2 - Y1 * w1) / (w * w)
        else:
            z, z1, z2 = self.inner(x)
        if self.fspec is None:
            return z, z1, z2
        y = self.fspec.invert(z)
        _, f1, f2 = self.fspec.derivs(y)
        y1 = z1 / f1
        return y, y1, (z2 - f2 * y1 * y1) / f1

    def __call__(self, x: float) -> float:
        return self.derivatives(x)[0]

    def chain(self) -> list[str]:
        out = []
        if self.tmap is not None:
            w = to_string(self.tmap.w_expr).replace("x", "xi")
            out.append(f"t(x) = integral from {self.tmap.x0!r} to x of dxi/({w})")
        if self.fspec is not None:
            out.append(f"y = f^-1(z) with {self.fspec.describe()}")
        return out


@dataclass
class ClosedForm(Solution):
    """Analytic solution: an expression in ``var`` plus a composition chain."""

    expr: Expr
    var: str = "t"
    tmap: object = None
    fspec: object = None
    domain: Optional[tuple[float, float]] = None
    basis: Optional[tuple[Expr, ...]] = None
    coefficients: Optional[tuple[float, ...]] = None
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self._g = univariate(self.expr, self.var)

    def inner(self, s: float) -> tuple[float, float, float]:
        d = self._g(Dual2(s, 1.0))
        return d.value, d.d1, d.d2

    def to_dict(self) -> dict:
        out = {"expression": to_string(self.expr), "variable": self.var,
               "chain": self.chain()}
        if self.domain is not None:
            out["domain"] = [float(self.domain[0]), float(self.domain[1])]
        if self.coefficients is not None:
            out["coefficients"] = [float(c) for c in self.coefficients]
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def general_solution(basis: Basis, particular: Optional[Expr], c1: float, c2: float,
                     ) -> ClosedForm:
    pieces = []
    for c, phi in zip((c1, c2), basis.functions):
        if c != 0.0:
            pieces.append(_times(c, phi))
    if particular is not None and particular != Constant(0.0):
        pieces.append(particular)
    expr = pieces[0] if pieces else Constant(0.0)
    for p in pieces[1:]:
        expr = expr + p
    return ClosedForm(expr, basis.var, basis=basis.functions, coefficients=(c1, c2))


def apply_initial_conditions(basis: Basis, particular: Optional[Expr], t0: float, y0: float,
                             v0: float) -> ClosedForm:
    """Fit the two basis coefficients to Y(t0) = y0, Y'(t0) = v0."""
    var = basis.var
    rows = []
    for phi in basis.functions:
        val, d1 = differentiate(phi, var, {var: t0})
        rows.append((val, d1))
    if particular is not None:
        pv, pd = differentiate(particular, var, {var: t0})
    else:
        pv, pd = 0.0, 0.0
    # [[phi1, phi2], [phi1', phi2']] c = [y0 - yp, v0 - yp']
    m = [[rows[0][0], rows[1][0], y0 - pv], [rows[0][1], rows[1][1], v0 - pd]]
    if abs(m[1][0]) > abs(m[0][0]):
        m[0], m[1] = m[1], m[0]
    scale = max(abs(m[0][0]), abs(m[0][1]), abs(m[1][0]), abs(m[1][1]), 1e-300)
    if m[0][0] == 0.0:
        raise SingularWronskian(f"Wronskian vanishes at {var}={t0!r}",
                                operation="apply_initial_conditions", point=t0)
    factor = m[1][0] / m[0][0]
    m[1] = [m[1][j] - factor * m[0][j] for j in range(3)]
    if abs(m[1][1]) <= 1e-14 * scale:
        raise SingularWronskian(f"Wronskian vanishes at {var}={t0!r}",
                                operation="apply_initial_conditions", point=t0)
    c2 = m[1][2] / m[1][1]
    c1 = (m[0][2] - m[0][1] * c2) / m[0][0]
    sol = general_solution(basis, particular, c1, c2)
    y, yp, _ = sol.inner(t0)
    if abs(y - y0) > 1e-10 * max(1.0, abs(y0)) or abs(yp - v0) > 1e-10 * max(1.0, abs(v0)):
        raise InternalVerificationFailed(
            f"initial conditions not reproduced: ({y!r}, {yp!r}) vs ({y0!r}, {v0!r})",
            operation="apply_initial_conditions", point=t0)
    return sol


def compose_solution(Y: ClosedForm, tmap) -> ClosedForm:
    """y(x) = Y(t(x)); derivatives follow the chain rule with the weight w."""
    return ClosedForm(Y.expr, Y.var, tmap=tmap, fspec=Y.fspec, domain=tmap.domain,
                      basis=Y.basis, coefficients=Y.coefficients, notes=list(Y.notes))


def closed_form_in(expr: Expr, var: str = "x", domain=None) -> ClosedForm:
    return ClosedForm(expr, var, domain=domain)


__all__ = [
    "ForcingTerm", "ForcingSpec", "Basis", "solve_homogeneous_cc", "solve_particular_cc",
    "resonance_multiplicity", "apply_initial_conditions", "general_solution",
    "compose_solution", "ClosedForm", "Solution", "closed_form_in", "check_linear_cc",
    "linear_cc_residuals",
]
