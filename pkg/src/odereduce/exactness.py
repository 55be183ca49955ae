"""Exactness of quasi-linear equations a2 z'' + a1 z' + a0 = 0.

Coefficients are expressions in (x, z, zp).  The three mixed-partial
conditions are tested by sampling, integrating factors are applied as
user-supplied candidates, and the first integral is evaluated by three
straight-path quadratures from an anchor point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import qmc

from .dual import partial
from .errors import (DivergentIntegral, DomainError, InsufficientSamples, NoRootInBracket,
                     NonMonotone, StructureMismatch, ZeroMu)
from .expr import Expr, Variable, compile_expr, rename, to_string
from .quadrature import integrate

NAMES = ("x", "z", "zp")
DEFAULT_TOL = 1e-8
DEFAULT_SAMPLES = 128
MIN_FRACTION = 0.8

# (label, coefficient, variable) pairs whose partials must agree
CONDITIONS = (
    ("da2/dz - da1/dzp", ("a2", "z"), ("a1", "zp")),
    ("da2/dx - da0/dzp", ("a2", "x"), ("a0", "zp")),
    ("da1/dx - da0/dz", ("a1", "x"), ("a0", "z")),
)

Box = tuple[tuple[float, float], tuple[float, float], tuple[float, float]]


@dataclass
class QuasiLinearOde:
    a2: Expr
    a1: Expr
    a0: Expr
    domain: Optional[tuple[float, float]] = None
    ics: Optional[tuple[float, float, float]] = None
    box: Optional[Box] = None

    def __post_init__(self):
        for label in ("a2", "a1", "a0"):
            extra = getattr(self, label).variables() - set(NAMES)
            if extra:
                raise StructureMismatch(f"{label} may only use x, z, zp; found {sorted(extra)}",
                                        module="exactness", operation="QuasiLinearOde")

    def coefficient(self, label: str) -> Expr:
        return getattr(self, label)

    def evaluator(self, label: str):
        fn = compile_expr(self.coefficient(label), NAMES)
        return lambda x, z, zp: fn((x, z, zp))

    def sample_box(self) -> Box:
        if self.box is not None:
            return self.box
        if self.ics is None:
            raise StructureMismatch("a sample box is required when no initial conditions are given",
                                    module="exactness", operation="check_exactness")
        x0, z0, zp0 = self.ics
        return ((x0 - 1.0, x0 + 1.0), (z0 - 1.0, z0 + 1.0), (zp0 - 1.0, zp0 + 1.0))

    def describe(self) -> str:
        return (f"({to_string(self.a2)})*z'' + ({to_string(self.a1)})*z' + "
                f"{to_string(self.a0)} = 0")

    def residual_expr(self) -> Expr:
        """The equation with (z, zp) renamed to (y, yp) and z'' as ypp."""
        ren = {"z": "y", "zp": "yp"}
        return (rename(self.a2, ren) * Variable("ypp") + rename(self.a1, ren) * Variable("yp")
                + rename(self.a0, ren))


def halton_points(box: Box, n: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Deterministic quasi-random points in a 3-d box (the origin corner is skipped)."""
    raw = qmc.Halton(d=3, scramble=False).random(n + 1)[1:]
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    return lo + raw * (hi - lo)


# --------------------------------------------------------------- reports

@dataclass
class ExactnessReport:
    residuals: dict
    abs_residuals: dict
    verdict: str
    tol: float
    samples_used: int
    samples_skipped: int
    witness: Optional[dict] = None
    a2_vanishes: list = field(default_factory=list)

    @property
    def exact(self) -> bool:
        return self.verdict == "exact"

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "tolerance": self.tol,
            "conditions": [
                {"condition": label, "max_residual": self.residuals[label],
                 "max_abs_residual": self.abs_residuals[label]}
                for label, _, _ in CONDITIONS
            ],
            "samples_used": self.samples_used,
            "samples_skipped": self.samples_skipped,
            "witness": self.witness,
        }
        if self.a2_vanishes:
            out["a2_vanishes_at"] = self.a2_vanishes
        return out


def check_exactness(ode: QuasiLinearOde, samples: Optional[Sequence] = None,
                    tol: float = DEFAULT_TOL, n: int = DEFAULT_SAMPLES) -> ExactnessReport:
    """Sample the three mixed-partial conditions.

    The residual at a point is |u - v| / max(1, |u|, |v|), so the test is
    relative to the local size of the partials.
    """
    pts = np.asarray(samples, dtype=float) if samples is not None else halton_points(
        ode.sample_box(), n)
    worst = {label: 0.0 for label, _, _ in CONDITIONS}
    worst_abs = {label: 0.0 for label, _, _ in CONDITIONS}
    witness = None
    witness_score = -1.0
    used = skipped = 0
    vanish = []
    a2 = ode.evaluator("a2")
    for x, z, zp in pts:
        env = {"x": float(x), "z": float(z), "zp": float(zp)}
        try:
            values = []
            for label, (c1, v1), (c2, v2) in CONDITIONS:
                u = partial(ode.coefficient(c1), v1, env)
                v = partial(ode.coefficient(c2), v2, env)
                if not (math.isfinite(u) and math.isfinite(v)):
                    raise DomainError("non-finite partial", operation="check_exactness")
                values.append((label, u, v))
            lead = a2(env["x"], env["z"], env["zp"])
        except DomainError:
            skipped += 1
            continue
        used += 1
        if lead == 0.0:
            vanish.append([env["x"], env["z"], env["zp"]])
        for label, u, v in values:
            diff = abs(u - v)
            scaled = diff / max(1.0, abs(u), abs(v))
            worst_abs[label] = max(worst_abs[label], diff)
            if scaled > worst[label]:
                worst[label] = scaled
            if scaled > tol and scaled > witness_score:
                witness_score = scaled
                witness = {"point": env, "condition": label, "lhs": u, "rhs": v,
                           "residual": scaled}
    total = used + skipped
    if total == 0 or used < MIN_FRACTION * total:
        raise InsufficientSamples(
            f"only {used} of {total} sample points could be evaluated",
            operation="check_exactness", used=used, skipped=skipped)
    verdict = "exact" if all(r <= tol for r in worst.values()) else "not-exact"
    return ExactnessReport(worst, worst_abs, verdict, tol, used, skipped,
                           witness if verdict == "not-exact" else None, vanish)


def apply_mu(mu: Expr, ode: QuasiLinearOde, samples: Optional[Sequence] = None
             ) -> QuasiLinearOde:
    """Multiply every coefficient by mu after checking mu does not vanish on samples."""
    extra = mu.variables() - set(NAMES)
    if extra:
        raise StructureMismatch(f"mu may only use x, z, zp; found {sorted(extra)}",
                                module="exactness", operation="apply_mu")
    pts = samples
    if pts is None:
        try:
            pts = halton_points(ode.sample_box(), 64)
        except StructureMismatch:
            pts = []
    fn = compile_expr(mu, NAMES)
    for x, z, zp in pts:
        try:
            m = fn((float(x), float(z), float(zp)))
        except DomainError:
            continue
        if m == 0.0 or not math.isfinite(m):
            raise ZeroMu(f"integrating factor vanishes at (x, z, zp) = ({x}, {z}, {zp})",
                         operation="apply_mu", point=[float(x), float(z), float(zp)])
    return QuasiLinearOde(mu * ode.a2, mu * ode.a1, mu * ode.a0, ode.domain, ode.ics, ode.box)


# ------------------------------------------------------------ linear case

def linear_ifactor_residuals(a2: Expr, a1: Expr, a0: Expr, samples: Sequence[float]
                             ) -> list[float]:
    """Scaled |a2 a1' - a1 a2' - a0 a2| at each sample."""
    for label, e in (("a2", a2), ("a1", a1), ("a0", a0)):
        if e.variables() - {"x"}:
            raise StructureMismatch(f"{label} must depend on x only", module="exactness",
                                    operation="linear_ifactor_check")
    out = []
    for x in samples:
        env = {"x": float(x)}
        f2 = compile_expr(a2, ("x",))((x,))
        f1 = compile_expr(a1, ("x",))((x,))
        f0 = compile_expr(a0, ("x",))((x,))
        d2 = partial(a2, "x", env)
        d1 = partial(a1, "x", env)
        terms = (f2 * d1, f1 * d2, f0 * f2)
        out.append(abs(terms[0] - terms[1] - terms[2]) / max(1.0, *(abs(t) for t in terms)))
    return out


def linear_ifactor_check(a2: Expr, a1: Expr, a0: Expr, samples: Sequence[float],
                         tol: float = 1e-10) -> bool:
    """True iff 1/a2 is an integrating factor, i.e. W(a2, a1) = a0 a2 at every sample."""
    return all(r <= tol for r in linear_ifactor_residuals(a2, a1, a0, samples))


def linear_to_quasilinear(a2: Expr, a1: Expr, a0: Expr, h: Optional[Expr] = None,
                          **kwargs) -> QuasiLinearOde:
    """a2 y'' + a1 y' + a0 y = h as a quasi-linear equation in (x, z, zp)."""
    z = Variable("z")
    rest = a0 * z if h is None else a0 * z - h
    return QuasiLinearOde(a2, a1, rest, **kwargs)


# -------------------------------------------------------- first integral

class FirstIntegral:
    """Phi(x, z, zp) = int a0(s, z, zp) ds + int a1(x0, s, zp) ds + int a2(x0, z0, s) ds.

    The three straight-path integrals run from the anchor (x0, z0, zp0), so
    Phi vanishes there and c = 0 along the anchored trajectory.
    """

    def __init__(self, ode: QuasiLinearOde, anchor: tuple[float, float, float],
                 tol: float = 1e-10):
        self.ode = ode
        self.anchor = tuple(float(v) for v in anchor)
        self.tol = tol
        self.c = 0.0
        self._a = {label: ode.evaluator(label) for label in ("a2", "a1", "a0")}

    def _segment(self, label, fn, lo, hi, where):
        try:
            return integrate(fn, lo, hi, self.tol).value
        except (DomainError, DivergentIntegral) as exc:
            raise DomainError(
                f"quadrature of {label} along {where} from {lo!r} to {hi!r} failed ({exc}); "
                f"move the anchor away from singular points of the coefficients",
                module="exactness", operation="first_integral", segment=[lo, hi],
                coefficient=label) from None

    def __call__(self, x: float, z: float, zp: float, tol: Optional[float] = None) -> float:
        x0, z0, zp0 = self.anchor
        a0, a1, a2 = self._a["a0"], self._a["a1"], self._a["a2"]
        total = self._segment("a0", lambda s: a0(s, z, zp), x0, x, "x")
        total += self._segment("a1", lambda s: a1(x0, s, zp), z0, z, "z")
        total += self._segment("a2", lambda s: a2(x0, z0, s), zp0, zp, "zp")
        return total

    def d_dzp(self, x: float, z: float, zp: float) -> float:
        """dPhi/dzp by differentiating under the integral signs (integrand partials by AD)."""
        x0, z0, zp0 = self.anchor
        ode = self.ode
        g0 = lambda s: partial(ode.a0, "zp", {"x": s, "z": z, "zp": zp})
        g1 = lambda s: partial(ode.a1, "zp", {"x": x0, "z": s, "zp": zp})
        return (self._segment("da0/dzp", g0, x0, x, "x")
                + self._segment("da1/dzp", g1, z0, z, "z")
                + self._a["a2"](x0, z0, zp))

    def drift(self, x: float, z: float, zp: float) -> float:
        return self(x, z, zp) - self.c


def first_integral_build(ode: QuasiLinearOde, ics: Optional[tuple[float, float, float]] = None,
                         tol: float = 1e-10, report: Optional[ExactnessReport] = None,
                         require_exact: bool = True) -> FirstIntegral:
    anchor = ics if ics is not None else ode.ics
    if anchor is None:
        raise StructureMismatch("first integral needs an anchor (x0, z0, zp0)",
                                module="exactness", operation="first_integral_build")
    if require_exact:
        rep = report if report is not None else check_exactness(ode)
        if not rep.exact:
            raise StructureMismatch(
                "equation is not exact; apply an integrating factor first",
                module="exactness", operation="first_integral_build", witness=rep.witness)
    fi = FirstIntegral(ode, anchor, tol)
    x0, z0, zp0 = fi.anchor
    for label, fn in fi._a.items():
        try:
            v = fn(x0, z0, zp0)
        except DomainError:
            v = math.nan
        if not math.isfinite(v):
            raise DomainError(
                f"{label} is undefined at the anchor ({x0!r}, {z0!r}, {zp0!r}); "
                f"move the anchor away from singular points of the coefficients",
                module="exactness", operation="first_integral_build",
                point=[x0, z0, zp0], coefficient=label)
    return fi


def first_integral_solve_zprime(fi: FirstIntegral, x: float, z: float,
                                bracket: Optional[tuple[float, float]] = None,
                                target: Optional[float] = None, tol: float = 1e-9) -> float:
    """Solve Phi(x, z, zp) = c for zp.

    Phi is strictly monotone in zp when a2 keeps one sign; this is checked at
    a few points of the bracket through dPhi/dzp = a2(x, z, zp).
    """
    c = fi.c if target is None else target
    g = lambda zp: fi(x, z, zp) - c
    zp0 = fi.anchor[2]
    if bracket is None:
        lo, hi = zp0 - 1.0, zp0 + 1.0
        glo, ghi = g(lo), g(hi)
        for _ in range(60):
            if glo * ghi <= 0.0:
                break
            lo, hi = zp0 - 2.0 * (zp0 - lo), zp0 + 2.0 * (hi - zp0)
            glo, ghi = g(lo), g(hi)
    else:
        lo, hi = bracket
        glo, ghi = g(lo), g(hi)
    if glo * ghi > 0.0:
        raise NoRootInBracket(f"Phi - c keeps one sign on [{lo!r}, {hi!r}]",
                              operation="first_integral_solve_zprime", point=[x, z])
    a2 = fi.ode.evaluator("a2")
    signs = set()
    for s in np.linspace(lo, hi, 9):
        try:
            v = a2(x, z, float(s))
        except DomainError:
            continue
        if v != 0.0:
            signs.add(v > 0)
        else:
            signs.add(None)
    if len(signs) != 1 or None in signs:
        raise NonMonotone(f"Phi is not monotone in zp on [{lo!r}, {hi!r}]",
                          operation="first_integral_solve_zprime", point=[x, z])
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    root = brentq(g, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
    # polish with Newton steps on the exact derivative
    for _ in range(3):
        r = g(root)
        if abs(r) <= 0.1 * tol:
            break
        root -= r / a2(x, z, root)
    if abs(g(root)) > tol:
        raise NoRootInBracket(f"|Phi - c| = {abs(g(root))!r} above {tol!r} after root finding",
                              operation="first_integral_solve_zprime", point=[x, z])
    return root


def first_order_rhs(fi: FirstIntegral, bracket: Optional[tuple[float, float]] = None):
    """z' = zp(x, z) from the first integral, for a first-order integrator."""
    return lambda x, z: first_integral_solve_zprime(fi, x, z, bracket)


__all__ = [
    "QuasiLinearOde", "ExactnessReport", "check_exactness", "apply_mu", "halton_points",
    "linear_ifactor_check", "linear_ifactor_residuals", "linear_to_quasilinear",
    "FirstIntegral", "first_integral_build", "first_integral_solve_zprime", "first_order_rhs",
]
