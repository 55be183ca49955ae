"""Independent numeric checks: IVP integration, residuals, conservation, stationarity."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .closedform import Solution, closed_form_in
from .dual import Dual2, univariate
from .errors import (DomainError, EmptyGridAfterTrim, OdeReduceError, PreconditionFailed,
                     StepSizeUnderflow)
from .expr import Expr, lambdify
from .problem import Equation
from .quadrature import integrate

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100,
                1 / 40])
_E = _B5 - _B4

SAFETY = 0.9
PI_ALPHA = 0.17
PI_BETA = 0.04
MAX_FACTOR = 5.0
MIN_FACTOR = 0.2
TRIM_MARGIN = 1e-3


# ------------------------------------------------------------- hermite

def hermite_cubic(h, y0, y1, d0, d1, s):
    """Value of the cubic Hermite interpolant at fraction s of a step of width h."""
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1)


def hermite_quintic(h, y0, y1, d0, d1, c0, c1, s):
    """Value and first two derivatives (in x) of the quintic Hermite interpolant."""
    dy = y1 - y0
    D0, D1, C0, C1 = h * d0, h * d1, h * h * c0, h * h * c1
    a = (y0, D0, 0.5 * C0,
         10 * dy - 6 * D0 - 4 * D1 - 1.5 * C0 + 0.5 * C1,
         -15 * dy + 8 * D0 + 7 * D1 + 1.5 * C0 - C1,
         6 * dy - 3 * D0 - 3 * D1 - 0.5 * C0 + 0.5 * C1)
    v = a[0] + s * (a[1] + s * (a[2] + s * (a[3] + s * (a[4] + s * a[5]))))
    d = a[1] + s * (2 * a[2] + s * (3 * a[3] + s * (4 * a[4] + s * 5 * a[5])))
    dd = 2 * a[2] + s * (6 * a[3] + s * (12 * a[4] + s * 20 * a[5]))
    return v, d / h, dd / (h * h)


# ----------------------------------------------------------- trajectory

@dataclass
class Trajectory:
    """Samples (x_k, y_k, yp_k) of a second-order solution, with y'' at the nodes."""

    xs: np.ndarray
    ys: np.ndarray
    yps: np.ndarray
    ypps: np.ndarray
    method: str = "dopri5"
    steps: int = 0
    rejected: int = 0
    evaluations: int = 0
    tol: float = 0.0
    status: str = "complete"

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        self.yps = np.asarray(self.yps, dtype=float)
        self.ypps = np.asarray(self.ypps, dtype=float)
        if len(self.xs) > 1:
            d = np.diff(self.xs)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError("trajectory abscissae must be strictly monotone")
        for arr in (self.xs, self.ys, self.yps):
            if not np.all(np.isfinite(arr)):
                raise ValueError("trajectory contains non-finite samples")

    def __len__(self) -> int:
        return len(self.xs)

    @property
    def span(self) -> tuple[float, float]:
        return float(min(self.xs[0], self.xs[-1])), float(max(self.xs[0], self.xs[-1]))

    def increasing(self) -> "Trajectory":
        if len(self.xs) < 2 or self.xs[1] > self.xs[0]:
            return self
        return Trajectory(self.xs[::-1], self.ys[::-1], self.yps[::-1], self.ypps[::-1],
                          self.method, self.steps, self.rejected, self.evaluations, self.tol,
                          self.status)

    def _locate(self, x: float):
        tr = self.increasing()
        lo, hi = tr.span
        if not lo <= x <= hi:
            raise DomainError(f"x={x!r} outside the trajectory span [{lo}, {hi}]",
                              module="verify", operation="interpolate", point=x)
        i = int(np.searchsorted(tr.xs, x, side="right")) - 1
        i = min(max(i, 0), len(tr.xs) - 2)
        return tr, i

    def __call__(self, x: float) -> tuple[float, float]:
        """Cubic Hermite dense output for (y, y')."""
        tr, i = self._locate(x)
        h = tr.xs[i + 1] - tr.xs[i]
        s = (x - tr.xs[i]) / h
        y = hermite_cubic(h, tr.ys[i], tr.ys[i + 1], tr.yps[i], tr.yps[i + 1], s)
        yp = hermite_cubic(h, tr.yps[i], tr.yps[i + 1], tr.ypps[i], tr.ypps[i + 1], s)
        return float(y), float(yp)

    def smooth(self, x: float) -> tuple[float, float, float]:
        """Quintic Hermite (y, y', y'') whose y'' is not taken from the ODE."""
        tr, i = self._locate(x)
        h = tr.xs[i + 1] - tr.xs[i]
        s = (x - tr.xs[i]) / h
        return tuple(float(v) for v in hermite_quintic(
            h, tr.ys[i], tr.ys[i + 1], tr.yps[i], tr.yps[i + 1], tr.ypps[i], tr.ypps[i + 1], s))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,y,yp\n")
        for x, y, yp in zip(self.xs, self.ys, self.yps):
            buf.write(f"{float(x)!r},{float(y)!r},{float(yp)!r}\n")
        return buf.getvalue()

    def meta(self) -> dict:
        lo, hi = self.span
        return {"method": self.method, "steps": self.steps, "rejected": self.rejected,
                "evaluations": self.evaluations, "tolerance": self.tol, "span": [lo, hi],
                "samples": len(self.xs), "status": self.status}


def merge(left: Trajectory, right: Trajectory) -> Trajectory:
    """Join a leftward and a rightward trajectory that start at the same point."""
    L = left.increasing()
    R = right.increasing()
    xs = np.concatenate([L.xs[:-1], R.xs])
    cat = lambda a, b: np.concatenate([a[:-1], b])
    status = "complete" if left.status == right.status == "complete" else "partial"
    return Trajectory(xs, cat(L.ys, R.ys), cat(L.yps, R.yps), cat(L.ypps, R.ypps),
                      left.method, left.steps + right.steps, left.rejected + right.rejected,
                      left.evaluations + right.evaluations, left.tol, status)


# -------------------------------------------------------------- integrator

@dataclass
class _Run:
    xs: list
    ys: list
    fs: list
    steps: int = 0
    rejected: int = 0
    evaluations: int = 0


def _safe_eval(f, x, y):
    try:
        out = np.asarray(f(x, y), dtype=float)
    except (DomainError, OverflowError, ZeroDivisionError, ValueError):
        return None
    if not np.all(np.isfinite(out)):
        return None
    return out


def integrate_system(f: Callable, x0: float, y0: Sequence[float], x1: float, tol: float = 1e-9,
                     h0: Optional[float] = None, max_step: float = math.inf,
                     max_steps: int = 200000, blowup: float = 1e14) -> _Run:
    """Dormand-Prince 5(4) with PI step control; atol = rtol = tol.

    Returns the accepted nodes with their derivatives (FSAL).  Raises
    StepSizeUnderflow, carrying the partial run, when the step collapses or
    the state exceeds ``blowup``.
    """
    y = np.asarray(y0, dtype=float)
    direction = 1.0 if x1 >= x0 else -1.0
    length = abs(x1 - x0)
    k1 = _safe_eval(f, x0, y)
    if k1 is None:
        raise DomainError(f"right-hand side undefined at the initial point x={x0!r}",
                          module="verify", operation="integrate_ivp", point=x0)
    run = _Run([x0], [y.copy()], [k1.copy()], evaluations=1)
    if length == 0.0:
        return run
    if h0 is None:
        scale = tol + tol * np.abs(y)
        d0 = float(np.max(np.abs(y) / scale))
        d1 = float(np.max(np.abs(k1) / scale))
        h0 = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
        h0 = min(h0, 0.1 * length)
    h = min(h0, max_step, length)
    x = x0
    prev_err = 1e-4
    rejected_last = False
    while True:
        remaining = abs(x1 - x)
        if remaining <= 1e-15 * max(1.0, abs(x1)):
            break
        h = min(h, remaining, max_step)
        hmin = 16.0 * np.finfo(float).eps * max(1.0, abs(x))
        if h < hmin:
            raise StepSizeUnderflow(
                f"step size underflow at x={x!r}", module="verify", operation="integrate_ivp",
                point=x, trajectory=run)
        if run.steps + run.rejected >= max_steps:
            raise StepSizeUnderflow(f"step budget exhausted at x={x!r}", module="verify",
                                    operation="integrate_ivp", point=x, trajectory=run)
        hs = direction * h
        ks = [k1]
        ok = True
        for i in range(1, 7):
            yi = y + hs * sum(a * k for a, k in zip(_A[i], ks))
            ki = _safe_eval(f, x + _C[i] * hs, yi)
            run.evaluations += 1
            if ki is None:
                ok = False
                break
            ks.append(ki)
        if not ok:
            run.rejected += 1
            h *= 0.25
            rejected_last = True
            continue
        y_new = y + hs * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
        err_vec = hs * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))
        if err <= 1.0:
            x = x + hs if abs(x1 - (x + hs)) > 1e-15 * max(1.0, abs(x1)) else x1
            y = y_new
            k1 = ks[6]
            run.xs.append(x)
            run.ys.append(y.copy())
            run.fs.append(k1.copy())
            run.steps += 1
            if float(np.max(np.abs(y))) > blowup:
                raise StepSizeUnderflow(
                    f"solution exceeds {blowup:g} near x={x!r} (singularity)", module="verify",
                    operation="integrate_ivp", point=x, trajectory=run)
            e = max(err, 1e-10)
            fac = SAFETY * e ** (-PI_ALPHA) * prev_err ** PI_BETA
            fac = min(MAX_FACTOR, max(MIN_FACTOR, fac))
            if rejected_last:
                fac = min(fac, 1.0)
            h *= fac
            prev_err = e
            rejected_last = False
        else:
            run.rejected += 1
            h *= max(MIN_FACTOR, SAFETY * err ** (-0.2))
            rejected_last = True
    return run


def _second_order_rhs(rhs) -> Callable:
    if isinstance(rhs, Equation):
        G = rhs.solve_ypp
    else:
        G = rhs
    return lambda x, s: (s[1], G(x, s[0], s[1]))


def _to_trajectory(run: _Run, tol: float, status: str) -> Trajectory:
    Y = np.array(run.ys)
    F = np.array(run.fs)
    return Trajectory(np.array(run.xs), Y[:, 0], Y[:, 1], F[:, 1], "dopri5", run.steps,
                      run.rejected, run.evaluations, tol, status)


def integrate_ivp(rhs, ics: tuple[float, float, float], x_end: float, tol: float = 1e-9,
                  allow_partial: bool = False, **kwargs) -> Trajectory:
    """Integrate y'' = G(x, y, y') from ics = (x0, y0, yp0) to x_end.

    ``rhs`` is an Equation (resolved for y'' by its leading coefficient) or a
    callable G(x, y, yp).  With ``allow_partial`` a singularity ends the
    trajectory early (status "partial") instead of raising.
    """
    x0, y0, yp0 = ics
    f = _second_order_rhs(rhs)
    try:
        run = integrate_system(f, x0, (y0, yp0), x_end, tol, **kwargs)
    except StepSizeUnderflow as exc:
        partial_run = exc.trajectory
        traj = _to_trajectory(partial_run, tol, "partial") if partial_run else None
        if allow_partial and traj is not None and len(traj) > 1:
            return traj
        exc.trajectory = traj
        raise
    return _to_trajectory(run, tol, "complete")


def integrate_two_sided(rhs, ics: tuple[float, float, float], interval: tuple[float, float],
                        tol: float = 1e-9, **kwargs) -> Trajectory:
    """Integrate from an interior initial point to both ends of ``interval``."""
    x0 = ics[0]
    a, b = interval
    parts = []
    for end in (a, b):
        if end == x0:
            continue
        parts.append(integrate_ivp(rhs, ics, end, tol, allow_partial=True, **kwargs))
    if len(parts) == 1:
        return parts[0].increasing()
    return merge(parts[0], parts[1])


def integrate_first_order(g: Callable[[float, float], float], x0: float, z0: float,
                          x_end: float, tol: float = 1e-9,
                          **kwargs) -> tuple[np.ndarray, np.ndarray]:
    """z' = g(x, z); returns the accepted nodes (x_k, z_k)."""
    run = integrate_system(lambda x, s: (g(x, s[0]),), x0, (z0,), x_end, tol, **kwargs)
    return np.array(run.xs), np.array(run.ys)[:, 0]


# ------------------------------------------------------- numeric solution

class NumericSolution(Solution):
    """Solution sampled by the integrator in the variable s (t or x).

    Derivatives come from the quintic Hermite interpolant of (y, y', y'')
    at the nodes, so residuals computed from it are independent of the
    equation that produced the nodes.
    """

    def __init__(self, trajectory: Trajectory, var: str = "t", tmap=None, fspec=None,
                 domain=None, notes: Optional[list] = None):
        self.trajectory = trajectory.increasing()
        self.var = var
        self.tmap = tmap
        self.fspec = fspec
        self.domain = domain
        self.notes = list(notes or [])

    def inner(self, s: float) -> tuple[float, float, float]:
        return self.trajectory.smooth(s)

    def to_dict(self) -> dict:
        out = {"numeric": True, "variable": self.var, "chain": self.chain(),
               "integrator": self.trajectory.meta()}
        if self.domain is not None:
            out["domain"] = [float(self.domain[0]), float(self.domain[1])]
        if self.notes:
            out["notes"] = list(self.notes)
        return out


class FirstIntegralSolution(NumericSolution):
    """Numeric y(s) whose derivatives come from a first integral of the reduced equation.

    Only the value is interpolated; ``integral.derivatives(y)`` returns
    (y_s, y_ss) on the level set, which keeps the derivatives accurate near
    blow-up where differentiating the interpolant loses all precision.
    """

    def __init__(self, trajectory: Trajectory, integral, **kwargs):
        super().__init__(trajectory, **kwargs)
        self.integral = integral

    def inner(self, s: float) -> tuple[float, float, float]:
        y = self.trajectory.smooth(s)[0]
        v, a = self.integral.derivatives(y)
        return y, v, a

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["derivatives"] = "first integral y_t + G(y) = c"
        return out


def as_solution(candidate, domain=None) -> Solution:
    if isinstance(candidate, Solution):
        return candidate
    if isinstance(candidate, Expr):
        return closed_form_in(candidate, "x", domain)
    raise TypeError(f"cannot use {type(candidate).__name__} as a solution")


# ---------------------------------------------------------------- reports

@dataclass
class VerificationReport:
    interval: tuple[float, float]
    trimmed: list
    grid: int
    max_residual: float
    l2_residual: float
    tol: float
    worst_point: Optional[float] = None
    ic_errors: Optional[dict] = None
    ic_tol: float = 1e-9
    drift: Optional[float] = None
    drift_tol: Optional[float] = None
    failures: list = field(default_factory=list)
    label: str = ""
    scaled: bool = False
    absolute_max: Optional[float] = None

    @property
    def metrics(self) -> list[tuple[str, float, float]]:
        span = self.interval[1] - self.interval[0]
        tag = "scaled_residual" if self.scaled else "residual"
        out = [(f"max_{tag}", self.max_residual, self.tol),
               (f"l2_{tag}", self.l2_residual, self.tol * math.sqrt(max(span, 1.0)))]
        if self.ic_errors is not None:
            out += [(f"ic_{k}", v, self.ic_tol) for k, v in self.ic_errors.items()]
        if self.drift is not None:
            out.append(("drift", self.drift, self.drift_tol))
        return out

    @property
    def passed(self) -> bool:
        return not self.failures and all(
            math.isfinite(v) and v <= t for _, v, t in self.metrics)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "grid": {"interval": list(self.interval), "points": self.grid,
                     "trimmed": [list(t) for t in self.trimmed]},
            "metrics": {name: {"value": v, "tolerance": t} for name, v, t in self.metrics},
            "worst_point": self.worst_point,
            **({"absolute_max_residual": self.absolute_max} if self.scaled else {}),
            "failures": self.failures,
            "pass": self.passed,
        }


def _evaluable(solution: Solution, equation: Equation, x: float) -> bool:
    try:
        y, yp, ypp = solution.derivatives(x)
        r = equation.residual(x, y, yp, ypp)
    except (OdeReduceError, ZeroDivisionError, OverflowError, ValueError):
        return False
    return all(math.isfinite(v) for v in (y, yp, ypp, r))


def trimmed_interval(solution: Solution, equation: Equation, interval,
                     margin: float = TRIM_MARGIN, singular: Optional[Sequence[str]] = None):
    """Move singular endpoints inward by ``margin`` of the span."""
    a, b = interval
    span = b - a
    if singular is None:
        singular = [side for side, x in (("left", a), ("right", b))
                    if not _evaluable(solution, equation, x)]
    trims = []
    lo, hi = a, b
    if "left" in singular:
        lo = a + margin * span
        trims.append((a, lo))
    if "right" in singular:
        hi = b - margin * span
        trims.append((hi, b))
    if not lo < hi:
        raise EmptyGridAfterTrim(f"nothing left of [{a}, {b}] after trimming",
                                 operation="residual_check", interval=[a, b])
    return (lo, hi), trims


def residual_check(candidate, equation: Equation, interval=None, grid: int = 257,
                   tol: float = 1e-7, ics=None, ic_tol: float = 1e-9,
                   margin: float = TRIM_MARGIN, singular=None, label: str = "",
                   scaled: bool = False) -> VerificationReport:
    """Residual of the original equation along a uniform grid.

    y, y' and y'' come from the candidate (AD for closed forms, the quintic
    interpolant for numeric solutions).  With ``scaled`` each residual is
    divided by max(1, |y|, |y'|, |y''|), which is the meaningful measure for
    interpolated solutions whose node defect grows with the solution size.
    """
    sol = as_solution(candidate)
    if interval is None:
        if sol.domain is None:
            raise EmptyGridAfterTrim("no interval given and the candidate has no domain",
                                     operation="residual_check")
        interval = sol.domain
    interval = (float(interval[0]), float(interval[1]))
    if grid < 2:
        raise EmptyGridAfterTrim("grid needs at least two points", operation="residual_check")
    (lo, hi), trims = trimmed_interval(sol, equation, interval, margin, singular)
    xs = np.linspace(lo, hi, grid)
    res = np.empty(grid)
    absolute = np.empty(grid)
    failures = []
    for i, x in enumerate(xs):
        try:
            y, yp, ypp = sol.derivatives(float(x))
            absolute[i] = abs(equation.residual(float(x), y, yp, ypp))
            res[i] = absolute[i] / max(1.0, abs(y), abs(yp), abs(ypp)) if scaled else absolute[i]
        except (OdeReduceError, ZeroDivisionError, OverflowError, ValueError) as exc:
            res[i] = absolute[i] = math.inf
            if len(failures) < 5:
                failures.append({"x": float(x), "error": str(exc)})
    finite = np.where(np.isfinite(res), res, 0.0)
    k = int(np.argmax(np.where(np.isfinite(res), res, np.inf)))
    l2 = float(math.sqrt(np.trapezoid(finite * finite, xs))) if grid > 1 else float(finite[0])
    report = VerificationReport((lo, hi), trims, grid, float(np.max(res)), l2, tol,
                                float(xs[k]), ic_tol=ic_tol, failures=failures, label=label,
                                scaled=scaled, absolute_max=float(np.max(absolute)))
    if ics is not None:
        x0, y0, yp0 = ics
        y, yp, _ = sol.derivatives(float(x0))
        report.ic_errors = {"y": abs(y - y0), "yp": abs(yp - yp0)}
    return report


def sup_difference(a, b, interval, grid: int = 257) -> tuple[float, float]:
    """max |a(x) - b(x)| on a uniform grid, with the location of the maximum."""
    fa = a if callable(a) else as_solution(a)
    fb = b if callable(b) else as_solution(b)
    worst, where = 0.0, interval[0]
    for x in np.linspace(interval[0], interval[1], grid):
        d = abs(fa(float(x)) - fb(float(x)))
        if not d <= worst:
            worst, where = d, float(x)
    return worst, where


# ----------------------------------------------------------- conservation

@dataclass
class DriftStats:
    max_drift: float
    mean_drift: float
    at: float
    c: float
    samples: int

    def to_dict(self) -> dict:
        return {"max_drift": self.max_drift, "mean_drift": self.mean_drift, "at": self.at,
                "c": self.c, "samples": self.samples}


def conservation_check(fi, traj: Trajectory, c: Optional[float] = None) -> DriftStats:
    """max |Phi(x_k, z_k, zp_k) - c| over the trajectory nodes."""
    c = getattr(fi, "c", 0.0) if c is None else c
    d = np.array([abs(fi(float(x), float(z), float(zp)) - c)
                  for x, z, zp in zip(traj.xs, traj.ys, traj.yps)])
    k = int(np.argmax(d))
    return DriftStats(float(d[k]), float(np.mean(d)), float(traj.xs[k]), float(c), len(d))


# ------------------------------------------------------------- variational

def _integrand(p: Expr, h: Expr):
    pf = lambdify(p, ("x",))
    hf = lambdify(h, ("y",))

    def g(x, y, yp):
        sp = math.sqrt(pf(x))
        return sp * yp * yp + hf(y) / sp
    return g


def functional_value(p: Expr, h: Expr, y, interval, tol: float = 1e-9) -> float:
    """Q[y] = integral of sqrt(p) y'^2 + h(y)/sqrt(p) over the interval."""
    sol = as_solution(y)
    g = _integrand(p, h)

    def f(x):
        v, vp, _ = sol.derivatives(x)
        return g(x, v, vp)
    return integrate(f, interval[0], interval[1], tol).value


@dataclass
class StationarityReport:
    estimates: dict
    richardson: float
    first_variation: Optional[float]
    precondition_residual: float
    precondition_met: bool
    tol: float
    forced: bool = False

    @property
    def passed(self) -> bool:
        return self.precondition_met and abs(self.richardson) <= self.tol

    def to_dict(self) -> dict:
        return {"central_differences": {repr(k): v for k, v in self.estimates.items()},
                "richardson": self.richardson, "first_variation": self.first_variation,
                "precondition_residual": self.precondition_residual,
                "precondition_met": self.precondition_met, "forced": self.forced,
                "tolerance": self.tol, "pass": self.passed}


def euler_lagrange_residual(p: Expr, h: Expr, ystar, interval, grid: int = 257) -> float:
    """max |p y'' + p'/2 y' - h'(y)/2| on a grid."""
    sol = as_solution(ystar)
    pd = univariate(p, "x")
    hd = univariate(h, "y")
    worst = 0.0
    for x in np.linspace(interval[0], interval[1], grid):
        x = float(x)
        y, yp, ypp = sol.derivatives(x)
        P = pd(Dual2(x, 1.0))
        r = P.value * ypp + 0.5 * P.d1 * yp - 0.5 * hd(Dual2(y, 1.0)).d1
        worst = max(worst, abs(r))
    return worst


def stationarity_check(p: Expr, h: Expr, ystar, eta, interval,
                       epsilons: Sequence[float] = (1e-3, 1e-4), tol: float = 1e-6,
                       precondition_tol: float = 1e-6, force: bool = False,
                       quad_tol: float = 1e-13) -> StationarityReport:
    """Central-difference dQ[y* + eps eta]/d eps at 0 with Richardson extrapolation."""
    a, b = interval
    ys = as_solution(ystar)
    es = as_solution(eta)
    pre = euler_lagrange_residual(p, h, ys, interval)
    met = pre <= precondition_tol
    if not met and not force:
        raise PreconditionFailed(
            f"y* does not satisfy p y'' + p'/2 y' = h'(y)/2 (max residual {pre:.3g})",
            operation="stationarity_check", residual=pre)
    for x in (a, b):
        if abs(es(x)) > 1e-12:
            raise PreconditionFailed(f"perturbation does not vanish at x={x!r}",
                                     operation="stationarity_check", point=x)
    g = _integrand(p, h)
    pf = lambdify(p, ("x",))
    hd = univariate(h, "y")

    def Q(eps):
        def f(x):
            y, yp, _ = ys.derivatives(x)
            e, ep, _ = es.derivatives(x)
            return g(x, y + eps * e, yp + eps * ep)
        return integrate(f, a, b, quad_tol).value

    estimates = {}
    for eps in epsilons:
        estimates[eps] = (Q(eps) - Q(-eps)) / (2.0 * eps)
    if len(epsilons) >= 2:
        e1, e2 = epsilons[0], epsilons[1]
        d1, d2 = estimates[e1], estimates[e2]
        rich = (e1 * e1 * d2 - e2 * e2 * d1) / (e1 * e1 - e2 * e2)
    else:
        rich = estimates[epsilons[0]]

    def first_var(x):
        y, yp, _ = ys.derivatives(x)
        e, ep, _ = es.derivatives(x)
        sp = math.sqrt(pf(x))
        return 2.0 * sp * yp * ep + hd(Dual2(y, 1.0)).d1 * e / sp
    fv = integrate(first_var, a, b, quad_tol).value
    return StationarityReport(estimates, rich, fv, pre, met, tol, force)


__all__ = [
    "Trajectory", "integrate_ivp", "integrate_two_sided", "integrate_system",
    "integrate_first_order", "NumericSolution", "FirstIntegralSolution", "VerificationReport",
    "residual_check",
    "trimmed_interval", "sup_difference", "conservation_check", "DriftStats",
    "functional_value", "stationarity_check", "StationarityReport",
    "euler_lagrange_residual", "as_solution", "merge", "hermite_cubic", "hermite_quintic",
]
