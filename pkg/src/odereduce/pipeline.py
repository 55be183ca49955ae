"""Per-class solve pipelines producing JSON-ready reports."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import __version__
from .closedform import (ClosedForm, ForcingSpec, apply_initial_conditions, compose_solution,
                         general_solution, solve_homogeneous_cc, solve_particular_cc)
from .errors import OdeReduceError, ProblemFileError, StructureMismatch
from .exactness import (QuasiLinearOde, apply_mu, check_exactness, first_integral_build,
                        halton_points, linear_ifactor_residuals, linear_to_quasilinear)
from .expr import Expr, compile_expr, parse, to_string
from .fsubst import apply_substitution, original_equation, solve_f_type
from .problem import (ChebyshevEquation, ExprEquation, WeightedLinearEquation,
                      check_equation_match, parse_number)
from .problemfile import Check, ProblemSpec
from .reduction import (damping_first_integral, energy_first_integral, invert_transform,
                        reduce_problem)
from .verify import (FirstIntegralSolution, NumericSolution, conservation_check, integrate_ivp,
                     integrate_two_sided, residual_check, stationarity_check, sup_difference,
                     trimmed_interval)

# the reduced nonlinear equations are integrated far below the verification tolerances
SOLVE_TOL = 1e-13
BLOWUP = 1e8
DEFAULT_GRID = 257


@dataclass
class Outcome:
    name: str
    command: str
    report: dict
    passed: bool
    csv: Optional[str] = None
    extra_files: Optional[dict] = None


def jsonable(value):
    """Convert numpy scalars, Fractions and tuples for json.dumps."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating, Fraction)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    return str(value)


def _header(spec: ProblemSpec, command: str) -> dict:
    out = {"name": spec.name, "class": spec.kind, "command": command,
           "tool": {"name": "odereduce", "version": __version__}}
    if spec.description:
        out["description"] = spec.description
    return out


def original_for(spec: ProblemSpec):
    """The original y-equation, checked against the class model when both exist."""
    prob = spec.problem
    if spec.kind == "chebyshev_type":
        model = ChebyshevEquation(prob.p, prob.f)
    elif spec.kind == "linear_weighted":
        model = WeightedLinearEquation(prob.P, prob.alpha, prob.beta, prob.h)
    elif spec.kind == "f_type":
        return original_equation(prob)
    else:
        q = spec.quasi
        return ExprEquation(_quasi_ode(q).residual_expr(), "original equation")
    if prob.equation is None:
        return model
    raw = ExprEquation(prob.equation, "original equation")
    check_equation_match(raw, model, prob.domain)
    return raw


# ------------------------------------------------------------------ reduce

def _transform_info(tmap) -> dict:
    return {"mode": tmap.mode, "weight": to_string(tmap.w_expr), "x0": tmap.x0,
            "domain": list(tmap.domain), "t_range": list(tmap.t_range),
            "knots": len(tmap.xs), "interpolation_error": tmap.interp_error}


def reduce_spec(spec: ProblemSpec) -> Outcome:
    report = _header(spec, "reduce")
    files = {}
    if spec.kind in ("chebyshev_type", "linear_weighted"):
        original_for(spec)
        reduced = reduce_problem(spec.problem)
        report["reduced"] = reduced.describe()
        report["form"] = reduced.form
        report["transform"] = _transform_info(reduced.tmap)
        if reduced.ics is not None:
            report["reduced_ics"] = {"t": reduced.ics.t, "y": reduced.ics.y, "v": reduced.ics.v}
        lin = reduced.linear_coefficients()
        if lin is not None:
            report["linear_in_y_and_y_t"] = {"alpha": lin[0], "beta": lin[1], "c": lin[2]}
        files["transform.csv"] = reduced.tmap.to_csv()
    elif spec.kind == "f_type":
        original_for(spec)
        z = apply_substitution(spec.problem)
        report["reduced"] = z.describe()
        report["substitution"] = z.fspec.describe()
        if z.ics is not None:
            report["reduced_ics"] = {"x": z.ics.x, "z": z.ics.y, "zp": z.ics.yp}
    else:
        raise ProblemFileError("quasilinear problems are handled by 'exact check' and "
                               "'exact integrate'", operation="reduce")
    return Outcome(spec.name, "reduce", jsonable(report), True, extra_files=files)


# ------------------------------------------------------------------- solve

def _coerce(v):
    return parse_number(repr(float(v)))


def _closed_form_cc(alpha, beta, forcing, var, ics, constants, sample_range):
    alpha, beta = _coerce(alpha), _coerce(beta)
    basis = solve_homogeneous_cc(alpha, beta, var)
    particular = solve_particular_cc(alpha, beta, forcing or ForcingSpec(), var, sample_range)
    if ics is not None:
        sol = apply_initial_conditions(basis, particular, *ics)
    else:
        c1, c2 = constants or (1.0, 1.0)
        sol = general_solution(basis, particular, c1, c2)
    return basis, particular, sol


def _solve_reduced(spec: ProblemSpec, report: dict):
    prob = spec.problem
    reduced = reduce_problem(prob)
    tmap = reduced.tmap
    report["reduced"] = reduced.describe()
    report["transform"] = _transform_info(tmap)
    ics = None
    if reduced.ics is not None:
        ics = (reduced.ics.t, reduced.ics.y, reduced.ics.v)
        report["reduced_ics"] = {"t": ics[0], "y": ics[1], "v": ics[2]}
    if reduced.form == "linear_cc":
        alpha, beta, forcing = reduced.alpha, reduced.beta, reduced.forcing
    else:
        lin = reduced.linear_coefficients()
        if lin is None:
            return _solve_numeric(spec, reduced, report), None
        alpha, beta, c = lin
        forcing = ForcingSpec.from_dicts([{"A": -c}]) if c else ForcingSpec()
        report["linear_in_y_and_y_t"] = {"alpha": alpha, "beta": beta, "c": c}
    basis, particular, Y = _closed_form_cc(alpha, beta, forcing, "t", ics, prob.constants,
                                           tmap.t_range)
    report["method"] = "closed form (constant coefficients in t)"
    report["t_solution"] = to_string(Y.expr)
    if particular is not None:
        report["particular"] = to_string(particular)
    sol = compose_solution(Y, tmap)
    basis_sols = [compose_solution(ClosedForm(phi, "t"), tmap) for phi in basis.functions]
    return sol, (basis, basis_sols)


def _solve_numeric(spec: ProblemSpec, reduced, report: dict) -> NumericSolution:
    prob = spec.problem
    if reduced.ics is None:
        raise StructureMismatch("the reduced equation is nonlinear; initial conditions are "
                                "required for the numeric solve", operation="solve")
    tmap = reduced.tmap
    G = reduced.rhs()
    ics = (reduced.ics.t, reduced.ics.y, reduced.ics.v)
    scale = max(1.0, abs(ics[1]), abs(ics[2]))
    traj = integrate_two_sided(lambda t, y, v: G(y, v), ics, tmap.t_range, SOLVE_TOL,
                               blowup=BLOWUP * scale)
    t_lo, t_hi = traj.span
    x_lo = prob.domain[0] if t_lo <= tmap.t_range[0] else invert_transform(tmap, t_lo)
    x_hi = prob.domain[1] if t_hi >= tmap.t_range[1] else invert_transform(tmap, t_hi)
    singular = []
    notes = []
    if x_lo > prob.domain[0]:
        singular.append("left")
        notes.append(f"solution blows up near x={x_lo:.10g} (t={t_lo:.10g})")
    if x_hi < prob.domain[1]:
        singular.append("right")
        notes.append(f"solution blows up near x={x_hi:.10g} (t={t_hi:.10g})")
    damping = damping_first_integral(prob.f, ics[1], ics[2])
    if damping is None:
        sol = NumericSolution(traj, "t", tmap=tmap, domain=(x_lo, x_hi), notes=notes)
        report["method"] = "numeric (embedded Runge-Kutta in t, quintic Hermite dense output)"
    else:
        sol = FirstIntegralSolution(traj, damping, var="t", tmap=tmap, domain=(x_lo, x_hi),
                                    notes=notes)
        report["method"] = ("numeric y(t) (embedded Runge-Kutta in t); derivatives from the "
                            "first integral y_t + G(y) = c")
        report["damping_integral"] = _damping_check(damping, traj)
    sol.singular = singular
    report["integrator"] = traj.meta()
    if not (prob.f.variables() - {"y"}):
        report["energy_integral"] = _energy_check(prob.f, ics, traj)
    return sol


def _interpolated(sol) -> bool:
    """Derivatives taken from the interpolant, so the residual is reported scaled."""
    return isinstance(sol, NumericSolution) and not isinstance(sol, FirstIntegralSolution)


def _damping_check(di, traj) -> dict:
    idx = np.unique(np.linspace(0, len(traj) - 1, min(len(traj), 41)).astype(int))
    worst = 0.0
    for i in idx:
        v = float(traj.yps[i])
        worst = max(worst, abs(v - di.derivatives(float(traj.ys[i]))[0]) / max(1.0, abs(v)))
    return {"c": di.c, "g": to_string(di.g), "relation": "y_t + G(y) = c, G(y0) = 0",
            "max_relative_mismatch": worst, "samples": len(idx)}


def _energy_check(f: Expr, ics, traj) -> dict:
    ei = energy_first_integral(f, ics[1], ics[2])
    idx = np.unique(np.linspace(0, len(traj) - 1, min(len(traj), 41)).astype(int))
    worst = 0.0
    for i in idx:
        v2 = float(traj.yps[i]) ** 2
        worst = max(worst, abs(v2 - ei.v_squared(float(traj.ys[i]))) / max(1.0, v2))
    return {"c": ei.c, "relation": "v^2 = c - 2 F(y), F(y0) = 0", "max_relative_mismatch": worst,
            "samples": len(idx)}


def _interval(spec: ProblemSpec, sol) -> tuple[float, float]:
    lo, hi = spec.check_interval or sol.domain or spec.problem.domain
    if sol.domain is not None:
        lo, hi = max(lo, sol.domain[0]), min(hi, sol.domain[1])
    return lo, hi


def _sides(sol, interval) -> Optional[list]:
    """Singular sides of the solution that coincide with the check interval."""
    flagged = getattr(sol, "singular", None)
    if not flagged or sol.domain is None:
        return None
    out = []
    if "left" in flagged and interval[0] <= sol.domain[0]:
        out.append("left")
    if "right" in flagged and interval[1] >= sol.domain[1]:
        out.append("right")
    return out


def _run_checks(checks: list[Check], sol, equation, spec: ProblemSpec, grid: int) -> list[dict]:
    out = []
    for chk in checks:
        entry = {"label": chk.label, "y": to_string(chk.y), "kind": chk.kind,
                 "informational": chk.informational}
        if chk.note:
            entry["note"] = chk.note
        try:
            if chk.kind == "sup":
                base = chk.interval or _interval(spec, sol)
                if sol.domain is not None:
                    base = (max(base[0], sol.domain[0]), min(base[1], sol.domain[1]))
                sides = _sides(sol, base)
                (lo, hi), trims = trimmed_interval(sol, equation, base, singular=sides)
                tol = chk.tol or spec.tolerances["sup"]
                ref = compile_expr(chk.y, ("x",))
                value, where = sup_difference(sol, lambda x: ref((x,)), (lo, hi), grid)
                entry.update(interval=[lo, hi], trimmed=trims, sup_difference=value,
                             at=where, tolerance=tol, passed=bool(value <= tol))
            else:
                eq = ExprEquation(chk.equation, "reference equation") if chk.equation else equation
                if chk.equation is not None:
                    entry["equation"] = to_string(chk.equation) + " = 0"
                tol = chk.tol or spec.tolerances["residual"]
                base = chk.interval or _interval(spec, sol)
                rep = residual_check(chk.y, eq, base, grid, tol, singular=_sides(sol, base),
                                     label=chk.label)
                entry.update(rep.to_dict(), tolerance=tol, passed=rep.passed)
        except OdeReduceError as exc:
            entry.update(error=exc.to_dict(), passed=False)
        out.append(entry)
    return out


def _independent(spec: ProblemSpec, sol, equation, tol: float, span) -> dict:
    """Integrate the original equation in x and compare with the pipeline solution."""
    i = spec.problem.ics
    limit = spec.tolerances["independent"]
    entry = {"span": list(span), "integrator_tolerance": tol, "tolerance": limit}
    try:
        traj = integrate_two_sided(equation, (i.x, i.y, i.yp), span, tol)
        gap, where = 0.0, span[0]
        for x, y in zip(traj.xs, traj.ys):
            d = abs(sol(float(x)) - float(y))
            if not d <= gap:
                gap, where = d, float(x)
        entry.update(integrator=traj.meta(), max_difference=gap, at=where,
                     passed=bool(gap <= limit and traj.status == "complete"))
    except OdeReduceError as exc:
        entry.update(error=exc.to_dict(), passed=False)
    return entry


def _tabulate(sol, interval, n) -> str:
    lines = ["x,y,yp"]
    for x in np.linspace(interval[0], interval[1], n):
        try:
            y, yp, _ = sol.derivatives(float(x))
        except OdeReduceError:
            continue
        lines.append(f"{float(x)!r},{float(y)!r},{float(yp)!r}")
    return "\n".join(lines) + "\n"


def solve_spec(spec: ProblemSpec, tol: float = 1e-9, grid: Optional[int] = None) -> Outcome:
    if spec.kind == "quasilinear":
        return exact_integrate_spec(spec, tol, grid, command="solve")
    grid = grid or spec.grid or DEFAULT_GRID
    report = _header(spec, "solve")
    prob = spec.problem
    equation = original_for(spec)
    report["equation"] = (to_string(prob.equation) + " = 0" if prob.equation is not None
                          else equation.label)
    basis_info = None
    if spec.kind == "f_type":
        res = solve_f_type(prob)
        sol = res.y
        report["reduced"] = res.z_problem.describe()
        report["substitution"] = res.z_problem.fspec.describe()
        report["z_solution"] = to_string(res.z.expr)
        if res.excluded:
            report["excluded"] = [list(e) for e in res.excluded]
            # edges where z leaves the range of f are singular for y
            sol.singular = [side for side, cut in (("left", sol.domain[0] > prob.domain[0]),
                                                   ("right", sol.domain[1] < prob.domain[1]))
                            if cut]
        report["method"] = "closed form in z = f(y), then y = f^-1(z)"
    else:
        sol, basis_info = _solve_reduced(spec, report)
    report["solution"] = sol.to_dict()

    interval = _interval(spec, sol)
    ics = (prob.ics.x, prob.ics.y, prob.ics.yp) if prob.ics is not None else None
    if ics is not None and not interval[0] <= ics[0] <= interval[1]:
        ics = None
    ver = residual_check(sol, equation, interval, grid, spec.tolerances["residual"], ics=ics,
                         ic_tol=spec.tolerances["ic"], singular=_sides(sol, interval),
                         label="pipeline solution in the original equation",
                         scaled=_interpolated(sol))
    report["verification"] = ver.to_dict()
    passed = ver.passed

    if "span" in spec.raw and prob.ics is not None:
        entry = _independent(spec, sol, equation, tol, tuple(spec.raw["span"]))
        report["independent_integration"] = entry
        passed = passed and entry["passed"]

    if basis_info is not None and prob.forcing is None or (
            basis_info is not None and not prob.forcing.terms):
        basis, basis_sols = basis_info
        entries = []
        for phi, bs in zip(basis.functions, basis_sols):
            r = residual_check(bs, equation, interval, grid, spec.tolerances["residual"],
                               label=f"basis {to_string(phi)}")
            entries.append({"basis": to_string(phi), **r.to_dict()})
            passed = passed and r.passed
        report["basis"] = entries

    report["expected"] = _run_checks(spec.expected, sol, equation, spec, grid)
    report["references"] = _run_checks(spec.references, sol, equation, spec, grid)
    passed = passed and all(e["passed"] for e in report["expected"] if not e["informational"])
    passed = passed and all(e["passed"] for e in report["references"]
                            if not e["informational"])
    report["pass"] = bool(passed)
    lo, hi = ver.interval
    return Outcome(spec.name, "solve", jsonable(report), bool(passed),
                   csv=_tabulate(sol, (lo, hi), grid))


# -------------------------------------------------------------- exactness

def _quasi_ode(q: dict) -> QuasiLinearOde:
    if q["linear"]:
        return linear_to_quasilinear(q["a2"], q["a1"], q["a0"], q["h"], domain=q["domain"],
                                     ics=q["anchor"], box=q["box"])
    return QuasiLinearOde(q["a2"], q["a1"], q["a0"], q["domain"], q["anchor"], q["box"])


def _mu_for(q: dict) -> Optional[Expr]:
    if q["mu"] is not None:
        return q["mu"]
    if q["linear"]:
        return parse(f"1/({to_string(q['a2'])})", ("x", "z", "zp"))
    return None


def _exactness(spec: ProblemSpec, report: dict):
    q = spec.quasi
    tol = spec.tolerances["exactness"]
    ode = _quasi_ode(q)
    report["equation"] = ode.describe()
    if q["linear"]:
        xs = np.linspace(q["domain"][0], q["domain"][1], 64)
        r = linear_ifactor_residuals(q["a2"], q["a1"], q["a0"], xs)
        report["linear_criterion"] = {
            "statement": "W(a2, a1) = a2 a1' - a1 a2' equals a0 a2", "samples": len(xs),
            "max_residual": max(r), "tolerance": 1e-10, "holds": bool(max(r) <= 1e-10)}
    rep = check_exactness(ode, tol=tol)
    report["exactness"] = rep.to_dict()
    exact_ode = ode if rep.exact else None
    mu = _mu_for(q)
    if not rep.exact and mu is not None:
        ode_mu = apply_mu(mu, ode)
        rep_mu = check_exactness(ode_mu, tol=tol)
        report["integrating_factor"] = {"mu": to_string(mu), "equation": ode_mu.describe(),
                                        "exactness": rep_mu.to_dict()}
        if rep_mu.exact:
            exact_ode = ode_mu
    if exact_ode is not None:
        verdict = "exact" if exact_ode is ode else "exact-after-mu"
    else:
        verdict = "not-exact"
    report["classification"] = verdict
    return ode, exact_ode, verdict


def exact_check_spec(spec: ProblemSpec) -> Outcome:
    if spec.kind != "quasilinear":
        raise ProblemFileError("'exact check' needs a quasilinear problem", operation="exact check")
    report = _header(spec, "exact check")
    _, exact_ode, verdict = _exactness(spec, report)
    passed = exact_ode is not None
    if spec.quasi["linear"]:
        passed = passed and report["linear_criterion"]["holds"]
    report["pass"] = bool(passed)
    return Outcome(spec.name, "exact check", jsonable(report), bool(passed))


def exact_integrate_spec(spec: ProblemSpec, tol: float = 1e-9, grid: Optional[int] = None,
                         command: str = "exact integrate") -> Outcome:
    if spec.kind != "quasilinear":
        raise ProblemFileError(f"'{command}' needs a quasilinear problem", operation=command)
    q = spec.quasi
    grid = grid or spec.grid or DEFAULT_GRID
    report = _header(spec, command)
    ode, exact_ode, verdict = _exactness(spec, report)
    if exact_ode is None:
        report["pass"] = False
        return Outcome(spec.name, command, jsonable(report), False)
    anchor = q["anchor"]
    span = q["span"] or (anchor[0], q["domain"][1])
    fi = first_integral_build(exact_ode, anchor, require_exact=False)
    tol = spec.tolerances.get("integrator", tol) if tol is None else tol
    equation = ExprEquation(ode.residual_expr(), "original equation")
    traj = integrate_ivp(equation, anchor, span[1], tol)
    drift = conservation_check(fi, traj)
    drift_tol = spec.tolerances["drift"]
    report["first_integral"] = {
        "anchor": list(anchor), "c": fi.c,
        "formula": "int a0(s, z, zp) ds [x0..x] + int a1(x0, s, zp) ds [z0..z] "
                   "+ int a2(x0, z0, s) ds [zp0..zp]"}
    report["integrator"] = traj.meta()
    report["conservation"] = {**drift.to_dict(), "tolerance": drift_tol,
                              "passed": drift.max_drift <= drift_tol}
    passed = drift.max_drift <= drift_tol

    refs = []
    for ref in q["first_integrals"]:
        phi = compile_expr(ref["phi"], ("x", "z", "zp"))
        c_ref = phi(tuple(anchor))
        ref_drift = conservation_check(lambda x, z, zp: phi((x, z, zp)), traj, c_ref)
        entry = {"label": ref["label"], "phi": to_string(ref["phi"]),
                 "informational": ref["informational"], "constant_at_anchor": c_ref,
                 "drift": ref_drift.to_dict(), "tolerance": ref["tol"] or drift_tol}
        if ref["note"]:
            entry["note"] = ref["note"]
        if q["box"] is not None:
            worst = 0.0
            for x, z, zp in halton_points(q["box"], 50):
                try:
                    d = abs(fi(x, z, zp) - (phi((x, z, zp)) - c_ref))
                except OdeReduceError:
                    continue
                worst = max(worst, d)
            entry["phi_agreement_in_box"] = worst
        entry["passed"] = bool(ref_drift.max_drift <= entry["tolerance"])
        if not ref["informational"]:
            passed = passed and entry["passed"]
        refs.append(entry)
    report["reference_first_integrals"] = refs

    if exact_ode is not ode:
        twin = integrate_ivp(ExprEquation(exact_ode.residual_expr()), anchor, span[1], tol)
        gap = max(abs(traj(float(x))[0] - twin(float(x))[0])
                  for x in np.linspace(min(span), max(span), grid))
        report["mu_invariance"] = {"max_trajectory_gap": gap, "tolerance": 1e-7,
                                   "passed": gap <= 1e-7}
        passed = passed and gap <= 1e-7

    sol = NumericSolution(traj, "x", domain=traj.span)
    ver = residual_check(sol, equation, traj.span, grid, spec.tolerances["residual"],
                         ics=anchor, ic_tol=spec.tolerances["ic"],
                         label="integrated trajectory in the original equation", scaled=True)
    report["verification"] = ver.to_dict()
    passed = passed and ver.passed
    report["pass"] = bool(passed)
    return Outcome(spec.name, command, jsonable(report), bool(passed), csv=traj.to_csv())


# ----------------------------------------------------------------- verify

def verify_spec(spec: ProblemSpec, solution: str, grid: Optional[int] = None,
                tol: Optional[float] = None) -> Outcome:
    grid = grid or spec.grid or DEFAULT_GRID
    report = _header(spec, "verify")
    equation = original_for(spec)
    y = parse(solution, ("x",))
    if spec.kind == "quasilinear":
        domain = spec.quasi["span"] or spec.quasi["domain"]
        anchor = spec.quasi["anchor"]
        ics = (anchor[0], anchor[1], anchor[2])
    else:
        domain = spec.problem.domain
        i = spec.problem.ics
        ics = (i.x, i.y, i.yp) if i is not None else None
    interval = spec.check_interval or domain
    if ics is not None and not interval[0] <= ics[0] <= interval[1]:
        ics = None
    rep = residual_check(y, equation, interval, grid, tol or spec.tolerances["residual"],
                         ics=ics, ic_tol=spec.tolerances["ic"], label="user candidate")
    report["candidate"] = to_string(y)
    report["verification"] = rep.to_dict()
    report["pass"] = rep.passed
    return Outcome(spec.name, "verify", jsonable(report), rep.passed)


def functional_spec(spec: ProblemSpec, y: str, eta: str, force: bool = False) -> Outcome:
    if spec.functional is None:
        raise ProblemFileError("the problem file has no 'functional' block",
                               operation="functional")
    fb = spec.functional
    report = _header(spec, "functional")
    ystar = parse(y, ("x",))
    pert = parse(eta, ("x",))
    rep = stationarity_check(fb["p"], fb["h"], ystar, pert, fb["interval"], force=force)
    report.update({"p": to_string(fb["p"]), "h": to_string(fb["h"]), "y": to_string(ystar),
                   "eta": to_string(pert), "interval": list(fb["interval"]),
                   "stationarity": rep.to_dict(), "pass": rep.passed})
    return Outcome(spec.name, "functional", jsonable(report), rep.passed)
