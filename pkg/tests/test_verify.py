import math

import numpy as np
import pytest

from odereduce.errors import PreconditionFailed, StepSizeUnderflow
from odereduce.exactness import QuasiLinearOde, first_integral_build
from odereduce.expr import parse
from odereduce.problem import ExprEquation
from odereduce.verify import (NumericSolution, conservation_check, functional_value,
                              integrate_ivp, residual_check, stationarity_check)

EQ = ("x", "y", "yp", "ypp")
X = ("x",)
Y = ("y",)


def eq(text):
    return ExprEquation(parse(text, EQ))


def test_straight_line_is_integrated_exactly():
    traj = integrate_ivp(eq("ypp"), (0.0, 1.0, 2.0), 3.0, tol=1e-9)
    assert np.max(np.abs(traj.ys - (1.0 + 2.0 * traj.xs))) <= 1e-12
    assert np.max(np.abs(traj.yps - 2.0)) <= 1e-12


def test_ex22_trajectory_matches_closed_form():
    traj = integrate_ivp(eq("x^2*ypp + x*yp - 3*y^2"), (1.0, 2.0, 4.0), 1.5, tol=1e-10)
    exact = 2.0 / (1.0 - np.log(traj.xs)) ** 2
    assert np.max(np.abs(traj.ys - exact)) <= 1e-6


def _error_at(tol):
    traj = integrate_ivp(eq("ypp - y"), (0.0, 1.0, 0.0), 2.0, tol=tol)
    return abs(traj.ys[-1] - math.cosh(2.0))


def test_global_error_drops_like_fifth_order_step_control():
    # under tolerance-per-step control the global error tracks tol, so each
    # tolerance decade should buy close to one decade of error
    ratios = [_error_at(t) / _error_at(t / 10) for t in (1e-6, 1e-7, 1e-8)]
    for r in ratios:
        assert 8.0 / 4 <= r <= 8.0 * 4
    assert math.prod(ratios) ** (1 / len(ratios)) >= 8.0


def _ex41():
    return QuasiLinearOde(parse("1", ("x", "z", "zp")), parse("12*x*z^3", ("x", "z", "zp")),
                          parse("3*z^4 - 1", ("x", "z", "zp")),
                          box=((0.0, 1.0), (0.5, 2.5), (-5.0, 5.0)))


def test_conservation_drift_tracks_tolerance():
    ode = _ex41()
    fi = first_integral_build(ode, (0.0, 2.0, 0.0))
    rhs = lambda x, z, zp: -(12 * x * z ** 3 * zp + 3 * z ** 4 - 1)
    drifts = {}
    for tol in (1e-7, 1e-9):
        traj = integrate_ivp(rhs, (0.0, 2.0, 0.0), 0.5, tol=tol)
        drifts[tol] = conservation_check(fi, traj).max_drift
    ratio = drifts[1e-7] / drifts[1e-9]
    assert 100 / 10 <= ratio <= 100 * 10


def test_pole_raises_step_size_underflow_with_partial_trajectory():
    # y'' = 2 y^3 with y(0) = 1, y'(0) = 1 is y = 1/(1 - x), pole at x = 1
    with pytest.raises(StepSizeUnderflow) as info:
        integrate_ivp(eq("ypp - 2*y^3"), (0.0, 1.0, 1.0), 2.0, tol=1e-9)
    part = info.value.trajectory
    assert part is not None and part.xs[-1] < 1.0


def test_pole_partial_when_allowed():
    traj = integrate_ivp(eq("ypp - 2*y^3"), (0.0, 1.0, 1.0), 2.0, tol=1e-9, allow_partial=True)
    assert traj.status == "partial"
    assert 0.99 < traj.xs[-1] < 1.0


def test_residual_of_zero_solution_is_zero():
    rep = residual_check(parse("0*x", X), eq("ypp + y"), (0.0, 1.0), grid=33)
    assert rep.max_residual == 0.0
    assert rep.passed


def test_residual_flags_wrong_candidate():
    rep = residual_check(parse("sin(x)", X), eq("ypp - y"), (0.0, 1.0), grid=33, tol=1e-7)
    assert not rep.passed
    assert rep.max_residual == pytest.approx(2 * math.sin(1.0), rel=1e-12)


def test_numeric_solution_residual_from_interpolant():
    traj = integrate_ivp(eq("ypp + y"), (0.0, 0.0, 1.0), 3.0, tol=1e-11)
    sol = NumericSolution(traj, var="x")
    rep = residual_check(sol, eq("ypp + y"), (0.0, 3.0), grid=101, tol=1e-6)
    assert rep.passed


ONE = parse("1", X)
SQ = parse("y^2", Y)
INTERVAL = (0.0, 1.0)
YSTAR = parse("sinh(x)/sinh(1)", X)


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_extremal_is_stationary(k):
    eta = parse(f"sin({k}*{math.pi!r}*x)", X)
    rep = stationarity_check(ONE, SQ, YSTAR, eta, INTERVAL)
    assert abs(rep.richardson) <= 1e-6
    assert rep.passed


def test_non_extremal_rejected_then_forced():
    eta = parse(f"sin({math.pi!r}*x)", X)
    with pytest.raises(PreconditionFailed):
        stationarity_check(ONE, SQ, parse("x^2", X), eta, INTERVAL)
    rep = stationarity_check(ONE, SQ, parse("x^2", X), eta, INTERVAL, force=True)
    assert abs(rep.richardson) >= 1e-3
    assert not rep.passed


def test_zero_perturbation_gives_zero_variation():
    rep = stationarity_check(ONE, SQ, YSTAR, parse("0*x", X), INTERVAL)
    assert rep.richardson == 0.0


def test_perturbation_must_vanish_at_ends():
    with pytest.raises(PreconditionFailed):
        stationarity_check(ONE, SQ, YSTAR, parse("x", X), INTERVAL)


def test_functional_value_of_line():
    # Q[x] = integral of 1 + x^2 over [0, 1] = 4/3 for p = 1, h = y^2
    assert functional_value(ONE, SQ, parse("x", X), INTERVAL) == pytest.approx(4 / 3, abs=1e-12)
    assert functional_value(ONE, parse("0*y", Y), parse("x", X), INTERVAL) == pytest.approx(1.0)
