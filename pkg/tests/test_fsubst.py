import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from odereduce.closedform import ForcingSpec
from odereduce.dual import Dual2, univariate
from odereduce.errors import BranchRequired, OutOfRange, StructureMismatch
from odereduce.expr import parse
from odereduce.fsubst import FSpec, apply_substitution, invert_f, solve_f_type
from odereduce.problem import InitialConditions, OdeProblem
from odereduce.verify import residual_check
from odereduce.fsubst import original_equation

Y = ("y",)
X = ("x",)

SPECS = {
    "exp": FSpec("exp_y"),
    "half_pos": FSpec("half_square", branch="positive"),
    "half_neg": FSpec("half_square", branch="negative"),
    "cubic": FSpec("custom", parse("y^3 + y", Y), (-3.0, 3.0)),
    "atan": FSpec("custom", parse("atan(y)", Y), (-5.0, 5.0)),
}
Y_RANGE = {"exp": (-3, 3), "half_pos": (0.05, 4), "half_neg": (-4, -0.05), "cubic": (-2.9, 2.9),
           "atan": (-4.9, 4.9)}
PATHS = ["sin(x)", "x^2 - 1", "exp(-x)*cos(2*x)", "0.3*x^3 + x"]


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(sorted(SPECS)), st.sampled_from(PATHS), st.floats(-1.0, 1.0))
def test_substitution_identity(name, path, x):
    # z = f(y(x)) has z' = f'(y) y' and z'' = f'(y) y'' + f''(y) y'^2
    fspec = SPECS[name]
    lo, hi = Y_RANGE[name]
    y = univariate(parse(path, X), "x")(Dual2(x, 1.0))
    yv = lo + (hi - lo) * (0.5 + 0.4 * math.tanh(y.value))
    scale = (hi - lo) * 0.4 * (1 - math.tanh(y.value) ** 2)
    dscale = -(hi - lo) * 0.8 * math.tanh(y.value) * (1 - math.tanh(y.value) ** 2)
    yp = scale * y.d1
    ypp = scale * y.d2 + dscale * y.d1 ** 2
    inner = Dual2(yv, yp, ypp)
    z = fspec._f(inner)
    f0, f1, f2 = fspec.derivs(yv)
    assert z.value == pytest.approx(f0, rel=1e-14)
    assert z.d1 == pytest.approx(f1 * yp, rel=1e-12, abs=1e-12)
    assert z.d2 == pytest.approx(f1 * ypp + f2 * yp * yp, rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(sorted(SPECS)), st.floats(0.0, 1.0))
def test_inversion_roundtrip(name, u):
    fspec = SPECS[name]
    lo, hi = Y_RANGE[name]
    y = lo + u * (hi - lo)
    assert invert_f(fspec, fspec(y)) == pytest.approx(y, rel=1e-10, abs=1e-10)


def test_inversion_errors():
    with pytest.raises(OutOfRange):
        invert_f(SPECS["exp"], -1.0)
    with pytest.raises(BranchRequired):
        invert_f(FSpec("half_square"), 2.0)
    with pytest.raises(OutOfRange):
        invert_f(SPECS["cubic"], 100.0)
    assert invert_f(SPECS["cubic"], 10.0) == pytest.approx(2.0, abs=1e-12)


def test_non_monotone_custom_rejected():
    with pytest.raises(StructureMismatch):
        FSpec("custom", parse("y^2", Y), (-1.0, 1.0)).check()


def _langmuir(**kw):
    return OdeProblem("f_type", (-4.0, 6.0), a2=parse("3", X), a1=parse("4", X),
                      a0=parse("2", X), fspec=FSpec("half_square", branch="positive"),
                      forcing=ForcingSpec.from_dicts([{"A": 1}]),
                      equation=parse("3*y*ypp + 3*yp^2 + 4*y*yp + y^2 - 1",
                                     ("x", "y", "yp", "ypp")), **kw)


def test_langmuir_reduces_to_constant_coefficients():
    z = apply_substitution(_langmuir())
    assert z.describe() == "3*z'' + 4*z' + 2*z = 1"


def test_langmuir_solution_trims_to_range_and_solves():
    prob = _langmuir(constants=(1.0, 0.0))
    res = solve_f_type(prob)
    lo, hi = res.y.domain
    assert res.excluded and lo > -4.0
    eq = original_equation(prob)
    rep = residual_check(res.y, eq, (lo, hi), 257, 1e-7, singular=["left"])
    assert rep.passed
    for x in np.linspace(lo + 0.1, hi, 7):
        z = 2 * math.exp(-2 * x / 3) * math.cos(math.sqrt(2) * x / 3) + 1
        assert res.y(float(x)) == pytest.approx(math.sqrt(z), rel=1e-10)


def test_mismatched_equation_rejected():
    prob = _langmuir()
    prob.equation = parse("3*y*ypp + yp^2 + 4*y*yp + y^2 - 1", ("x", "y", "yp", "ypp"))
    with pytest.raises(StructureMismatch):
        apply_substitution(prob)


def test_exp_ivp_initial_conditions():
    prob = OdeProblem("f_type", (0.0, 1.0), ics=InitialConditions(0.0, 0.0, 0.0),
                      a2=parse("1", X), a1=parse("0", X), a0=parse("1", X),
                      fspec=FSpec("exp_y"),
                      forcing=ForcingSpec.from_dicts([{"A": 1, "b": 2, "kind": "cos"}]))
    res = solve_f_type(prob)
    y, yp, _ = res.y.derivatives(0.0)
    assert abs(y) <= 1e-9 and abs(yp) <= 1e-9
    for x in (0.25, 0.5, 1.0):
        exact = math.log((math.cos(2 * x) - 4 * math.cos(x)) / -3)
        assert res.y(x) == pytest.approx(exact, abs=1e-12)
