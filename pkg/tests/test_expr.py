import math

import pytest
from hypothesis import given, settings, strategies as st

from odereduce.dual import Dual2, differentiate, partial
from odereduce.errors import DivisionByZero, DomainError, ExprSyntaxError, UnknownIdentifier
from odereduce.expr import evaluate, lambdify, parse, rename, substitute, to_string

XY = ("x", "y")


@pytest.mark.parametrize("text, env, value", [
    ("1 + 2*3", {}, 7.0),
    ("2^3^2", {}, 512.0),
    ("-x^2", {"x": 3.0}, -9.0),
    ("(-x)^2", {"x": 3.0}, 9.0),
    ("x/2/4", {"x": 8.0}, 1.0),
    ("sqrt(1 - x^2)", {"x": 0.6}, 0.8),
    ("asin(1)", {}, math.pi / 2),
    ("ln(exp(2.5))", {}, 2.5),
    ("1e-3*x", {"x": 2.0}, 2e-3),
    ("sinh(0) + cosh(0)", {}, 1.0),
])
def test_evaluate_known_values(text, env, value):
    assert evaluate(parse(text, ("x",)), env) == pytest.approx(value, rel=1e-15, abs=1e-15)


def test_syntax_error_reports_position():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x + * 2", ("x",))
    assert info.value.to_dict()["position"] == 4


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier):
        parse("x + q", ("x",))


def test_domain_errors_are_raised_not_nan():
    with pytest.raises(DomainError):
        evaluate(parse("sqrt(x)", ("x",)), {"x": -1.0})
    with pytest.raises(DomainError):
        evaluate(parse("ln(x)", ("x",)), {"x": 0.0})
    with pytest.raises(DivisionByZero):
        evaluate(parse("1/x", ("x",)), {"x": 0.0})


@pytest.mark.parametrize("text", [
    "x^2*sin(y) - 3/(1 + x)", "-(x - y)^3", "exp(-x)*cos(x)*y + exp(-x)",
    "x - (y - 1)", "x/(y*2)", "2^(-x)", "sqrt(x*(1 - x))",
])
def test_to_string_roundtrip(text):
    e = parse(text, XY)
    again = parse(to_string(e), XY)
    env = {"x": 0.37, "y": 1.9}
    assert evaluate(again, env) == evaluate(e, env)
    assert to_string(again) == to_string(e)


def test_substitute_and_rename():
    e = parse("x*y + y", XY)
    s = substitute(e, {"y": parse("x + 1", ("x",))})
    assert evaluate(s, {"x": 2.0}) == 9.0
    r = rename(e, {"y": "z"})
    assert r.variables() == frozenset({"x", "z"})


def test_dual_arithmetic_product_rule():
    u = Dual2(2.0, 1.0)
    v = u * u * u
    assert (v.value, v.d1, v.d2) == (8.0, 12.0, 12.0)


def test_partials_hold_other_variables_fixed():
    e = parse("x^2*y + sin(y)", XY)
    assert partial(e, "x", {"x": 1.5, "y": 2.0}) == pytest.approx(6.0)
    assert partial(e, "y", {"x": 1.5, "y": 2.0}) == pytest.approx(2.25 + math.cos(2.0))


FUNCS = ["sin(x)", "cos(x)*x", "exp(-x^2)", "ln(2 + x)", "sqrt(3 + x)", "atan(x)",
         "asin(x/2)", "x^3 - 2*x", "(1 + x^2)^(-1/2)", "tan(x/3)", "sinh(x)*cosh(x)",
         "2^x"]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(FUNCS), st.floats(-1.5, 1.5))
def test_ad_matches_central_differences(text, x):
    e = parse(text, ("x",))
    f = lambdify(e, ("x",))
    v, d1, d2 = differentiate(e, "x", {"x": x}, order=2)
    h = 1e-4
    fd1 = (f(x + h) - f(x - h)) / (2 * h)
    fd2 = (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)
    assert v == pytest.approx(f(x), rel=1e-14, abs=1e-14)
    assert d1 == pytest.approx(fd1, rel=1e-6, abs=1e-7)
    assert d2 == pytest.approx(fd2, rel=1e-4, abs=1e-4)
