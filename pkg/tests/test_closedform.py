import math
from fractions import Fraction

import pytest

from odereduce.closedform import (ForcingSpec, apply_initial_conditions, check_linear_cc,
                                  linear_cc_residuals, resonance_multiplicity,
                                  solve_homogeneous_cc, solve_particular_cc)
from odereduce.dual import differentiate
from odereduce.expr import evaluate, parse

T = ("t",)


@pytest.mark.parametrize("alpha, beta, case", [
    (0, 4, "complex"), (3, 2, "distinct_real"), (2, 1, "double"), (0, 0, "double"),
    (Fraction(4, 3), Fraction(2, 3), "complex"),
])
def test_homogeneous_basis_solves_equation(alpha, beta, case):
    basis = solve_homogeneous_cc(alpha, beta)
    assert basis.case == case
    for phi in basis.functions:
        for t in (-1.0, 0.0, 0.7, 2.0):
            _, d1, d2 = differentiate(phi, "t", {"t": t}, order=2)
            assert d2 + float(alpha) * d1 + float(beta) * evaluate(phi, {"t": t}) == \
                pytest.approx(0.0, abs=1e-12)


def test_resonance_multiplicity_exact():
    assert resonance_multiplicity(0, 1, 0, 1) == 1
    assert resonance_multiplicity(0, 4, 0, 1) == 0
    assert resonance_multiplicity(2, 1, -1, 0) == 2
    assert resonance_multiplicity(Fraction(0), Fraction(1), Fraction(0), Fraction(0)) == 0


def _particular(alpha, beta, items):
    return solve_particular_cc(alpha, beta, ForcingSpec.from_dicts(items))


def test_resonant_sine_forcing():
    yp = _particular(0, 1, [{"A": 1, "b": 1, "kind": "sin"}])
    for t in (0.3, 1.1, 2.5):
        assert evaluate(yp, {"t": t}) == pytest.approx(-t / 2 * math.cos(t), abs=1e-12)


def test_nonresonant_hypergeometric_forcing():
    # y_tt + 4y = 1 + sin t has particular 1/4 + sin(t)/3
    yp = _particular(0, 4, [{"A": 1}, {"A": 1, "b": 1, "kind": "sin"}])
    for t in (-1.0, 0.4, 1.3):
        assert evaluate(yp, {"t": t}) == pytest.approx(0.25 + math.sin(t) / 3, abs=1e-12)


def test_polynomial_times_exponential_forcing():
    forcing = ForcingSpec.from_dicts([{"A": 2, "k": 2, "a": 1}])
    yp = solve_particular_cc(3, 2, forcing)
    samples = [-1 + k / 8 for k in range(17)]
    assert max(abs(r) / s for r, s in linear_cc_residuals(yp, 3, 2, forcing, "t", samples)) < 1e-12


def test_double_root_resonance_uses_t_squared():
    forcing = ForcingSpec.from_dicts([{"A": 1, "a": -1}])
    yp = solve_particular_cc(2, 1, forcing)
    for t in (0.5, 1.5):
        assert evaluate(yp, {"t": t}) == pytest.approx(t * t / 2 * math.exp(-t), abs=1e-12)


def test_initial_conditions_fit():
    basis = solve_homogeneous_cc(0, 9)
    sol = apply_initial_conditions(basis, None, 0.0, 1.0, 0.0)
    for t in (0.0, 0.3, 1.0):
        assert sol.inner(t)[0] == pytest.approx(math.cos(3 * t), abs=1e-13)


def test_check_linear_cc_flags_wrong_particular():
    from odereduce.errors import InternalVerificationFailed
    forcing = ForcingSpec.from_dicts([{"A": 1}, {"A": 1, "b": 1, "kind": "sin"}])
    wrong = parse("1 - (t/2)*sin(t)", T)
    with pytest.raises(InternalVerificationFailed):
        check_linear_cc(wrong, 0, 1, forcing, "t", (-1, 1), 1e-10, "test")
