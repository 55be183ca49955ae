import math

import pytest

from odereduce.errors import DivergentIntegral
from odereduce.quadrature import adaptive_simpson, integrate, quad


def test_smooth_integrals():
    assert quad(math.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-10)
    assert quad(lambda x: x ** 4, -1.0, 2.0) == pytest.approx(33 / 5, abs=1e-10)
    assert adaptive_simpson(math.exp, 0.0, 1.0, 1e-12).value == pytest.approx(math.e - 1, abs=1e-11)


def test_orientation_and_empty_interval():
    assert quad(math.cos, 1.0, 0.0) == pytest.approx(-math.sin(1.0), abs=1e-10)
    assert integrate(math.cos, 0.5, 0.5).value == 0.0


def test_inverse_sqrt_singularity_at_zero():
    # t = sqrt(x) for the weight 4x
    assert quad(lambda x: 1 / (2 * math.sqrt(x)), 0.0, 4.0) == pytest.approx(2.0, abs=1e-9)


def test_arcsine_singularities_at_both_ends():
    assert quad(lambda x: 1 / math.sqrt(1 - x * x), -1.0, 1.0) == pytest.approx(math.pi, abs=1e-8)


def test_divergent_integral_is_reported():
    with pytest.raises(DivergentIntegral):
        quad(lambda x: 1 / x, 0.0, 1.0)
