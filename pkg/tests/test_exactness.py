import math

import numpy as np
import pytest

from odereduce.errors import InsufficientSamples, NonMonotone, StructureMismatch, ZeroMu
from odereduce.exactness import (QuasiLinearOde, apply_mu, check_exactness, first_integral_build,
                                 first_integral_solve_zprime, halton_points,
                                 linear_ifactor_check, linear_to_quasilinear)
from odereduce.expr import parse

Q = ("x", "z", "zp")
X = ("x",)


def ode(a2, a1, a0, **kw):
    return QuasiLinearOde(parse(a2, Q), parse(a1, Q), parse(a0, Q), **kw)


EX41 = dict(a2="1", a1="12*x*z^3", a0="3*z^4 - 1")
EX42 = dict(a2="x*z*(2*x + z)", a1="x*(x + z)", a0="z*(3*x + z)")
BOX41 = ((0.0, 1.0), (0.5, 2.5), (-5.0, 5.0))
BOX42 = ((0.5, 1.5), (0.5, 1.5), (-1.0, 1.0))


def test_halton_points_deterministic_and_inside_box():
    a = halton_points(BOX41, 50)
    assert np.array_equal(a, halton_points(BOX41, 50))
    lo = np.array([b[0] for b in BOX41])
    hi = np.array([b[1] for b in BOX41])
    assert np.all((a >= lo) & (a <= hi))
    assert not np.any(np.all(a == lo, axis=1))


def test_ex41_is_exact():
    rep = check_exactness(ode(**EX41, box=BOX41))
    assert rep.exact
    assert max(rep.abs_residuals.values()) <= 1e-10


def test_ex42_not_exact_then_exact_after_mu():
    base = ode(**EX42, box=BOX42)
    rep = check_exactness(base)
    assert rep.verdict == "not-exact"
    assert rep.witness["residual"] >= 1e-2
    fixed = apply_mu(parse("1/(x*z*(2*x + z))", Q), base)
    assert check_exactness(fixed).exact


def test_zero_mu_rejected():
    with pytest.raises(ZeroMu):
        apply_mu(parse("0*x", Q), ode(**EX41, box=BOX41))


def test_insufficient_samples():
    bad = ode("sqrt(x - 10)", "0", "0", box=BOX41)
    with pytest.raises(InsufficientSamples):
        check_exactness(bad)


def test_box_required_without_anchor():
    with pytest.raises(StructureMismatch):
        check_exactness(ode(**EX41))


def test_first_integral_matches_ex41():
    fi = first_integral_build(ode(**EX41, box=BOX41), (0.0, 2.0, 0.0))
    phi = lambda x, z, zp: 3 * x * z ** 4 - x + zp
    c = phi(0.0, 2.0, 0.0)
    for x, z, zp in halton_points(BOX41, 50):
        assert fi(x, z, zp) == pytest.approx(phi(x, z, zp) - c, abs=1e-8)


def test_dphi_dzp_equals_a2_at_anchor_slice():
    o = ode(**EX42, box=BOX42)
    fixed = apply_mu(parse("1/(x*z*(2*x + z))", Q), o)
    fi = first_integral_build(fixed, (1.0, 1.0, 0.0))
    for zp in (-0.5, 0.0, 0.7):
        assert fi.d_dzp(1.0, 1.0, zp) == pytest.approx(1.0, abs=1e-9)
    assert fi.d_dzp(1.3, 0.8, 0.2) == pytest.approx(1.0, abs=1e-8)


def test_ex42_log_variant_is_off_by_half_log_z():
    fixed = apply_mu(parse("1/(x*z*(2*x + z))", Q), ode(**EX42, box=BOX42))
    fi = first_integral_build(fixed, (1.0, 1.0, 0.0))
    good = lambda x, z, zp: zp + math.log(x * math.sqrt(z * (2 * x + z)))
    variant = lambda x, z, zp: zp + math.log(x * z * math.sqrt(2 * x + z))
    diffs_good = [fi(x, z, zp) - good(x, z, zp) for x, z, zp in halton_points(BOX42, 20)]
    assert max(diffs_good) - min(diffs_good) <= 1e-9
    diffs_variant = [fi(x, z, zp) - variant(x, z, zp) for x, z, zp in halton_points(BOX42, 20)]
    assert max(diffs_variant) - min(diffs_variant) > 1e-2


def test_first_integral_needs_exactness():
    with pytest.raises(StructureMismatch):
        first_integral_build(ode(**EX42, box=BOX42), (1.0, 1.0, 0.0))


def test_solve_zprime_inverts_phi():
    fi = first_integral_build(ode(**EX41, box=BOX41), (0.0, 2.0, 0.0))
    # Phi = zp + 3x z^4 - x, so Phi = 0 at (0.1, 2) gives zp = 0.1 - 4.8
    assert first_integral_solve_zprime(fi, 0.1, 2.0) == pytest.approx(-4.7, abs=1e-9)


def test_solve_zprime_rejects_sign_change_in_a2():
    # a2 = zp + 1/2 vanishes inside the bracket, where Phi - c has roots -3/2 and 1/2
    o = ode("zp + 0.5", "0", "0", box=((0, 1), (0, 1), (-1, 1)))
    fi = first_integral_build(o, (0.0, 0.0, 0.5), require_exact=False)
    with pytest.raises(NonMonotone):
        first_integral_solve_zprime(fi, 0.0, 0.0, bracket=(-1.0, 1.0))


def test_linear_integrating_factor_criterion():
    xs = np.linspace(-1, 2, 64)
    a2, a1, a0 = parse("exp(x)", X), parse("cos(x)", X), parse("-(cos(x) + sin(x))", X)
    assert linear_ifactor_check(a2, a1, a0, xs, tol=1e-10)
    assert not linear_ifactor_check(parse("1", X), parse("x", X), parse("0", X), xs)


def test_ex43_linear_first_integral():
    o = linear_to_quasilinear(parse("exp(x)", X), parse("cos(x)", X),
                              parse("-(cos(x) + sin(x))", X), parse("1", X),
                              box=((-0.5, 1.5), (-2, 2), (-2, 2)))
    fixed = apply_mu(parse("exp(-x)", Q), o)
    assert check_exactness(fixed).exact
    fi = first_integral_build(fixed, (0.0, 1.0, 0.0))
    ref = lambda x, z, zp: zp + math.exp(-x) * math.cos(x) * z + math.exp(-x)
    c = ref(0.0, 1.0, 0.0)
    for x, z, zp in halton_points(fixed.box, 20):
        assert fi(x, z, zp) == pytest.approx(ref(x, z, zp) - c, abs=1e-9)
