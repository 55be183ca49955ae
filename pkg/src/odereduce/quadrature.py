"""Adaptive Simpson quadrature with endpoint-singularity handling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import DivergentIntegral, DomainError

MAX_DEPTH = 40
MAX_PIECES = 400


@dataclass
class QuadResult:
    value: float
    error: float
    evaluations: int
    converged: bool


def _simpson(f, a, fa, m, fm, b, fb, whole, tol, depth, acc):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    acc[0] += 2
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth >= MAX_DEPTH or m == a or b == m:
        acc[1] = False
        acc[2] += abs(delta) / 15.0
        return left + right + delta / 15.0
    if abs(delta) <= 15.0 * tol:
        acc[2] += abs(delta) / 15.0
        return left + right + delta / 15.0
    return (_simpson(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth + 1, acc)
            + _simpson(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth + 1, acc))


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-10) -> QuadResult:
    """Plain adaptive Simpson on a closed interval where ``f`` is finite."""
    if a == b:
        return QuadResult(0.0, 0.0, 0, True)
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    acc = [3, True, 0.0]
    value = _simpson(f, a, fa, m, fm, b, fb, whole, tol, 0, acc)
    return QuadResult(value, acc[2], acc[0], acc[1])


def _finite_at(f, x) -> bool:
    try:
        v = f(x)
    except (DomainError, ZeroDivisionError, OverflowError, ValueError):
        return False
    return math.isfinite(v)


def _toward_endpoint(f, anchor: float, other: float, tol: float) -> QuadResult:
    """Integrate from ``anchor`` (singular) to ``other`` by geometric shrinking.

    Pieces [anchor + w/2, anchor + w] are summed with w halving until the
    geometric extrapolation of the remaining tail is below ``tol``.
    """
    sign = 1.0 if other > anchor else -1.0
    length = abs(other - anchor)
    # below this width, x = anchor + w carries too few significant bits of w
    floor = 1e-9 * abs(anchor)
    total = 0.0
    err = 0.0
    evals = 0
    prev = None
    last_ratio = None
    growth = 0
    w = length
    for k in range(MAX_PIECES):
        inner = anchor + sign * 0.5 * w
        outer = anchor + sign * w
        if inner == anchor or inner == outer:
            break
        piece_tol = 0.25 * tol * 2.0 ** (-0.5 * k)
        lo, hi = (inner, outer) if sign > 0 else (outer, inner)
        res = adaptive_simpson(f, lo, hi, max(piece_tol, 1e-300))
        evals += res.evaluations
        err += res.error
        piece = sign * res.value
        total += piece
        if prev is not None and prev != 0.0:
            ratio = piece / prev
            if 0.0 <= ratio < 1.0:
                growth = 0
                tail = piece * ratio / (1.0 - ratio)
                if abs(tail) < tol and k >= 3:
                    return QuadResult(total + tail, err + abs(tail), evals, True)
                if w < floor:
                    if last_ratio is not None and abs(ratio - last_ratio) <= 1e-3 * ratio:
                        return QuadResult(total + tail, err + abs(tail) * 1e-6, evals, True)
                    break
            elif abs(ratio) >= 1.0:
                growth += 1
                if growth >= 12:
                    break
            last_ratio = ratio
        elif prev is not None and prev == 0.0 and piece == 0.0 and k >= 3:
            return QuadResult(total, err, evals, True)
        prev = piece
        w *= 0.5
    raise DivergentIntegral(
        f"improper integral does not converge at the endpoint {anchor!r}",
        operation="integrate", point=anchor, partial_sum=total)


def integrate(f: Callable[[float], float], a: float, b: float,
              tol: float = 1e-10) -> QuadResult:
    """Integral of ``f`` over [a, b] (either orientation).

    An endpoint where ``f`` is undefined or infinite is treated as an
    integrable singularity; divergence raises DivergentIntegral.
    """
    if a == b:
        return QuadResult(0.0, 0.0, 0, True)
    if a > b:
        r = integrate(f, b, a, tol)
        return QuadResult(-r.value, r.error, r.evaluations, r.converged)
    sa, sb = not _finite_at(f, a), not _finite_at(f, b)
    if not sa and not sb:
        return adaptive_simpson(f, a, b, tol)
    if sa and sb:
        m = 0.5 * (a + b)
        left = _toward_endpoint(f, a, m, 0.5 * tol)
        right = _toward_endpoint(f, b, m, 0.5 * tol)
        return QuadResult(left.value - right.value, left.error + right.error,
                          left.evaluations + right.evaluations, True)
    if sa:
        return _toward_endpoint(f, a, b, tol)
    r = _toward_endpoint(f, b, a, tol)
    return QuadResult(-r.value, r.error, r.evaluations, r.converged)


def quad(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10) -> float:
    return integrate(f, a, b, tol).value
