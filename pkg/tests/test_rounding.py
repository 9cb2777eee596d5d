import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nil.formula import parse_expr
from nil.polynomial import Poly, ZeroPolynomial, from_expr, poly_eval
from nil.rounding import (
    DENOMINATOR_CAP, PrecisionLadder, recover_rational, round_at, round_ladder, simplest_in,
)

XY = ("x", "y")


def P(text):
    return from_expr(parse_expr(text, XY), XY)


def brute_smallest_denominator(f: float, tol: float, qmax: int):
    """Smallest q <= qmax having some p/q within tol of f (exact arithmetic)."""
    x, t = Fraction(f), Fraction(tol)
    for q in range(1, qmax + 1):
        p_lo = math.ceil((x - t) * q)
        if Fraction(p_lo, q) <= x + t:
            return q
    return None


def test_examples():
    assert recover_rational(0.3333333, 1e-4) == Fraction(1, 3)
    assert recover_rational(0.7499999, 1e-3) == Fraction(3, 4)
    assert recover_rational(-2.0000001, 1e-3) == -2


def test_validation():
    with pytest.raises(ValueError):
        recover_rational(float("nan"), 1e-3)
    with pytest.raises(ValueError):
        recover_rational(1.0, 0)
    with pytest.raises(ValueError):
        PrecisionLadder((1e-2, 1e-1))
    with pytest.raises(ValueError):
        PrecisionLadder((1e-2, 0.0))


def test_thousand_perturbed_rationals():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        q = int(rng.integers(1, 51))
        p = int(rng.integers(-5 * q, 5 * q + 1))
        f = p / q + float(rng.choice([-1e-9, 1e-9]))
        r = recover_rational(f, 1e-6)
        assert r == Fraction(p, q)
        assert brute_smallest_denominator(f, 1e-6, r.denominator) == r.denominator


@given(st.floats(-1e3, 1e3), st.sampled_from([1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-9]))
def test_within_tolerance(f, tol):
    r = recover_rational(f, tol)
    assert abs(Fraction(r) - Fraction(f)) <= Fraction(tol)


@given(st.floats(-1e3, 1e3), st.sampled_from([1e-1, 1e-2, 1e-3, 1e-4]))
def test_best_approximation(f, tol):
    # denominators stay below ~1/tol here, so brute force is cheap
    r = recover_rational(f, tol)
    assert brute_smallest_denominator(f, tol, r.denominator) == r.denominator


@given(st.fractions(-50, 50, max_denominator=100), st.fractions(0, 3, max_denominator=100))
def test_simplest_in_interval(lo, w):
    hi = lo + w
    r = simplest_in(lo, hi)
    assert lo <= r <= hi
    for q in range(1, r.denominator):
        assert math.floor(hi * q) < lo * q  # no p/q in [lo, hi]


def test_adjacent_float_classifier():
    p = Poly(XY, {(0, 1): 0.9999, (2, 0): -1.0001, (0, 0): -0.00000003})
    rung = round_at(p, 1e-2)
    assert rung.poly == P("x^2 - y") and rung.flip  # y - x^2 with the sign carried separately


def test_scale_invariance():
    p = Poly(XY, {(1, 0): 2.0})
    for rung in round_ladder(p):
        assert rung.poly == P("x") and not rung.flip


def test_dedup_consecutive():
    p = Poly(XY, {(2, 0): 1.0, (0, 1): -0.5})
    rungs = round_ladder(p)
    assert len(rungs) == 1
    assert rungs[0].tol == 1e-1 and rungs[0].poly == P("2*x^2 - y")


def test_zero_polynomial():
    with pytest.raises(ZeroPolynomial):
        round_ladder(Poly(XY))


def test_denominator_cap_skips_rung():
    p = Poly(XY, {(1, 0): 1.0, (0, 1): math.pi / 4})
    assert recover_rational(math.pi / 4, 1e-13).denominator > DENOMINATOR_CAP
    assert round_at(p, 1e-13) is None
    assert round_at(p, 1e-4) is not None
    tols = [r.tol for r in round_ladder(p, PrecisionLadder((1e-2, 1e-4, 1e-13)))]
    assert 1e-13 not in tols


@st.composite
def float_polys(draw):
    terms = {}
    for e in draw(st.lists(st.sampled_from([(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]),
                           min_size=1, max_size=6, unique=True)):
        terms[e] = draw(st.floats(-100, 100).filter(lambda v: abs(v) > 1e-3))
    return Poly(XY, terms)


@given(float_polys())
def test_ladder_degree_and_agreement(p):
    rungs = round_ladder(p)
    assert rungs
    for r in rungs:
        assert r.poly.degree() <= p.degree()
    # the finest rung agrees in sign with p wherever p is not tiny
    finest = rungs[-1]
    rng = np.random.default_rng(0)
    s = p.max_abs_coeff()
    for x in rng.uniform(-2, 2, size=(50, 2)):
        v = float(poly_eval(p, x))
        if abs(v) > 1e-6 * s:
            w = float(poly_eval(finest.poly, x))
            assert (w > 0) == ((v > 0) != finest.flip)
