import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nil.formula import (
    Add, And, Atom, BadDegree, Const, Cos, DomainError, Exp, Log, Mul, Neg, Not, Or, ParseError,
    Pow, Sin, Sub, TranscendentalPresent, UndeclaredVariable, Var, eval_float, eval_rational,
    holds_float, parse_expr, walk, parse_formula, parse_problem, problem_to_text, to_nnf,
)
from nil.interval import Interval, eval_interval
from nil.suite import CASES

X, Y = Var("x"), Var("y")


def test_parse_dummy():
    p = parse_problem("vars x; common x; phi: x < -1; psi: x >= 1; degree: 1;")
    assert p.vars == ("x",) and p.common == ("x",) and p.degree == 1
    assert isinstance(p.phi, Atom) and p.phi.rel == "<"
    assert eval_rational(p.phi.lhs, {"x": Fraction(0)}) == 1
    assert p.psi.rel == ">=" and eval_rational(p.psi.lhs, {"x": Fraction(0)}) == -1


def test_decimal_literal_is_exact():
    f = parse_formula("0.8 <= y", ["y"])
    consts = [e.value for e in walk(f.lhs) if isinstance(e, Const)]
    assert Fraction(4, 5) in consts
    assert eval_rational(f.lhs, {"y": Fraction(4, 5)}) == 0


def test_zero_exponent_rejected():
    with pytest.raises(BadDegree):
        parse_problem("vars x; common x; phi: x^0 < 1; psi: x > 2;")


def test_undeclared_variable():
    with pytest.raises(UndeclaredVariable):
        parse_problem("vars x; common x; phi: x < z; psi: x > 2;")


def test_parse_error_has_position():
    with pytest.raises(ParseError) as ei:
        parse_problem("vars x;\ncommon x;\nphi: x < ;\n")
    assert ei.value.line == 3


def test_precedence():
    # && binds tighter than ||
    f = parse_formula("x > 0 || x < -1 && x > -2", ["x"])
    assert isinstance(f, Or)
    assert isinstance(f.args[1], And)
    e = parse_expr("-x^2", ["x"])
    assert eval_float(e, {"x": 3.0}) == -9.0


def test_nnf_examples():
    lt = Atom(X, "<")
    assert to_nnf(Not(lt)) == Atom(X, ">=")
    assert to_nnf(Not(Atom(X, "="))) == Or((Atom(X, "<"), Atom(X, ">")))
    a, b = Atom(X, "<"), Atom(Y, ">")
    assert to_nnf(Not(And((a, b)))) == Or((Atom(X, ">="), Atom(Y, "<=")))


def test_eval_float_examples():
    assert eval_float(Sub(Y, Pow(X, 2)), {"x": 2.0, "y": 5.0}) == 1.0
    assert eval_float(Cos(X), {"x": 0.0}) == 1.0
    with pytest.raises(DomainError):
        eval_float(Log(X), {"x": -1.0})


def test_eval_rational_examples():
    e = parse_expr("15*x^2 - 20*y - 4", ["x", "y"])
    assert eval_rational(e, {"x": Fraction(1), "y": Fraction(1)}) == -9
    assert eval_rational(Add(X, Y), {"x": Fraction(1, 3), "y": Fraction(2, 3)}) == 1
    with pytest.raises(TranscendentalPresent):
        eval_rational(Sin(X), {"x": Fraction(0)})


def _tight(iv, lo, hi, slack=1e-12):
    # outward rounding may add a few ulps, never remove any
    return iv.lo <= lo and iv.hi >= hi and iv.lo > lo - slack and iv.hi < hi + slack


def test_eval_interval_examples():
    sq = eval_interval(Pow(X, 2), {"x": Interval(-1, 2)})
    assert sq.lo == 0 and _tight(sq, 0, 4)
    assert _tight(eval_interval(Cos(X), {"x": Interval(0, 4)}), -1, 1)
    assert _tight(eval_interval(Sub(Y, Pow(X, 2)), {"x": Interval(-1, 1), "y": Interval(0, 1)}), -1, 1)
    with pytest.raises(DomainError):
        eval_interval(Log(X), {"x": Interval(-2, -1)})
    clipped = eval_interval(Log(X), {"x": Interval(-1, 1)})
    assert clipped.hi >= 0


# -- random expressions ------------------------------------------------------

leaf = st.one_of(
    st.sampled_from([X, Y]),
    st.fractions(min_value=-4, max_value=4, max_denominator=8).map(Const),
)


def _build(children):
    return st.one_of(
        st.tuples(children, children).map(lambda t: Add(*t)),
        st.tuples(children, children).map(lambda t: Sub(*t)),
        st.tuples(children, children).map(lambda t: Mul(*t)),
        st.tuples(children, st.integers(1, 4)).map(lambda t: Pow(*t)),
        children.map(Neg),
        children.map(Sin),
        children.map(Cos),
        children.map(lambda c: Exp(Mul(Const(Fraction(1, 4)), c))),
        children.map(Log),
    )


exprs = st.recursive(leaf, _build, max_leaves=8)
poly_exprs = st.recursive(
    leaf,
    lambda ch: st.one_of(
        st.tuples(ch, ch).map(lambda t: Add(*t)),
        st.tuples(ch, ch).map(lambda t: Sub(*t)),
        st.tuples(ch, ch).map(lambda t: Mul(*t)),
        st.tuples(ch, st.integers(1, 3)).map(lambda t: Pow(*t)),
        ch.map(Neg),
    ),
    max_leaves=8,
)


@st.composite
def box_and_point(draw):
    box, point = {}, {}
    for v in ("x", "y"):
        lo = draw(st.floats(-3, 3))
        w = draw(st.floats(0, 3))
        t = draw(st.floats(0, 1))
        box[v] = Interval(lo, lo + w)
        point[v] = min(lo + t * w, lo + w)
    return box, point


@settings(max_examples=1000)
@given(exprs, box_and_point())
def test_enclosure_soundness(e, bp):
    box, point = bp
    try:
        v = eval_float(e, point)
    except (DomainError, OverflowError, ValueError, ZeroDivisionError):
        return
    if not math.isfinite(v):
        return
    try:
        iv = eval_interval(e, box)
    except DomainError:
        pytest.fail("interval claims log domain error at a point where the float value exists")
    assert np.nextafter(iv.lo, -np.inf) <= v <= np.nextafter(iv.hi, np.inf)


@settings(max_examples=300)
@given(poly_exprs, st.fractions(-3, 3, max_denominator=16), st.fractions(-3, 3, max_denominator=16))
def test_float_agrees_with_rational(e, a, b):
    exact = eval_rational(e, {"x": a, "y": b})
    approx = eval_float(e, {"x": float(a), "y": float(b)})
    scale = 1.0 + abs(float(exact))
    assert abs(approx - float(exact)) <= 1e-8 * scale


rels = st.sampled_from(["<", "<=", ">", ">=", "="])
atoms_st = st.tuples(poly_exprs, rels).map(lambda t: Atom(*t))
formulas = st.recursive(
    atoms_st,
    lambda ch: st.one_of(
        st.lists(ch, min_size=2, max_size=3).map(lambda xs: And(tuple(xs))),
        st.lists(ch, min_size=2, max_size=3).map(lambda xs: Or(tuple(xs))),
        ch.map(Not),
    ),
    max_leaves=6,
)


@settings(max_examples=200)
@given(formulas)
def test_nnf_involution(f):
    g = to_nnf(to_nnf(f, negate=True), negate=True)
    rng = np.random.default_rng(0)
    pts = rng.integers(-3, 4, size=(5, 2)).astype(float)  # integer points hit equalities too
    pts = np.vstack([pts, rng.uniform(-3, 3, size=(5, 2))])
    for x, y in pts:
        point = {"x": x, "y": y}
        assert holds_float(g, point) == holds_float(f, point)


@settings(max_examples=200)
@given(formulas)
def test_negated_nnf_is_complement(f):
    g = to_nnf(f, negate=True)
    for x, y in [(0.5, -1.25), (2.0, 1.0), (-1.5, 0.75)]:
        point = {"x": x, "y": y}
        assert holds_float(g, point) == (not holds_float(f, point))


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.name)
def test_benchmark_round_trip(case):
    p = case.problem()
    text = problem_to_text(p)
    q = parse_problem(text)
    assert q == p
    assert problem_to_text(q) == text
