"""Exact decision for leftover boxes via z3's nonlinear real arithmetic.

Polynomial atoms are passed through exactly.  Every transcendental subterm
is replaced by a fresh real variable bounded by constraints that hold for
all arguments, so an ``unsat`` answer is sound.  A ``sat`` answer may be
spurious and the caller must re-certify the model.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

import z3

from .formula import (
    Add, And, Atom, BoolConst, Const, Cos, Exp, Expr, Formula, Func, Log, Mul,
    Neg, Or, Pow, Sin, Sub, Var,
)
from .interval import Box, compile_interval

import numpy as np


def _rat(q) -> z3.ArithRef:
    q = Fraction(q)
    return z3.RealVal(f"{q.numerator}/{q.denominator}")


def _float_rat(x: float) -> z3.ArithRef:
    return _rat(Fraction(x))


class Translator:
    def __init__(self, names: Sequence[str]):
        self.vars = {n: z3.Real(n) for n in names}
        self.funcs: dict[Func, z3.ArithRef] = {}
        self.side: list = []

    def expr(self, e: Expr):
        if isinstance(e, Var):
            return self.vars[e.name]
        if isinstance(e, Const):
            return _rat(e.value)
        if isinstance(e, Add):
            return self.expr(e.left) + self.expr(e.right)
        if isinstance(e, Sub):
            return self.expr(e.left) - self.expr(e.right)
        if isinstance(e, Mul):
            return self.expr(e.left) * self.expr(e.right)
        if isinstance(e, Neg):
            return -self.expr(e.arg)
        if isinstance(e, Pow):
            base = self.expr(e.base)
            out = base
            for _ in range(e.exp - 1):
                out = out * base
            return out
        if isinstance(e, Func):
            return self._func(e)
        raise TypeError(e)

    def _func(self, e: Func):
        if e in self.funcs:
            return self.funcs[e]
        a = self.expr(e.arg)
        t = z3.Real(f"_{e.fname}{len(self.funcs)}")
        self.funcs[e] = t
        half = _rat(Fraction(1, 2))
        if isinstance(e, Cos):
            self.side += [
                t <= 1, t >= -1,
                t >= 1 - half * a * a,
                t <= 1 - half * a * a + _rat(Fraction(1, 24)) * a * a * a * a,
            ]
        elif isinstance(e, Sin):
            sixth = _rat(Fraction(1, 6))
            self.side += [
                t <= 1, t >= -1,
                z3.Implies(a >= 0, z3.And(t <= a, t >= a - sixth * a * a * a)),
                z3.Implies(a <= 0, z3.And(t >= a, t <= a - sixth * a * a * a)),
            ]
        elif isinstance(e, Exp):
            self.side += [
                t > 0, t >= 1 + a,
                t >= 1 + a + half * a * a + _rat(Fraction(1, 6)) * a * a * a,
            ]
        elif isinstance(e, Log):
            self.side += [z3.Implies(a > 0, t <= a - 1)]
        return t

    def formula(self, f: Formula):
        if isinstance(f, Atom):
            lhs = self.expr(f.lhs)
            return {
                "<": lhs < 0, "<=": lhs <= 0, ">": lhs > 0, ">=": lhs >= 0, "=": lhs == 0,
            }[f.rel]
        if isinstance(f, And):
            return z3.And([self.formula(a) for a in f.args])
        if isinstance(f, Or):
            return z3.Or([self.formula(a) for a in f.args])
        if isinstance(f, BoolConst):
            return z3.BoolVal(f.value)
        raise TypeError(f"formula must be in NNF, got {type(f).__name__}")

    def box(self, box: Mapping) -> list:
        out = []
        for n, iv in box.items():
            if n in self.vars:
                out += [self.vars[n] >= _float_rat(iv.lo), self.vars[n] <= _float_rat(iv.hi)]
        return out

    def enclosures(self, names: Sequence[str], LO: np.ndarray, HI: np.ndarray) -> list:
        """Interval bounds of each relaxed term over each box, one conjunct per box."""
        index = {n: i for i, n in enumerate(names)}
        per_box = [[] for _ in range(len(LO))]
        for e, t in self.funcs.items():
            lo, hi, _ = compile_interval(e, index)(LO, HI)
            lo = np.broadcast_to(lo, (len(LO),))
            hi = np.broadcast_to(hi, (len(LO),))
            for k in range(len(LO)):
                if np.isfinite(lo[k]):
                    per_box[k].append(t >= _float_rat(float(lo[k])))
                if np.isfinite(hi[k]):
                    per_box[k].append(t <= _float_rat(float(hi[k])))
        return per_box


def value_of(model: z3.ModelRef, v: z3.ArithRef, digits: int = 30) -> tuple[Fraction | None, bool]:
    """Model value as a Fraction and whether it is exact."""
    val = model.eval(v, model_completion=False)
    if z3.is_rational_value(val):
        return Fraction(val.numerator_as_long(), val.denominator_as_long()), True
    if z3.is_algebraic_value(val):
        approx = val.approx(digits)
        return Fraction(approx.numerator_as_long(), approx.denominator_as_long()), False
    return None, True


def solve(f: Formula, names: Sequence[str], box: Box, LO=None, HI=None,
          timeout_ms: int = 10000, seed: int = 0, extra: Sequence = ()):
    """Check ``f`` inside the union of boxes (rows of LO/HI) or inside ``box``.

    Returns ("unsat", None), ("sat", {name: Fraction}, exact_flag) or
    ("unknown", None).
    """
    tr = Translator(names)
    body = tr.formula(f)
    s = z3.Solver()
    s.set("timeout", int(timeout_ms))
    s.set("random_seed", int(seed) % (2**31))
    s.add(body)
    s.add(*tr.side)
    s.add(*tr.box(box))
    for c in extra:
        s.add(c(tr.vars) if callable(c) else c)
    if LO is not None and len(LO):
        enc = tr.enclosures(names, LO, HI)
        regions = []
        for k in range(len(LO)):
            cons = []
            for i, n in enumerate(names):
                cons += [tr.vars[n] >= _float_rat(float(LO[k, i])), tr.vars[n] <= _float_rat(float(HI[k, i]))]
            regions.append(z3.And(cons + enc[k]))
        s.add(z3.Or(regions))
    r = s.check()
    if r == z3.unsat:
        return "unsat", None, True
    if r == z3.unknown:
        return "unknown", None, True
    model = s.model()
    point, exact = {}, True
    for n in names:
        val, ok = value_of(model, tr.vars[n])
        exact = exact and ok
        if val is None:
            iv = box[n]
            val = Fraction(0) if iv.lo <= 0 <= iv.hi else Fraction(iv.mid)
        point[n] = val
    if not exact:
        point = _rationalize(s, tr, names, point)
    return "sat", point, exact


def _rationalize(s: z3.Solver, tr: Translator, names, point):
    """Try to move an algebraic model to nearby rationals, one variable at a time."""
    from .rounding import recover_rational

    s.push()
    for n in names:
        q = point[n]
        for tol in (1e-3, 1e-6, 1e-9):
            cand = recover_rational(float(q), tol * (1 + abs(float(q))))
            s.push()
            s.add(tr.vars[n] == _rat(cand))
            if s.check() == z3.sat:
                s.pop()
                s.add(tr.vars[n] == _rat(cand))
                point[n] = cand
                break
            s.pop()
        else:
            break
    if s.check() == z3.sat:
        m = s.model()
        for n in names:
            val, _ = value_of(m, tr.vars[n])
            if val is not None:
                point[n] = val
    s.pop()
    return point


class SeparabilityUnknown(RuntimeError):
    pass


def exact_separator(pos, neg, n: int, m: int, timeout_ms: int = 20_000) -> dict | None:
    """Monomial coefficients c with c.f(x) >= 1 on ``pos`` and <= -1 on ``neg``.

    A linear feasibility problem over the degree-``m`` monomials, solved in
    exact rational arithmetic.  Returns ``{exponent: Fraction}``, or None when
    no polynomial of degree ``m`` separates the points.
    """
    from .polynomial import monomials

    mons = monomials(n, m)
    c = [z3.Real(f"c{i}") for i in range(len(mons))]

    def value(point):
        x = [Fraction(v) for v in point]
        terms = []
        for ci, e in zip(c, mons):
            f = Fraction(1)
            for xv, k in zip(x, e):
                f *= xv**k
            if f:
                terms.append(_rat(f) * ci)
        return z3.Sum(terms) if terms else z3.RealVal(0)

    s = z3.SolverFor("QF_LRA")
    s.set("timeout", timeout_ms)
    for p in pos:
        s.add(value(p) >= 1)
    for p in neg:
        s.add(value(p) <= -1)
    r = s.check()
    if r == z3.unsat:
        return None
    if r != z3.sat:
        raise SeparabilityUnknown(s.reason_unknown())
    model = s.model()
    out = {}
    for ci, e in zip(c, mons):
        v = model.eval(ci, model_completion=True).as_fraction()
        if v:
            out[e] = v
    return out
