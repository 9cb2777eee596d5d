"""Outward-rounded interval arithmetic over batches of boxes.

Every primitive computes its bounds in round-to-nearest and then steps each
bound one or more ulps outward with ``nextafter``, which encloses the exact
result.  Library transcendental functions get a few extra ulps of slack.

Expressions are compiled once into closures that evaluate whole arrays of
boxes at a time (shape ``(N,)`` per bound); the scalar :func:`eval_interval`
is a thin wrapper over the same code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .formula import (
    Add, Atom, And, BoolConst, Const, Cos, DomainError, Exp, Expr, Formula, Log,
    Mul, Neg, Or, Pow, Sin, Sub, Var,
)

INF = math.inf
_TWO_PI = 2.0 * math.pi
_FUNC_ULPS = 4


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    @classmethod
    def point(cls, q) -> Interval:
        """Tightest float interval containing the rational ``q``."""
        lo, hi = rational_bounds(q)
        return cls(lo, hi)


class Box(dict):
    """Mapping from variable name to :class:`Interval`."""

    @classmethod
    def symmetric(cls, names: Sequence[str], radius: float) -> Box:
        return cls({n: Interval(-radius, radius) for n in names})

    def widest(self) -> tuple[str, float]:
        name = max(self, key=lambda n: self[n].width)
        return name, self[name].width

    def scaled(self, factor: float) -> Box:
        return Box({n: Interval(iv.lo * factor, iv.hi * factor) for n, iv in self.items()})

    def restrict(self, names: Sequence[str]) -> Box:
        return Box({n: self[n] for n in names})


def rational_bounds(q) -> tuple[float, float]:
    q = Fraction(q)
    f = float(q)
    if Fraction(f) == q:
        return f, f
    if Fraction(f) < q:
        return f, math.nextafter(f, INF)
    return math.nextafter(f, -INF), f


def _down(x):
    return np.nextafter(x, -INF)


def _up(x):
    return np.nextafter(x, INF)


def _widen(lo, hi, ulps: int):
    for _ in range(ulps):
        lo, hi = _down(lo), _up(hi)
    return lo, hi


def _fix_nan(lo, hi):
    lo = np.where(np.isnan(lo), -INF, lo)
    hi = np.where(np.isnan(hi), INF, hi)
    return lo, hi


# Each compiled node maps (LO, HI) arrays of shape (N, d) to a triple
# (lo, hi, undefined) of shape (N,); ``undefined`` flags boxes where a log
# argument is certainly non-positive.
IntervalFn = Callable[[np.ndarray, np.ndarray], tuple]


def _mul(alo, ahi, blo, bhi):
    with np.errstate(invalid="ignore"):
        cands = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
    cands = np.where(np.isnan(cands), 0.0, cands)
    return _down(cands.min(axis=0)), _up(cands.max(axis=0))


def _pow(lo, hi, k: int):
    with np.errstate(over="ignore"):
        plo = np.power(lo, k)
        phi = np.power(hi, k)
    if k % 2 == 1:
        return _widen(plo, phi, 2)
    nlo = np.where(lo >= 0, plo, np.where(hi <= 0, phi, 0.0))
    nhi = np.maximum(plo, phi)
    nlo, nhi = _widen(nlo, nhi, 2)
    return np.maximum(nlo, 0.0), nhi


def _has_point(lo, hi, offset: float):
    """Whether ``[lo, hi]`` may contain ``offset + 2*pi*k`` for an integer k.

    The test is padded so that a floating-point miss can only add an extremum
    that is not really there, never drop one.
    """
    pad = 1e-9 * (1.0 + np.abs(lo) + np.abs(hi))
    with np.errstate(invalid="ignore"):
        k = np.ceil((lo - pad - offset) / _TWO_PI)
        point = offset + k * _TWO_PI
    return point <= hi + pad


def _sin_like(lo, hi, fn, max_at: float, min_at: float):
    with np.errstate(invalid="ignore"):
        a, b = fn(lo), fn(hi)
    rlo, rhi = np.minimum(a, b), np.maximum(a, b)
    rlo, rhi = _widen(rlo, rhi, _FUNC_ULPS)
    rhi = np.where(_has_point(lo, hi, max_at), 1.0, rhi)
    rlo = np.where(_has_point(lo, hi, min_at), -1.0, rlo)
    wide = ~np.isfinite(lo) | ~np.isfinite(hi) | (hi - lo >= _TWO_PI)
    rlo = np.where(wide, -1.0, rlo)
    rhi = np.where(wide, 1.0, rhi)
    return np.clip(rlo, -1.0, 1.0), np.clip(rhi, -1.0, 1.0)


def compile_interval(e: Expr, index: Mapping[str, int]) -> IntervalFn:
    """Compile ``e`` into a batched interval evaluator.

    ``index`` maps variable names to columns of the (N, d) bound arrays.
    """
    if isinstance(e, Var):
        j = index[e.name]
        return lambda LO, HI: (LO[:, j], HI[:, j], None)
    if isinstance(e, Const):
        clo, chi = rational_bounds(e.value)
        return lambda LO, HI: (np.full(LO.shape[0], clo), np.full(LO.shape[0], chi), None)
    if isinstance(e, (Add, Sub, Mul)):
        fa = compile_interval(e.left, index)
        fb = compile_interval(e.right, index)
        kind = type(e)

        def binary(LO, HI):
            alo, ahi, ua = fa(LO, HI)
            blo, bhi, ub = fb(LO, HI)
            with np.errstate(invalid="ignore", over="ignore"):
                if kind is Add:
                    lo, hi = _down(alo + blo), _up(ahi + bhi)
                elif kind is Sub:
                    lo, hi = _down(alo - bhi), _up(ahi - blo)
                else:
                    lo, hi = _mul(alo, ahi, blo, bhi)
            lo, hi = _fix_nan(lo, hi)
            return lo, hi, _union(ua, ub)

        return binary
    if isinstance(e, Neg):
        fa = compile_interval(e.arg, index)

        def neg(LO, HI):
            lo, hi, u = fa(LO, HI)
            return -hi, -lo, u

        return neg
    if isinstance(e, Pow):
        fa = compile_interval(e.base, index)
        k = e.exp

        def power(LO, HI):
            lo, hi, u = fa(LO, HI)
            plo, phi = _pow(lo, hi, k)
            plo, phi = _fix_nan(plo, phi)
            return plo, phi, u

        return power
    fa = compile_interval(e.arg, index)
    if isinstance(e, Sin):
        def sin(LO, HI):
            lo, hi, u = fa(LO, HI)
            rlo, rhi = _sin_like(lo, hi, np.sin, math.pi / 2, -math.pi / 2)
            return rlo, rhi, u
        return sin
    if isinstance(e, Cos):
        def cos(LO, HI):
            lo, hi, u = fa(LO, HI)
            rlo, rhi = _sin_like(lo, hi, np.cos, 0.0, math.pi)
            return rlo, rhi, u
        return cos
    if isinstance(e, Exp):
        def exp(LO, HI):
            lo, hi, u = fa(LO, HI)
            with np.errstate(over="ignore"):
                rlo, rhi = _widen(np.exp(lo), np.exp(hi), _FUNC_ULPS)
            return np.maximum(rlo, 0.0), rhi, u
        return exp
    if isinstance(e, Log):
        def log(LO, HI):
            lo, hi, u = fa(LO, HI)
            with np.errstate(divide="ignore", invalid="ignore"):
                rlo = np.where(lo > 0, np.log(np.where(lo > 0, lo, 1.0)), -INF)
                rhi = np.where(hi > 0, np.log(np.where(hi > 0, hi, 1.0)), -INF)
            rlo, rhi = _widen(rlo, rhi, _FUNC_ULPS)
            bad = hi <= 0
            rhi = np.where(bad, -INF, rhi)
            return rlo, rhi, _union(u, bad)
        return log
    raise TypeError(e)


def _union(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a | b


def compile_float(e: Expr, index: Mapping[str, int]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile ``e`` into a batched round-to-nearest evaluator over (N, d) points."""
    if isinstance(e, Var):
        j = index[e.name]
        return lambda X: X[:, j]
    if isinstance(e, Const):
        c = float(e.value)
        return lambda X: np.full(X.shape[0], c)
    if isinstance(e, (Add, Sub, Mul)):
        fa = compile_float(e.left, index)
        fb = compile_float(e.right, index)
        if isinstance(e, Add):
            return lambda X: fa(X) + fb(X)
        if isinstance(e, Sub):
            return lambda X: fa(X) - fb(X)
        return lambda X: fa(X) * fb(X)
    if isinstance(e, Neg):
        fa = compile_float(e.arg, index)
        return lambda X: -fa(X)
    if isinstance(e, Pow):
        fa = compile_float(e.base, index)
        k = e.exp
        return lambda X: fa(X) ** k
    fa = compile_float(e.arg, index)
    fn = {Sin: np.sin, Cos: np.cos, Exp: np.exp, Log: np.log}[type(e)]
    return lambda X: fn(fa(X))


def eval_interval(e: Expr, box: Mapping[str, Interval]) -> Interval:
    """Sound enclosure of ``e`` over ``box``.

    Raises DomainError when a log argument is certainly non-positive.  When
    the argument interval only partly overlaps the domain, the result is
    clipped to the defined part (lower bound -inf).
    """
    names = list(box)
    index = {n: i for i, n in enumerate(names)}
    LO = np.array([[box[n].lo for n in names]], dtype=float)
    HI = np.array([[box[n].hi for n in names]], dtype=float)
    fn = compile_interval(e, index)
    with np.errstate(all="ignore"):
        lo, hi, undefined = fn(LO, HI)
    if undefined is not None and bool(undefined[0]):
        raise DomainError("log argument is non-positive on the whole box")
    return Interval(float(lo[0]), float(hi[0]))


# ---------------------------------------------------------------------------
# Formulas over batches of boxes
# ---------------------------------------------------------------------------


def atom_status(rel: str, lo, hi):
    """Return (certainly_false, certainly_true) arrays for ``e rel 0``."""
    if rel == "<":
        return lo >= 0, hi < 0
    if rel == "<=":
        return lo > 0, hi <= 0
    if rel == ">":
        return hi <= 0, lo > 0
    if rel == ">=":
        return hi < 0, lo >= 0
    return (lo > 0) | (hi < 0), (lo == 0) & (hi == 0)


class CompiledFormula:
    """Three-valued interval evaluation and float evaluation of an NNF formula."""

    def __init__(self, f: Formula, names: Sequence[str]):
        self.formula = f
        self.names = tuple(names)
        self.index = {n: i for i, n in enumerate(self.names)}
        self._atoms: list[Atom] = []
        self._atom_ids: dict[Atom, int] = {}
        self._tree = self._build(f)
        self._ifns = [compile_interval(a.lhs, self.index) for a in self._atoms]
        self._ffns = [compile_float(a.lhs, self.index) for a in self._atoms]

    def _build(self, f: Formula):
        if isinstance(f, Atom):
            if f not in self._atom_ids:
                self._atom_ids[f] = len(self._atoms)
                self._atoms.append(f)
            return ("atom", self._atom_ids[f])
        if isinstance(f, And):
            return ("and", [self._build(a) for a in f.args])
        if isinstance(f, Or):
            return ("or", [self._build(a) for a in f.args])
        if isinstance(f, BoolConst):
            return ("const", f.value)
        raise TypeError(f"formula must be in NNF, got {type(f).__name__}")

    @property
    def atoms(self) -> list[Atom]:
        return list(self._atoms)

    def status(self, LO: np.ndarray, HI: np.ndarray):
        """(certainly_false, certainly_true) boolean arrays over the boxes."""
        n = LO.shape[0]
        cache = {}
        with np.errstate(all="ignore"):
            for i, (a, fn) in enumerate(zip(self._atoms, self._ifns)):
                lo, hi, undefined = fn(LO, HI)
                fls, tru = atom_status(a.rel, lo, hi)
                if undefined is not None:
                    fls = fls | undefined
                    tru = tru & ~undefined
                cache[i] = (fls, tru)
        return self._combine(self._tree, cache, n)

    def _combine(self, node, cache, n):
        kind, payload = node
        if kind == "atom":
            return cache[payload]
        if kind == "const":
            return np.full(n, not payload), np.full(n, payload)
        parts = [self._combine(c, cache, n) for c in payload]
        if kind == "and":
            fls = np.logical_or.reduce([p[0] for p in parts])
            tru = np.logical_and.reduce([p[1] for p in parts])
        else:
            fls = np.logical_and.reduce([p[0] for p in parts])
            tru = np.logical_or.reduce([p[1] for p in parts])
        return fls, tru

    def holds(self, X: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Float truth value at points; ``margin`` demands slack on every atom."""
        n = X.shape[0]
        cache = {}
        with np.errstate(all="ignore"):
            for i, (a, fn) in enumerate(zip(self._atoms, self._ffns)):
                v = fn(X)
                ok = np.isfinite(v)
                slack = margin * (1.0 + np.abs(v))
                if a.rel == "<":
                    t = v < -slack
                elif a.rel == "<=":
                    t = v <= -slack if margin else v <= 0
                elif a.rel == ">":
                    t = v > slack
                elif a.rel == ">=":
                    t = v >= slack if margin else v >= 0
                else:
                    t = v == 0
                cache[i] = (~(t & ok), t & ok)
        return self._combine(self._tree, cache, n)[1]
