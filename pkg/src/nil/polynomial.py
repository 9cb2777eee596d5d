"""Multivariate polynomials with rational (or float) coefficients.

A :class:`Poly` is a sparse map from exponent tuples to coefficients over a
fixed, ordered tuple of variable names.  Monomials are ordered graded
lexicographically: total degree first, then exponents compared left to right,
so with variables ``(x, y)`` we get ``x^2 > x*y > y^2 > x > y > 1``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import reduce
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

from .formula import (
    Add, Atom, Const, Expr, Func, Mul, Neg, Pow, Sub, TranscendentalPresent, Var,
)


class ZeroPolynomial(ValueError):
    pass


def grlex_key(exps: tuple[int, ...]):
    return (sum(exps), exps)


class Poly:
    __slots__ = ("vars", "terms")

    def __init__(self, vars: Sequence[str], terms: Mapping[tuple[int, ...], object] | None = None):
        self.vars = tuple(vars)
        self.terms = {}
        for e, c in (terms or {}).items():
            if len(e) != len(self.vars):
                raise ValueError(f"exponent {e} does not match variables {self.vars}")
            if c != 0:
                self.terms[tuple(e)] = c

    # construction -------------------------------------------------------

    @classmethod
    def const(cls, vars, c) -> Poly:
        return cls(vars, {(0,) * len(vars): c})

    @classmethod
    def var(cls, vars, name: str) -> Poly:
        vars = tuple(vars)
        e = tuple(1 if v == name else 0 for v in vars)
        if sum(e) != 1:
            raise KeyError(name)
        return cls(vars, {e: Fraction(1)})

    def with_vars(self, vars: Sequence[str]) -> Poly:
        """Re-express over a superset (or reordering) of the variables."""
        vars = tuple(vars)
        pos = [vars.index(v) for v in self.vars]
        out = {}
        for e, c in self.terms.items():
            ne = [0] * len(vars)
            for p, k in zip(pos, e):
                ne[p] = k
            out[tuple(ne)] = c
        return Poly(vars, out)

    def _align(self, other) -> tuple[Poly, Poly]:
        if not isinstance(other, Poly):
            return self, Poly.const(self.vars, other)
        if other.vars == self.vars:
            return self, other
        merged = self.vars + tuple(v for v in other.vars if v not in self.vars)
        return self.with_vars(merged), other.with_vars(merged)

    # arithmetic ---------------------------------------------------------

    def __add__(self, other) -> Poly:
        a, b = self._align(other)
        out = dict(a.terms)
        for e, c in b.terms.items():
            out[e] = out.get(e, 0) + c
        return Poly(a.vars, out)

    __radd__ = __add__

    def __neg__(self) -> Poly:
        return Poly(self.vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> Poly:
        return self + (-other if isinstance(other, Poly) else -other)

    def __rsub__(self, other) -> Poly:
        return (-self) + other

    def __mul__(self, other) -> Poly:
        if not isinstance(other, Poly):
            return Poly(self.vars, {e: c * other for e, c in self.terms.items()})
        a, b = self._align(other)
        out: dict = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                e = tuple(i + j for i, j in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Poly(a.vars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> Poly:
        result = Poly.const(self.vars, Fraction(1))
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return self.is_constant() and self.constant() == other
        a, b = self._align(other)
        return a.terms == b.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    # queries ------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def constant(self):
        return self.terms.get((0,) * len(self.vars), 0)

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def degree_in(self, name: str) -> int:
        i = self.vars.index(name)
        return max((e[i] for e in self.terms), default=0)

    def used_vars(self) -> set[str]:
        return {v for i, v in enumerate(self.vars) if any(e[i] for e in self.terms)}

    def sorted_terms(self, descending: bool = True) -> list[tuple[tuple[int, ...], object]]:
        return sorted(self.terms.items(), key=lambda t: grlex_key(t[0]), reverse=descending)

    def leading(self):
        return self.sorted_terms()[0] if self.terms else None

    def max_abs_coeff(self) -> float:
        return max((abs(float(c)) for c in self.terms.values()), default=0.0)

    def coefficients(self) -> list:
        return [c for _, c in self.sorted_terms()]

    def split_linear(self, name: str) -> tuple[Poly, Poly] | None:
        """Write ``self = a*name + r`` with ``name`` absent from ``a`` and ``r``.

        Returns None when ``self`` is not linear in ``name``.
        """
        i = self.vars.index(name)
        a, r = {}, {}
        for e, c in self.terms.items():
            if e[i] == 0:
                r[e] = c
            elif e[i] == 1:
                a[e[:i] + (0,) + e[i + 1:]] = c
            else:
                return None
        if not a:
            return None
        return Poly(self.vars, a), Poly(self.vars, r)

    def substitute(self, name: str, value: Poly) -> Poly:
        i = self.vars.index(name)
        value = value.with_vars(self.vars) if value.vars != self.vars else value
        out = Poly(self.vars)
        powers = {0: Poly.const(self.vars, Fraction(1))}
        for e, c in self.terms.items():
            k = e[i]
            if k not in powers:
                powers[k] = value ** k
            rest = Poly(self.vars, {e[:i] + (0,) + e[i + 1:]: c})
            out = out + rest * powers[k]
        return out

    def map_coeffs(self, fn) -> Poly:
        return Poly(self.vars, {e: fn(c) for e, c in self.terms.items()})

    # evaluation ---------------------------------------------------------

    def __call__(self, point):
        return poly_eval(self, point)

    def eval_many(self, X: np.ndarray) -> np.ndarray:
        """Float evaluation at the rows of ``X`` (columns follow ``self.vars``)."""
        X = np.asarray(X, dtype=float)
        if not self.terms:
            return np.zeros(X.shape[0])
        E = np.array(list(self.terms.keys()), dtype=int)
        C = np.array([float(c) for c in self.terms.values()])
        with np.errstate(all="ignore"):
            mons = np.prod(X[:, None, :] ** E[None, :, :], axis=2)
        return mons @ C

    # conversion ---------------------------------------------------------

    def to_expr(self) -> Expr:
        terms = self.sorted_terms()
        if not terms:
            return Const(Fraction(0))
        out: Expr | None = None
        for e, c in terms:
            c = Fraction(c)
            factors: list[Expr] = []
            for v, k in zip(self.vars, e):
                if k == 1:
                    factors.append(Var(v))
                elif k > 1:
                    factors.append(Pow(Var(v), k))
            mono = reduce(Mul, factors) if factors else None
            mag = abs(c)
            if mono is None:
                term: Expr = Const(mag)
            elif mag == 1:
                term = mono
            else:
                term = Mul(Const(mag), mono)
            if out is None:
                out = Neg(term) if c < 0 else term
            else:
                out = Sub(out, term) if c < 0 else Add(out, term)
        return out

    def __repr__(self) -> str:
        return f"Poly({format_poly(self)!r}, vars={self.vars})"

    def __str__(self) -> str:
        return format_poly(self)


def poly_eval(p: Poly, point):
    """Direct evaluation; exact when coefficients and point are rational.

    ``point`` is a sequence aligned with ``p.vars`` or a mapping by name.
    """
    if isinstance(point, Mapping):
        used = p.used_vars()
        vals = [point[v] if v in used else 0 for v in p.vars]
    else:
        vals = list(point)
    total = 0
    for e, c in p.terms.items():
        term = c
        for x, k in zip(vals, e):
            if k:
                term = term * x ** k
        total = total + term
    return total


def from_expr(e: Expr, vars: Sequence[str]) -> Poly:
    """Expand a transcendental-free expression into a rational polynomial."""
    vars = tuple(vars)
    if isinstance(e, Var):
        return Poly.var(vars, e.name)
    if isinstance(e, Const):
        return Poly.const(vars, e.value)
    if isinstance(e, Add):
        return from_expr(e.left, vars) + from_expr(e.right, vars)
    if isinstance(e, Sub):
        return from_expr(e.left, vars) - from_expr(e.right, vars)
    if isinstance(e, Mul):
        return from_expr(e.left, vars) * from_expr(e.right, vars)
    if isinstance(e, Neg):
        return -from_expr(e.arg, vars)
    if isinstance(e, Pow):
        return from_expr(e.base, vars) ** e.exp
    if isinstance(e, Func):
        raise TranscendentalPresent(f"{e.fname} is not polynomial")
    raise TypeError(e)


# ---------------------------------------------------------------------------
# Normal form and printing
# ---------------------------------------------------------------------------


def normalize(p: Poly) -> tuple[Poly, bool]:
    """Primitive integer form with positive leading coefficient.

    Returns the normalized polynomial and whether its sign was flipped
    relative to ``p``; callers must carry the flip into the relation.
    """
    if p.is_zero():
        raise ZeroPolynomial("cannot normalize the zero polynomial")
    coeffs = [Fraction(c) for c in p.terms.values()]
    lcm = reduce(lambda a, b: a * b // math.gcd(a, b), (c.denominator for c in coeffs), 1)
    ints = {e: int(Fraction(c) * lcm) for e, c in p.terms.items()}
    g = reduce(math.gcd, (abs(v) for v in ints.values()))
    lead = ints[p.leading()[0]]
    sign = -1 if lead < 0 else 1
    out = Poly(p.vars, {e: Fraction(sign * v // g) for e, v in ints.items()})
    return out, sign < 0


def _mono_text(vars, e) -> str:
    parts = []
    for v, k in zip(vars, e):
        if k == 1:
            parts.append(v)
        elif k > 1:
            parts.append(f"{v}^{k}")
    return "*".join(parts)


def _coeff_text(c) -> str:
    if isinstance(c, float):
        return repr(c)
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"({c.numerator}/{c.denominator})"


def format_poly(p: Poly) -> str:
    """Canonical text: graded-lex descending, explicit ``^`` and ``*``."""
    terms = p.sorted_terms()
    if not terms:
        return "0"
    out = []
    for i, (e, c) in enumerate(terms):
        neg = c < 0
        mag = -c if neg else c
        mono = _mono_text(p.vars, e)
        if not mono:
            body = _coeff_text(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{_coeff_text(mag)}*{mono}"
        if i == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


ORIENTATIONS = (">", "<", ">=", "<=")


def poly_to_formula(p: Poly, orientation: str) -> Atom:
    """Single-atom formula ``p orientation 0``."""
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}")
    return Atom(p.to_expr(), orientation)


# ---------------------------------------------------------------------------
# Feature map and classifier expansion
# ---------------------------------------------------------------------------


def feature_dim(n: int, m: int) -> int:
    return math.comb(n + m, n)


def monomials(n: int, m: int) -> list[tuple[int, ...]]:
    """All exponent vectors of total degree <= m, constant first.

    Within a degree, monomials are listed in descending lexicographic order
    (``x^2, x*y, y^2``).
    """
    out = []
    for d in range(m + 1):
        layer = []
        for combo in combinations_with_replacement(range(n), d):
            e = [0] * n
            for i in combo:
                e[i] += 1
            layer.append(tuple(e))
        out.extend(sorted(layer, reverse=True))
    return out


class FeatureMap:
    def __init__(self, n: int, m: int):
        if n < 1 or m < 1:
            raise ValueError("need n >= 1 and m >= 1")
        self.n = n
        self.m = m
        self.monomials = monomials(n, m)
        self._E = np.array(self.monomials, dtype=int)

    def __len__(self) -> int:
        return len(self.monomials)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        out = np.prod(X[:, None, :] ** self._E[None, :, :], axis=2)
        return out[0] if single else out


def phi(point, fm: FeatureMap) -> np.ndarray:
    """Monomial feature vector of ``point`` in ``fm`` order."""
    return fm(np.asarray(point, dtype=float))


def _multinomial(m: int, e: Iterable[int]) -> int:
    e = list(e)
    out = math.factorial(m) // math.factorial(m - sum(e))
    for k in e:
        out //= math.factorial(k)
    return out


def expand_classifier(svs, alphas, labels, b: float, k, vars: Sequence[str] | None = None) -> Poly:
    """Expand ``sum_i alpha_i*y_i*(beta*<sv_i, x> + theta)^m + b`` into monomials.

    Each kernel term is expanded by the multinomial theorem, so the result
    is the classifier itself written in the basis of monomials of degree at
    most ``k.m``; coefficients are floats.
    """
    S = np.atleast_2d(np.asarray(svs, dtype=float))
    n = S.shape[1]
    if vars is None:
        vars = tuple(f"x{i + 1}" for i in range(n))
    w = np.asarray(alphas, dtype=float) * np.asarray(labels, dtype=float)
    fm = FeatureMap(n, k.m)
    sums = fm(S).T @ w  # sum_i w_i * prod_j sv_ij^e_j, one entry per monomial
    terms = {}
    for e, s in zip(fm.monomials, sums):
        d = sum(e)
        c = _multinomial(k.m, e) * (k.beta ** d) * (k.theta ** (k.m - d)) * s
        if d == 0:
            c += b
        if c != 0:
            terms[e] = float(c)
    return Poly(vars, terms)
