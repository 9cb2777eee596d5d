"""Rational recovery of float coefficients and the coarse-to-fine rounding ladder."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .polynomial import Poly, ZeroPolynomial, normalize

DEFAULT_TOLERANCES = (1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-9)
DENOMINATOR_CAP = 10**6
NOISE_FLOOR = 1e-12


def _simplest_positive(lo: Fraction, hi: Fraction) -> Fraction:
    # Stern-Brocot descent for 0 < lo <= hi.
    fl = math.floor(lo)
    if fl == lo:
        return Fraction(fl)
    if fl + 1 <= hi:
        return Fraction(fl + 1)
    return fl + 1 / _simplest_positive(1 / (hi - fl), 1 / (lo - fl))


def simplest_in(lo: Fraction, hi: Fraction) -> Fraction:
    """The rational with the smallest denominator in ``[lo, hi]``.

    Ties among integers go to the one of least magnitude.
    """
    if lo > hi:
        raise ValueError("empty interval")
    if lo <= 0 <= hi:
        return Fraction(0)
    if hi < 0:
        return -_simplest_positive(-hi, -lo)
    return _simplest_positive(lo, hi)


def recover_rational(f: float, tol: float) -> Fraction:
    """Smallest-denominator rational within ``tol`` of ``f``.

    This is a convergent or semiconvergent of the continued fraction of f.
    """
    if not math.isfinite(f):
        raise ValueError("f must be finite")
    if tol <= 0:
        raise ValueError("tol must be positive")
    x, t = Fraction(f), Fraction(tol)
    return simplest_in(x - t, x + t)


@dataclass(frozen=True)
class PrecisionLadder:
    tolerances: tuple[float, ...] = DEFAULT_TOLERANCES

    def __post_init__(self):
        ts = tuple(float(t) for t in self.tolerances)
        if not ts or any(t <= 0 for t in ts):
            raise ValueError("tolerances must be positive")
        if any(a <= b for a, b in zip(ts, ts[1:])):
            raise ValueError("tolerances must be strictly decreasing")
        object.__setattr__(self, "tolerances", ts)

    def __iter__(self):
        return iter(self.tolerances)

    def __len__(self):
        return len(self.tolerances)


class Rung(NamedTuple):
    poly: Poly  # normalized: primitive integer coefficients, positive leading term
    tol: float
    flip: bool  # True when poly has the opposite sign of the float input


def scaled_coefficients(p: Poly) -> tuple[dict, float]:
    """Coefficients divided by the largest magnitude, noise floor removed."""
    s = p.max_abs_coeff()
    if s == 0 or not math.isfinite(s):
        raise ZeroPolynomial("no usable coefficients")
    out = {e: float(c) / s for e, c in p.terms.items() if abs(float(c)) >= NOISE_FLOOR * s}
    return out, s


def round_at(p: Poly, tol: float) -> Rung | None:
    """One ladder rung, or None if recovery hits the denominator cap or gives 0."""
    scaled, _ = scaled_coefficients(p)
    terms = {}
    for e, c in scaled.items():
        q = recover_rational(c, tol)
        if q.denominator > DENOMINATOR_CAP:
            return None
        terms[e] = q
    r = Poly(p.vars, terms)
    if r.is_zero():
        return None
    poly, flip = normalize(r)
    return Rung(poly, tol, flip)


def round_ladder(p: Poly, ladder: PrecisionLadder | tuple = PrecisionLadder()) -> list[Rung]:
    """Rational candidates from coarse to fine, consecutive duplicates removed."""
    scaled_coefficients(p)  # raises ZeroPolynomial early
    out: list[Rung] = []
    for tol in ladder:
        rung = round_at(p, tol)
        if rung is None:
            continue
        if out and out[-1].poly == rung.poly and out[-1].flip == rung.flip:
            continue
        out.append(rung)
    return out
