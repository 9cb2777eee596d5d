"""Replays a run's history: every added counterexample must be misclassified."""

from fractions import Fraction

from nil.formula import parse_expr
from nil.polynomial import from_expr, poly_eval


def audit_history(history) -> list[str]:
    """Problems found; an empty list means the progress invariant held."""
    problems = []
    for entry in history:
        cand = entry.get("candidate")
        if not cand:
            continue
        names = tuple(cand["vars"])
        q = from_expr(parse_expr(cand["oriented"], names), names)
        thr = Fraction(cand["threshold"])
        strict = cand["text"].split()[-2] in ("<", ">")
        for pt in entry.get("cex_pos", []):
            v = poly_eval(q, tuple(Fraction(c) for c in pt))
            ok = v <= -thr if thr else (v <= 0 if strict else v < 0)
            if not ok:
                problems.append(f"iteration {entry['iteration']}: positive {pt} has q = {v}")
        for pt in entry.get("cex_neg", []):
            v = poly_eval(q, tuple(Fraction(c) for c in pt))
            ok = v >= thr if thr else (v > 0 if strict else v >= 0)
            if not ok:
                problems.append(f"iteration {entry['iteration']}: negative {pt} has q = {v}")
    return problems
