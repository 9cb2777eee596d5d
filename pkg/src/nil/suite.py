"""The embedded benchmark suite and its expectations."""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources

from .formula import Atom, Problem, parse_formula, parse_problem
from .polynomial import from_expr, normalize

_FLIP = {"<": ">", ">": "<", "<=": ">=", ">=": "<=", "=": "="}


@dataclass(frozen=True)
class Case:
    name: str
    file: str
    category: str
    expect: str  # "exact", "valid", "svm-failed" or "stretch"
    reference_degree: int | None = None
    reference_interpolant: str | None = None
    degrees: tuple[int, ...] = ()  # degrees to run; empty means the file's degree

    @property
    def required(self) -> bool:
        return self.expect != "stretch"

    def problem(self, degree: int | None = None) -> Problem:
        text = resources.files("nil.benchmarks").joinpath(self.file).read_text()
        p = parse_problem(text, self.name)
        return replace(p, degree=degree) if degree is not None else p


CASES = (
    Case("Dummy", "dummy.nil", "I", "exact", 1, "x < 0"),
    Case("Necklace", "necklace.nil", "I", "valid", 1, "-y < 0"),
    Case("Face", "face.nil", "I", "valid", 4),
    Case("Twisted", "twisted.nil", "I", "stretch", 4),
    Case("Ultimate", "ultimate.nil", "I", "stretch", 7),
    Case("IJCAR16-1", "ijcar16_1.nil", "I", "valid", 1, "1 - (3/4)*x1 - (1/2)*x2 < 0"),
    Case("CAV13-1", "cav13_1.nil", "I", "valid", 2, "-1 + (1/2)*x^2 - (1/3)*y + (1/3)*x*y - (1/4)*y^2 < 0"),
    Case("CAV13-2", "cav13_2.nil", "I", "stretch", 4),
    Case("CAV13-3", "cav13_3.nil", "I", "valid", 1, "-1 + (2/99)*vc1 < 0"),
    Case("Parallel parabola", "parallel_parabola.nil", "II", "valid", 2, "1/2 + x^2 < y"),
    Case("Parallel halfplane", "parallel_halfplane.nil", "II", "exact", 1, "x < y"),
    Case("Sharper-1", "sharper_1.nil", "II", "valid", 2, "2 + y < y^2"),
    Case("Sharper-2", "sharper_2.nil", "II", "exact", 1, "y > 0"),
    Case("Coincident", "coincident.nil", "II", "exact", 2, "(x + y)^2 > 0"),
    Case("Adjacent", "adjacent.nil", "II", "exact", 2, "x^2 < y"),
    Case("IJCAR16-2", "ijcar16_2.nil", "II", "exact", 1, "x1 < x2"),
    Case("CAV13-4", "cav13_4.nil", "II", "valid", 1, "2*xa + 4*ya > 5"),
    Case("TACAS16", "tacas16.nil", "III", "valid", 2, "15*x^2 < 4 + 20*y"),
    Case("Transcendental", "transcendental.nil", "III", "svm-failed", None, None, (1, 2, 3, 4)),
    Case("Unbalanced", "unbalanced.nil", "IV", "exact", 2, "x^2 > 0"),
)


def find_case(name: str) -> Case:
    key = name.lower().replace(" ", "").replace("_", "").replace("-", "")
    for c in CASES:
        if c.name.lower().replace(" ", "").replace("-", "") == key:
            return c
    raise KeyError(name)


def canonical_atom(text: str, variables) -> tuple:
    """(normalized poly, relation) for a single-atom formula, for exact comparison."""
    f = parse_formula(text, variables)
    if not isinstance(f, Atom):
        raise ValueError("expected a single atom")
    p, flip = normalize(from_expr(f.lhs, tuple(variables)))
    return p, _FLIP[f.rel] if flip else f.rel


def same_atom(a: str, b: str, variables) -> bool:
    pa, ra = canonical_atom(a, variables)
    pb, rb = canonical_atom(b, variables)
    return pa == pb and ra == rb


__all__ = ["Case", "CASES", "find_case", "canonical_atom", "same_atom"]
