"""Polynomial interpolants for pairs of contradictory nonlinear formulas."""

from .formula import (
    BadDegree, DomainError, ParseError, Problem, TranscendentalPresent, UndeclaredVariable,
    parse_expr, parse_formula, parse_problem, problem_to_text,
)
from .loop import (
    BudgetExhausted, CandidateInterpolant, EmptySide, Interpolant, NilConfig, NoPolynomialInterpolant,
    NotDisjoint, nil_core, nil_delta, nil_star, reverify, solve,
)
from .polynomial import Poly, format_poly, normalize
from .rounding import PrecisionLadder, recover_rational
from .svm import KernelParams, SvmConfig, SvmFailed, TrainingSet, train
from .verify import (
    Proved, Refuted, SolverConfig, Unknown, check_interpolant, find_model, problem_box, prove_unsat,
)

__all__ = [
    "BadDegree", "DomainError", "ParseError", "Problem", "TranscendentalPresent",
    "UndeclaredVariable", "parse_expr", "parse_formula", "parse_problem", "problem_to_text",
    "BudgetExhausted", "CandidateInterpolant", "EmptySide", "Interpolant", "NilConfig",
    "NoPolynomialInterpolant", "NotDisjoint", "nil_core", "nil_delta", "nil_star", "reverify",
    "solve", "Poly", "format_poly", "normalize", "PrecisionLadder", "recover_rational",
    "KernelParams", "SvmConfig", "SvmFailed", "TrainingSet", "train", "Proved", "Refuted",
    "SolverConfig", "Unknown", "check_interpolant", "find_model", "problem_box", "prove_unsat",
]
