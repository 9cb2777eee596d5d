"""Quantifier-free nonlinear real arithmetic: syntax trees, parsing and evaluation.

Expressions are immutable trees over exact rational constants.  Atoms always
compare an expression against zero; ``e < f`` is stored as ``e - f < 0``.
Three evaluation regimes are offered: ``eval_float`` (round to nearest),
``eval_rational`` (exact, polynomial expressions only) and the outward-rounded
interval evaluation in :mod:`nil.interval`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

RELATIONS = ("<", ">", "<=", ">=", "=")
FUNCTIONS = ("sin", "cos", "exp", "log")


class ParseError(ValueError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class UndeclaredVariable(ParseError):
    pass


class BadDegree(ParseError):
    pass


class DomainError(ArithmeticError):
    """Raised when log is applied outside its domain."""


class TranscendentalPresent(ValueError):
    """Raised when exact evaluation meets sin/cos/exp/log."""


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


class Expr:
    __slots__ = ()

    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, k: int):
        return Pow(self, k)

    def __str__(self) -> str:
        return expr_to_text(self)


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Const(Expr):
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exp: int

    def __post_init__(self):
        if not isinstance(self.exp, int) or self.exp < 1:
            raise ValueError(f"exponent must be a natural number >= 1, got {self.exp!r}")


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Func(Expr):
    """Base class of the unary transcendental functions."""

    arg: Expr
    fname = ""


@dataclass(frozen=True)
class Sin(Func):
    fname = "sin"


@dataclass(frozen=True)
class Cos(Func):
    fname = "cos"


@dataclass(frozen=True)
class Exp(Func):
    fname = "exp"


@dataclass(frozen=True)
class Log(Func):
    fname = "log"


FUNC_CLASSES = {"sin": Sin, "cos": Cos, "exp": Exp, "log": Log}


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Const(Fraction(x))
    if isinstance(x, float):
        return Const(Fraction(x))
    if isinstance(x, str):
        return Var(x)
    raise TypeError(f"cannot convert {x!r} to an expression")


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, (Add, Sub, Mul)):
        return (e.left, e.right)
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, (Neg, Func)):
        return (e.arg,)
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(children(node))


def expr_vars(e: Expr) -> set[str]:
    return {n.name for n in walk(e) if isinstance(n, Var)}


def has_transcendental(e: Expr) -> bool:
    return any(isinstance(n, Func) for n in walk(e))


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, Add):
        return Add(substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Sub):
        return Sub(substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Mul):
        return Mul(substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exp)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Func):
        return type(e)(substitute(e.arg, mapping))
    raise TypeError(e)


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return formula_to_text(self)


@dataclass(frozen=True)
class Atom(Formula):
    lhs: Expr
    rel: str

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise ValueError(f"unknown relation {self.rel!r}")


@dataclass(frozen=True)
class And(Formula):
    args: tuple[Formula, ...]


@dataclass(frozen=True)
class Or(Formula):
    args: tuple[Formula, ...]


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class BoolConst(Formula):
    value: bool


TRUE = BoolConst(True)
FALSE = BoolConst(False)


def conj(*parts: Formula) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, And):
            flat.extend(p.args)
        else:
            flat.append(p)
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def disj(*parts: Formula) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, Or):
            flat.extend(p.args)
        else:
            flat.append(p)
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def atoms(f: Formula) -> Iterator[Atom]:
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, (And, Or)):
        for a in f.args:
            yield from atoms(a)
    elif isinstance(f, Not):
        yield from atoms(f.arg)


def formula_vars(f: Formula) -> set[str]:
    out: set[str] = set()
    for a in atoms(f):
        out |= expr_vars(a.lhs)
    return out


_COMPLEMENT = {"<": ">=", ">=": "<", ">": "<=", "<=": ">"}


def to_nnf(f: Formula, negate: bool = False) -> Formula:
    """Push negations down to the atoms.

    Negated atoms are replaced by their complementary relation; a negated
    equality becomes the disjunction of the two strict inequalities.
    """
    if isinstance(f, Atom):
        if not negate:
            return f
        if f.rel == "=":
            return Or((Atom(f.lhs, "<"), Atom(f.lhs, ">")))
        return Atom(f.lhs, _COMPLEMENT[f.rel])
    if isinstance(f, Not):
        return to_nnf(f.arg, not negate)
    if isinstance(f, BoolConst):
        return BoolConst(f.value != negate)
    if isinstance(f, And):
        parts = [to_nnf(a, negate) for a in f.args]
        return disj(*parts) if negate else conj(*parts)
    if isinstance(f, Or):
        parts = [to_nnf(a, negate) for a in f.args]
        return conj(*parts) if negate else disj(*parts)
    raise TypeError(f)


def map_atoms(f: Formula, fn) -> Formula:
    if isinstance(f, Atom):
        return fn(f)
    if isinstance(f, And):
        return conj(*(map_atoms(a, fn) for a in f.args))
    if isinstance(f, Or):
        return disj(*(map_atoms(a, fn) for a in f.args))
    if isinstance(f, Not):
        return Not(map_atoms(f.arg, fn))
    return f


def simplify_bool(f: Formula) -> Formula:
    """Fold boolean constants out of an NNF formula."""
    if isinstance(f, And):
        parts = []
        for a in f.args:
            s = simplify_bool(a)
            if s == FALSE:
                return FALSE
            if s != TRUE:
                parts.append(s)
        return conj(*parts) if parts else TRUE
    if isinstance(f, Or):
        parts = []
        for a in f.args:
            s = simplify_bool(a)
            if s == TRUE:
                return TRUE
            if s != FALSE:
                parts.append(s)
        return disj(*parts) if parts else FALSE
    return f


def compare(value, rel: str) -> bool:
    if rel == "<":
        return value < 0
    if rel == ">":
        return value > 0
    if rel == "<=":
        return value <= 0
    if rel == ">=":
        return value >= 0
    return value == 0


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def eval_float(e: Expr, point: Mapping[str, float]) -> float:
    if isinstance(e, Var):
        return float(point[e.name])
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, Add):
        return eval_float(e.left, point) + eval_float(e.right, point)
    if isinstance(e, Sub):
        return eval_float(e.left, point) - eval_float(e.right, point)
    if isinstance(e, Mul):
        return eval_float(e.left, point) * eval_float(e.right, point)
    if isinstance(e, Pow):
        return eval_float(e.base, point) ** e.exp
    if isinstance(e, Neg):
        return -eval_float(e.arg, point)
    v = eval_float(e.arg, point)
    if isinstance(e, Sin):
        return math.sin(v)
    if isinstance(e, Cos):
        return math.cos(v)
    if isinstance(e, Exp):
        return math.exp(v)
    if isinstance(e, Log):
        if v <= 0:
            raise DomainError(f"log of non-positive value {v}")
        return math.log(v)
    raise TypeError(e)


def eval_rational(e: Expr, point: Mapping[str, Fraction]) -> Fraction:
    if isinstance(e, Var):
        return Fraction(point[e.name])
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Add):
        return eval_rational(e.left, point) + eval_rational(e.right, point)
    if isinstance(e, Sub):
        return eval_rational(e.left, point) - eval_rational(e.right, point)
    if isinstance(e, Mul):
        return eval_rational(e.left, point) * eval_rational(e.right, point)
    if isinstance(e, Pow):
        return eval_rational(e.base, point) ** e.exp
    if isinstance(e, Neg):
        return -eval_rational(e.arg, point)
    if isinstance(e, Func):
        raise TranscendentalPresent(f"{e.fname} has no exact rational evaluation")
    raise TypeError(e)


def holds_float(f: Formula, point: Mapping[str, float]) -> bool:
    """Truth value of ``f`` under round-to-nearest evaluation."""
    if isinstance(f, Atom):
        try:
            return compare(eval_float(f.lhs, point), f.rel)
        except DomainError:
            return False
    if isinstance(f, And):
        return all(holds_float(a, point) for a in f.args)
    if isinstance(f, Or):
        return any(holds_float(a, point) for a in f.args)
    if isinstance(f, Not):
        return not holds_float(f.arg, point)
    if isinstance(f, BoolConst):
        return f.value
    raise TypeError(f)


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    vars: tuple[str, ...]
    common: tuple[str, ...]
    phi: Formula
    psi: Formula
    degree: int = 1
    options: Mapping[str, str] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        missing = (formula_vars(self.phi) | formula_vars(self.psi) | set(self.common)) - set(self.vars)
        if missing:
            raise ValueError(f"undeclared variables: {sorted(missing)}")

    @property
    def phi_vars(self) -> tuple[str, ...]:
        """Variables of the phi side, common ones first."""
        own = formula_vars(self.phi)
        return self.common + tuple(v for v in self.vars if v in own and v not in self.common)

    @property
    def psi_vars(self) -> tuple[str, ...]:
        own = formula_vars(self.psi)
        return self.common + tuple(v for v in self.vars if v in own and v not in self.common)

    def option(self, key: str, default=None):
        return self.options.get(key, default)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Neg: 3, Pow: 4}


def _const_text(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator) if c >= 0 else f"({c.numerator})"
    return f"({c.numerator}/{c.denominator})"


def expr_to_text(e: Expr, parent: int = 0) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Const):
        return _const_text(e.value)
    if isinstance(e, Func):
        return f"{e.fname}({expr_to_text(e.arg)})"
    prec = _PREC[type(e)]
    if isinstance(e, Add):
        s = f"{expr_to_text(e.left, prec)} + {expr_to_text(e.right, prec + 1)}"
    elif isinstance(e, Sub):
        s = f"{expr_to_text(e.left, prec)} - {expr_to_text(e.right, prec + 1)}"
    elif isinstance(e, Mul):
        s = f"{expr_to_text(e.left, prec)}*{expr_to_text(e.right, prec + 1)}"
    elif isinstance(e, Neg):
        s = f"-{expr_to_text(e.arg, prec + 1)}"
    else:
        s = f"{expr_to_text(e.base, prec + 1)}^{e.exp}"
    return f"({s})" if prec < parent or (parent and isinstance(e, Neg)) else s


def formula_to_text(f: Formula, parent: int = 0) -> str:
    if isinstance(f, Atom):
        return f"{expr_to_text(f.lhs)} {f.rel} 0"
    if isinstance(f, BoolConst):
        return "0 = 0" if f.value else "0 < 0"
    if isinstance(f, Not):
        return f"!{formula_to_text(f.arg, 3)}"
    prec = 2 if isinstance(f, And) else 1
    sep = " && " if isinstance(f, And) else " || "
    s = sep.join(formula_to_text(a, prec + 1) for a in f.args)
    return f"({s})" if prec < parent else s


def problem_to_text(p: Problem) -> str:
    lines = [f"name: {p.name};"] if p.name else []
    lines += [f"vars {' '.join(p.vars)};", f"common {' '.join(p.common)};"]
    lines.append(f"phi: {formula_to_text(p.phi)};")
    lines.append(f"psi: {formula_to_text(p.psi)};")
    lines.append(f"degree: {p.degree};")
    for k, v in p.options.items():
        lines.append(f"option {k} = {v};")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op>&&|\|\||<=|>=|==|[-+*/^()<>=!;:,])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(line, pos - line_start + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.declared: set[str] | None = None

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None, cls=ParseError):
        t = tok or self.tok
        return cls(t.line, t.col, msg)

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("op", "name") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        t = self.tok
        if not self.accept(text):
            raise self.error(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return t

    def name(self) -> str:
        t = self.tok
        if t.kind != "name":
            raise self.error(f"expected a name, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    # formula := disjunction
    def formula(self) -> Formula:
        parts = [self.conjunction()]
        while self.accept("||"):
            parts.append(self.conjunction())
        return disj(*parts)

    def conjunction(self) -> Formula:
        parts = [self.negation()]
        while self.accept("&&"):
            parts.append(self.negation())
        return conj(*parts)

    def negation(self) -> Formula:
        if self.accept("!"):
            return Not(self.negation())
        if self.tok.text == "(":
            # "(" may open a parenthesised formula or an expression
            save = self.i
            self.i += 1
            try:
                inner = self.formula()
                self.expect(")")
                if self.tok.text not in RELATIONS + ("+", "-", "*", "/", "^", "=="):
                    return inner
            except ParseError:
                pass
            self.i = save
        return self.atom()

    def atom(self) -> Formula:
        left = self.expr()
        t = self.tok
        rel = t.text if t.kind == "op" else ""
        if rel == "==":
            rel = "="
        if rel not in RELATIONS:
            raise self.error(f"expected a relation, found {t.text or 'end of input'!r}")
        self.i += 1
        right = self.expr()
        if isinstance(right, Const) and right.value == 0:
            return Atom(left, rel)
        return Atom(Sub(left, right), rel)

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            r = self.term()
            e = Add(e, r) if op == "+" else Sub(e, r)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op, t = self.tok.text, self.tok
            self.i += 1
            r = self.unary()
            if op == "*":
                e = Mul(e, r)
                continue
            if not isinstance(r, Const):
                raise self.error("division is only allowed by a numeric constant", t)
            if r.value == 0:
                raise self.error("division by zero", t)
            e = Const(e.value / r.value) if isinstance(e, Const) else Mul(e, Const(1 / r.value))
        return e

    def unary(self) -> Expr:
        if self.accept("-"):
            arg = self.unary()
            return Const(-arg.value) if isinstance(arg, Const) else Neg(arg)
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.text == "^":
            t = self.tok
            self.i += 1
            et = self.tok
            if et.kind != "num" or not et.text.isdigit():
                raise self.error("exponent must be a natural number literal", et, BadDegree)
            k = int(et.text)
            if k < 1:
                raise self.error("exponent 0 is not allowed; write the constant 1", et, BadDegree)
            self.i += 1
            return Pow(base, k)
        return base

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Const(Fraction(t.text))
        if t.kind == "name":
            self.i += 1
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return FUNC_CLASSES[t.text](arg)
            if self.declared is not None and t.text not in self.declared:
                raise self.error(f"undeclared variable {t.text!r}", t, UndeclaredVariable)
            return Var(t.text)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        raise self.error(f"unexpected {t.text or 'end of input'!r}")

    def namelist(self) -> list[str]:
        names = [self.name()]
        while self.tok.text != ";":
            self.accept(",")
            names.append(self.name())
        return names

    def problem(self, name: str = "") -> Problem:
        vars_: list[str] = []
        common: list[str] | None = None
        phi = psi = None
        degree = 1
        options: dict[str, str] = {}
        first_tok = self.tok
        while self.tok.kind != "eof":
            t = self.tok
            key = self.name()
            if key == "vars":
                for v in self.namelist():
                    if v in FUNCTIONS:
                        raise self.error(f"{v!r} is a reserved function name", t)
                    if v not in vars_:
                        vars_.append(v)
                self.declared = set(vars_)
            elif key == "common":
                common = self.namelist()
                for v in common:
                    if v not in vars_:
                        raise self.error(f"common variable {v!r} not declared in vars", t, UndeclaredVariable)
            elif key in ("phi", "psi"):
                self.expect(":")
                if self.declared is None:
                    raise self.error("'vars' must be declared before formulas", t, UndeclaredVariable)
                f = self.formula()
                if key == "phi":
                    phi = f
                else:
                    psi = f
            elif key == "degree":
                self.expect(":")
                dt = self.tok
                if dt.kind != "num" or not dt.text.isdigit() or int(dt.text) < 1:
                    raise self.error(f"degree must be a natural number >= 1, got {dt.text!r}", dt, BadDegree)
                degree = int(dt.text)
                self.i += 1
            elif key == "option":
                oname = self.name()
                self.expect("=")
                vt = self.tok
                neg = self.accept("-")
                vt = self.tok
                if vt.kind not in ("num", "name"):
                    raise self.error("option value must be a number or a name", vt)
                self.i += 1
                options[oname] = ("-" if neg else "") + vt.text
            elif key == "name":
                self.expect(":")
                parts: list[_Tok] = []
                while self.tok.kind != "eof" and self.tok.text != ";":
                    parts.append(self.tok)
                    self.i += 1
                if not parts:
                    raise self.error("empty problem name")
                name = parts[0].text
                for prev, cur in zip(parts, parts[1:]):
                    gap = prev.kind in ("name", "num") and cur.kind in ("name", "num")
                    name += (" " if gap else "") + cur.text
            else:
                raise self.error(f"unknown declaration {key!r}", t)
            self.expect(";")
        if phi is None or psi is None:
            raise self.error("both phi and psi must be given", first_tok)
        if common is None:
            shared = formula_vars(phi) & formula_vars(psi)
            common = [v for v in vars_ if v in shared]
        return Problem(tuple(vars_), tuple(common), phi, psi, degree, options, name)


def parse_problem(text: str, name: str = "") -> Problem:
    """Parse the problem-file grammar into a :class:`Problem`."""
    return _Parser(text).problem(name)


def parse_formula(text: str, variables: Iterable[str] | None = None) -> Formula:
    p = _Parser(text)
    if variables is not None:
        p.declared = set(variables)
    f = p.formula()
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return f


def parse_expr(text: str, variables: Iterable[str] | None = None) -> Expr:
    p = _Parser(text)
    if variables is not None:
        p.declared = set(variables)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return e
