"""Random small polynomial formulas with an independent numpy evaluator."""

import numpy as np

from nil.formula import Atom, conj, disj, parse_expr

NAMES = ("x", "y", "z")
RELS = ("<", "<=", ">", ">=", "=")


class RandomAtom:
    def __init__(self, terms, rel, names):
        self.terms = terms  # list of (coef, exponent tuple)
        self.rel = rel
        self.names = names

    def text(self) -> str:
        parts = []
        for c, e in self.terms:
            mono = "*".join(f"{v}^{k}" for v, k in zip(self.names, e) if k)
            parts.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(parts) if parts else "0"

    def formula(self):
        return Atom(parse_expr(self.text(), self.names), self.rel)

    def values(self, X):
        out = np.zeros(len(X))
        for c, e in self.terms:
            out += c * np.prod(X ** np.array(e), axis=1)
        return out

    def robustly_true(self, X, eps=1e-7):
        v = self.values(X)
        return {"<": v < -eps, "<=": v < -eps, ">": v > eps, ">=": v > eps, "=": np.zeros(len(v), bool)}[self.rel]


class RandomFormula:
    """Conjunction of disjunctions of random atoms."""

    def __init__(self, clauses, names):
        self.clauses = clauses
        self.names = names

    def formula(self):
        return conj(*(disj(*(a.formula() for a in cl)) for cl in self.clauses))

    def robustly_true(self, X):
        out = np.ones(len(X), bool)
        for cl in self.clauses:
            out &= np.logical_or.reduce([a.robustly_true(X) for a in cl])
        return out


def random_atom(rng, names, max_degree=3):
    n = len(names)
    k = int(rng.integers(1, 5))
    terms = []
    for _ in range(k):
        d = int(rng.integers(0, max_degree + 1))
        e = [0] * n
        for _ in range(d):
            e[int(rng.integers(n))] += 1
        terms.append((int(rng.integers(-5, 6)) or 1, tuple(e)))
    rel = RELS[int(rng.integers(len(RELS)))] if rng.random() < 0.9 else "="
    if rel == "=" and rng.random() < 0.5:
        rel = "<="
    return RandomAtom(terms, rel, names)


def random_formula(rng, max_vars=3, max_degree=3):
    n = int(rng.integers(1, max_vars + 1))
    names = NAMES[:n]
    clauses = []
    for _ in range(int(rng.integers(1, 4))):
        clauses.append([random_atom(rng, names, max_degree) for _ in range(int(rng.integers(1, 3)))])
    return RandomFormula(clauses, names)
