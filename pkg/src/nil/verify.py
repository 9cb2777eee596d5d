"""Sound decision services over boxes.

Queries are answered in stages.  Linear equalities are eliminated by exact
substitution first.  Interval branch-and-prune then discards boxes on which
the formula is certainly false and probes midpoints for witnesses.  Whatever
survives the interval budget goes to z3 as a disjunction of boxes (or their
hull), with transcendental terms relaxed to bounded fresh variables.

Every witness returned anywhere in this module has passed
:func:`certify_point` on the original formula.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import exact
from .formula import (
    FALSE, TRUE, And, Atom, BoolConst, Const, Formula, Or, Problem, Sub,
    TranscendentalPresent, atoms, compare, conj, eval_rational, expr_vars,
    formula_to_text, formula_vars, has_transcendental, map_atoms, simplify_bool,
    substitute, to_nnf, DomainError,
)
from .interval import Box, CompiledFormula, Interval, atom_status, eval_interval
from .polynomial import Poly, from_expr, poly_eval
from .rounding import recover_rational

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    min_width: float = 1e-4
    max_boxes: int = 2_000_000
    eq_relax: float = 1e-9
    seed: int = 0
    deterministic: bool = True
    queue_cap: int = 4096  # live boxes before handing over to the exact stage
    leaf_boxes: int = 64  # above this many leftovers, the exact stage gets their hull
    exact_timeout_ms: int = 10_000
    sample_batch: int = 4096
    sample_batches: int = 4

    def __post_init__(self):
        if self.min_width <= 0:
            raise ValueError("min_width must be positive")
        if self.max_boxes < 1:
            raise ValueError("max_boxes must be >= 1")

    def with_seed(self, seed: int) -> SolverConfig:
        from dataclasses import replace
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class Proved:
    stage: str = "intervals"

    kind = "Proved"


@dataclass(frozen=True)
class Refuted:
    witness: Mapping[str, Fraction]
    certificate: tuple = ()

    kind = "Refuted"


@dataclass(frozen=True)
class Unknown:
    reason: str = ""

    kind = "Unknown"


Verdict = Proved | Refuted | Unknown


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------


def _atom_certified(a: Atom, point: Mapping[str, Fraction]) -> bool:
    if not has_transcendental(a.lhs):
        return compare(eval_rational(a.lhs, point), a.rel)
    if a.rel == "=":
        return False
    box = Box({n: Interval.point(point[n]) for n in expr_vars(a.lhs)})
    try:
        iv = eval_interval(a.lhs, box)
    except DomainError:
        return False
    _, tru = atom_status(a.rel, iv.lo, iv.hi)
    return bool(tru)


def _certify(f: Formula, point, cache) -> bool:
    if isinstance(f, Atom):
        if f not in cache:
            cache[f] = _atom_certified(f, point)
        return cache[f]
    if isinstance(f, And):
        return all(_certify(a, point, cache) for a in f.args)
    if isinstance(f, Or):
        return any(_certify(a, point, cache) for a in f.args)
    if isinstance(f, BoolConst):
        return f.value
    raise TypeError(f)


def certify_point(f: Formula, point: Mapping) -> bool:
    """True only if ``f`` provably holds at the rational ``point``."""
    point = {k: Fraction(v) for k, v in point.items()}
    if not formula_vars(f) <= set(point):
        return False
    return _certify(to_nnf(f), point, {})


def certificate(f: Formula, point: Mapping) -> tuple:
    """Per-atom certified truth values at ``point`` (atom text, bool)."""
    point = {k: Fraction(v) for k, v in point.items()}
    return tuple((formula_to_text(a), _atom_certified(a, point)) for a in dict.fromkeys(atoms(to_nnf(f))))


# ---------------------------------------------------------------------------
# Equality elimination
# ---------------------------------------------------------------------------


@dataclass
class Reduced:
    """A query after eliminating linear equalities.

    ``formula`` is over ``names`` only.  ``elims`` lists (variable, definition)
    pairs whose definitions are polynomials in the free names.
    """

    original: Formula
    formula: Formula
    names: tuple[str, ...]
    box: Box
    elims: list[tuple[str, Poly]] = field(default_factory=list)

    def extend(self, point: Mapping[str, Fraction]) -> dict[str, Fraction]:
        full = dict(point)
        for v, d in self.elims:
            full[v] = poly_eval(d, full)
        return full


def _subst_atom(a: Atom, v: str, value, names) -> Formula:
    if v not in expr_vars(a.lhs):
        return a
    e = substitute(a.lhs, {v: value})
    if not has_transcendental(e):
        p = from_expr(e, names)
        if p.is_constant():
            return TRUE if compare(p.constant(), a.rel) else FALSE
    return Atom(e, a.rel)


def _conjuncts(f: Formula) -> list[Formula]:
    return list(f.args) if isinstance(f, And) else [f]


def _pick_linear(p: Poly, candidates: Sequence[str]):
    for v in candidates:
        split = p.split_linear(v)
        if split is not None and split[0].is_constant():
            return v, split
    return None


def reduce_query(f: Formula, box: Box) -> Reduced:
    """Eliminate top-level equalities that are linear in some variable.

    Later variables in box order are eliminated first, so common variables
    (which come first) tend to stay free.  Each eliminated variable keeps
    its box range as two bound atoms on its definition.
    """
    names = tuple(box)
    f = simplify_bool(to_nnf(f))
    parts = _conjuncts(f)
    elims: list[tuple[str, Poly]] = []
    done: set[str] = set()
    progress = True
    while progress:
        progress = False
        for idx, c in enumerate(parts):
            if not (isinstance(c, Atom) and c.rel == "=" and not has_transcendental(c.lhs)):
                continue
            p = from_expr(c.lhs, names)
            pick = _pick_linear(p, [v for v in reversed(names) if v not in done])
            if pick is None:
                continue
            v, (a, r) = pick
            d = r * (Fraction(-1) / Fraction(a.constant()))
            dexpr = d.to_expr()
            iv = box[v]
            rest = parts[:idx] + parts[idx + 1:] + [
                Atom(Sub(dexpr, Const(Fraction(iv.lo))), ">="),
                Atom(Sub(dexpr, Const(Fraction(iv.hi))), "<="),
            ]
            parts = _conjuncts(simplify_bool(conj(*(
                map_atoms(x, lambda at: _subst_atom(at, v, dexpr, names)) for x in rest))))
            elims = [(u, du.substitute(v, d)) for u, du in elims] + [(v, d)]
            done.add(v)
            progress = True
            break
    reduced = simplify_bool(conj(*parts)) if parts else TRUE
    free = tuple(n for n in names if n not in done)
    return Reduced(f, reduced, free, Box({n: box[n] for n in free}), elims)


# ---------------------------------------------------------------------------
# Branch and prune
# ---------------------------------------------------------------------------


def _key(point: Mapping[str, Fraction]) -> tuple:
    return tuple(sorted(point.items()))


def _to_rational(x: float, lo: float, hi: float) -> Fraction:
    q = recover_rational(float(x), 1e-9 * max(1.0, abs(x)))
    if not lo <= q <= hi:
        q = Fraction(float(x))
    return q


class _Collector:
    def __init__(self, red: Reduced, want: int, seen=None):
        self.red = red
        self.want = want
        self.found: list[dict] = []
        self.seen = set(seen or ())

    def offer(self, point: Mapping[str, Fraction]) -> bool:
        box = self.red.box
        if any(not box[n].lo <= point[n] <= box[n].hi for n in self.red.names):
            return False  # pointwise-solved dependents can leave the box
        full = self.red.extend(point)
        k = _key(full)
        if k in self.seen:
            return False
        if not certify_point(self.red.original, full):
            return False
        self.seen.add(k)
        self.found.append(full)
        return True

    @property
    def full(self) -> bool:
        return len(self.found) >= self.want


def _bounds(box: Box, names) -> tuple[np.ndarray, np.ndarray]:
    LO = np.array([[box[n].lo for n in names]], dtype=float)
    HI = np.array([[box[n].hi for n in names]], dtype=float)
    return LO, HI


def _branch_and_prune(red: Reduced, cfg: SolverConfig, col: _Collector, probes: int = 8):
    """Returns (LO, HI) of undecided leftover boxes; empty when fully discarded."""
    names = red.names
    cf = CompiledFormula(red.formula, names)
    LO, HI = _bounds(red.box, names)
    stuck_lo, stuck_hi = [], []
    processed = 0
    while len(LO):
        processed += len(LO)
        fls, tru = cf.status(LO, HI)
        keep = ~fls
        LO, HI, tru = LO[keep], HI[keep], tru[keep]
        if not len(LO):
            break
        mids = 0.5 * (LO + HI)
        with np.errstate(all="ignore"):
            ok = cf.holds(mids) | tru
        for k in np.nonzero(ok)[0][:probes]:
            col.offer({n: Fraction(float(mids[k, i])) for i, n in enumerate(names)})
            if col.full:
                return LO, HI
        if processed >= cfg.max_boxes or len(LO) > cfg.queue_cap:
            break
        W = HI - LO
        small = W.max(axis=1) < cfg.min_width
        if small.any():
            stuck_lo.append(LO[small])
            stuck_hi.append(HI[small])
            LO, HI, W = LO[~small], HI[~small], W[~small]
        if not len(LO):
            break
        j = np.argmax(W, axis=1)
        rows = np.arange(len(LO))
        cut = 0.5 * (LO[rows, j] + HI[rows, j])
        left_hi = HI.copy()
        left_hi[rows, j] = cut
        right_lo = LO.copy()
        right_lo[rows, j] = cut
        # children of box k sit at 2k and 2k+1 so creation order is kept
        LO = np.stack([LO, right_lo], axis=1).reshape(-1, len(names))
        HI = np.stack([left_hi, HI], axis=1).reshape(-1, len(names))
    LO = np.vstack(stuck_lo + [LO]) if stuck_lo else LO
    HI = np.vstack(stuck_hi + [HI]) if stuck_hi else HI
    return LO, HI


def _exact_stage(red: Reduced, LO, HI, cfg: SolverConfig, col: _Collector, extra=()):
    if len(LO) > cfg.leaf_boxes:
        LO = LO.min(axis=0, keepdims=True)
        HI = HI.max(axis=0, keepdims=True)
    try:
        status, point, _ = exact.solve(red.formula, red.names, red.box, LO, HI,
                                       timeout_ms=cfg.exact_timeout_ms, seed=cfg.seed, extra=extra)
    except Exception as err:  # z3 may reject an exotic term
        log.debug("exact stage failed: %s", err)
        return "unknown"
    if status == "sat":
        col.offer(point)
    return status


def _trivial(red: Reduced, col: _Collector):
    """Handle reduced formulas that are constant or have no free variables."""
    if red.formula == FALSE:
        return "unsat"
    if not red.names:
        col.offer({})
        return "sat" if col.found else ("unsat" if red.formula == FALSE else "unknown")
    return None


def prove_unsat(f: Formula, box: Box, cfg: SolverConfig = SolverConfig()) -> Verdict:
    """Proved, Refuted(certified witness) or Unknown for ``f`` inside ``box``."""
    red = reduce_query(f, box)
    col = _Collector(red, 1)
    triv = _trivial(red, col)
    if triv == "unsat":
        return Proved("substitution")
    if col.found:
        return Refuted(col.found[0], certificate(f, col.found[0]))
    if triv == "unknown":
        return Unknown("constant formula could not be decided")
    LO, HI = _branch_and_prune(red, cfg, col)
    if col.found:
        return Refuted(col.found[0], certificate(f, col.found[0]))
    if not len(LO):
        return Proved("intervals")
    status = _exact_stage(red, LO, HI, cfg, col)
    if col.found:
        return Refuted(col.found[0], certificate(f, col.found[0]))
    if status == "unsat":
        return Proved("exact")
    return Unknown(f"{len(LO)} boxes undecided; exact stage: {status}")


# ---------------------------------------------------------------------------
# Model finding
# ---------------------------------------------------------------------------


def _dependents(red: Reduced):
    """Remaining equalities solvable pointwise for one variable each."""
    out = []
    used: set[str] = set()
    for c in _conjuncts(red.formula):
        if not (isinstance(c, Atom) and c.rel == "=" and not has_transcendental(c.lhs)):
            continue
        p = from_expr(c.lhs, red.names)
        for v in reversed(red.names):
            if v in used:
                continue
            split = p.split_linear(v)
            if split is None:
                continue
            a, r = split
            involved = a.used_vars() | r.used_vars()
            if involved & (used | {d[0] for d in out}):
                continue
            out.append((v, a, r))
            used |= involved | {v}
            break
    return out


def _sample(red: Reduced, cfg: SolverConfig, col: _Collector, rng, region=None, batches=None):
    names = red.names
    LO, HI = region if region is not None else _bounds(red.box, names)
    lo, hi = LO[0], HI[0]
    cf = CompiledFormula(red.formula, names)
    deps = _dependents(red)
    index = {n: i for i, n in enumerate(names)}
    for _ in range(batches or cfg.sample_batches):
        X = rng.uniform(lo, hi, size=(cfg.sample_batch, len(names)))
        for v, a, r in deps:
            with np.errstate(all="ignore"):
                X[:, index[v]] = -r.eval_many(X) / a.eval_many(X)
        with np.errstate(all="ignore"):
            ok = cf.holds(X)
        tried = 0
        for k in np.nonzero(ok)[0]:
            if tried >= 8 * col.want:
                break
            tried += 1
            pt = {n: _to_rational(X[k, i], red.box[n].lo, red.box[n].hi) for i, n in enumerate(names)}
            for v, a, r in deps:
                den = poly_eval(a, pt)
                if den == 0:
                    break
                pt[v] = -poly_eval(r, pt) / den
            else:
                col.offer(pt)
            if col.full:
                return


def _exclusion(points, names):
    import z3

    def build(zvars):
        return [z3.Or([zvars[n] != exact._rat(p[n]) for n in names]) for p in points]
    return build


def find_model(f: Formula, box: Box, count: int = 1, cfg: SolverConfig = SolverConfig(),
               exclude=()) -> list[dict[str, Fraction]]:
    """Up to ``count`` distinct certified models of ``f`` in ``box``."""
    red = reduce_query(f, box)
    col = _Collector(red, count, seen=[_key(p) for p in exclude])
    triv = _trivial(red, col)
    if triv is not None or col.full:
        return col.found
    rng = np.random.default_rng(cfg.seed)
    _sample(red, cfg, col, rng)
    if col.full:
        return col.found
    LO, HI = _branch_and_prune(red, cfg, col, probes=count)
    if col.full or not len(LO):
        return col.found
    # sample inside the surviving boxes, widest first
    order = np.argsort(-(HI - LO).max(axis=1), kind="stable")[:16]
    for k in order:
        _sample(red, cfg, col, rng, region=(LO[k:k + 1], HI[k:k + 1]), batches=1)
        if col.full:
            return col.found
    _exact_models(red, cfg, col, rng, LO, HI)
    return col.found


def _exact_models(red: Reduced, cfg: SolverConfig, col: _Collector, rng, LO, HI):
    names = red.names
    attempts = 2 * col.want + 1
    for t in range(attempts):
        if col.full:
            return
        known = [{n: p[n] for n in names} for p in col.found]
        extra = [_exclusion(known, names)] if known else []
        if t == 0:
            region = (LO, HI)
        else:
            # random sub-box of the hull for diversity
            lo, hi = LO.min(axis=0), HI.max(axis=0)
            c = rng.uniform(lo, hi)
            half = 0.125 * (hi - lo)
            region = (np.maximum(lo, c - half)[None, :], np.minimum(hi, c + half)[None, :])
        sub = SolverConfig(**{**cfg.__dict__, "seed": cfg.seed + t,
                              "exact_timeout_ms": max(500, cfg.exact_timeout_ms // 2)})
        status = _exact_stage(red, region[0], region[1], sub, col, extra=extra)
        if t == 0 and status == "unsat" and not known:
            return


# ---------------------------------------------------------------------------
# Interpolant checking
# ---------------------------------------------------------------------------


def problem_box(problem: Problem, radius: float = 10.0, names: Sequence[str] | None = None,
                scale: float = 1.0) -> Box:
    """Box over ``names`` from the problem's box options, scaled by ``scale``.

    ``option box = R;`` sets the default radius and ``option box_<var> = R;``
    overrides it per variable.
    """
    names = problem.vars if names is None else names
    default = float(problem.option("box", radius))
    out = {}
    for n in names:
        r = float(problem.option(f"box_{n}", default)) * scale
        out[n] = Interval(-r, r)
    return Box(out)


@dataclass(frozen=True)
class SideResult:
    verdict: Verdict
    points: tuple = ()  # full certified models of the query


@dataclass(frozen=True)
class CheckResult:
    pos: SideResult
    neg: SideResult
    common: tuple[str, ...] = ()

    @property
    def kind(self) -> str:
        if self.valid:
            return "Valid"
        if self.pos.points:
            return "CexPos"
        if self.neg.points:
            return "CexNeg"
        return "Unknown"

    @property
    def valid(self) -> bool:
        return isinstance(self.pos.verdict, Proved) and isinstance(self.neg.verdict, Proved)

    def projected(self, side: str) -> list[dict[str, Fraction]]:
        pts = self.pos.points if side == "pos" else self.neg.points
        return [{n: p[n] for n in self.common} for p in pts]


def check_side(query: Formula, box: Box, cfg: SolverConfig, count: int) -> SideResult:
    """Decide one entailment query, collecting up to ``count`` models when it fails."""
    red = reduce_query(query, box)
    col = _Collector(red, count)
    triv = _trivial(red, col)
    if triv == "unsat":
        return SideResult(Proved("substitution"))
    if red.names:
        _sample(red, cfg, col, np.random.default_rng(cfg.seed), batches=1)
    if not col.found:
        verdict = prove_unsat(query, box, cfg)
        if isinstance(verdict, Proved):
            return SideResult(verdict)
        if isinstance(verdict, Refuted):
            col.offer({n: verdict.witness[n] for n in red.names})
    if not col.full:
        more = find_model(query, box, count - len(col.found), cfg, exclude=col.found)
        col.found.extend(more)
    if col.found:
        w = col.found[0]
        return SideResult(Refuted(w, certificate(query, w)), tuple(col.found))
    return SideResult(Unknown("no model found and no proof"))


def side_boxes(problem: Problem, box: Box, radius: float | None = None) -> tuple[Box, Box]:
    """Extend a box over the common variables to each side's variables."""
    if radius is None:
        radius = max((max(abs(iv.lo), abs(iv.hi)) for iv in box.values()), default=10.0)
    full = problem_box(problem, radius)
    full.update(box)
    return full.restrict(problem.phi_vars), full.restrict(problem.psi_vars)


def check_interpolant(problem: Problem, I: Formula, box: Box, cfg: SolverConfig = SolverConfig(),
                      count: int = 4) -> CheckResult:
    """Valid iff phi & !I and I & psi are both proved unsatisfiable on the box."""
    pbox, nbox = side_boxes(problem, box)
    pos = check_side(conj(problem.phi, to_nnf(I, negate=True)), pbox, cfg, count)
    neg = check_side(conj(to_nnf(I), problem.psi), nbox, cfg, count)
    return CheckResult(pos, neg, problem.common)


__all__ = [
    "SolverConfig", "Proved", "Refuted", "Unknown", "Verdict", "certify_point", "certificate",
    "prove_unsat", "find_model", "check_interpolant", "check_side", "problem_box",
    "side_boxes", "reduce_query", "CheckResult", "SideResult", "TranscendentalPresent",
]
