"""Counterexample-guided interpolant synthesis.

Samples of phi are labelled +1 and samples of psi -1 (projected onto the
common variables).  Each round trains an SVM, expands the classifier into a
polynomial, rounds it to rationals along a coarse-to-fine ladder and checks
each rung.  Failing rungs contribute counterexamples from the finest rung,
which are added to the training set.

When the float SVM cannot separate the samples (margins below what the QP can
resolve), separability is decided exactly as a rational linear program over
the monomials.  A separator found that way stands in for the classifier; if
there is none, no interpolant of that degree exists.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
import numpy as np

from .formula import Atom, Problem, conj
from .interval import Box
from .exact import SeparabilityUnknown, exact_separator
from .polynomial import Poly, expand_classifier, format_poly, normalize, poly_eval
from .rounding import PrecisionLadder, Rung, round_at, round_ladder
from .svm import KernelParams, SvmConfig, SvmFailed, TrainingSet, train
from .verify import (
    CheckResult, Refuted, SolverConfig, check_interpolant, check_side, find_model,
    problem_box, prove_unsat,
)

log = logging.getLogger(__name__)


class EmptySide(RuntimeError):
    def __init__(self, side: str):
        super().__init__(f"no certified model of {side} in the box")
        self.side = side


@dataclass(frozen=True)
class NilConfig:
    init_samples_per_side: int = 20
    cex_per_round: int = 4
    max_iterations: int = 50
    delta: float = 0.0
    box_radius: float = 10.0
    box0: Box | None = None
    ladder: PrecisionLadder = PrecisionLadder()
    simplify_tolerances: tuple[float, ...] = (0.5, 0.25)
    star_cutoff: int = 6
    seed: int = 42
    beta: float = 1.0
    theta: float = 1.0
    svm: SvmConfig = SvmConfig()
    solver: SolverConfig = SolverConfig()
    time_limit: float | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.cex_per_round < 1:
            raise ValueError("cex_per_round must be >= 1")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")


@dataclass(frozen=True)
class CandidateInterpolant:
    """``poly rel 0`` with ``poly`` normalized; the phi side satisfies it."""

    poly: Poly
    rel: str
    tol: float
    iteration: int

    @property
    def formula(self) -> Atom:
        return Atom(self.poly.to_expr(), self.rel)

    @property
    def oriented(self) -> Poly:
        """The same polynomial signed so that phi lies on its positive side."""
        return -self.poly if self.rel in ("<", "<=") else self.poly

    @property
    def text(self) -> str:
        return f"{format_poly(self.poly)} {self.rel} 0"


def _candidate(rung: Rung, iteration: int, strict: bool = True) -> CandidateInterpolant:
    if strict:
        rel = "<" if rung.flip else ">"
    else:
        rel = "<=" if rung.flip else ">="
    return CandidateInterpolant(rung.poly, rel, rung.tol, iteration)


# ---------------------------------------------------------------------------
# Outcomes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interpolant:
    candidate: CandidateInterpolant
    box: Box
    iterations: int
    history: tuple = ()
    training: dict | None = field(default=None, compare=False, repr=False)

    kind = "Interpolant"

    @property
    def formula(self) -> Atom:
        return self.candidate.formula

    @property
    def text(self) -> str:
        return self.candidate.text


@dataclass(frozen=True)
class NotDisjoint:
    witness: dict
    box: Box | None = None
    history: tuple = ()

    kind = "NotDisjoint"


@dataclass(frozen=True)
class NoPolynomialInterpolant:
    degree: int
    reason: str = ""
    iterations: int = 0
    history: tuple = ()
    training: dict | None = field(default=None, compare=False, repr=False)

    kind = "NoPolynomialInterpolant"


@dataclass(frozen=True)
class BudgetExhausted:
    best: CandidateInterpolant | None
    reason: str = ""
    iterations: int = 0
    box: Box | None = None
    history: tuple = ()
    training: dict | None = field(default=None, compare=False, repr=False)

    kind = "BudgetExhausted"


NilOutcome = Interpolant | NotDisjoint | NoPolynomialInterpolant | BudgetExhausted


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------


@dataclass
class Samples:
    common: tuple[str, ...]
    pos: list[tuple[Fraction, ...]] = field(default_factory=list)
    neg: list[tuple[Fraction, ...]] = field(default_factory=list)
    _seen: set = field(default_factory=set)

    def add(self, side: str, points) -> list[tuple[Fraction, ...]]:
        """Add projected points, skipping exact duplicates; return the new ones."""
        target = self.pos if side == "pos" else self.neg
        added = []
        for p in points:
            t = tuple(Fraction(p[n]) for n in self.common)
            if (side, t) in self._seen:
                continue
            self._seen.add((side, t))
            target.append(t)
            added.append(t)
        return added

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        as_float = lambda pts: np.array([[float(c) for c in p] for p in pts], dtype=float)
        return as_float(self.pos), as_float(self.neg)


def _fmt_point(t) -> list[str]:
    return [str(c) for c in t]


def sample_initial(problem: Problem, box: Box, k: int, cfg: SolverConfig = SolverConfig()):
    """Up to ``k`` certified models per side, projected to the common variables."""
    full = problem_box(problem)
    full.update(box)
    pbox, nbox = full.restrict(problem.phi_vars), full.restrict(problem.psi_vars)
    out = []
    for side, f, b, salt in (("phi", problem.phi, pbox, 1), ("psi", problem.psi, nbox, 2)):
        pts = find_model(f, b, k, cfg.with_seed(cfg.seed * 7 + salt))
        if not pts:
            raise EmptySide(side)
        out.append([{n: p[n] for n in problem.common} for p in pts])
    return out[0], out[1]


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------


def _queries(problem: Problem, q: Poly, rel: str, threshold: Fraction):
    """(phi & q fails, q holds & psi) for a phi-positive polynomial ``q``."""
    e = q.to_expr()
    if threshold:
        lo = (q + threshold).to_expr()
        hi = (q - threshold).to_expr()
        return conj(problem.phi, Atom(lo, "<=")), conj(Atom(hi, ">="), problem.psi)
    neg_rel = "<=" if rel == ">" else "<"
    return conj(problem.phi, Atom(e, neg_rel)), conj(Atom(e, rel), problem.psi)


class _Run:
    def __init__(self, problem: Problem, cfg: NilConfig, box: Box, samples: Samples,
                 history: list, started: float):
        self.problem = problem
        self.cfg = cfg
        self.box = box
        self.samples = samples
        self.history = history
        self.started = started
        self.pbox, self.nbox = self._side_boxes(box)
        self.kernel = KernelParams(cfg.beta, cfg.theta, problem.degree)
        self.support: list = []

    def training(self) -> dict:
        return {
            "pos": [tuple(float(c) for c in t) for t in self.samples.pos],
            "neg": [tuple(float(c) for c in t) for t in self.samples.neg],
            "support": list(self.support),
        }

    def finish(self, outcome):
        if hasattr(outcome, "training"):
            outcome = replace(outcome, training=self.training())
        return outcome

    def _side_boxes(self, box):
        return box.restrict(self.problem.phi_vars), box.restrict(self.problem.psi_vars)

    def solver(self, salt: int, boost: int = 1) -> SolverConfig:
        s = self.cfg.solver
        return replace(s, seed=(self.cfg.seed * 1_000_003 + salt) % (2**31),
                       max_boxes=s.max_boxes * boost)

    def out_of_time(self) -> bool:
        lim = self.cfg.time_limit
        return lim is not None and time.monotonic() - self.started > lim

    def check(self, cand: CandidateInterpolant, delta: float, salt: int, boost: int = 1) -> CheckResult:
        q = cand.oriented
        threshold = Fraction(delta) * Fraction(q.max_abs_coeff()) if delta else Fraction(0)
        pos_q, neg_q = _queries(self.problem, q, ">" if cand.rel in ("<", ">") else ">=", threshold)
        count = self.cfg.cex_per_round
        pos = check_side(pos_q, self.pbox, self.solver(salt, boost), count)
        neg = check_side(neg_q, self.nbox, self.solver(salt + 1, boost), count)
        return CheckResult(pos, neg, self.problem.common)

    def misclassifies_training(self, cand: CandidateInterpolant) -> bool:
        q = cand.oriented.with_vars(self.problem.common)
        strict = cand.rel in ("<", ">")
        for t in self.samples.pos:
            v = poly_eval(q, t)
            if (v <= 0) if strict else (v < 0):
                return True
        for t in self.samples.neg:
            v = poly_eval(q, t)
            if (v > 0) if strict else (v >= 0):
                return True
        return False

    def confirm(self, cand: CandidateInterpolant, salt: int) -> bool:
        """Fresh exact re-check with a doubled box budget."""
        return self.check(cand, 0.0, salt + 500, boost=2).valid

    def simplify(self, fpoly: Poly, found: CandidateInterpolant, it: int, salt: int) -> CandidateInterpolant:
        for tol in self.cfg.simplify_tolerances:
            if tol <= found.tol:
                continue
            rung = round_at(fpoly, tol)
            if rung is None:
                continue
            cand = _candidate(rung, it, strict=found.rel in ("<", ">"))
            if cand.poly == found.poly and cand.rel == found.rel:
                return found
            if self.misclassifies_training(cand):
                continue
            if self.check(cand, 0.0, salt + 900).valid:
                return cand
        return found

    def iterate(self, delta: float, it0: int = 0):
        """Run up to max_iterations rounds; returns an outcome or None-like BudgetExhausted."""
        cfg, problem = self.cfg, self.problem
        best = None
        delta_valid = None
        for it in range(it0, it0 + cfg.max_iterations):
            if self.out_of_time():
                return BudgetExhausted(best, "time limit", it, self.box, tuple(self.history))
            X_pos, X_neg = self.samples.arrays()
            entry = {"iteration": it, "n_pos": len(X_pos), "n_neg": len(X_neg),
                     "delta": delta, "box": _box_json(self.box), "rungs": []}
            self.history.append(entry)
            try:
                sol = train(TrainingSet(X_pos, X_neg), self.kernel, replace(cfg.svm, seed=cfg.seed))
            except SvmFailed as err:
                entry["svm"] = f"failed: {err}"
                fpoly = self._exact_fallback(entry)
                if fpoly is None:
                    return NoPolynomialInterpolant(problem.degree, f"{err}; {entry['separable']}", it + 1,
                                                   tuple(self.history))
                rungs = round_ladder(fpoly, cfg.ladder)
                npoly, flip = normalize(fpoly)
                exact_rung = Rung(npoly, 0.0, flip)
                if not rungs or rungs[-1].poly != exact_rung.poly or rungs[-1].flip != exact_rung.flip:
                    rungs.append(exact_rung)
            else:
                idx = list(sol.support_indices)
                self.support = [tuple(float(v) for v in sol.X[i]) for i in idx]
                entry["support_vectors"] = len(idx)
                entry["margin"] = sol.functional_margin
                entry["svm_iterations"] = sol.iterations
                fpoly = expand_classifier(sol.X[idx], sol.alphas[idx], sol.y[idx], sol.b,
                                          self.kernel, problem.common)
                rungs = round_ladder(fpoly, cfg.ladder)
            if not rungs:
                entry["note"] = "no usable rung"
                return BudgetExhausted(best, "rounding produced no candidate", it + 1, self.box,
                                       tuple(self.history))
            salt = it * 100
            last = None
            for r_i, rung in enumerate(rungs):
                cand = _candidate(rung, it)
                finest = r_i == len(rungs) - 1
                rec = {"tol": rung.tol, "candidate": cand.text}
                entry["rungs"].append(rec)
                if not finest and self.misclassifies_training(cand):
                    rec["verdict"] = "rejected on training set"
                    continue
                res = self.check(cand, delta, salt + 2 * r_i)
                rec["verdict"] = res.kind
                rec["pos"] = res.pos.verdict.kind
                rec["neg"] = res.neg.verdict.kind
                if res.valid:
                    if delta and not self.confirm(cand, salt):
                        rec["exact"] = "not valid"
                        delta_valid = cand
                        continue
                    chosen = self.simplify(fpoly, cand, it, salt)
                    if self.confirm(chosen, salt + 1):
                        entry["accepted"] = chosen.text
                        return Interpolant(chosen, self.box, it + 1, tuple(self.history))
                    rec["fresh"] = "not confirmed"
                if finest:
                    last = (cand, res)
            if delta_valid is not None:
                return BudgetExhausted(delta_valid, "candidate is valid only up to delta", it + 1,
                                       self.box, tuple(self.history))
            if last is None:
                return BudgetExhausted(best, "finest rung was not checked", it + 1, self.box,
                                       tuple(self.history))
            cand, res = last
            best = cand
            threshold = Fraction(delta) * Fraction(cand.oriented.max_abs_coeff()) if delta else Fraction(0)
            entry["candidate"] = {"oriented": format_poly(cand.oriented), "vars": list(problem.common),
                                  "threshold": str(threshold), "text": cand.text}
            if not delta and res.pos.points and not res.neg.points:
                alt = self._try_closed(cand, res, it, salt)
                if alt is not None:
                    entry["accepted"] = alt.text
                    return Interpolant(alt, self.box, it + 1, tuple(self.history))
            new_pos = self.samples.add("pos", res.projected("pos"))
            new_neg = self.samples.add("neg", res.projected("neg"))
            entry["cex_pos"] = [_fmt_point(t) for t in new_pos]
            entry["cex_neg"] = [_fmt_point(t) for t in new_neg]
            if not new_pos and not new_neg:
                reason = "no new counterexamples"
                if not res.pos.points and not res.neg.points:
                    reason = "verification inconclusive and no counterexamples"
                return BudgetExhausted(best, reason, it + 1, self.box, tuple(self.history))
        return BudgetExhausted(best, "iteration limit", it0 + cfg.max_iterations, self.box,
                               tuple(self.history))

    def _exact_fallback(self, entry) -> Poly | None:
        """An exact separator of the samples when the float SVM cannot find one.

        Returns None when no degree-m polynomial separates the samples; since
        they are certified models, no degree-m interpolant exists either.
        """
        common = self.problem.common
        try:
            coeffs = exact_separator(self.samples.pos, self.samples.neg, len(common), self.problem.degree)
        except SeparabilityUnknown as e:
            entry["separable"] = f"undecided ({e}); treating the SVM failure as final"
            return None
        if coeffs is None:
            entry["separable"] = f"no degree-{self.problem.degree} polynomial separates the samples"
            return None
        entry["separable"] = "yes; exact separator used"
        self.support = []
        return Poly(common, coeffs)

    def _try_closed(self, cand, res, it, salt):
        """Try ``q >= 0`` when every phi-side counterexample sits on ``q = 0``."""
        q = cand.oriented
        common = self.problem.common
        if any(poly_eval(q.with_vars(common), tuple(p[n] for n in common)) != 0 for p in res.pos.points):
            return None
        rel = "<=" if cand.rel == "<" else ">="
        closed = CandidateInterpolant(cand.poly, rel, cand.tol, it)
        r = self.check(closed, 0.0, salt + 700)
        if r.valid and self.confirm(closed, salt + 2):
            return closed
        return None


def _box_json(box: Box) -> dict:
    return {n: [iv.lo, iv.hi] for n, iv in box.items()}


def _working_box(problem: Problem, cfg: NilConfig, scale: float = 1.0) -> Box:
    box = problem_box(problem, cfg.box_radius, scale=scale)
    if cfg.box0 is not None:
        box.update(cfg.box0.scaled(scale))
    return box


def _start(problem: Problem, cfg: NilConfig, box: Box, samples: Samples | None, history: list):
    """Disjointness check and (if needed) initial sampling."""
    verdict = prove_unsat(conj(problem.phi, problem.psi), box, replace(cfg.solver, seed=cfg.seed))
    if isinstance(verdict, Refuted):
        history.append({"disjoint": "refuted"})
        return NotDisjoint(dict(verdict.witness), box, tuple(history))
    history.append({"disjoint": verdict.kind})
    if samples is None:
        samples = Samples(problem.common)
    if not samples.pos or not samples.neg:
        pos, neg = sample_initial(problem, box, cfg.init_samples_per_side,
                                  replace(cfg.solver, seed=cfg.seed))
        samples.add("pos", pos)
        samples.add("neg", neg)
    return samples


def nil_delta(problem: Problem, delta: float, cfg: NilConfig = NilConfig(),
              _samples: Samples | None = None, _scale: float = 1.0, _history=None,
              _started: float | None = None) -> NilOutcome:
    """The loop with candidates accepted up to ``delta`` times their coefficient scale.

    A candidate that passes the delta check is re-checked exactly; if it is
    only delta-valid, the run stops with BudgetExhausted carrying it.
    """
    history = [] if _history is None else _history
    started = time.monotonic() if _started is None else _started
    box = _working_box(problem, cfg, _scale)
    start = _start(problem, cfg, box, _samples, history)
    if isinstance(start, NotDisjoint):
        return start
    run = _Run(problem, cfg, box, start, history, started)
    return run.finish(run.iterate(delta))


def nil_core(problem: Problem, cfg: NilConfig = NilConfig()) -> NilOutcome:
    """The basic loop: exact checks, counterexamples until a rung validates."""
    return nil_delta(problem, 0.0, cfg)


def nil_star(problem: Problem, delta0: float, B0: Box | None = None,
             cfg: NilConfig = NilConfig()) -> NilOutcome:
    """Rounds of nil_delta with delta halved and the box doubled each time."""
    if delta0 <= 0:
        raise ValueError("delta0 must be positive")
    if B0 is not None:
        cfg = replace(cfg, box0=B0)
    history: list = []
    started = time.monotonic()
    samples = None
    last = None
    for i in range(cfg.star_cutoff):
        delta = delta0 / 2**i
        scale = float(2**i)
        history.append({"round": i + 1, "delta": delta, "scale": scale})
        box = _working_box(problem, cfg, scale)
        start = _start(problem, cfg, box, samples, history)
        if isinstance(start, NotDisjoint):
            return start
        samples = start
        run = _Run(problem, cfg, box, samples, history, started)
        out = run.finish(run.iterate(delta, it0=len([h for h in history if "iteration" in h])))
        if isinstance(out, (Interpolant, NoPolynomialInterpolant)):
            return out
        last = out
        if run.out_of_time():
            break
    return BudgetExhausted(last.best if last else None, "star schedule exhausted",
                           last.iterations if last else 0, last.box if last else None, tuple(history),
                           last.training if last else None)


def solve(problem: Problem, mode: str = "core", cfg: NilConfig = NilConfig()) -> NilOutcome:
    if mode == "core":
        return nil_core(problem, cfg)
    if mode == "delta":
        return nil_delta(problem, cfg.delta or 1e-2, cfg)
    if mode == "star":
        return nil_star(problem, cfg.delta or 1e-2, None, cfg)
    raise ValueError(f"unknown mode {mode!r}")


def reverify(problem: Problem, outcome: Interpolant, cfg: NilConfig = NilConfig(), seed_offset: int = 7919):
    """Independent exact check of an Interpolant with double the box budget."""
    solver = replace(cfg.solver, max_boxes=cfg.solver.max_boxes * 2,
                     seed=(cfg.seed + seed_offset) % (2**31))
    return check_interpolant(problem, outcome.formula, outcome.box, solver)
