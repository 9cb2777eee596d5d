"""The ``nil`` command: solve one problem file, or run the benchmark suite."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from fractions import Fraction

import numpy as np

from .formula import BadDegree, ParseError, Problem, parse_problem
from .interval import Box, Interval
from .loop import BudgetExhausted, EmptySide, NilConfig, reverify, solve as run_loop
from .suite import CASES, Case, find_case, same_atom

EXIT_CODES = {
    "Interpolant": 0,
    "NotDisjoint": 1,
    "NoPolynomialInterpolant": 2,
    "BudgetExhausted": 3,
}
USAGE = 64

# per-case wall-clock budgets for the suite, by expectation
BUDGETS = {"exact": 60.0, "valid": 300.0, "svm-failed": 120.0, "stretch": 300.0}


class UsageError(Exception):
    def __init__(self, kind: str, message: str, **extra):
        super().__init__(message)
        self.kind = kind
        self.extra = extra

    def to_json(self) -> dict:
        return {"error": {"kind": self.kind, "message": str(self), **self.extra}}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError("usage", message)


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, Interval):
        return [x.lo, x.hi]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    raise TypeError(f"not serializable: {type(x).__name__}")


def dumps(obj, **kw) -> str:
    return json.dumps(obj, default=_jsonable, **kw)


def _box_dict(box: Box | None):
    if box is None:
        return None
    return {n: [float(iv.lo), float(iv.hi)] for n, iv in box.items()}


def build_report(problem: Problem, outcome, *, mode: str, seed: int, wall_ms: float,
                 delta: float = 0.0, file: str | None = None) -> dict:
    """The RunReport dictionary; see docs/report.schema.json."""
    kind = outcome.kind
    text = outcome.text if kind == "Interpolant" else None
    best = getattr(outcome, "best", None)
    witness = getattr(outcome, "witness", None)
    return {
        "problem": problem.name or (os.path.basename(file) if file else ""),
        "file": file,
        "outcome": kind,
        "interpolant": text,
        "best_candidate": best.text if best is not None else None,
        "common": list(problem.common),
        "certification_box": _box_dict(getattr(outcome, "box", None)),
        "degree": problem.degree,
        "mode": mode,
        "delta": delta,
        "iterations": int(getattr(outcome, "iterations", 0)),
        "wall_time_ms": round(wall_ms, 3),
        "seed": seed,
        "witness": {k: str(v) for k, v in witness.items()} if witness is not None else None,
        "reason": getattr(outcome, "reason", None) or None,
        "history": json.loads(dumps(list(outcome.history))),
    }


def _sweep(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(t) for t in text.split(".."))
    except ValueError:
        raise UsageError("usage", f"--sweep-degree expects LO..HI, got {text!r}")
    if lo < 1 or hi < lo:
        raise UsageError("BadDegree", f"bad degree range {text!r}")
    return lo, hi


def _load(path: str) -> Problem:
    try:
        with open(path) as fh:
            src = fh.read()
    except OSError as e:
        raise UsageError("FileNotFound", f"{path}: {e.strerror}")
    name = os.path.splitext(os.path.basename(path))[0]
    try:
        return parse_problem(src, name)
    except ParseError as e:
        raise UsageError(type(e).__name__, str(e), line=getattr(e, "line", None), col=getattr(e, "col", None))
    except BadDegree as e:
        raise UsageError(type(e).__name__, str(e))


def _seed(args) -> int:
    env = os.environ.get("NIL_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError("usage", f"NIL_SEED must be an integer, got {env!r}")
    return args.seed


def cmd_solve(args) -> int:
    problem = _load(args.file)
    defaults = NilConfig()
    if args.box is not None:
        if args.box <= 0:
            raise UsageError("usage", "--box must be positive")
        problem = replace(problem, options={**problem.options, "box": str(args.box)})
    if args.degree is not None and args.degree < 1:
        raise UsageError("BadDegree", f"degree must be >= 1, got {args.degree}")
    if args.delta is not None and args.delta < 0:
        raise UsageError("usage", "--delta must be >= 0")
    if args.max_iters is not None and args.max_iters < 1:
        raise UsageError("usage", "--max-iters must be >= 1")
    degrees = [args.degree or problem.degree]
    if args.sweep_degree:
        lo, hi = _sweep(args.sweep_degree)
        degrees = list(range(lo, hi + 1))
    if args.plot and len(problem.common) != 2:
        raise UsageError("DimensionError", f"--plot needs 2 common variables, got {len(problem.common)}")
    seed = _seed(args)
    cfg = replace(
        defaults,
        seed=seed,
        delta=args.delta if args.delta is not None else defaults.delta,
        max_iterations=args.max_iters or defaults.max_iterations,
        time_limit=args.time_limit,
    )
    for m in degrees:
        p = replace(problem, degree=m)
        t0 = time.perf_counter()
        try:
            outcome = run_loop(p, args.mode, cfg)
        except EmptySide as e:
            # no sample for one side inside the box: nothing to learn from
            outcome = BudgetExhausted(None, str(e))
        wall = (time.perf_counter() - t0) * 1e3
        if outcome.kind in ("Interpolant", "NotDisjoint"):
            break
    report = build_report(p, outcome, mode=args.mode, seed=seed, wall_ms=wall,
                          delta=cfg.delta, file=args.file)
    if args.plot:
        from .plot import plot
        plot(p, outcome, args.plot)
    if args.json:
        print(dumps(report, indent=2))
    else:
        print(_summary(report))
    return EXIT_CODES[outcome.kind]


def _summary(r: dict) -> str:
    head = f"{r['problem']}: {r['outcome']}"
    if r["interpolant"]:
        head += f"  {r['interpolant']}"
    elif r["witness"]:
        head += "  witness " + ", ".join(f"{k}={v}" for k, v in r["witness"].items())
    elif r["reason"]:
        head += f"  ({r['reason']})"
    return f"{head}\n  m={r['degree']}  iterations={r['iterations']}  time={r['wall_time_ms'] / 1e3:.2f}s  seed={r['seed']}"


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def run_case(case: Case, seed: int = 42, time_limit: float | None = None) -> dict:
    """Run one suite case and judge it against its expectation."""
    limit = time_limit if time_limit is not None else BUDGETS[case.expect]
    cfg = replace(NilConfig(), seed=seed, time_limit=limit)
    row = {"case": case.name, "category": case.category, "expect": case.expect,
           "required": case.required, "seed": seed}
    t0 = time.perf_counter()
    if case.expect == "svm-failed":
        kinds = []
        for m in case.degrees:
            out = run_loop(case.problem(m), "core", cfg)
            kinds.append(out.kind)
        elapsed = time.perf_counter() - t0
        ok = all(k == "NoPolynomialInterpolant" for k in kinds) and elapsed <= limit
        row.update(outcome=kinds[-1] if len(set(kinds)) == 1 else ",".join(kinds),
                   degree=f"{case.degrees[0]}..{case.degrees[-1]}", interpolant=None,
                   verified="n/a", form="n/a", time=elapsed, ok=ok)
        return row
    problem = case.problem()
    out = run_loop(problem, "core", cfg)
    elapsed = time.perf_counter() - t0
    row.update(outcome=out.kind, degree=problem.degree, time=elapsed,
               interpolant=out.text if out.kind == "Interpolant" else None)
    verified, form = "no", "n/a"
    if out.kind == "Interpolant":
        verified = "Valid" if reverify(problem, out, cfg).valid else "INVALID"
        if case.expect == "exact":
            form = "match" if same_atom(out.text, case.reference_interpolant, problem.common) else "differs"
    row.update(verified=verified, form=form)
    ok = verified == "Valid" and (case.expect != "exact" or form == "match")
    if case.reference_degree is not None:
        ok = ok and problem.degree <= case.reference_degree
    row["ok"] = ok
    return row


def _run_case_by_name(name: str, seed: int, time_limit):
    return run_case(find_case(name), seed, time_limit)


def cmd_bench(args) -> int:
    if args.list:
        for c in CASES:
            print(f"{c.name}\t{c.category}\t{c.expect}")
        return 0
    cases = list(CASES)
    if args.case:
        try:
            cases = [find_case(n) for n in args.case]
        except KeyError as e:
            raise UsageError("UnknownCase", f"no benchmark named {e.args[0]!r}")
    if args.required:
        cases = [c for c in cases if c.required]
    seed = _seed(args)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            rows = list(ex.map(_run_case_by_name, [c.name for c in cases],
                               [seed] * len(cases), [args.time_limit] * len(cases)))
    else:
        rows = [run_case(c, seed, args.time_limit) for c in cases]
    if args.json:
        print(dumps(rows, indent=2))
    else:
        print(_table(rows))
    failed = [r for r in rows if r["required"] and not r["ok"]]
    return 1 if failed else 0


def _table(rows) -> str:
    head = ("case", "outcome", "m", "verified", "form", "time/s", "status")
    body = []
    for r in rows:
        status = ("PASS" if r["ok"] else "FAIL") if r["required"] else ("ok" if r["ok"] else "stretch")
        body.append((r["case"], r["outcome"], str(r["degree"]), r["verified"], r["form"],
                     f"{r['time']:.1f}", status))
    widths = [max(len(x[i]) for x in [head, *body]) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in [head, *body]]
    return "\n".join(lines)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nil", description="Polynomial interpolants for contradictory formula pairs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="synthesize an interpolant for a problem file")
    s.add_argument("file")
    s.add_argument("--degree", type=int, help="kernel degree m (default: the file's)")
    s.add_argument("--delta", type=float, help="tolerance for delta and star modes")
    s.add_argument("--box", type=float, help="default box radius (symmetric +-F)")
    s.add_argument("--mode", choices=("core", "delta", "star"), default="core")
    s.add_argument("--max-iters", type=int)
    s.add_argument("--seed", type=int, default=NilConfig().seed)
    s.add_argument("--time-limit", type=float, help="wall-clock budget in seconds")
    s.add_argument("--json", action="store_true")
    s.add_argument("--plot", metavar="PATH", help="write an SVG (2 common variables only)")
    s.add_argument("--sweep-degree", metavar="LO..HI")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run the embedded benchmark suite")
    b.add_argument("--required", action="store_true", help="only gating cases")
    b.add_argument("--case", action="append", metavar="NAME")
    b.add_argument("--list", action="store_true")
    b.add_argument("--seed", type=int, default=NilConfig().seed)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--time-limit", type=float, help="override per-case budgets")
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    want_json = "--json" in argv
    try:
        args = make_parser().parse_args(argv)
        return args.func(args)
    except UsageError as e:
        if want_json:
            print(dumps(e.to_json()))
        else:
            print(f"nil: {e.kind}: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
