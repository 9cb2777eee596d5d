"""SVG pictures of a run over a two-dimensional common space.

Regions are sign-sampled on a grid of pixel centers: phi in gray, psi in
blue and the interpolant in pink.  Positive samples are red dots, negative
samples blue dots, and support vectors get a black ring.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import quoteattr

import numpy as np

from .formula import Formula, Problem, holds_float, to_nnf
from .interval import Box, CompiledFormula
from .verify import problem_box, reduce_query

GRID = 201
LOCAL_DRAWS = 48

LAYERS = (
    ("phi", "#8c8c8c", 0.55),
    ("psi", "#3b6fd4", 0.40),
    ("interpolant", "#f29ac0", 0.50),
)


class DimensionError(ValueError):
    """Plotting needs exactly two common variables."""


@dataclass
class Raster:
    xs: np.ndarray  # pixel centers along the first common variable
    ys: np.ndarray
    masks: dict  # layer name -> bool array of shape (len(ys), len(xs))

    def classify(self, x: float, y: float) -> set[str]:
        i = int(np.argmin(np.abs(self.ys - y)))
        j = int(np.argmin(np.abs(self.xs - x)))
        return {k for k, m in self.masks.items() if m[i, j]}


def _side_mask(f: Formula, common, box: Box, P: np.ndarray, rng) -> np.ndarray:
    """Whether some assignment of the local variables satisfies f at each point."""
    red = reduce_query(f, box)
    names = red.names
    if not all(c in names for c in common):
        # a common variable got eliminated; evaluate the raw formula instead
        red = None
        names = tuple(box)
        g = to_nnf(f)
    else:
        g = red.formula
    cf = CompiledFormula(g, names)
    cols = [names.index(c) for c in common]
    local = [i for i, n in enumerate(names) if n not in common]
    n = len(P)
    if not local:
        X = np.zeros((n, len(names)))
        X[:, cols] = P
        return cf.holds(X)
    out = np.zeros(n, dtype=bool)
    lo = np.array([box[names[i]].lo for i in local])
    hi = np.array([box[names[i]].hi for i in local])
    chunk = max(1, 200_000 // LOCAL_DRAWS)
    for s in range(0, n, chunk):
        Pc = P[s:s + chunk]
        m = len(Pc)
        X = np.zeros((m * LOCAL_DRAWS, len(names)))
        X[:, cols] = np.repeat(Pc, LOCAL_DRAWS, axis=0)
        X[:, local] = rng.uniform(lo, hi, size=(m * LOCAL_DRAWS, len(local)))
        out[s:s + m] = cf.holds(X).reshape(m, LOCAL_DRAWS).any(axis=1)
    return out


def raster(problem: Problem, outcome, box: Box | None = None, grid: int = GRID, seed: int = 0) -> Raster:
    if len(problem.common) != 2:
        raise DimensionError(f"need 2 common variables, got {len(problem.common)}")
    box = box or getattr(outcome, "box", None) or problem_box(problem)
    cx, cy = problem.common
    xs = np.linspace(box[cx].lo, box[cx].hi, grid)
    ys = np.linspace(box[cy].lo, box[cy].hi, grid)
    GX, GY = np.meshgrid(xs, ys)
    P = np.column_stack([GX.ravel(), GY.ravel()])
    rng = np.random.default_rng(seed)
    masks = {
        "phi": _side_mask(problem.phi, problem.common, Box({v: box[v] for v in problem.phi_vars}), P, rng),
        "psi": _side_mask(problem.psi, problem.common, Box({v: box[v] for v in problem.psi_vars}), P, rng),
    }
    I = _interpolant(outcome)
    if I is not None:
        masks["interpolant"] = np.array([holds_float(I, {cx: x, cy: y}) for x, y in P])
    return Raster(xs, ys, {k: m.reshape(GY.shape) for k, m in masks.items()})


def _interpolant(outcome):
    if getattr(outcome, "kind", None) == "Interpolant":
        return outcome.formula
    return None


def _runs(row: np.ndarray):
    """(start, length) of consecutive True stretches."""
    d = np.diff(np.concatenate([[0], row.astype(np.int8), [0]]))
    starts = np.nonzero(d == 1)[0]
    ends = np.nonzero(d == -1)[0]
    return zip(starts, ends - starts)


def render(r: Raster, points=None, size: int = 600) -> str:
    """SVG text for a raster plus optional {"pos", "neg", "support"} points."""
    nx, ny = len(r.xs), len(r.ys)
    cw, ch = size / nx, size / ny
    x0, x1, y0, y1 = r.xs[0], r.xs[-1], r.ys[0], r.ys[-1]
    dx = (x1 - x0) / (nx - 1) if nx > 1 else 1.0
    dy = (y1 - y0) / (ny - 1) if ny > 1 else 1.0

    def sx(x):
        return (x - x0 + dx / 2) / (dx * nx) * size

    def sy(y):
        return size - (y - y0 + dy / 2) / (dy * ny) * size

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    for name, color, alpha in LAYERS:
        m = r.masks.get(name)
        if m is None:
            continue
        out.append(f'<g id="{name}" fill="{color}" fill-opacity="{alpha}" shape-rendering="crispEdges">')
        for i in range(ny):
            top = size - (i + 1) * ch
            for j, n in _runs(m[i]):
                out.append(f'<rect x="{j * cw:.3f}" y="{top:.3f}" width="{n * cw:.3f}" height="{ch:.3f}"/>')
        out.append("</g>")
    points = points or {}

    def inside(p):
        return x0 - dx / 2 <= p[0] <= x1 + dx / 2 and y0 - dy / 2 <= p[1] <= y1 + dy / 2

    for key, color in (("pos", "#d62728"), ("neg", "#1f3fbf")):
        out.append(f'<g id="{key}" fill="{color}">')
        for p in points.get(key, ()):
            if inside(p):
                out.append(f'<circle cx="{sx(p[0]):.2f}" cy="{sy(p[1]):.2f}" r="2.5"/>')
        out.append("</g>")
    out.append('<g id="support" fill="none" stroke="black" stroke-width="1.2">')
    for p in points.get("support", ()):
        if inside(p):
            out.append(f'<circle cx="{sx(p[0]):.2f}" cy="{sy(p[1]):.2f}" r="6"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out)


def plot(problem: Problem, outcome, path, box: Box | None = None, grid: int = GRID) -> Raster:
    """Write the SVG to ``path`` and return the raster behind it."""
    r = raster(problem, outcome, box, grid)
    svg = render(r, getattr(outcome, "training", None))
    title = problem.name or "problem"
    svg = svg.replace(">", f"><title>{quoteattr(title)[1:-1]}</title>", 1)
    with open(path, "w") as fh:
        fh.write(svg + "\n")
    return r


__all__ = ["DimensionError", "Raster", "raster", "render", "plot", "GRID"]
