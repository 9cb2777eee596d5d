"""Dual SVM training with the inhomogeneous polynomial kernel.

The dual is solved by sequential minimal optimization.  The first index of
each pair is the maximal KKT violator; the second maximizes the second-order
decrease of the objective.  Each class's box constraint is multiplied by its
weight so that unbalanced sample sets still get a sensible boundary.

When SMO stalls (tiny margins make the dual badly conditioned) the same
problem is solved as a primal QP over the explicit monomial features, whose
inequality multipliers are the dual alphas.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np

from .polynomial import FeatureMap, _multinomial


class SvmFailed(RuntimeError):
    """The trained classifier does not separate the training set."""

    def __init__(self, message: str, misclassified: tuple[int, ...] = ()):
        super().__init__(message)
        self.misclassified = misclassified


@dataclass(frozen=True)
class KernelParams:
    beta: float = 1.0
    theta: float = 1.0
    m: int = 1

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        if self.m < 1:
            raise ValueError("m must be >= 1")


@dataclass(frozen=True)
class TrainingSet:
    positives: np.ndarray
    negatives: np.ndarray
    weight_pos: float = 0.0
    weight_neg: float = 0.0

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positives, dtype=float))
        neg = np.atleast_2d(np.asarray(self.negatives, dtype=float))
        if pos.size == 0 or neg.size == 0:
            raise ValueError("both classes need at least one point")
        if pos.shape[1] != neg.shape[1]:
            raise ValueError("dimension mismatch between classes")
        object.__setattr__(self, "positives", pos)
        object.__setattr__(self, "negatives", neg)
        # weights default to the opposite class size
        if self.weight_pos <= 0:
            object.__setattr__(self, "weight_pos", float(len(neg)))
        if self.weight_neg <= 0:
            object.__setattr__(self, "weight_neg", float(len(pos)))

    @property
    def X(self) -> np.ndarray:
        return np.vstack([self.positives, self.negatives])

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([np.ones(len(self.positives)), -np.ones(len(self.negatives))])


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1e6
    kkt_tol: float = 1e-4
    max_passes: int | None = None  # None: 500 * |X|
    seed: int = 0
    # on misclassification, retry with C multiplied by c_growth, up to c_max
    c_max: float = 1e12
    c_growth: float = 10.0

    def __post_init__(self):
        if self.C <= 0 or self.kkt_tol <= 0:
            raise ValueError("C and kkt_tol must be positive")
        if self.c_growth <= 1:
            raise ValueError("c_growth must exceed 1")


@dataclass(frozen=True)
class DualSolution:
    alphas: np.ndarray
    b: float
    support_indices: tuple[int, ...]
    functional_margin: float
    X: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    kernel_params: KernelParams = KernelParams()
    iterations: int = 0
    solver: str = "smo"  # or "primal-qp", "interior-point"
    C: float = 1e6

    @property
    def support_vectors(self) -> np.ndarray:
        return self.X[list(self.support_indices)]

    def decision(self, points) -> np.ndarray:
        return decision(self, points)


def kernel(x, x2, k: KernelParams) -> float:
    x, x2 = np.asarray(x, dtype=float), np.asarray(x2, dtype=float)
    if x.shape != x2.shape:
        raise ValueError("dimension mismatch")
    return float((k.beta * np.dot(x, x2) + k.theta) ** k.m)


def kernel_matrix(A, B, k: KernelParams) -> np.ndarray:
    return (k.beta * (np.asarray(A, float) @ np.asarray(B, float).T) + k.theta) ** k.m


def decision(sol: DualSolution, points) -> np.ndarray:
    P = np.atleast_2d(np.asarray(points, dtype=float))
    idx = list(sol.support_indices)
    if not idx:
        return np.full(len(P), sol.b)
    w = sol.alphas[idx] * sol.y[idx]
    return kernel_matrix(P, sol.X[idx], sol.kernel_params) @ w + sol.b


def _margin(alphas, y, K, h) -> float:
    if np.any(h == 0):
        return 0.0
    ay = alphas * y
    w2 = float(ay @ K @ ay)
    if w2 <= 0:
        return 0.0
    return 2.0 * float(np.min(np.abs(h))) / np.sqrt(w2)


def functional_margin(sol: DualSolution, ts: TrainingSet, k: KernelParams) -> float:
    """2 * min |h(x_i)| / ||w||; zero when some training point sits on the boundary."""
    X, y = ts.X, ts.y
    h = decision(sol, X)
    K = kernel_matrix(sol.X, sol.X, k)
    return _margin(sol.alphas, sol.y, K, h)


def _smo(K, y, Cs, tol, max_iter):
    """LIBSVM-style SMO on  min 1/2 a'Qa - e'a,  y'a = 0,  0 <= a <= Cs."""
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    converged = False
    while it < max_iter:
        up = ((y > 0) & (alpha < Cs)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < Cs))
        score = -y * G
        su = np.where(up, score, -np.inf)
        sl = np.where(low, score, np.inf)
        i = int(np.argmax(su))
        if su[i] - np.min(sl) < tol:
            converged = True
            break
        # second index: largest guaranteed objective decrease among violators
        gap = su[i] - sl
        curv = QD[i] + QD - 2.0 * y[i] * y * Q[i]
        curv = np.where(curv > 0, curv, 1e-12)
        gain = np.where(low & (gap > 0), gap * gap / curv, -np.inf)
        j = int(np.argmax(gain))
        it += 1
        ai, aj = alpha[i], alpha[j]
        Ci, Cj = Cs[i], Cs[j]
        quad = curv[j]
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > Ci - Cj:
                if ni > Ci:
                    ni, nj = Ci, Ci - diff
            elif nj > Cj:
                nj, ni = Cj, Cj + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > Ci:
                if ni > Ci:
                    ni, nj = Ci, total - Ci
            elif nj < 0:
                nj, ni = 0.0, total
            if total > Cj:
                if nj > Cj:
                    nj, ni = Cj, total - Cj
            elif ni < 0:
                ni, nj = 0.0, total
        di, dj = ni - ai, nj - aj
        alpha[i], alpha[j] = ni, nj
        G += Q[:, i] * di + Q[:, j] * dj

    return alpha, _offset(alpha, y, G, Cs), it, converged


def _offset(alpha, y, G, Cs) -> float:
    """b from free vectors, else the midpoint of the feasible range."""
    free = (alpha > 0) & (alpha < Cs)
    yG = y * G
    if np.any(free):
        return -float(np.mean(yG[free]))
    at_upper = alpha >= Cs
    at_lower = alpha <= 0
    upper_side = ((y > 0) & at_lower) | ((y < 0) & at_upper)
    ub = np.min(yG[upper_side]) if upper_side.any() else np.inf
    lb = np.max(yG[~upper_side]) if (~upper_side).any() else -np.inf
    if not np.isfinite(ub):
        return -float(lb)
    if not np.isfinite(lb):
        return -float(ub)
    return -0.5 * float(ub + lb)


PRIMAL_MAX_FEATURES = 2000
_QP_OPTS = {"show_progress": False, "abstol": 1e-10, "reltol": 1e-10, "feastol": 1e-10, "maxiters": 200}


def scaled_features(X, k: KernelParams) -> np.ndarray:
    """Monomial features weighted so that their dot product is the kernel."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    fm = FeatureMap(X.shape[1], k.m)
    wts = np.array([
        math.sqrt(_multinomial(k.m, e) * k.beta ** sum(e) * k.theta ** (k.m - sum(e)))
        for e in fm.monomials
    ])
    return fm(X) * wts


def _primal(X, y, Cs, k: KernelParams):
    """min 1/2|w|^2 + sum Cs*xi  s.t.  y(w.f + b) >= 1 - xi, xi >= 0.

    The multipliers cvxopt reports are too loose once C is large, so alpha is
    refit to w over the active constraints: bounded least squares with the
    equality sum(alpha*y) = 0 as a heavily weighted extra row.
    """
    import cvxopt
    from scipy.optimize import lsq_linear

    F = scaled_features(X, k)
    n, d = F.shape
    N = d + 1 + n
    P = np.zeros((N, N))
    P[:d, :d] = np.eye(d)
    q = np.concatenate([np.zeros(d + 1), Cs])
    G = np.vstack([
        np.hstack([-(y[:, None] * F), -y[:, None], -np.eye(n)]),
        np.hstack([np.zeros((n, d + 1)), -np.eye(n)]),
    ])
    h = np.concatenate([-np.ones(n), np.zeros(n)])
    sol = cvxopt.solvers.qp(cvxopt.matrix(P), cvxopt.matrix(q), cvxopt.matrix(G), cvxopt.matrix(h),
                            options=_QP_OPTS)
    x = np.array(sol["x"]).ravel()
    w, b = x[:d], float(x[d])
    margins = y * (F @ w + b)
    # an inaccurate solve can leave every margin slightly above 1
    active = margins <= max(1.0, margins.min()) + 1e-6
    A = (F[active] * y[active, None]).T
    A = np.vstack([A, np.abs(A).max() * y[active][None, :]])
    fit = lsq_linear(A, np.concatenate([w, [0.0]]), bounds=(0, Cs[active]), method="bvls", tol=1e-14)
    alpha = np.zeros(n)
    alpha[active] = fit.x
    alpha[alpha < 1e-12 * alpha.max()] = 0.0
    return alpha, b


def _interior_point(K, y, Cs):
    """Same dual QP solved by cvxopt; used when SMO stalls on ill-conditioned data."""
    import cvxopt

    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    opts = dict(_QP_OPTS, abstol=1e-12, reltol=1e-12, feastol=1e-12)
    sol = cvxopt.solvers.qp(
        cvxopt.matrix(Q), cvxopt.matrix(-np.ones(n)),
        cvxopt.matrix(np.vstack([-np.eye(n), np.eye(n)])),
        cvxopt.matrix(np.concatenate([np.zeros(n), Cs])),
        cvxopt.matrix(y[None, :].copy()), cvxopt.matrix(0.0), options=opts,
    )
    alpha = np.clip(np.array(sol["x"]).ravel(), 0.0, Cs)
    alpha[alpha < 1e-9 * alpha.max()] = 0.0
    alpha = np.where(alpha > Cs * (1 - 1e-9), Cs, alpha)
    G = Q @ alpha - 1.0
    return alpha, _offset(alpha, y, G, Cs)


def _solve_dual(X, y, K, Cs, k: KernelParams, cfg: SvmConfig, max_iter: int, try_smo: bool = True):
    it = 0
    if try_smo:
        alpha, b, it, converged = _smo(K, y, Cs, cfg.kkt_tol, max_iter)
        if converged:
            return alpha, b, it, "smo"
    if math.comb(X.shape[1] + k.m, k.m) <= PRIMAL_MAX_FEATURES:
        alpha, b = _primal(X, y, Cs, k)
        return alpha, b, it, "primal-qp"
    alpha, b = _interior_point(K, y, Cs)
    return alpha, b, it, "interior-point"


def train(ts: TrainingSet, k: KernelParams, cfg: SvmConfig = SvmConfig()) -> DualSolution:
    """Train and return the dual solution; raise SvmFailed on any training error.

    A solution that misclassifies points is retried with a larger C, up to
    ``cfg.c_max``: separable data always has a large enough C, inseparable
    data fails at every C.
    """
    X, y = ts.X, ts.y
    n = len(y)
    K = kernel_matrix(X, X, k)
    max_iter = cfg.max_passes if cfg.max_passes is not None else 500 * n
    C = cfg.C
    total_it = 0
    try_smo = True
    while True:
        Cs = np.where(y > 0, C * ts.weight_pos, C * ts.weight_neg)
        alpha, b, it, solver = _solve_dual(X, y, K, Cs, k, cfg, max_iter, try_smo)
        # SMO that stalled at one C stalls at larger ones too
        try_smo = solver == "smo"
        total_it += it
        h = K @ (alpha * y) + b
        bad = tuple(int(t) for t in np.nonzero(y * h <= 0)[0])
        if not bad or C * cfg.c_growth > cfg.c_max * (1 + 1e-9):
            break
        C *= cfg.c_growth
    if bad:
        raise SvmFailed(f"{len(bad)} of {n} training points misclassified", bad)
    support = tuple(int(t) for t in np.nonzero(alpha > 0)[0])
    return DualSolution(
        alphas=alpha,
        b=float(b),
        support_indices=support,
        functional_margin=_margin(alpha, y, K, h),
        X=X,
        y=y,
        kernel_params=k,
        iterations=total_it,
        solver=solver,
        C=C,
    )
