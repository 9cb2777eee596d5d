from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from sklearn.svm import SVC

from nil.exact import exact_separator
from nil.polynomial import FeatureMap, expand_classifier
from nil.svm import (
    KernelParams, SvmConfig, SvmFailed, TrainingSet, decision, functional_margin, kernel, train,
)


def test_kernel_examples():
    assert kernel([1, 2], [3, 4], KernelParams(1, 1, 2)) == 144
    x, y = np.array([0.5, -2.0, 3.0]), np.array([1.5, 0.25, -1.0])
    assert kernel(x, y, KernelParams(1, 0, 1)) == pytest.approx(float(x @ y))
    assert kernel([0, 0], [0, 0], KernelParams(1, 1, 5)) == 1


def test_kernel_params_validation():
    with pytest.raises(ValueError):
        KernelParams(1, -1, 2)
    with pytest.raises(ValueError):
        KernelParams(1, 1, 0)


def test_training_set_weights_default_to_opposite_counts():
    ts = TrainingSet([[0.0], [1.0], [2.0]], [[5.0]])
    assert ts.weight_pos == 1 and ts.weight_neg == 3
    with pytest.raises(ValueError):
        TrainingSet([], [[1.0]])


def test_two_points_1d():
    ts = TrainingSet([[-2.0]], [[2.0]])
    sol = train(ts, KernelParams(1, 1, 1))
    h = decision(sol, [[-2.0], [2.0]])
    assert h[0] > 0 > h[1]


def test_two_point_margin_is_two():
    k = KernelParams(1, 0, 1)
    ts = TrainingSet([[-1.0]], [[1.0]])
    sol = train(ts, k)
    assert functional_margin(sol, ts, k) == pytest.approx(2.0, rel=1e-6)
    assert sol.b == pytest.approx(0.0, abs=1e-9)


NECKLACE_POS = [[0, 1], [1, 2], [-1, 2]]
NECKLACE_NEG = [[0, -1], [1, -2], [-1, -2]]


def test_necklace_six_points():
    k = KernelParams(1, 1, 1)
    ts = TrainingSet(NECKLACE_POS, NECKLACE_NEG)
    sol = train(ts, k)
    h = decision(sol, ts.X)
    assert np.all(np.sign(h) == ts.y)
    assert functional_margin(sol, ts, k) > 0
    # independent solver on the same weighted problem
    ref = SVC(kernel="poly", degree=1, gamma=1, coef0=1, C=1e6, tol=1e-8).fit(ts.X, ts.y)
    assert np.all(np.sign(ref.decision_function(ts.X)) == ts.y)
    assert np.allclose(h, ref.decision_function(ts.X), atol=1e-3)


def test_support_set_stable_above_hard_margin_threshold():
    k = KernelParams(1, 1, 1)
    ts = TrainingSet(NECKLACE_POS, NECKLACE_NEG)
    a = train(ts, k, SvmConfig(C=1e4))
    b = train(ts, k, SvmConfig(C=1e6))
    assert a.support_indices == b.support_indices


def test_duplicates_keep_margin():
    k = KernelParams(1, 1, 2)
    ts = TrainingSet(NECKLACE_POS, NECKLACE_NEG)
    dup = TrainingSet(NECKLACE_POS + NECKLACE_POS[:2], NECKLACE_NEG + NECKLACE_NEG[:1])
    m1 = functional_margin(train(ts, k), ts, k)
    m2 = functional_margin(train(dup, k), dup, k)
    assert m2 == pytest.approx(m1, rel=1e-4)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_transcendental_samples_are_inseparable(m):
    rng = np.random.default_rng(11)
    xs = rng.uniform(-10, 10, 4000)
    pos = xs[np.sin(xs) >= 0.6][:30, None]
    neg = xs[np.sin(xs) <= 0.4][:30, None]
    with pytest.raises(SvmFailed) as ei:
        train(TrainingSet(pos, neg), KernelParams(1, 1, m))
    assert ei.value.misclassified


def test_margin_zero_when_point_on_boundary():
    k = KernelParams(1, 0, 1)
    ts = TrainingSet([[-1.0]], [[1.0]])
    sol = train(ts, k)
    on = TrainingSet([[-1.0], [0.0]], [[1.0]])
    assert functional_margin(sol, on, k) == 0.0


# -- random separable sets --------------------------------------------------


@st.composite
def separable(draw):
    seed = draw(st.integers(0, 2**31 - 1))
    n = draw(st.integers(1, 3))
    m = draw(st.integers(1, 3))
    rng = np.random.default_rng(seed)
    fm = FeatureMap(n, m)
    c = rng.normal(size=len(fm))
    X = rng.uniform(-3, 3, size=(draw(st.integers(6, 40)), n))
    v = fm(X) @ c
    keep = np.abs(v) > 0.1 * np.abs(v).max()
    X, v = X[keep], v[keep]
    assume((v > 0).any() and (v < 0).any())
    return TrainingSet(X[v > 0], X[v < 0]), KernelParams(1, 1, m)


@settings(max_examples=80)
@given(separable())
def test_separable_sets_fully_classified_and_dual_feasible(data):
    ts, k = data
    sol = train(ts, k)
    h = decision(sol, ts.X)
    assert np.all(ts.y * h > 0)
    a = sol.alphas
    assert abs(float(a @ sol.y)) <= 1e-6 * float(a.sum())
    Cs = np.where(sol.y > 0, 1e6 * ts.weight_pos, 1e6 * ts.weight_neg)
    assert np.all(a >= 0) and np.all(a <= Cs * (1 + 1e-12))


@settings(max_examples=30)
@given(separable())
def test_interior_point_path_is_feasible(data):
    ts, k = data
    sol = train(ts, k, SvmConfig(max_passes=1))
    if sol.solver == "smo":
        return  # converged in one step
    assert np.all(ts.y * decision(sol, ts.X) > 0)
    assert abs(float(sol.alphas @ sol.y)) <= 1e-6 * float(sol.alphas.sum())


@settings(max_examples=30)
@given(separable())
def test_deterministic(data):
    ts, k = data
    a, b = train(ts, k), train(ts, k)
    assert a.alphas.tobytes() == b.alphas.tobytes()
    assert a.b == b.b and a.support_indices == b.support_indices


@settings(max_examples=30)
@given(separable(), st.integers(0, 1000))
def test_feature_space_convex_combinations(data, seed):
    # h is linear in feature space, so it stays positive on convex
    # combinations of the positives' feature vectors
    ts, k = data
    sol = train(ts, k)
    idx = list(sol.support_indices)
    p = expand_classifier(sol.X[idx], sol.alphas[idx], sol.y[idx], sol.b, k)
    fm = FeatureMap(ts.X.shape[1], k.m)
    c = np.array([float(p.terms.get(e, 0.0)) for e in fm.monomials])
    F = fm(ts.positives)
    hp = F @ c
    lam = np.random.default_rng(seed).dirichlet(np.ones(len(F)))
    val = (lam @ F) @ c
    assert val == pytest.approx(lam @ hp, rel=1e-6, abs=1e-6)
    assert val >= hp.min() - 1e-6 * (1 + abs(hp.min())) and hp.min() > 0


# -- exact separability ------------------------------------------------------


def _exact_value(coeffs, point):
    total = Fraction(0)
    for e, c in coeffs.items():
        t = c
        for x, k in zip(point, e):
            t *= Fraction(x) ** k
        total += t
    return total


@settings(max_examples=30)
@given(separable())
def test_exact_separator_on_separable_sets(data):
    ts, k = data
    n = ts.X.shape[1]
    coeffs = exact_separator(ts.positives, ts.negatives, n, k.m)
    assert coeffs is not None
    assert all(_exact_value(coeffs, p) >= 1 for p in ts.positives)
    assert all(_exact_value(coeffs, p) <= -1 for p in ts.negatives)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_exact_separator_alternating_labels(m):
    # m + 2 alternating labels on a line need m + 1 sign changes
    xs = [Fraction(i) for i in range(m + 2)]
    pos = [(x,) for i, x in enumerate(xs) if i % 2 == 0]
    neg = [(x,) for i, x in enumerate(xs) if i % 2 == 1]
    assert exact_separator(pos, neg, 1, m) is None
    assert exact_separator(pos, neg, 1, m + 1) is not None
