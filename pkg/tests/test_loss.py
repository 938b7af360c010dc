import itertools

import numpy as np
import pytest

from budgetnb.compositions import composition_matrix
from budgetnb.loss import (
    ExactLossInfeasible,
    LossEvaluator,
    LossKind,
    ValidationSet,
    entropy_exact,
    entropy_mc,
    gini_exact,
    gini_mc,
    zero_one_error,
    zero_one_exact,
)
from budgetnb.model import Action, BeliefState, NBClassifier, snapshot_classifier

from test_model import make_spec, random_belief, random_model


# ---------------------------------------------------------------------------
# independent oracle: enumerate configurations with plain python loops


def brute_loss(model, kind):
    spec = model.spec
    total = 0.0
    for x in itertools.product(*[range(f.arity) for f in spec.features]):
        joint = []
        for c in range(spec.n_classes):
            p = model.prior[c]
            for i, v in enumerate(x):
                p *= model.theta[i][c, v]
            joint.append(p)
        px = sum(joint)
        if px == 0:
            continue
        post = [p / px for p in joint]
        if kind == "gini":
            total += px * sum(q * (1 - q) for q in post)
        elif kind == "entropy":
            total += px * -sum(q * np.log2(q) for q in post if q > 0)
        else:
            total += px * (1 - max(post))
    return total


def test_gini_uniform_binary_model_is_half():
    spec = make_spec([2])
    m = NBClassifier(spec, [np.full((2, 2), 0.5)], [0.5, 0.5])
    assert gini_exact(m) == pytest.approx(0.5, abs=1e-12)


def test_gini_near_deterministic_feature_is_tiny():
    spec = make_spec([2])
    eps = 1e-9
    m = NBClassifier(spec, [np.array([[1 - eps, eps], [eps, 1 - eps]])], [0.5, 0.5])
    assert gini_exact(m) < 1e-6


@pytest.mark.parametrize("kind,fn", [("gini", gini_exact), ("entropy", entropy_exact), ("zero_one", zero_one_exact)])
def test_exact_losses_match_brute_force(kind, fn):
    rng = np.random.default_rng(31)
    spec = make_spec([2, 2, 2])
    for _ in range(10):
        m = random_model(spec, rng)
        assert fn(m) == pytest.approx(brute_loss(m, kind), abs=1e-12)


def test_exact_loss_over_threshold_refuses():
    spec = make_spec([2] * 13)  # 8192 configurations
    m = NBClassifier(spec, [np.full((2, 2), 0.5)] * 13, [0.5, 0.5])
    with pytest.raises(ExactLossInfeasible, match="Monte Carlo"):
        gini_exact(m)


def test_entropy_bounds_and_trivial_values():
    spec = make_spec([2])
    uniform = NBClassifier(spec, [np.full((2, 2), 0.5)], [0.5, 0.5])
    assert entropy_exact(uniform) == pytest.approx(1.0, abs=1e-12)
    eps = 1e-12
    det = NBClassifier(spec, [np.array([[1 - eps, eps], [eps, 1 - eps]])], [0.5, 0.5])
    assert entropy_exact(det) < 1e-9


def test_losses_zero_iff_posteriors_deterministic():
    spec = make_spec([2])
    m = NBClassifier(spec, [np.array([[1.0, 0.0], [0.0, 1.0]])], [0.5, 0.5])
    assert gini_exact(m) == pytest.approx(0.0, abs=1e-15)
    assert entropy_exact(m) == pytest.approx(0.0, abs=1e-15)
    mixed = NBClassifier(spec, [np.array([[0.9, 0.1], [0.2, 0.8]])], [0.5, 0.5])
    assert gini_exact(mixed) > 0.01
    assert entropy_exact(mixed) > 0.01


def test_loss_ranges_random_models():
    rng = np.random.default_rng(99)
    spec = make_spec([2, 3], n_classes=3)
    for _ in range(20):
        m = random_model(spec, rng)
        g = gini_exact(m)
        e = entropy_exact(m)
        assert 0.0 <= g <= 1 - 1 / 3 + 1e-12
        assert 0.0 <= e <= np.log2(3) + 1e-12


# ---------------------------------------------------------------------------
# Monte Carlo


def test_gini_mc_degenerate_model_is_zero():
    spec = make_spec([2])
    m = NBClassifier(spec, [np.array([[1.0, 0.0], [0.0, 1.0]])], [1.0, 0.0])
    assert gini_mc(m, np.random.default_rng(0), 500) == pytest.approx(0.0, abs=1e-12)


def test_gini_mc_close_to_exact_six_features():
    spec = make_spec([2] * 6)
    m = random_model(spec, np.random.default_rng(8))
    exact = gini_exact(m)
    hits = 0
    for seed in range(100):
        est = gini_mc(m, np.random.default_rng(seed), 10_000)
        hits += abs(est - exact) <= 0.01
    assert hits >= 95


def test_gini_mc_deterministic_given_seed():
    spec = make_spec([2, 2])
    m = random_model(spec, np.random.default_rng(3))
    a = gini_mc(m, np.random.default_rng(11), 200)
    b = gini_mc(m, np.random.default_rng(11), 200)
    assert a == b


def test_mc_estimator_unbiased():
    spec = make_spec([2, 2, 2])
    m = random_model(spec, np.random.default_rng(14))
    exact = gini_exact(m)
    ests = np.array([gini_mc(m, np.random.default_rng(s), 100) for s in range(1000)])
    se = ests.std(ddof=1) / np.sqrt(len(ests))
    assert abs(ests.mean() - exact) <= 3 * se


def test_mc_variance_shrinks_like_one_over_m():
    spec = make_spec([2] * 5)
    m = random_model(spec, np.random.default_rng(2))
    sizes = [100, 400, 1600]
    log_vars = []
    for n in sizes:
        ests = np.array([gini_mc(m, np.random.default_rng(1000 + s), n) for s in range(200)])
        log_vars.append(np.log(ests.var(ddof=1)))
    slope = np.polyfit(np.log(sizes), log_vars, 1)[0]
    assert -1.2 <= slope <= -0.8


def test_entropy_mc_matches_exact_roughly():
    spec = make_spec([2] * 4)
    m = random_model(spec, np.random.default_rng(6))
    est = entropy_mc(m, np.random.default_rng(0), 20_000)
    assert est == pytest.approx(entropy_exact(m), abs=0.02)


# ---------------------------------------------------------------------------
# validation error


def test_zero_one_error_perfect_and_flipped():
    spec = make_spec([2])
    m = NBClassifier(spec, [np.array([[0.9, 0.1], [0.1, 0.9]])], [0.5, 0.5])
    values = np.array([[0], [1], [0], [1]])
    right = ValidationSet(np.array([0, 1, 0, 1]), values, spec)
    flipped = ValidationSet(np.array([1, 0, 1, 0]), values, spec)
    assert zero_one_error(m, right) == 0.0
    assert zero_one_error(m, flipped) == 1.0


def test_validation_set_rejects_bad_rows():
    spec = make_spec([2])
    with pytest.raises(ValueError):
        ValidationSet(np.array([], dtype=int), np.zeros((0, 1), dtype=int), spec)
    with pytest.raises(ValueError):
        ValidationSet(np.array([0]), np.array([[5]]), spec)


# ---------------------------------------------------------------------------
# batched child scoring equals per-child evaluation through the public API


@pytest.mark.parametrize("kind", ["gini", "entropy", "zero_one"])
def test_child_losses_exact_path_matches_per_child(kind):
    rng = np.random.default_rng(55)
    spec = make_spec([2, 3], n_classes=2)
    ev = LossEvaluator(LossKind(kind), spec)
    assert ev.exact
    b = random_belief(spec, rng)
    for a in [Action(0, 1), Action(1, 0)]:
        r = spec.features[a.feature].arity
        mat = composition_matrix(3, r)
        batched = ev.child_losses(b, a, mat)
        for counts, got in zip(mat, batched):
            child = snapshot_classifier(b.add_counts(a, counts))
            want = {"gini": gini_exact, "entropy": entropy_exact, "zero_one": zero_one_exact}[kind](child)
            assert got == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("kind", ["gini", "entropy", "zero_one"])
def test_child_losses_mc_path_matches_per_child_with_shared_seed(kind):
    rng = np.random.default_rng(56)
    spec = make_spec([2, 3, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2])  # over the exact threshold
    ev = LossEvaluator(LossKind(kind, mc_samples=400, exact_threshold=64), spec)
    assert not ev.exact
    b = random_belief(spec, rng, max_extra=3)
    for a in [Action(1, 0), Action(0, 1)]:
        r = spec.features[a.feature].arity
        mat = composition_matrix(2, r)
        batched = ev.child_losses(b, a, mat, seed=123)
        from budgetnb.loss import _mc_loss

        for counts, got in zip(mat, batched):
            child = snapshot_classifier(b.add_counts(a, counts))
            want = _mc_loss(child, kind, np.random.default_rng(123), 400)
            assert got == pytest.approx(want, abs=1e-9)


def test_child_losses_zero_counts_equals_current_loss():
    spec = make_spec([2, 2])
    ev = LossEvaluator(LossKind("gini"), spec)
    b = random_belief(spec, np.random.default_rng(1))
    got = ev.child_losses(b, Action(0, 0), np.zeros((1, 2), dtype=int))
    assert got[0] == pytest.approx(gini_exact(snapshot_classifier(b)), abs=1e-12)


def test_evaluator_value_dispatch():
    spec = make_spec([2, 2])
    ev = LossEvaluator(LossKind("gini"), spec)
    m = random_model(spec, np.random.default_rng(0))
    assert ev.value(m) == pytest.approx(gini_exact(m), abs=1e-12)
    ev_mc = LossEvaluator(LossKind("gini", mc_samples=200, exact_threshold=2), spec)
    with pytest.raises(ValueError):
        ev_mc.value(m)  # needs a seed
    assert ev_mc.value(m, seed=5) == pytest.approx(gini_mc(m, np.random.default_rng(5), 200))
