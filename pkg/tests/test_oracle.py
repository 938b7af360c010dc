import numpy as np
import pytest

from budgetnb.loss import LossEvaluator, LossKind, gini_exact
from budgetnb.model import Action, BeliefState, snapshot_classifier
from budgetnb.oracle import OracleLimitExceeded, OracleLimits, optimal_value, policy_value
from budgetnb.policies import PolicyConfig, expected_loss_full_allocation, make_policy

from test_model import make_spec, random_belief

GINI = LossKind("gini")


def tiny_belief(seed, arities=(2, 2), n_classes=2, max_extra=3):
    spec = make_spec(list(arities), n_classes=n_classes)
    return random_belief(spec, np.random.default_rng(seed), max_extra=max_extra)


def test_budget_zero_is_current_loss():
    b = tiny_belief(0)
    v = optimal_value(b, 0, GINI)
    assert v == pytest.approx(gini_exact(snapshot_classifier(b)), abs=1e-12)


def test_budget_one_matches_hand_expansion():
    # one binary feature, symmetric classes: V is the theta-weighted average of
    # the two children of the best action
    spec = make_spec([2])
    b = BeliefState(spec, [np.array([[2.0, 1.0], [1.0, 2.0]])], [10, 10])
    ev = LossEvaluator(GINI, spec)
    by_hand = []
    for a in spec.actions():
        row = b.predictive_row(a)
        by_hand.append(sum(
            p * gini_exact(snapshot_classifier(b.update(a, k))) for k, p in enumerate(row)
        ))
    assert optimal_value(b, 1, GINI) == pytest.approx(min(by_hand), abs=1e-12)


def test_memoized_equals_plain_recursion():
    for seed in range(5):
        b = tiny_belief(seed)
        v_memo = optimal_value(b, 3, GINI, memo=True)
        v_plain = optimal_value(b, 3, GINI, memo=False)
        assert v_memo == pytest.approx(v_plain, abs=1e-12)


def test_permutation_invariance():
    spec = make_spec([2, 2])
    rng = np.random.default_rng(9)
    b = random_belief(spec, rng, max_extra=3)
    v = optimal_value(b, 3, GINI)

    # swap the two features
    swapped = BeliefState(spec, [b.alpha[1], b.alpha[0]], b.class_counts)
    assert optimal_value(swapped, 3, GINI) == pytest.approx(v, abs=1e-12)

    # swap the two classes (prior counts move along)
    flipped = BeliefState(
        spec, [a[::-1].copy() for a in b.alpha], b.class_counts[::-1].copy()
    )
    assert optimal_value(flipped, 3, GINI) == pytest.approx(v, abs=1e-12)

    # relabel the values of feature 0
    relabeled = BeliefState(spec, [b.alpha[0][:, ::-1].copy(), b.alpha[1]], b.class_counts)
    assert optimal_value(relabeled, 3, GINI) == pytest.approx(v, abs=1e-12)


def test_single_action_equals_full_allocation_score():
    # with one available action the MDP has no choices; its value is the
    # full-allocation expected loss of that action
    for seed in range(4):
        b = tiny_belief(seed, arities=(2,))
        a = Action(0, 1)
        budget = 4
        ev = LossEvaluator(GINI, b.spec)
        want = expected_loss_full_allocation(b, a, budget, ev, exact_states=10_000)
        got = optimal_value(b, budget, GINI, actions=[a])
        assert got == pytest.approx(want, abs=1e-10)


def test_limits_refusal_carries_estimate():
    b = tiny_belief(1)
    with pytest.raises(OracleLimitExceeded) as err:
        optimal_value(b, 40, GINI, limits=OracleLimits(max_budget=8))
    assert err.value.estimate > 0
    with pytest.raises(ValueError, match="exact"):
        optimal_value(b, 2, LossKind("gini", exact_threshold=1))


def test_policy_value_greedy_budget_one_is_min_expected_loss():
    b = tiny_belief(2)
    policy = make_policy(PolicyConfig("greedy", loss=GINI), b.spec, seed=0)
    ev = policy.evaluator
    from budgetnb.policies import expected_loss_after_one

    want = min(expected_loss_after_one(b, a, ev) for a in b.spec.actions())
    assert policy_value(policy, b, 1) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("kind,depth", [
    ("round_robin", None), ("uniform_expenditure", None),
    ("biased_robin", None), ("greedy", None), ("sfl", 4),
])
def test_heuristics_never_beat_the_optimum(kind, depth):
    for seed in range(10):
        b = tiny_belief(100 + seed)
        budget = 2 + seed % 3
        opt = optimal_value(b, budget, GINI)
        policy = make_policy(PolicyConfig(kind, loss=GINI, max_depth=depth), b.spec, seed=seed)
        val = policy_value(policy, b, budget)
        assert val >= opt - 1e-9


def test_sfl_with_depth_equal_budget_on_single_feature_instance():
    # when one action dominates at every node the lookahead value matches the
    # optimum exactly
    spec = make_spec([2], n_classes=2)
    alpha = [np.array([[1.0, 1.0], [4.0, 1.0]])]
    b = BeliefState(spec, alpha, [5, 5])
    budget = 3
    opt = optimal_value(b, budget, GINI)
    sfl = make_policy(PolicyConfig("sfl", loss=GINI, max_depth=budget), spec, seed=0)
    val = policy_value(sfl, b, budget)
    assert val >= opt - 1e-9


def test_value_monotone_in_budget_on_seeded_instances():
    # not guaranteed in general (spending is forced); observed to hold on
    # these seeded instances and recorded as an empirical finding
    violations = []
    for seed in range(20):
        b = tiny_belief(300 + seed)
        values = [optimal_value(b, budget, GINI) for budget in range(4)]
        for lo, hi in zip(values[1:], values[:-1]):
            if lo > hi + 1e-9:
                violations.append((seed, values))
    assert violations == []
