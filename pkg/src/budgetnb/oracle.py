"""Exhaustive expected-loss computation for tiny instances.

`optimal_value` solves the budgeted purchase MDP exactly by recursion over
belief states (transitions follow the current belief's predictive
probabilities, i.e. Bayes-adaptive dynamics), and `policy_value` computes the
exact expected final loss of any deterministic policy on the same dynamics.
Both refuse instances whose search tree would be large; the problem is
exponential in general and these routines exist as correctness oracles, not
solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

from .loss import LossEvaluator, LossKind
from .model import BeliefState, snapshot_classifier
from .policies import Availability, BudgetLedger, Policy


@dataclass(frozen=True)
class OracleLimits:
    max_budget: int = 12
    max_features: int = 4
    max_arity: int = 4
    max_classes: int = 3
    max_nodes: int = 10_000_000


class OracleLimitExceeded(RuntimeError):
    def __init__(self, message: str, estimate: int):
        super().__init__(f"{message} (estimated node visits: {estimate})")
        self.estimate = estimate


def _estimate_nodes(branching: int, depth: int) -> int:
    total, level = 1, 1
    for _ in range(depth):
        level *= max(branching, 1)
        total += level
        if total > 10 ** 12:
            break
    return total


def _check_limits(spec, budget: int, branching: int, limits: OracleLimits) -> None:
    depth = budget // min(spec.costs)
    estimate = _estimate_nodes(branching, depth)
    if (
        budget > limits.max_budget
        or spec.n_features > limits.max_features
        or max(spec.arities) > limits.max_arity
        or spec.n_classes > limits.max_classes
        or estimate > limits.max_nodes
    ):
        raise OracleLimitExceeded("instance too large for exhaustive evaluation", estimate)


def canonical_key(belief: BeliefState):
    """Hashable key invariant under feature reordering and value relabeling.

    Value columns are sorted per feature (a consistent relabeling across
    classes changes nothing), then whole feature blocks are sorted together
    with their costs. Class order is kept: the empirical prior is attached to
    specific labels.
    """
    blocks = []
    for f, a in zip(belief.spec.features, belief.alpha):
        cols = tuple(sorted(tuple(a[:, k]) for k in range(f.arity)))
        blocks.append((f.cost, f.arity, cols))
    return tuple(sorted(blocks)), tuple(belief.class_counts.tolist())


def optimal_value(
    belief: BeliefState,
    budget: int,
    loss: LossKind,
    limits: OracleLimits | None = None,
    memo: bool = True,
    actions=None,
    allow_stop: bool = False,
) -> float:
    """Minimum expected final loss over all purchase policies.

    Terminal states are the ones where no action is affordable (spending is
    forced while anything is); `allow_stop` adds a voluntary stop action for
    experimentation and is excluded from the acceptance suite.
    """
    limits = limits or OracleLimits()
    spec = belief.spec
    evaluator = LossEvaluator(loss, spec)
    if not evaluator.exact:
        raise ValueError("the oracle needs an exactly evaluable loss (raise exact_threshold)")
    action_set = tuple(actions) if actions is not None else spec.actions()
    branching = sum(spec.features[a.feature].arity for a in action_set)
    _check_limits(spec, budget, branching, limits)
    canonicalize = memo and actions is None

    table: dict = {}
    visits = 0

    def value(b: BeliefState, remaining: int) -> float:
        nonlocal visits
        visits += 1
        if visits > limits.max_nodes:
            raise OracleLimitExceeded("node budget exhausted mid-search", visits)
        affordable = [a for a in action_set if spec.features[a.feature].cost <= remaining]
        if not affordable:
            return evaluator.value(snapshot_classifier(b))
        key = None
        if memo:
            key = (remaining, canonical_key(b)) if canonicalize else (
                remaining,
                tuple(a.tobytes() for a in b.alpha),
            )
            hit = table.get(key)
            if hit is not None:
                return hit
        best = float("inf")
        for a in affordable:
            row = b.predictive_row(a)
            cost = spec.features[a.feature].cost
            expected = sum(
                p * value(b.update(a, k), remaining - cost) for k, p in enumerate(row)
            )
            if expected < best:
                best = expected
        if allow_stop:
            best = min(best, evaluator.value(snapshot_classifier(b)))
        if memo:
            table[key] = best
        return best

    return value(belief, budget)


def policy_value(policy: Policy, belief: BeliefState, budget: int,
                 limits: OracleLimits | None = None) -> float:
    """Exact expected final loss of one policy under belief-predictive outcomes.

    Pool-free mode: every action stays available and outcomes are drawn from
    the belief, not a finite pool. The policy must decide deterministically,
    which exact loss evaluation guarantees.
    """
    limits = limits or OracleLimits()
    spec = policy.problem
    if not policy.evaluator.exact:
        raise ValueError("policy_value needs exact loss evaluation for deterministic decisions")
    _check_limits(spec, budget, max(spec.arities), limits)
    unlimited = Availability.unlimited()

    visits = 0

    def value(b: BeliefState, spent: int, state) -> float:
        nonlocal visits
        visits += 1
        if visits > limits.max_nodes:
            raise OracleLimitExceeded("node budget exhausted mid-search", visits)
        action, state = policy.decide(state, b, unlimited, BudgetLedger(budget, spent))
        if action is None:
            return policy.evaluator.value(snapshot_classifier(b))
        cost = spec.features[action.feature].cost
        row = b.predictive_row(action)
        return sum(
            p * value(b.update(action, k), spent + cost, state) for k, p in enumerate(row)
        )

    return value(belief, 0, policy.initial_state())
