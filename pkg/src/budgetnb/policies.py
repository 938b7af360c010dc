"""Purchase policies: map (belief, budget, availability) to the next action.

All policies are pure state machines: `decide` consumes an explicit policy
state and returns (action or None, next state), so the same implementation
drives both the simulation harness and the exact policy-value oracle. None
signals that no affordable, available action remains; policies never stop
voluntarily before that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scipy.special import logsumexp

from .compositions import composition_count, composition_matrix
from .loss import LossEvaluator, LossKind
from .model import (
    Action,
    BeliefState,
    ProblemSpec,
    allocation_outcome_log_probs,
    ordered_sequence_log_probs,
    snapshot_classifier,
)

# lookahead outcome weightings: the true outcome law (every purchase order
# reaching a state counted), or each state weighted by a single order's
# probability, renormalized. The latter boosts extreme outcomes and is what
# reproduces the published lookahead behavior.
MULTISET = "multiset"
SINGLE_PATH = "single_path"
SFL_WEIGHTINGS = (MULTISET, SINGLE_PATH)

ROUND_ROBIN = "round_robin"
UNIFORM_EXPENDITURE = "uniform_expenditure"
BIASED_ROBIN = "biased_robin"
GREEDY = "greedy"
SFL = "sfl"
POLICY_KINDS = (ROUND_ROBIN, UNIFORM_EXPENDITURE, BIASED_ROBIN, GREEDY, SFL)


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    loss: LossKind = LossKind()
    max_depth: int | None = None
    # lookahead scoring: enumerate outcome states exactly up to this many,
    # otherwise estimate with this many sampled terminal states
    sfl_exact_states: int = 256
    sfl_state_samples: int = 64
    # score candidates on a common sampled-x stream (low-variance comparisons)
    # or with independent per-candidate draws (estimator noise survives into
    # the argmin, which behaves more like the original sampled scoring)
    crn_scoring: bool = True
    sfl_weighting: str = SINGLE_PATH

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == SFL:
            if self.max_depth is None or self.max_depth < 1:
                raise ValueError("sfl needs max_depth >= 1")
        if self.sfl_weighting not in SFL_WEIGHTINGS:
            raise ValueError(f"unknown sfl_weighting {self.sfl_weighting!r}")
        if self.sfl_exact_states < 1 or self.sfl_state_samples < 1:
            raise ValueError("state caps must be >= 1")

    @property
    def name(self) -> str:
        return f"{self.kind}_depth{self.max_depth}" if self.kind == SFL else self.kind


@dataclass
class BudgetLedger:
    initial: int
    spent: int = 0

    def __post_init__(self):
        if self.initial < 1:
            raise ValueError("budget must be >= 1")
        if not 0 <= self.spent <= self.initial:
            raise ValueError("spent must lie in [0, initial]")

    @property
    def remaining(self) -> int:
        return self.initial - self.spent

    def charge(self, cost: int) -> None:
        if cost > self.remaining:
            raise ValueError(f"cannot spend {cost}, only {self.remaining} remaining")
        self.spent += cost


class Allocation:
    """Planned purchase counts per (feature, class) action."""

    def __init__(self, spec: ProblemSpec, counts):
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (spec.n_features, spec.n_classes) or np.any(counts < 0):
            raise ValueError("counts must be a nonnegative (n_features, n_classes) grid")
        self.spec = spec
        self.counts = counts

    @classmethod
    def single_action(cls, spec: ProblemSpec, action: Action, m: int) -> "Allocation":
        counts = np.zeros((spec.n_features, spec.n_classes), dtype=np.int64)
        counts[action.feature, action.label] = m
        return cls(spec, counts)

    def total_cost(self) -> int:
        costs = np.asarray(self.spec.costs, dtype=np.int64)
        return int((self.counts.sum(axis=1) * costs).sum())


class Availability:
    """Remaining purchasable cells per action; None means unlimited (pool-free mode)."""

    def __init__(self, grid: np.ndarray | None):
        self.grid = grid

    @classmethod
    def unlimited(cls) -> "Availability":
        return cls(None)

    def count(self, action: Action):
        if self.grid is None:
            return math.inf
        return int(self.grid[action.feature, action.label])


# ---------------------------------------------------------------------------
# action scoring shared by greedy, lookahead, and the oracle link tests


def expected_loss_after_one(belief: BeliefState, action: Action, evaluator: LossEvaluator,
                            seed: int | None = None, crn: bool = True) -> float:
    """Expected loss after a single purchase of `action`.

    The reachable next states are the single-increment children, weighted by
    the predictive outcome probabilities of the current belief.
    """
    r = belief.spec.features[action.feature].arity
    losses = evaluator.child_losses(belief, action, np.eye(r, dtype=np.int64), seed, crn=crn)
    return float(belief.predictive_row(action) @ losses)


def _sample_single_path_counts(row: np.ndarray, m: int, n_samples: int,
                               rng: np.random.Generator) -> np.ndarray:
    """Exact draws from the renormalized single-order outcome weighting.

    The weighting factorizes into per-value rising factorials under the
    total-count constraint, so a suffix-sum dynamic program gives the exact
    marginal of each coordinate and samples follow coordinate by coordinate.
    The suffix table is built with a Toeplitz log-convolution and the
    coordinate conditionals are cached as cumulative tables, so per-sample
    work is r searchsorted lookups.
    """
    from scipy.linalg import toeplitz

    r = len(row)
    g = np.zeros((r, m + 1))
    for k in range(r):
        g[k, 1:] = np.cumsum(np.log(row[k] + np.arange(m)))
    suffix = np.empty((r + 1, m + 1))
    suffix[r] = -np.inf
    suffix[r, 0] = 0.0
    pad = np.full(m + 1, -np.inf)
    cdfs = [None] * r
    for j in range(r - 1, 0, -1):
        first_row = pad.copy()
        first_row[0] = suffix[j + 1][0]
        shifted = toeplitz(suffix[j + 1], first_row)      # shifted[t, c] = suffix[j+1][t-c]
        scores = g[j][None, :] + shifted                   # (t, c) joint log-weights
        top = scores.max(axis=1)
        with np.errstate(invalid="ignore"):
            suffix[j] = top + np.log(np.exp(scores - top[:, None]).sum(axis=1))
        w = np.exp(scores - suffix[j][:, None])
        cdfs[j] = np.cumsum(np.where(np.isfinite(scores), w, 0.0), axis=1)
    # first coordinate only needs the t = m row
    logw0 = g[0] + suffix[1][::-1]
    w0 = np.exp(logw0 - logw0.max())
    cdf0 = np.cumsum(w0 / w0.sum())

    out = np.zeros((n_samples, r), dtype=np.int64)
    u = rng.random((n_samples, r - 1))
    for s in range(n_samples):
        c = int(np.searchsorted(cdf0, u[s, 0], side="right"))
        t = m - min(c, m)
        out[s, 0] = min(c, m)
        for j in range(1, r - 1):
            cdf = cdfs[j][t]
            c = int(np.searchsorted(cdf / cdf[-1], u[s, j], side="right"))
            c = min(c, t)
            out[s, j] = c
            t -= c
        out[s, r - 1] = t
    return out


def expected_loss_full_allocation(belief: BeliefState, action: Action, m: int,
                                  evaluator: LossEvaluator, seed: int | None = None,
                                  exact_states: int = 256, state_samples: int = 64,
                                  state_seed: int | None = None, crn: bool = True,
                                  weighting: str = MULTISET) -> float:
    """Expected loss of spending m purchases entirely on `action`.

    Outcome states (count vectors over the feature's values) are enumerated
    exactly when there are at most `exact_states` of them, and otherwise
    sampled from the chosen state law (`state_samples` draws), which keeps the
    estimate unbiased when enumeration is out of reach. With the default
    "multiset" weighting this is the true expectation over outcomes;
    "single_path" weights each state by one purchase order's probability,
    renormalized, which relatively boosts extreme outcomes.
    """
    if weighting not in SFL_WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}")
    r = belief.spec.features[action.feature].arity
    if composition_count(m, r) <= exact_states:
        mat = composition_matrix(m, r)
        if weighting == MULTISET:
            weights = np.exp(allocation_outcome_log_probs(belief, action, mat))
        else:
            logw = ordered_sequence_log_probs(belief, action, mat)
            weights = np.exp(logw - logsumexp(logw))
    else:
        rng = np.random.default_rng(state_seed)
        if weighting == MULTISET:
            p = rng.dirichlet(belief.alpha_row(action), size=state_samples)
            draws = rng.multinomial(m, p)
        else:
            draws = _sample_single_path_counts(belief.alpha_row(action), m, state_samples, rng)
        mat, freq = np.unique(draws, axis=0, return_counts=True)
        weights = freq / state_samples
    losses = evaluator.child_losses(belief, action, mat, seed, crn=crn)
    return float(weights @ losses)


# ---------------------------------------------------------------------------
# policies


class Policy:
    def __init__(self, problem: ProblemSpec, config: PolicyConfig, seed: int = 0):
        self.problem = problem
        self.config = config
        self.seed = int(seed)
        self.evaluator = LossEvaluator(config.loss, problem)
        self.actions = problem.actions()

    @property
    def name(self) -> str:
        return self.config.name

    def initial_state(self):
        raise NotImplementedError

    def decide(self, state, belief: BeliefState, availability: Availability, ledger: BudgetLedger):
        raise NotImplementedError

    # seeds for per-decision scoring; every candidate in one decision shares one
    def _decision_seed(self, t: int) -> int:
        return int(np.random.SeedSequence([self.seed, t]).generate_state(1)[0])

    def _candidate_seed(self, t: int, candidate: int) -> int:
        return int(np.random.SeedSequence([self.seed, t, 7, candidate]).generate_state(1)[0])

    def _usable(self, action: Action, availability: Availability, ledger: BudgetLedger) -> bool:
        cost = self.problem.features[action.feature].cost
        return cost <= ledger.remaining and availability.count(action) > 0

    def _scan_cycle(self, start: int, availability: Availability, ledger: BudgetLedger):
        n = len(self.actions)
        for off in range(n):
            idx = (start + off) % n
            if self._usable(self.actions[idx], availability, ledger):
                return idx
        return None


class RoundRobinPolicy(Policy):
    """Cycle the actions in lexicographic order, ignoring outcomes."""

    def initial_state(self):
        return 0

    def decide(self, state, belief, availability, ledger):
        idx = self._scan_cycle(state, availability, ledger)
        if idx is None:
            return None, state
        return self.actions[idx], (idx + 1) % len(self.actions)


class UniformExpenditurePolicy(Policy):
    """Aim the same currency amount at every feature; cheap features get bought more."""

    def initial_state(self):
        n = self.problem.n_features
        return (0,) * n, (0,) * n  # per-feature spend, per-feature class cursor

    def decide(self, state, belief, availability, ledger):
        spent, cursors = state
        target = ledger.initial / self.problem.n_features
        order = sorted(range(self.problem.n_features), key=lambda i: (spent[i] / target, i))
        C = self.problem.n_classes
        for i in order:
            if self.problem.features[i].cost > ledger.remaining:
                continue
            for off in range(C):
                j = (cursors[i] + off) % C
                if availability.count(Action(i, j)) > 0:
                    new_spent = list(spent)
                    new_spent[i] += self.problem.features[i].cost
                    new_cursors = list(cursors)
                    new_cursors[i] = (j + 1) % C
                    return Action(i, j), (tuple(new_spent), tuple(new_cursors))
        return None, state


class BiasedRobinPolicy(Policy):
    """Repeat the current feature while it keeps strictly lowering the loss estimate.

    Purchases of the parked feature rotate through the class labels so both
    conditional rows move together; a genuinely informative feature keeps
    separating its rows (loss falls, stay), an irrelevant one sees its rows
    converge (loss rises, advance to the next feature). The previous estimate
    persists across calls; each call re-estimates the loss of the current
    belief with the policy's fixed seed so that the before/after comparison
    uses common random numbers.
    """

    def initial_state(self):
        n = self.problem.n_features
        return 0, (0,) * n, None  # feature cursor, class rotation, last loss estimate

    def _feature_usable(self, i, availability, ledger):
        if self.problem.features[i].cost > ledger.remaining:
            return False
        return any(
            availability.count(Action(i, j)) > 0 for j in range(self.problem.n_classes)
        )

    def decide(self, state, belief, availability, ledger):
        cursor, rotation, last = state
        n = self.problem.n_features
        if not any(self._feature_usable(i, availability, ledger) for i in range(n)):
            return None, state  # nothing purchasable; skip the loss estimate
        current = self.evaluator.value(snapshot_classifier(belief), seed=self.seed)
        start = cursor
        if last is not None and not (current < last):
            start = cursor + 1  # non-decrease (ties included): move on
        for off in range(n):
            i = (start + off) % n
            if not self._feature_usable(i, availability, ledger):
                continue
            C = self.problem.n_classes
            for coff in range(C):
                j = (rotation[i] + coff) % C
                if availability.count(Action(i, j)) > 0:
                    new_rotation = list(rotation)
                    new_rotation[i] = (j + 1) % C
                    return Action(i, j), (i, tuple(new_rotation), current)
        return None, state


class GreedyPolicy(Policy):
    """One-step lookahead: pick the action minimizing expected post-purchase loss."""

    def initial_state(self):
        return 0  # decision counter

    def decide(self, state, belief, availability, ledger):
        cands = [a for a in self.actions if self._usable(a, availability, ledger)]
        if not cands:
            return None, state + 1
        if len(cands) == 1:
            return cands[0], state + 1
        crn = self.config.crn_scoring
        shared = self._decision_seed(state)
        scores = [
            expected_loss_after_one(
                belief, a, self.evaluator,
                seed=shared if crn else self._candidate_seed(state, ci), crn=crn,
            )
            for ci, a in enumerate(cands)
        ]
        return cands[int(np.argmin(scores))], state + 1


class SingleFeatureLookaheadPolicy(Policy):
    """Score each action by committing the whole (depth-capped) budget to it, buy once.

    The lookahead horizon per candidate is the smallest of the affordable
    purchase count, the configured depth cap, and the pool cells left for
    that action.
    """

    def initial_state(self):
        return 0

    def decide(self, state, belief, availability, ledger):
        cands = [a for a in self.actions if self._usable(a, availability, ledger)]
        if not cands:
            return None, state + 1
        if len(cands) == 1:
            return cands[0], state + 1
        shared = self._decision_seed(state)
        cfg = self.config
        scores = []
        for ci, a in enumerate(cands):
            cost = self.problem.features[a.feature].cost
            horizon = min(ledger.remaining // cost, cfg.max_depth, availability.count(a))
            scores.append(expected_loss_full_allocation(
                belief, a, int(horizon), self.evaluator,
                seed=shared if cfg.crn_scoring else self._candidate_seed(state, ci),
                crn=cfg.crn_scoring, weighting=cfg.sfl_weighting,
                exact_states=cfg.sfl_exact_states, state_samples=cfg.sfl_state_samples,
                state_seed=int(np.random.SeedSequence([self.seed, state, 1 + ci]).generate_state(1)[0]),
            ))
        return cands[int(np.argmin(scores))], state + 1


_POLICY_CLASSES = {
    ROUND_ROBIN: RoundRobinPolicy,
    UNIFORM_EXPENDITURE: UniformExpenditurePolicy,
    BIASED_ROBIN: BiasedRobinPolicy,
    GREEDY: GreedyPolicy,
    SFL: SingleFeatureLookaheadPolicy,
}


def make_policy(config: PolicyConfig, problem: ProblemSpec, seed: int = 0) -> Policy:
    return _POLICY_CLASSES[config.kind](problem, config, seed)
