"""Dirichlet-multinomial belief state over Naive Bayes parameters.

A belief assigns each (feature, class) pair an independent Dirichlet over
that feature's conditional multinomial. Purchasing a feature value for a
class performs the conjugate update (increment one pseudo-count), and the
posterior-mean parameters define the Naive Bayes classifier deployed at any
point in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


class EmptyPriorError(RuntimeError):
    """Raised when a classifier is requested but no class counts exist."""


@dataclass(frozen=True)
class Action:
    """A purchase request: reveal feature `feature` of an instance with class `label`."""

    feature: int
    label: int


@dataclass(frozen=True)
class FeatureSpec:
    id: int
    name: str
    arity: int
    cost: int = 1

    def __post_init__(self):
        if self.arity < 2:
            raise ValueError(f"feature {self.name!r}: arity must be >= 2, got {self.arity}")
        if self.cost < 1:
            raise ValueError(f"feature {self.name!r}: cost must be >= 1, got {self.cost}")


@dataclass(frozen=True)
class ProblemSpec:
    features: tuple[FeatureSpec, ...]
    class_labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.features) < 1:
            raise ValueError("need at least one feature")
        if len(self.class_labels) < 2:
            raise ValueError("need at least two class labels")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if len(set(self.class_labels)) != len(self.class_labels):
            raise ValueError("class labels must be unique")
        for i, f in enumerate(self.features):
            if f.id != i:
                raise ValueError(f"feature ids must be 0..n-1 in order, got {f.id} at {i}")

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(f.arity for f in self.features)

    @property
    def costs(self) -> tuple[int, ...]:
        return tuple(f.cost for f in self.features)

    def actions(self) -> tuple[Action, ...]:
        """All purchase actions in feature-major lexicographic order."""
        return tuple(
            Action(i, j)
            for i in range(self.n_features)
            for j in range(self.n_classes)
        )

    def joint_config_count(self) -> int:
        return math.prod(self.arities)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class BeliefState:
    """Immutable grid of Dirichlet hyperparameters plus class counts.

    `alpha[i]` is a (n_classes, arity_i) array of positive reals; class_counts
    holds the known label counts of the training pool (the empirical prior).
    All update operations return new states.
    """

    __slots__ = ("spec", "alpha", "class_counts")

    def __init__(self, spec: ProblemSpec, alpha, class_counts):
        self.spec = spec
        alpha = tuple(np.asarray(a, dtype=float) for a in alpha)
        if len(alpha) != spec.n_features:
            raise ValueError("alpha grid does not match feature count")
        for f, a in zip(spec.features, alpha):
            if a.shape != (spec.n_classes, f.arity):
                raise ValueError(f"alpha block for feature {f.id} has shape {a.shape}")
            if not np.all(a > 0):
                raise ValueError("all hyperparameters must be positive")
        cc = np.asarray(class_counts, dtype=np.int64)
        if cc.shape != (spec.n_classes,) or np.any(cc < 0):
            raise ValueError("class_counts must be nonnegative, one per class")
        self.alpha = tuple(_frozen(a.copy()) for a in alpha)
        self.class_counts = _frozen(cc.copy())

    @classmethod
    def uniform(cls, spec: ProblemSpec, class_counts, strength: float = 1.0) -> "BeliefState":
        """Belief with alpha = strength everywhere (default Dir(1,...,1))."""
        alpha = [np.full((spec.n_classes, f.arity), float(strength)) for f in spec.features]
        return cls(spec, alpha, class_counts)

    def alpha_row(self, action: Action) -> np.ndarray:
        return self.alpha[action.feature][action.label]

    def update(self, action: Action, value: int) -> "BeliefState":
        """Conjugate update: one observation of `value` for `action`."""
        r = self.spec.features[action.feature].arity
        if not 0 <= value < r:
            raise IndexError(f"value {value} out of range for arity {r}")
        return self.add_counts(action, np.eye(r, dtype=int)[value])

    def add_counts(self, action: Action, counts) -> "BeliefState":
        """Add a whole outcome count vector to one (feature, class) row."""
        counts = np.asarray(counts)
        i, j = action.feature, action.label
        if counts.shape != (self.spec.features[i].arity,) or np.any(counts < 0):
            raise ValueError("counts must be a nonnegative vector of length arity")
        new = object.__new__(BeliefState)
        new.spec = self.spec
        block = self.alpha[i].copy()
        block[j] += counts
        new.alpha = self.alpha[:i] + (_frozen(block),) + self.alpha[i + 1:]
        new.class_counts = self.class_counts
        return new

    def predictive_row(self, action: Action) -> np.ndarray:
        """Posterior-mean outcome probabilities for the next purchase of `action`."""
        row = self.alpha_row(action)
        return row / row.sum()


class NBClassifier:
    """Naive Bayes model: posterior-mean conditionals and an empirical class prior."""

    __slots__ = ("spec", "theta", "prior", "log_theta", "log_prior")

    def __init__(self, spec: ProblemSpec, theta, prior):
        self.spec = spec
        theta = tuple(np.asarray(t, dtype=float) for t in theta)
        prior = np.asarray(prior, dtype=float)
        if len(theta) != spec.n_features or prior.shape != (spec.n_classes,):
            raise ValueError("model shape does not match spec")
        for f, t in zip(spec.features, theta):
            if t.shape != (spec.n_classes, f.arity):
                raise ValueError(f"theta block for feature {f.id} has shape {t.shape}")
            if not np.allclose(t.sum(axis=1), 1.0, atol=1e-12):
                raise ValueError("conditional rows must sum to 1")
        if not math.isclose(prior.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("prior must sum to 1")
        self.theta = tuple(_frozen(t.copy()) for t in theta)
        self.prior = _frozen(prior.copy())
        with np.errstate(divide="ignore"):
            self.log_theta = tuple(_frozen(np.log(t)) for t in self.theta)
            self.log_prior = _frozen(np.log(self.prior))


def snapshot_classifier(belief: BeliefState) -> NBClassifier:
    """Deploy the classifier induced by a belief state.

    Conditionals are Dirichlet posterior means; the prior is the raw label
    frequency of the pool (no smoothing, labels are fully known).
    """
    total = int(belief.class_counts.sum())
    if total == 0:
        raise EmptyPriorError("empty prior: no class counts recorded")
    if np.any(belief.class_counts == 0):
        missing = [belief.spec.class_labels[j] for j in np.flatnonzero(belief.class_counts == 0)]
        raise ValueError(f"class label(s) absent from the pool: {missing}")
    theta = [a / a.sum(axis=1, keepdims=True) for a in belief.alpha]
    prior = belief.class_counts / total
    return NBClassifier(belief.spec, theta, prior)


def log_joint(model: NBClassifier, x) -> np.ndarray:
    """log p(y) + sum_i log p(x_i | y) for one fully observed vector, shape (C,)."""
    x = np.asarray(x, dtype=int)
    out = model.log_prior.copy()
    for i in range(model.spec.n_features):
        out += model.log_theta[i][:, x[i]]
    return out


def log_joint_batch(model: NBClassifier, X: np.ndarray) -> np.ndarray:
    """Row-wise log joint scores, shape (N, C)."""
    X = np.asarray(X, dtype=int)
    out = np.tile(model.log_prior, (X.shape[0], 1))
    for i in range(model.spec.n_features):
        out += model.log_theta[i][:, X[:, i]].T
    return out


def _normalize_log(scores: np.ndarray) -> np.ndarray:
    # max-subtraction before exponentiating; long products underflow otherwise
    m = scores.max(axis=-1, keepdims=True)
    p = np.exp(scores - np.where(np.isfinite(m), m, 0.0))
    return p / p.sum(axis=-1, keepdims=True)


def class_posterior(model: NBClassifier, x) -> np.ndarray:
    """P(y | x) for a fully observed vector, computed in log space."""
    return _normalize_log(log_joint(model, x))


def classify(model: NBClassifier, x) -> int:
    """argmax_y P(y | x); ties break toward the lowest class index."""
    return int(np.argmax(log_joint(model, x)))


def classify_batch(model: NBClassifier, X: np.ndarray) -> np.ndarray:
    return np.argmax(log_joint_batch(model, X), axis=1)


def _inv_cdf_rows(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    # cdf_rows: (..., r) cumulative probabilities, u: (...,) uniforms.
    # Counting cdf[k] <= u over k < r-1 clips to the last category by construction.
    return (u[..., None] >= cdf_rows[..., :-1]).sum(axis=-1)


def sample_instances(model: NBClassifier, n: int, rng: np.random.Generator):
    """Draw n iid (label, feature vector) pairs from the model's joint.

    Uniform draws are consumed in a fixed order (labels first, then features
    in index order) so that evaluations sharing a seed share their draws.
    """
    prior_cdf = np.cumsum(model.prior)
    labels = _inv_cdf_rows(prior_cdf[None, :].repeat(n, axis=0), rng.random(n))
    X = np.empty((n, model.spec.n_features), dtype=np.int64)
    for i in range(model.spec.n_features):
        cdf = np.cumsum(model.theta[i], axis=1)
        X[:, i] = _inv_cdf_rows(cdf[labels], rng.random(n))
    return labels, X


def sample_instance(model: NBClassifier, rng: np.random.Generator):
    labels, X = sample_instances(model, 1, rng)
    return int(labels[0]), X[0]


def allocation_outcome_log_prob(belief: BeliefState, action: Action, counts) -> float:
    """Log-probability of one outcome-count vector for repeated purchases of `action`.

    Chaining the predictive probabilities of the individual purchases gives a
    product of Gamma-function ratios that depends only on the counts; the
    multinomial coefficient then accounts for every purchase order reaching
    the same hyperparameter state, so the distribution over reachable states
    sums to one. Evaluated with log-gamma: counts in the hundreds overflow
    direct Gamma.
    """
    counts = np.asarray(counts, dtype=float)
    row = belief.alpha_row(action)
    if counts.shape != row.shape or np.any(counts < 0):
        raise ValueError("counts must be a nonnegative vector of length arity")
    m = counts.sum()
    log_coeff = gammaln(m + 1.0) - gammaln(counts + 1.0).sum()
    total = row.sum()
    log_chain = (
        gammaln(total) - gammaln(total + m)
        + (gammaln(row + counts) - gammaln(row)).sum()
    )
    return float(log_coeff + log_chain)


def allocation_outcome_prob(belief: BeliefState, action: Action, counts) -> float:
    return math.exp(allocation_outcome_log_prob(belief, action, counts))


def allocation_outcome_log_probs(belief: BeliefState, action: Action, counts_matrix: np.ndarray) -> np.ndarray:
    """Vectorized `allocation_outcome_log_prob` over rows of a counts matrix."""
    counts = np.asarray(counts_matrix, dtype=float)
    row = belief.alpha_row(action)
    m = counts.sum(axis=1)
    log_coeff = gammaln(m + 1.0) - gammaln(counts + 1.0).sum(axis=1)
    return log_coeff + ordered_sequence_log_probs(belief, action, counts_matrix)


def ordered_sequence_log_probs(belief: BeliefState, action: Action, counts_matrix: np.ndarray) -> np.ndarray:
    """Log-probability of ONE specific purchase order producing each count vector.

    By exchangeability this is the same for every order with the same counts;
    multiplying by the count vector's multinomial coefficient gives the full
    outcome probability.
    """
    counts = np.asarray(counts_matrix, dtype=float)
    row = belief.alpha_row(action)
    m = counts.sum(axis=1)
    total = row.sum()
    return (
        gammaln(total) - gammaln(total + m)
        + (gammaln(row[None, :] + counts) - gammaln(row)[None, :]).sum(axis=1)
    )
