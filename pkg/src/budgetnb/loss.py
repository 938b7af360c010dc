"""Loss functions over a Naive Bayes model: GINI, entropy, and 0/1 error.

GINI and entropy come in an exact variant (enumerating every joint feature
configuration, feasible only for small models) and an unbiased Monte-Carlo
variant that samples configurations from the model's own joint. The 0/1
family has both the validation-set error used for reporting and the
model-expected misclassification rate usable as a decision loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    BeliefState,
    NBClassifier,
    ProblemSpec,
    Action,
    _inv_cdf_rows,
    _normalize_log,
    classify_batch,
    log_joint_batch,
    sample_instances,
    snapshot_classifier,
)

GINI = "gini"
ENTROPY = "entropy"
ZERO_ONE = "zero_one"
_KINDS = (GINI, ENTROPY, ZERO_ONE)

DEFAULT_MC_SAMPLES = 1000
DEFAULT_EXACT_THRESHOLD = 4096


class ExactLossInfeasible(RuntimeError):
    """Joint configuration count exceeds the exact-evaluation threshold; use Monte Carlo."""


@dataclass(frozen=True)
class LossKind:
    kind: str = GINI
    mc_samples: int = DEFAULT_MC_SAMPLES
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {_KINDS}")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        if self.exact_threshold < 1:
            raise ValueError("exact_threshold must be >= 1")


@dataclass(frozen=True)
class ValidationSet:
    """Fully observed held-out instances: labels (N,) and values (N, n_features)."""

    labels: np.ndarray
    values: np.ndarray
    spec: ProblemSpec = field(repr=False, default=None)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.int64)
        if labels.ndim != 1 or len(labels) == 0:
            raise ValueError("validation set must be nonempty")
        if values.shape != (len(labels), self.spec.n_features if self.spec else values.shape[1]):
            raise ValueError("values must be (n_instances, n_features)")
        if self.spec is not None:
            if np.any(labels < 0) or np.any(labels >= self.spec.n_classes):
                raise ValueError("validation label out of range")
            for i, f in enumerate(self.spec.features):
                if np.any(values[:, i] < 0) or np.any(values[:, i] >= f.arity):
                    raise ValueError(f"validation value out of range for feature {f.name!r}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.labels)


# ---------------------------------------------------------------------------
# per-sample loss terms, applied to posterior vectors P(.|x) along the last axis

def _term(kind: str, posterior: np.ndarray) -> np.ndarray:
    if kind == GINI:
        return 1.0 - (posterior ** 2).sum(axis=-1)
    if kind == ENTROPY:
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.where(posterior > 0, np.log2(np.where(posterior > 0, posterior, 1.0)), 0.0)
        return -(posterior * lg).sum(axis=-1)
    if kind == ZERO_ONE:
        return 1.0 - posterior.max(axis=-1)
    raise ValueError(kind)


# ---------------------------------------------------------------------------
# exact evaluation over the full joint

def _class_joint(model: NBClassifier) -> np.ndarray:
    """P(y, x) for every joint configuration, shape (C, prod_i r_i)."""
    joint = model.prior[:, None].copy()
    for t in model.theta:
        joint = (joint[:, :, None] * t[:, None, :]).reshape(model.spec.n_classes, -1)
    return joint


def _exact_loss(model: NBClassifier, kind: str, max_configs: int) -> float:
    n_configs = model.spec.joint_config_count()
    if n_configs > max_configs:
        raise ExactLossInfeasible(
            f"{n_configs} joint configurations exceed the exact threshold "
            f"{max_configs}; use Monte Carlo"
        )
    joint = _class_joint(model)
    px = joint.sum(axis=0)
    if kind == GINI:
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(px > 0, (joint ** 2).sum(axis=0) / np.where(px > 0, px, 1.0), 0.0)
        return float(px.sum() - frac.sum())
    if kind == ZERO_ONE:
        return float(px.sum() - joint.max(axis=0).sum())
    if kind == ENTROPY:
        with np.errstate(divide="ignore", invalid="ignore"):
            lg_joint = np.where(joint > 0, np.log2(np.where(joint > 0, joint, 1.0)), 0.0)
            lg_px = np.where(px > 0, np.log2(np.where(px > 0, px, 1.0)), 0.0)
        return float((px * lg_px).sum() - (joint * lg_joint).sum())
    raise ValueError(kind)


def gini_exact(model: NBClassifier, max_configs: int = DEFAULT_EXACT_THRESHOLD) -> float:
    """Eq-exact GINI loss: sum_x P(x) sum_y P(y|x)(1 - P(y|x)) over every configuration."""
    return _exact_loss(model, GINI, max_configs)


def entropy_exact(model: NBClassifier, max_configs: int = DEFAULT_EXACT_THRESHOLD) -> float:
    """Exact conditional entropy (bits) of the class given the features, under the model."""
    return _exact_loss(model, ENTROPY, max_configs)


def zero_one_exact(model: NBClassifier, max_configs: int = DEFAULT_EXACT_THRESHOLD) -> float:
    """Model-expected misclassification rate sum_x P(x)(1 - max_y P(y|x))."""
    return _exact_loss(model, ZERO_ONE, max_configs)


# ---------------------------------------------------------------------------
# Monte-Carlo evaluation: x drawn from the model's own joint (proposal = target)

def _mc_loss(model: NBClassifier, kind: str, rng: np.random.Generator, n_samples: int) -> float:
    _, X = sample_instances(model, n_samples, rng)
    posterior = _normalize_log(log_joint_batch(model, X))
    return float(_term(kind, posterior).mean())


def gini_mc(model: NBClassifier, rng: np.random.Generator, n_samples: int = DEFAULT_MC_SAMPLES) -> float:
    """Unbiased Monte-Carlo estimate of gini_exact."""
    return _mc_loss(model, GINI, rng, n_samples)


def entropy_mc(model: NBClassifier, rng: np.random.Generator, n_samples: int = DEFAULT_MC_SAMPLES) -> float:
    return _mc_loss(model, ENTROPY, rng, n_samples)


def zero_one_mc(model: NBClassifier, rng: np.random.Generator, n_samples: int = DEFAULT_MC_SAMPLES) -> float:
    return _mc_loss(model, ZERO_ONE, rng, n_samples)


def zero_one_error(model: NBClassifier, validation: ValidationSet) -> float:
    """Misclassification rate on a held-out, fully observed validation set."""
    return float(np.mean(classify_batch(model, validation.values) != validation.labels))


# ---------------------------------------------------------------------------
# evaluator used by purchase policies

class LossEvaluator:
    """Dispatches between exact and Monte-Carlo loss evaluation for one problem.

    Exact evaluation is used whenever the problem's joint configuration count
    fits under the configured threshold; otherwise losses are estimated with
    `mc_samples` draws from the model. `child_losses` scores every
    hypothetical posterior reachable by adding outcome counts to one action's
    row, sharing the underlying uniform draws across children (common random
    numbers) so that candidate comparisons are not dominated by sampling
    noise.
    """

    def __init__(self, kind: LossKind, spec: ProblemSpec):
        self.kind = kind
        self.spec = spec
        self.exact = spec.joint_config_count() <= kind.exact_threshold
        # one decision scores many candidates against the same belief and seed;
        # the shared parent draws are cached for that window
        self._parent_key = None
        self._parent_draws = None

    def value(self, model: NBClassifier, seed: int | None = None) -> float:
        if self.exact:
            return _exact_loss(model, self.kind.kind, self.kind.exact_threshold)
        if seed is None:
            raise ValueError("Monte-Carlo loss evaluation needs a seed")
        return _mc_loss(model, self.kind.kind, np.random.default_rng(seed), self.kind.mc_samples)

    def child_losses(self, belief: BeliefState, action: Action, counts_matrix,
                     seed: int | None = None, crn: bool = True) -> np.ndarray:
        counts_matrix = np.asarray(counts_matrix, dtype=np.int64)
        if counts_matrix.ndim != 2:
            raise ValueError("counts_matrix must be 2-D (children x arity)")
        if self.exact:
            return self._child_losses_exact(belief, action, counts_matrix)
        if seed is None:
            raise ValueError("Monte-Carlo loss evaluation needs a seed")
        if crn:
            return self._child_losses_mc(belief, action, counts_matrix, seed)
        # independent draws per child: estimator noise stays in the comparison
        child_seeds = np.random.SeedSequence(seed).generate_state(len(counts_matrix))
        return np.array([
            self._child_losses_mc(belief, action, counts_matrix[k:k + 1], int(child_seeds[k]))[0]
            for k in range(len(counts_matrix))
        ])

    # The batched paths below are algebraically identical to snapshotting each
    # child belief and calling the scalar evaluators; tests assert this.

    def _child_losses_exact(self, belief: BeliefState, action: Action, counts_matrix: np.ndarray) -> np.ndarray:
        model = snapshot_classifier(belief)
        i, j = action.feature, action.label
        C = self.spec.n_classes
        r = self.spec.features[i].arity

        # class joint over every feature except i (prior included)
        other = model.prior[:, None].copy()
        for ii, t in enumerate(model.theta):
            if ii != i:
                other = (other[:, :, None] * t[:, None, :]).reshape(C, -1)

        row = belief.alpha_row(action)
        new_rows = row[None, :] + counts_matrix
        theta_child = new_rows / new_rows.sum(axis=1, keepdims=True)          # (K, r)

        # joint contributions of feature i: fixed rows for classes != j
        fixed = other[:, :, None] * model.theta[i][:, None, :]                # (C, M, r)
        fixed_sum = fixed.sum(axis=0) - fixed[j]                              # (M, r), classes != j
        child_j = other[j][None, :, None] * theta_child[:, None, :]          # (K, M, r)
        S = fixed_sum[None, :, :] + child_j

        kind = self.kind.kind
        if kind == GINI:
            fixed_sq = (fixed ** 2).sum(axis=0) - fixed[j] ** 2               # (M, r)
            num = fixed_sq[None, :, :] + child_j ** 2
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.where(S > 0, num / np.where(S > 0, S, 1.0), 0.0)
            return S.sum(axis=(1, 2)) - frac.sum(axis=(1, 2))
        if kind == ZERO_ONE:
            fixed_max = np.delete(fixed, j, axis=0).max(axis=0) if C > 1 else np.zeros_like(fixed[0])
            mx = np.maximum(fixed_max[None, :, :], child_j)
            return S.sum(axis=(1, 2)) - mx.sum(axis=(1, 2))
        if kind == ENTROPY:
            def plogp(a):
                with np.errstate(divide="ignore", invalid="ignore"):
                    lg = np.where(a > 0, np.log2(np.where(a > 0, a, 1.0)), 0.0)
                return a * lg
            fixed_plogp = plogp(fixed).sum(axis=0) - plogp(fixed[j])          # (M, r)
            return (
                plogp(S).sum(axis=(1, 2))
                - fixed_plogp.sum()
                - plogp(child_j).sum(axis=(1, 2))
            )
        raise ValueError(kind)

    def _parent_samples(self, belief: BeliefState, seed: int):
        key = (id(belief), seed)
        if self._parent_key == key and self._parent_draws[0] is belief:
            return self._parent_draws[1]
        model = snapshot_classifier(belief)
        spec = self.spec
        m = self.kind.mc_samples
        rng = np.random.default_rng(seed)

        # consume uniforms exactly like sample_instances on each child model
        u_label = rng.random(m)
        U = [rng.random(m) for _ in range(spec.n_features)]
        prior_cdf = np.cumsum(model.prior)
        labels = _inv_cdf_rows(prior_cdf[None, :].repeat(m, axis=0), u_label)

        contrib = []
        X = np.empty((m, spec.n_features), dtype=np.int64)
        for ii in range(spec.n_features):
            cdf = np.cumsum(model.theta[ii], axis=1)
            X[:, ii] = _inv_cdf_rows(cdf[labels], U[ii])
            contrib.append(model.log_theta[ii][:, X[:, ii]].T)                # (m, C)
        total = model.log_prior[None, :] + sum(contrib)
        draws = (model, U, labels, X, contrib, total)
        self._parent_key = key
        self._parent_draws = (belief, draws)
        return draws

    def _child_losses_mc(self, belief: BeliefState, action: Action, counts_matrix: np.ndarray, seed: int) -> np.ndarray:
        model, U, labels, X, contrib, total = self._parent_samples(belief, seed)
        i, j = action.feature, action.label
        partial = total - contrib[i]                                          # (m, C)

        row = belief.alpha_row(action)
        new_rows = row[None, :] + counts_matrix
        theta_child = new_rows / new_rows.sum(axis=1, keepdims=True)          # (K, r)
        log_theta_child = np.log(theta_child)
        K = len(counts_matrix)

        # label-j samples redraw their feature-i value from the child row,
        # reusing the same uniforms; everyone else keeps the parent draw
        v_all = np.tile(X[:, i], (K, 1))                                      # (K, m)
        mask = labels == j
        if mask.any():
            cdf_child = np.cumsum(theta_child, axis=1)                        # (K, r)
            u = U[i][mask]
            v_all[:, mask] = (u[None, :, None] >= cdf_child[:, None, :-1]).sum(axis=-1)

        feat = model.log_theta[i][:, v_all].transpose(1, 2, 0).copy()         # (K, m, C)
        feat[:, :, j] = np.take_along_axis(log_theta_child, v_all, axis=1)
        posterior = _normalize_log(partial[None, :, :] + feat)
        return _term(self.kind.kind, posterior).mean(axis=1)
