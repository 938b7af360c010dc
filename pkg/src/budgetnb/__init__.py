"""Budgeted feature-value purchasing for Naive Bayes learners."""

from .model import (
    Action,
    BeliefState,
    EmptyPriorError,
    FeatureSpec,
    NBClassifier,
    ProblemSpec,
    allocation_outcome_prob,
    class_posterior,
    classify,
    sample_instance,
    snapshot_classifier,
)
from .loss import (
    LossEvaluator,
    LossKind,
    ValidationSet,
    entropy_exact,
    entropy_mc,
    gini_exact,
    gini_mc,
    zero_one_error,
)
from .policies import (
    Allocation,
    Availability,
    BudgetLedger,
    Policy,
    PolicyConfig,
    make_policy,
)
from .pool import (
    CsvSchema,
    InstancePool,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    split,
)
from .oracle import OracleLimits, optimal_value, policy_value
from .harness import (
    ErrorCurve,
    ExperimentConfig,
    ExperimentResult,
    config_from_json,
    emit_curves,
    run_experiment,
    run_trial,
)
