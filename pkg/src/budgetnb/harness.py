"""Experiment orchestration: trials, error curves, and CSV emission.

A trial builds one pool and split, then runs every configured policy from the
same pool contents and the same uniform prior, recording validation 0/1 error
and a decision-loss estimate on a purchase-count grid. Trials aggregate into
per-policy mean curves with standard errors, plus the constant
complete-training-data baseline.

Seed discipline: the trial seed is base_seed XOR trial_index; pool building,
splitting, per-policy purchase draws, per-policy decision randomness, and
per-policy recorded-loss estimates each get their own child stream, so no
policy's draws can perturb another's.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .loss import LossKind, ValidationSet, zero_one_error
from .model import BeliefState, NBClassifier, snapshot_classifier
from .policies import Availability, BudgetLedger, PolicyConfig, make_policy
from .pool import CsvSchema, InstancePool, SyntheticSpec, generate_synthetic, load_csv, split

AGGREGATE_HEADER = "policy,spend,mean_error,stderr,mean_loss"
RAW_HEADER = "policy,trial,purchase_index,spend,error"
PURCHASES_HEADER = "policy,trial,feature,purchases"
BASELINE_NAME = "complete_data"

THREADS_ENV = "BUDGETNB_THREADS"

# seed stream purposes
_POOL, _SPLIT, _PURCHASE, _RECORD_LOSS, _POLICY = range(5)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CsvSource:
    path: str
    schema: CsvSchema


@dataclass(frozen=True)
class ExperimentConfig:
    source: SyntheticSpec | CsvSource
    policies: tuple[PolicyConfig, ...]
    budget: int
    trials: int = 50
    base_seed: int = 0
    validation_fraction: float = 0.2
    record_every: int = 1

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate policy names in {names}")

    @property
    def n_points(self) -> int:
        return self.budget // self.record_every + 1


# ---------------------------------------------------------------------------
# config file round trip


def _loss_from_dict(raw: dict) -> LossKind:
    return LossKind(
        kind=raw.get("kind", "gini"),
        mc_samples=int(raw.get("mc_samples", 1000)),
        exact_threshold=int(raw.get("exact_threshold", 4096)),
    )


def _policy_from_dict(raw: dict) -> PolicyConfig:
    known = {"kind", "loss", "max_depth", "sfl_exact_states", "sfl_state_samples",
             "sfl_weighting", "crn_scoring"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown policy fields: {sorted(unknown)}")
    kwargs = {"kind": raw["kind"]}
    if "loss" in raw:
        kwargs["loss"] = _loss_from_dict(raw["loss"])
    for k in ("max_depth", "sfl_exact_states", "sfl_state_samples"):
        if k in raw:
            kwargs[k] = int(raw[k])
    if "sfl_weighting" in raw:
        kwargs["sfl_weighting"] = str(raw["sfl_weighting"])
    if "crn_scoring" in raw:
        kwargs["crn_scoring"] = bool(raw["crn_scoring"])
    try:
        return PolicyConfig(**kwargs)
    except (ValueError, KeyError) as err:
        raise ConfigError(str(err)) from err


def config_from_json(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    known = {
        "source", "policies", "budget", "trials", "base_seed",
        "validation_fraction", "record_every",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    src = raw.get("source", {})
    try:
        if "synthetic" in src:
            source = SyntheticSpec(**src["synthetic"])
        elif "csv" in src:
            entry = src["csv"]
            csv_path = Path(entry["path"])
            if not csv_path.is_absolute():
                csv_path = path.parent / csv_path
            if "schema_path" in entry:
                schema_path = Path(entry["schema_path"])
                if not schema_path.is_absolute():
                    schema_path = path.parent / schema_path
                schema = CsvSchema.from_json(schema_path)
            else:
                s = entry.get("schema", {})
                labels = s.get("class_labels")
                schema = CsvSchema(
                    class_column=s["class_column"],
                    missing_token=s.get("missing_token", "?"),
                    costs={k: int(v) for k, v in s.get("costs", {}).items()},
                    class_labels=tuple(labels) if labels else None,
                )
            source = CsvSource(path=str(csv_path), schema=schema)
        else:
            raise ConfigError('config needs source.synthetic or source.csv')
        policies = tuple(_policy_from_dict(p) for p in raw.get("policies", []))
        return ExperimentConfig(
            source=source,
            policies=policies,
            budget=int(raw["budget"]),
            trials=int(raw.get("trials", 50)),
            base_seed=int(raw.get("base_seed", 0)),
            validation_fraction=float(raw.get("validation_fraction", 0.2)),
            record_every=int(raw.get("record_every", 1)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"bad config {path}: {err}") from err


# ---------------------------------------------------------------------------
# trial execution


@dataclass
class PolicyTrace:
    name: str
    spends: np.ndarray          # cumulative spend at each grid point
    errors: np.ndarray          # validation 0/1 error at each grid point
    losses: np.ndarray          # decision-loss estimate at each grid point
    feature_purchases: np.ndarray
    purchases: int
    spent: int


@dataclass
class TrialResult:
    trial: int
    baseline_error: float
    traces: dict = field(default_factory=dict)


class _ValidationScorer:
    """Incrementally maintained validation log-joint: one feature changes per purchase."""

    def __init__(self, model: NBClassifier, validation: ValidationSet):
        self.values = validation.values
        self.labels = validation.labels
        self.contrib = [
            model.log_theta[i][:, self.values[:, i]].T
            for i in range(model.spec.n_features)
        ]
        self.total = model.log_prior[None, :] + sum(self.contrib)

    def update(self, model: NBClassifier, feature: int) -> None:
        fresh = model.log_theta[feature][:, self.values[:, feature]].T
        self.total += fresh - self.contrib[feature]
        self.contrib[feature] = fresh

    def error(self) -> float:
        return float(np.mean(np.argmax(self.total, axis=1) != self.labels))


def _streams(base_seed: int, trial: int):
    trial_seed = (base_seed ^ trial) & 0xFFFFFFFF

    def rng(purpose: int, policy_index: int = 0) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=trial_seed, spawn_key=(purpose, policy_index))
        )

    def seeds(purpose: int, policy_index: int, count: int) -> np.ndarray:
        return np.random.SeedSequence(
            entropy=trial_seed, spawn_key=(purpose, policy_index)
        ).generate_state(count)

    return rng, seeds


def _build_trial_pool(config: ExperimentConfig, trial: int, prototype: InstancePool | None):
    rng, _ = _streams(config.base_seed, trial)
    if isinstance(config.source, SyntheticSpec):
        pool, _ = generate_synthetic(config.source, rng(_POOL))
        balanced = False
    else:
        pool = (prototype if prototype is not None else load_csv(
            config.source.path, config.source.schema)).copy()
        balanced = True
    return split(pool, config.validation_fraction, balanced, rng(_SPLIT))


def baseline_model(train: InstancePool) -> NBClassifier:
    """Complete-training-data model: uniform prior strength 1 plus every cell."""
    counts = train.full_counts()
    alpha = [1.0 + c for c in counts]
    belief = BeliefState(train.spec, alpha, train.class_counts())
    return snapshot_classifier(belief)


def run_trial(config: ExperimentConfig, trial: int,
              prototype: InstancePool | None = None) -> TrialResult:
    train0, validation = _build_trial_pool(config, trial, prototype)
    rng, seeds = _streams(config.base_seed, trial)
    result = TrialResult(
        trial=trial,
        baseline_error=zero_one_error(baseline_model(train0), validation),
    )

    for p_idx, pcfg in enumerate(config.policies):
        pool = train0.copy()
        class_counts = pool.class_counts()
        belief = BeliefState.uniform(pool.spec, class_counts)
        policy_seed = int(seeds(_POLICY, p_idx, 1)[0])
        policy = make_policy(pcfg, pool.spec, seed=policy_seed)
        purchase_rng = rng(_PURCHASE, p_idx)
        record_seeds = seeds(_RECORD_LOSS, p_idx, config.n_points)

        ledger = BudgetLedger(config.budget)
        avail = Availability(pool.availability_grid)
        state = policy.initial_state()
        model = snapshot_classifier(belief)
        scorer = _ValidationScorer(model, validation)
        feature_purchases = np.zeros(pool.spec.n_features, dtype=np.int64)

        n_points = config.n_points
        spends = np.zeros(n_points, dtype=np.int64)
        errors = np.empty(n_points)
        losses = np.empty(n_points)
        errors[0] = scorer.error()
        losses[0] = policy.evaluator.value(model, seed=int(record_seeds[0]))

        purchases = 0
        point = 1
        while True:
            action, state = policy.decide(state, belief, avail, ledger)
            if action is None:
                break
            value = pool.purchase(action, purchase_rng)
            ledger.charge(pool.spec.features[action.feature].cost)
            belief = belief.update(action, value)
            model = snapshot_classifier(belief)
            scorer.update(model, action.feature)
            feature_purchases[action.feature] += 1
            purchases += 1
            if purchases % config.record_every == 0 and point < n_points:
                spends[point] = ledger.spent
                errors[point] = scorer.error()
                losses[point] = policy.evaluator.value(model, seed=int(record_seeds[point]))
                point += 1

        # early stop (pool exhaustion): carry the final observation forward
        while point < n_points:
            spends[point] = ledger.spent
            errors[point] = errors[point - 1]
            losses[point] = losses[point - 1]
            point += 1

        result.traces[pcfg.name] = PolicyTrace(
            name=pcfg.name,
            spends=spends,
            errors=errors,
            losses=losses,
            feature_purchases=feature_purchases,
            purchases=purchases,
            spent=ledger.spent,
        )
    return result


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class PolicyCurve:
    name: str
    spends: np.ndarray
    mean_error: np.ndarray
    stderr: np.ndarray
    mean_loss: np.ndarray


@dataclass
class ErrorCurve:
    policies: dict            # name -> PolicyCurve
    baseline_mean: float
    baseline_stderr: float

    def to_csv_text(self) -> str:
        lines = [AGGREGATE_HEADER]
        grid = None
        for pc in self.policies.values():
            grid = pc.spends if grid is None else grid
            for s, e, se, lo in zip(pc.spends, pc.mean_error, pc.stderr, pc.mean_loss):
                lines.append(
                    f"{pc.name},{float(s)!r},{float(e)!r},{float(se)!r},{float(lo)!r}"
                )
        if grid is None:
            grid = np.array([0.0])
        for s in grid:
            lines.append(
                f"{BASELINE_NAME},{float(s)!r},{float(self.baseline_mean)!r},"
                f"{float(self.baseline_stderr)!r},"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv_text(cls, text: str) -> "ErrorCurve":
        lines = [l for l in text.splitlines() if l]
        if lines[0] != AGGREGATE_HEADER:
            raise ValueError(f"unexpected header {lines[0]!r}")
        rows: dict[str, list] = {}
        baseline = []
        for line in lines[1:]:
            name, s, e, se, lo = line.split(",")
            if name == BASELINE_NAME:
                baseline.append((float(e), float(se)))
            else:
                rows.setdefault(name, []).append((float(s), float(e), float(se), float(lo)))
        policies = {
            name: PolicyCurve(
                name=name,
                spends=np.array([r[0] for r in rs]),
                mean_error=np.array([r[1] for r in rs]),
                stderr=np.array([r[2] for r in rs]),
                mean_loss=np.array([r[3] for r in rs]),
            )
            for name, rs in rows.items()
        }
        bmean, bse = baseline[0] if baseline else (float("nan"), 0.0)
        return cls(policies=policies, baseline_mean=bmean, baseline_stderr=bse)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    curve: ErrorCurve
    trials: list

    def mean_feature_purchases(self, policy_name: str) -> np.ndarray:
        mats = [t.traces[policy_name].feature_purchases for t in self.trials]
        return np.mean(mats, axis=0)

    def errors_at(self, policy_name: str, point: int) -> np.ndarray:
        return np.array([t.traces[policy_name].errors[point] for t in self.trials])


def _sem(matrix: np.ndarray) -> np.ndarray:
    if matrix.shape[0] < 2:
        return np.zeros(matrix.shape[1])
    return matrix.std(axis=0, ddof=1) / np.sqrt(matrix.shape[0])


def aggregate(config: ExperimentConfig, trials: list) -> ErrorCurve:
    policies = {}
    for pcfg in config.policies:
        errs = np.vstack([t.traces[pcfg.name].errors for t in trials])
        losses = np.vstack([t.traces[pcfg.name].losses for t in trials])
        spends = np.vstack([t.traces[pcfg.name].spends for t in trials]).mean(axis=0)
        policies[pcfg.name] = PolicyCurve(
            name=pcfg.name,
            spends=spends,
            mean_error=errs.mean(axis=0),
            stderr=_sem(errs),
            mean_loss=losses.mean(axis=0),
        )
    base = np.array([t.baseline_error for t in trials])
    bse = float(base.std(ddof=1) / np.sqrt(len(base))) if len(base) > 1 else 0.0
    return ErrorCurve(policies=policies, baseline_mean=float(base.mean()), baseline_stderr=bse)


def _trial_task(args):
    config, trial, prototype = args
    return run_trial(config, trial, prototype)


def resolve_threads(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, threads)
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return 1


def run_experiment(config: ExperimentConfig, threads: int | None = None,
                   progress: bool = False) -> ExperimentResult:
    prototype = None
    if isinstance(config.source, CsvSource):
        prototype = load_csv(config.source.path, config.source.schema)
    workers = resolve_threads(threads)
    tasks = [(config, t, prototype) for t in range(config.trials)]
    if workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_trial_task, tasks))
    else:
        trials = []
        for task in tasks:
            trials.append(_trial_task(task))
            if progress:
                print(f"  trial {task[1] + 1}/{config.trials} done", flush=True)
    trials.sort(key=lambda t: t.trial)
    return ExperimentResult(config=config, curve=aggregate(config, trials), trials=trials)


# ---------------------------------------------------------------------------
# emission


def emit_curves(result: ExperimentResult, out_dir) -> dict:
    """Write aggregate, raw, and per-feature purchase CSVs; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    aggregate_path = out_dir / "aggregate.csv"
    aggregate_path.write_text(result.curve.to_csv_text())

    raw_lines = [RAW_HEADER]
    for t in result.trials:
        for pcfg in result.config.policies:
            trace = t.traces[pcfg.name]
            for point, (s, e) in enumerate(zip(trace.spends, trace.errors)):
                idx = point * result.config.record_every
                raw_lines.append(f"{trace.name},{t.trial},{idx},{int(s)},{float(e)!r}")
    raw_path = out_dir / "raw.csv"
    raw_path.write_text("\n".join(raw_lines) + "\n")

    buy_lines = [PURCHASES_HEADER]
    for t in result.trials:
        for pcfg in result.config.policies:
            trace = t.traces[pcfg.name]
            for i, n in enumerate(trace.feature_purchases):
                buy_lines.append(f"{trace.name},{t.trial},{i},{int(n)}")
    purchases_path = out_dir / "purchases.csv"
    purchases_path.write_text("\n".join(buy_lines) + "\n")

    return {"aggregate": aggregate_path, "raw": raw_path, "purchases": purchases_path}
