import json
from pathlib import Path

import numpy as np
import pytest

from budgetnb.harness import (
    AGGREGATE_HEADER,
    BASELINE_NAME,
    PURCHASES_HEADER,
    RAW_HEADER,
    ConfigError,
    CsvSource,
    ErrorCurve,
    ExperimentConfig,
    _build_trial_pool,
    config_from_json,
    emit_curves,
    run_experiment,
    run_trial,
)
from budgetnb.loss import LossKind
from budgetnb.policies import PolicyConfig
from budgetnb.pool import CsvSchema, SyntheticSpec

FIXTURES = Path(__file__).parent / "fixtures"


def toy_config(**overrides):
    base = dict(
        source=SyntheticSpec(n_features=3, n_instances=120),
        policies=(
            PolicyConfig("round_robin"),
            PolicyConfig("biased_robin"),
            PolicyConfig("sfl", max_depth=4),
        ),
        budget=12,
        trials=2,
        base_seed=7,
        validation_fraction=0.2,
        record_every=1,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# trials


def test_identical_seeds_give_identical_trajectories():
    config = toy_config()
    a = run_trial(config, 1)
    b = run_trial(config, 1)
    for name in a.traces:
        assert np.array_equal(a.traces[name].errors, b.traces[name].errors)
        assert np.array_equal(a.traces[name].losses, b.traces[name].losses)
        assert np.array_equal(a.traces[name].feature_purchases, b.traces[name].feature_purchases)
    assert a.baseline_error == b.baseline_error


def test_policies_share_trial_pool_and_prior():
    config = toy_config()
    t = run_trial(config, 0)
    first_errors = {name: tr.errors[0] for name, tr in t.traces.items()}
    assert len(set(first_errors.values())) == 1  # same belief, same validation
    p1, _ = _build_trial_pool(config, 3, None)
    p2, _ = _build_trial_pool(config, 3, None)
    assert np.array_equal(p1.labels, p2.labels)
    assert np.array_equal(p1._values, p2._values)


def test_budget_above_pool_capacity_buys_everything():
    config = toy_config(
        source=SyntheticSpec(n_features=2, n_instances=20),
        budget=40,  # pool capacity is 16 train rows x 2 features = 32 cells
        policies=(PolicyConfig("round_robin"), PolicyConfig("uniform_expenditure")),
        trials=1,
    )
    t = run_trial(config, 0)
    purchases = {name: tr.purchases for name, tr in t.traces.items()}
    assert purchases["round_robin"] == purchases["uniform_expenditure"] == 32
    fp = t.traces["round_robin"].feature_purchases
    assert np.array_equal(fp, t.traces["uniform_expenditure"].feature_purchases)


def test_ledger_accounting_uniform_costs():
    config = toy_config(trials=1)
    t = run_trial(config, 0)
    for tr in t.traces.values():
        assert tr.spent == tr.purchases  # unit costs
        assert tr.spent <= config.budget
        assert tr.feature_purchases.sum() == tr.purchases


def test_round_robin_error_decreases_on_discriminative_regime():
    config = ExperimentConfig(
        source=SyntheticSpec(n_features=10, regime="one_discriminative", n_instances=1000),
        policies=(PolicyConfig("round_robin"),),
        budget=80,
        trials=8,
        base_seed=11,
    )
    result = run_experiment(config)
    curve = result.curve.policies["round_robin"]
    assert curve.mean_error[0] > 0.4  # uninformed start
    assert curve.mean_error[-1] < curve.mean_error[0] - 0.15
    assert curve.mean_error[-1] >= result.curve.baseline_mean - 0.02


# ---------------------------------------------------------------------------
# aggregation and emission


def test_single_trial_reports_zero_stderr():
    config = toy_config(trials=1)
    result = run_experiment(config)
    for pc in result.curve.policies.values():
        assert np.all(pc.stderr == 0.0)
    assert result.curve.baseline_stderr == 0.0


def test_aggregate_row_count_matches_grid(tmp_path):
    config = toy_config()
    result = run_experiment(config)
    paths = emit_curves(result, tmp_path)
    lines = paths["aggregate"].read_text().splitlines()
    policy_rows = [l for l in lines[1:] if not l.startswith(BASELINE_NAME)]
    assert len(policy_rows) == 3 * (config.budget // config.record_every + 1)


def test_emitted_headers_are_stable(tmp_path):
    config = toy_config(trials=1)
    result = run_experiment(config)
    paths = emit_curves(result, tmp_path)
    assert paths["aggregate"].read_text().splitlines()[0] == AGGREGATE_HEADER == "policy,spend,mean_error,stderr,mean_loss"
    assert paths["raw"].read_text().splitlines()[0] == RAW_HEADER == "policy,trial,purchase_index,spend,error"
    assert paths["purchases"].read_text().splitlines()[0] == PURCHASES_HEADER == "policy,trial,feature,purchases"


def test_aggregate_csv_round_trips_exactly(tmp_path):
    config = toy_config()
    result = run_experiment(config)
    text = result.curve.to_csv_text()
    back = ErrorCurve.from_csv_text(text)
    assert back.baseline_mean == result.curve.baseline_mean
    assert back.baseline_stderr == result.curve.baseline_stderr
    for name, pc in result.curve.policies.items():
        bpc = back.policies[name]
        assert np.array_equal(bpc.spends, pc.spends)
        assert np.array_equal(bpc.mean_error, pc.mean_error)
        assert np.array_equal(bpc.stderr, pc.stderr)
        assert np.array_equal(bpc.mean_loss, pc.mean_loss)
    assert back.to_csv_text() == text


def test_baseline_constant_across_spend(tmp_path):
    config = toy_config(trials=1)
    result = run_experiment(config)
    paths = emit_curves(result, tmp_path)
    rows = [
        l.split(",") for l in paths["aggregate"].read_text().splitlines()[1:]
        if l.startswith(BASELINE_NAME)
    ]
    assert len(rows) == config.budget + 1
    assert len({r[2] for r in rows}) == 1


def test_aggregate_mean_recomputable_from_raw_csv(tmp_path):
    config = toy_config(trials=3)
    result = run_experiment(config)
    paths = emit_curves(result, tmp_path)
    raw = [l.split(",") for l in paths["raw"].read_text().splitlines()[1:]]
    by_policy_point: dict = {}
    for name, trial, idx, spend, err in raw:
        by_policy_point.setdefault((name, int(idx)), []).append(float(err))
    for (name, idx), errs in by_policy_point.items():
        point = idx // config.record_every
        agg = result.curve.policies[name].mean_error[point]
        assert agg == pytest.approx(np.mean(errs), abs=1e-15)


def test_parallel_and_serial_runs_are_byte_identical(tmp_path):
    config = toy_config(trials=4)
    r1 = run_experiment(config, threads=1)
    r2 = run_experiment(config, threads=2)
    d1, d2 = tmp_path / "a", tmp_path / "b"
    p1 = emit_curves(r1, d1)
    p2 = emit_curves(r2, d2)
    for key in p1:
        assert p1[key].read_bytes() == p2[key].read_bytes()


def test_golden_run_regression():
    # frozen snapshot of a small discriminative-regime run; any change to seed
    # discipline, policy mechanics, or aggregation shows up here
    config = ExperimentConfig(
        source=SyntheticSpec(n_features=4, regime="one_discriminative", n_instances=200),
        policies=(PolicyConfig("round_robin"), PolicyConfig("biased_robin")),
        budget=10,
        trials=3,
        base_seed=5,
    )
    got = run_experiment(config).curve.to_csv_text()
    golden = (FIXTURES / "golden_small_aggregate.csv").read_text()
    assert got == golden


# ---------------------------------------------------------------------------
# config files


def test_config_json_round_trip(tmp_path):
    doc = {
        "source": {"synthetic": {"n_features": 5, "regime": "one_discriminative",
                                  "n_instances": 300}},
        "policies": [
            {"kind": "round_robin"},
            {"kind": "sfl", "max_depth": 6,
             "loss": {"kind": "gini", "mc_samples": 500, "exact_threshold": 1024}},
        ],
        "budget": 20,
        "trials": 4,
        "base_seed": 3,
    }
    p = tmp_path / "exp.json"
    p.write_text(json.dumps(doc))
    config = config_from_json(p)
    assert isinstance(config.source, SyntheticSpec)
    assert config.source.n_features == 5
    assert config.policies[1].max_depth == 6
    assert config.policies[1].loss.mc_samples == 500
    assert config.trials == 4
    assert config.validation_fraction == 0.2  # default


def test_config_csv_source_resolves_relative_paths(tmp_path):
    csv = tmp_path / "d.csv"
    csv.write_text("class,a\nx,0\ny,1\n")
    doc = {
        "source": {"csv": {"path": "d.csv", "schema": {"class_column": "class"}}},
        "policies": [{"kind": "round_robin"}],
        "budget": 2,
        "trials": 1,
    }
    p = tmp_path / "exp.json"
    p.write_text(json.dumps(doc))
    config = config_from_json(p)
    assert isinstance(config.source, CsvSource)
    assert Path(config.source.path) == csv


def test_config_rejects_unknown_fields(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"source": {}, "budget": 1, "bogus": 2}))
    with pytest.raises(ConfigError, match="bogus"):
        config_from_json(p)
    p.write_text(json.dumps({"source": {"synthetic": {"n_features": 2}},
                             "policies": [{"kind": "nope"}], "budget": 1}))
    with pytest.raises(ConfigError):
        config_from_json(p)


def test_config_rejects_duplicate_policies():
    with pytest.raises(ConfigError, match="duplicate"):
        toy_config(policies=(PolicyConfig("greedy"), PolicyConfig("greedy")))
