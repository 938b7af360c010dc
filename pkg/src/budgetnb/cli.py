"""Command line entry points: synth, run, oracle, baseline."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .harness import (
    ConfigError,
    baseline_model,
    _build_trial_pool,
    config_from_json,
    emit_curves,
    run_experiment,
)
from .loss import LossKind, zero_one_error
from .model import BeliefState
from .oracle import OracleLimitExceeded, OracleLimits, optimal_value, policy_value
from .policies import PolicyConfig, make_policy
from .pool import CsvFormatError, SplitError, SyntheticSpec, generate_synthetic
from .pool import ActionExhaustedError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_LIMITS = 3


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n_features=args.features,
        regime=args.regime,
        discriminative_prob=args.disc_prob,
        n_instances=args.instances,
        class_prob=args.class_prob,
    )
    pool, _ = generate_synthetic(spec, np.random.default_rng(args.seed))
    Path(args.out).write_text(pool.to_json(include_hidden=args.include_hidden))
    print(f"wrote {args.out}: {len(pool)} instances, {pool.spec.n_features} features")
    return EXIT_OK


def _cmd_run(args) -> int:
    config = config_from_json(args.config)
    if args.seed is not None:
        config = replace(config, base_seed=args.seed)
    if not config.policies:
        raise ConfigError("run needs at least one policy; use `baseline` otherwise")
    result = run_experiment(config, threads=args.threads, progress=not args.quiet)
    paths = emit_curves(result, args.out_dir)
    curve = result.curve
    print(f"baseline error: {curve.baseline_mean:.4f} +- {curve.baseline_stderr:.4f}")
    for pc in curve.policies.values():
        print(
            f"{pc.name}: final error {pc.mean_error[-1]:.4f} +- {pc.stderr[-1]:.4f} "
            f"at spend {pc.spends[-1]:.0f}"
        )
    for name, p in paths.items():
        print(f"wrote {name}: {p}")
    return EXIT_OK


def _cmd_baseline(args) -> int:
    config = config_from_json(args.config)
    if args.seed is not None:
        config = replace(config, base_seed=args.seed)
    errors = []
    for trial in range(config.trials):
        train, validation = _build_trial_pool(config, trial, None)
        errors.append(zero_one_error(baseline_model(train), validation))
    errors = np.array(errors)
    sem = errors.std(ddof=1) / np.sqrt(len(errors)) if len(errors) > 1 else 0.0
    print(f"complete-training-data error: {errors.mean():.4f} +- {sem:.4f} ({config.trials} trials)")
    return EXIT_OK


def _oracle_gap_table(args) -> int:
    limits = OracleLimits(max_budget=args.budget)
    loss = LossKind("gini")
    rng = np.random.default_rng(args.seed)
    from .model import FeatureSpec, ProblemSpec

    feats = tuple(FeatureSpec(i, f"f{i}", args.arity) for i in range(args.features))
    spec = ProblemSpec(feats, tuple(f"c{j}" for j in range(args.classes)))

    header = ["instance", "optimal", "round_robin", "biased_robin", "greedy", "sfl"]
    print(",".join(header))
    for inst in range(args.instances):
        belief = BeliefState.uniform(spec, [10] * args.classes)
        for a in spec.actions():
            for k in range(args.arity):
                for _ in range(int(rng.integers(0, 4))):
                    belief = belief.update(a, k)
        opt = optimal_value(belief, args.budget, loss, limits=limits)
        row = [str(inst), f"{opt:.6f}"]
        for kind, depth in (
            ("round_robin", None), ("biased_robin", None), ("greedy", None), ("sfl", args.budget),
        ):
            policy = make_policy(PolicyConfig(kind, loss=loss, max_depth=depth), spec, seed=inst)
            row.append(f"{policy_value(policy, belief, args.budget, limits=limits):.6f}")
        print(",".join(row))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="budgetnb",
        description="Budgeted feature-value purchasing for Naive Bayes learners",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic pool file")
    synth.add_argument("--features", type=int, default=10)
    synth.add_argument("--instances", type=int, default=1000)
    synth.add_argument("--regime", choices=["all_uniform", "one_discriminative"],
                       default="all_uniform")
    synth.add_argument("--disc-prob", type=float, default=0.9)
    synth.add_argument("--class-prob", type=float, default=0.5)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--include-hidden", action="store_true",
                       help="export ground-truth values (simulator-side snapshot)")
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=_cmd_synth)

    run = sub.add_parser("run", help="execute an experiment from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out-dir", required=True)
    run.add_argument("--seed", type=int, default=None, help="override base_seed")
    run.add_argument("--threads", type=int, default=None,
                     help=f"worker processes (default: ${'{'}BUDGETNB_THREADS{'}'} or 1)")
    run.add_argument("--quiet", action="store_true")
    run.set_defaults(func=_cmd_run)

    base = sub.add_parser("baseline", help="complete-training-data error only")
    base.add_argument("--config", required=True)
    base.add_argument("--seed", type=int, default=None)
    base.set_defaults(func=_cmd_baseline)

    oracle = sub.add_parser("oracle", help="tiny-instance gap table: policies vs optimum")
    oracle.add_argument("--features", type=int, default=2)
    oracle.add_argument("--classes", type=int, default=2)
    oracle.add_argument("--arity", type=int, default=2)
    oracle.add_argument("--budget", type=int, default=3)
    oracle.add_argument("--instances", type=int, default=5)
    oracle.add_argument("--seed", type=int, default=0)
    oracle.set_defaults(func=_oracle_gap_table)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (CsvFormatError, SplitError, ActionExhaustedError, FileNotFoundError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except OracleLimitExceeded as err:
        print(f"limits exceeded: {err}", file=sys.stderr)
        return EXIT_LIMITS


if __name__ == "__main__":
    sys.exit(main())
