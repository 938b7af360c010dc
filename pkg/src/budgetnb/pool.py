"""The simulator's data layer: labeled instances whose feature values stay
hidden until purchased.

The pool holds the ground truth behind an information barrier: learner-facing
code sees labels, availability counts, and already-revealed cells only.
Purchasing picks a uniformly random eligible instance, flips its cell to
revealed, and returns the value.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .loss import ValidationSet
from .model import Action, FeatureSpec, ProblemSpec

ALL_UNIFORM = "all_uniform"
ONE_DISCRIMINATIVE = "one_discriminative"

PAD_VALUE = "__absent__"  # synthetic category padding constant columns up to arity 2


class ActionExhaustedError(RuntimeError):
    """No instance with the requested label still hides the requested feature."""


class CsvFormatError(ValueError):
    pass


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    n_features: int
    regime: str = ALL_UNIFORM
    discriminative_prob: float = 0.9
    n_instances: int = 1000
    class_prob: float = 0.5

    def __post_init__(self):
        if self.regime not in (ALL_UNIFORM, ONE_DISCRIMINATIVE):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.n_features < 1 or self.n_instances < 1:
            raise ValueError("n_features and n_instances must be >= 1")
        if not 0.0 <= self.class_prob <= 1.0:
            raise ValueError("class_prob must lie in [0, 1]")
        if not 0.5 <= self.discriminative_prob <= 1.0:
            raise ValueError("discriminative_prob must lie in [0.5, 1]")


@dataclass(frozen=True)
class CsvSchema:
    """Names the class column; every other column is a categorical feature."""

    class_column: str
    missing_token: str = "?"
    costs: dict = field(default_factory=dict)  # feature name -> integer cost
    class_labels: tuple[str, ...] | None = None

    @classmethod
    def from_json(cls, path) -> "CsvSchema":
        with open(path) as fh:
            raw = json.load(fh)
        labels = raw.get("class_labels")
        return cls(
            class_column=raw["class_column"],
            missing_token=raw.get("missing_token", "?"),
            costs={k: int(v) for k, v in raw.get("costs", {}).items()},
            class_labels=tuple(labels) if labels else None,
        )


class LearnerView:
    """What the learner is allowed to see: labels, availability, revealed cells."""

    def __init__(self, pool: "InstancePool"):
        self.spec = pool.spec
        self.labels = pool.labels.copy()
        self._avail = pool._avail.copy()
        self._revealed = {
            (int(r), int(c)): int(pool._values[r, c])
            for r, c in zip(*np.nonzero(pool._revealed))
        }

    def availability(self, action: Action) -> int:
        return int(self._avail[action.feature, action.label])

    def revealed_cells(self) -> dict:
        return dict(self._revealed)


class InstancePool:
    """Ground-truth instances with per-cell visibility flags."""

    def __init__(self, spec: ProblemSpec, labels, values, revealed=None, origin: str = "synthetic"):
        self.spec = spec
        self.labels = np.asarray(labels, dtype=np.int64)
        self._values = np.asarray(values, dtype=np.int64)
        n, nf = self._values.shape
        if self.labels.shape != (n,):
            raise ValueError("labels/values row mismatch")
        if nf != spec.n_features:
            raise ValueError("values column count does not match spec")
        if np.any(self.labels < 0) or np.any(self.labels >= spec.n_classes):
            raise ValueError("label out of range")
        for i, f in enumerate(spec.features):
            if np.any(self._values[:, i] < 0) or np.any(self._values[:, i] >= f.arity):
                raise ValueError(f"value out of range for feature {f.name!r}")
        self._revealed = (
            np.zeros((n, nf), dtype=bool) if revealed is None else np.asarray(revealed, dtype=bool).copy()
        )
        if self._revealed.shape != (n, nf):
            raise ValueError("revealed mask shape mismatch")
        self.origin = origin
        self._avail = self._availability_grid()

    def _availability_grid(self) -> np.ndarray:
        grid = np.zeros((self.spec.n_features, self.spec.n_classes), dtype=np.int64)
        hidden = ~self._revealed
        for j in range(self.spec.n_classes):
            grid[:, j] = hidden[self.labels == j].sum(axis=0)
        return grid

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def availability_grid(self) -> np.ndarray:
        return self._avail

    def availability(self, action: Action) -> int:
        return int(self._avail[action.feature, action.label])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.spec.n_classes)

    def copy(self) -> "InstancePool":
        return InstancePool(self.spec, self.labels, self._values, self._revealed, self.origin)

    def learner_view(self) -> LearnerView:
        return LearnerView(self)

    def purchase(self, action: Action, rng: np.random.Generator) -> int:
        """Reveal the requested feature on a uniformly random eligible instance."""
        i, j = action.feature, action.label
        eligible = np.flatnonzero((self.labels == j) & ~self._revealed[:, i])
        if len(eligible) == 0:
            raise ActionExhaustedError(f"action (feature={i}, label={j}) exhausted")
        row = int(eligible[rng.integers(len(eligible))])
        self._revealed[row, i] = True
        self._avail[i, j] -= 1
        return int(self._values[row, i])

    def revealed_count(self) -> int:
        return int(self._revealed.sum())

    def full_counts(self):
        """Observation counts per (feature, class, value) over ALL cells.

        Simulator-side helper for the complete-training-data baseline; it
        deliberately ignores the information barrier.
        """
        out = []
        for i, f in enumerate(self.spec.features):
            block = np.zeros((self.spec.n_classes, f.arity), dtype=np.int64)
            for j in range(self.spec.n_classes):
                block[j] = np.bincount(self._values[self.labels == j, i], minlength=f.arity)
            out.append(block)
        return out

    # -- serialization ------------------------------------------------------

    def to_json(self, include_hidden: bool = False) -> str:
        doc = {
            "spec": {
                "features": [
                    {"name": f.name, "arity": f.arity, "cost": f.cost} for f in self.spec.features
                ],
                "class_labels": list(self.spec.class_labels),
            },
            "origin": self.origin,
            "labels": self.labels.tolist(),
            "revealed": {f"{r},{c}": int(self._values[r, c]) for r, c in zip(*np.nonzero(self._revealed))},
        }
        if include_hidden:
            doc["values"] = self._values.tolist()
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "InstancePool":
        doc = json.loads(text)
        if "values" not in doc:
            raise ValueError("snapshot withholds hidden values; re-export with include_hidden")
        feats = tuple(
            FeatureSpec(id=i, name=f["name"], arity=int(f["arity"]), cost=int(f.get("cost", 1)))
            for i, f in enumerate(doc["spec"]["features"])
        )
        spec = ProblemSpec(feats, tuple(doc["spec"]["class_labels"]))
        values = np.asarray(doc["values"], dtype=np.int64)
        revealed = np.zeros_like(values, dtype=bool)
        for key in doc["revealed"]:
            r, c = map(int, key.split(","))
            revealed[r, c] = True
        return cls(spec, doc["labels"], values, revealed, doc.get("origin", "synthetic"))


# ---------------------------------------------------------------------------
# synthetic generation


def generate_synthetic(sspec: SyntheticSpec, rng: np.random.Generator):
    """Draw a generating Naive Bayes model and sample a pool of hidden instances.

    all_uniform: every conditional row is an independent Dir(1,1) draw, so all
    features discriminate to varying degrees. one_discriminative: rows are
    drawn once per feature (class-independent, hence irrelevant), then one
    uniformly chosen feature is overwritten with the
    (discriminative_prob, 1-discriminative_prob) split flipped across classes.
    """
    from .model import NBClassifier, sample_instances

    feats = tuple(FeatureSpec(id=i, name=f"f{i:02d}", arity=2) for i in range(sspec.n_features))
    spec = ProblemSpec(feats, ("y0", "y1"))

    if sspec.regime == ALL_UNIFORM:
        theta = [rng.dirichlet([1.0, 1.0], size=2) for _ in range(sspec.n_features)]
    else:
        theta = []
        for _ in range(sspec.n_features):
            row = rng.dirichlet([1.0, 1.0])
            theta.append(np.stack([row, row]))
        disc = int(rng.integers(sspec.n_features))
        p = sspec.discriminative_prob
        theta[disc] = np.array([[p, 1 - p], [1 - p, p]])

    prior = np.array([sspec.class_prob, 1.0 - sspec.class_prob])
    model = NBClassifier(spec, theta, prior)
    labels, values = sample_instances(model, sspec.n_instances, rng)
    return InstancePool(spec, labels, values, origin="synthetic"), model


# ---------------------------------------------------------------------------
# CSV ingestion


def load_csv(path, schema: CsvSchema) -> InstancePool:
    """Load a header-first categorical CSV into a fully hidden pool.

    Arities come from the observed distinct values (the missing-value token
    counts as a category of its own); constant columns are padded with one
    synthetic category so every feature keeps arity >= 2.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if schema.class_column not in header:
            raise CsvFormatError(f"{path}: class column {schema.class_column!r} not in header {header}")
        class_idx = header.index(schema.class_column)
        feature_names = [h for k, h in enumerate(header) if k != class_idx]

        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: row {lineno}: expected {len(header)} columns, got {len(row)}"
                )
            rows.append([cell.strip() for cell in row])

    if not rows:
        raise CsvFormatError(f"{path}: empty file (header only)")

    raw_labels = [row[class_idx] for row in rows]
    if schema.class_labels is not None:
        class_labels = tuple(schema.class_labels)
        known = set(class_labels)
        for lineno, lab in enumerate(raw_labels, start=2):
            if lab not in known:
                raise CsvFormatError(f"{path}: row {lineno}: unknown class label {lab!r}")
    else:
        class_labels = tuple(sorted(set(raw_labels)))
    label_index = {lab: j for j, lab in enumerate(class_labels)}

    feature_cols = [[row[k] for k in range(len(header)) if k != class_idx] for row in rows]
    value_maps = []
    feats = []
    for i, name in enumerate(feature_names):
        seen = sorted({row[i] for row in feature_cols})
        while len(seen) < 2:
            seen = seen + [f"{PAD_VALUE}{len(seen)}"]
        value_maps.append({v: k for k, v in enumerate(seen)})
        feats.append(
            FeatureSpec(id=i, name=name, arity=len(seen), cost=int(schema.costs.get(name, 1)))
        )
    spec = ProblemSpec(tuple(feats), class_labels)

    labels = np.array([label_index[lab] for lab in raw_labels], dtype=np.int64)
    values = np.array(
        [[value_maps[i][row[i]] for i in range(len(feature_names))] for row in feature_cols],
        dtype=np.int64,
    )
    return InstancePool(spec, labels, values, origin="csv")


# ---------------------------------------------------------------------------
# train/validation split


def split(pool: InstancePool, validation_fraction: float, balanced: bool, rng: np.random.Generator):
    """Partition a pool into a (still hidden) training pool and a fully observed
    validation set.

    Positional mode keeps the first rows for training; balanced mode samples a
    class-stratified random partition.
    """
    if not 0.0 < validation_fraction < 1.0:
        raise SplitError(f"validation fraction must lie in (0, 1), got {validation_fraction}")
    n = len(pool)
    if balanced:
        val_idx = []
        for j in range(pool.spec.n_classes):
            members = np.flatnonzero(pool.labels == j)
            quota = int(round(validation_fraction * len(members)))
            if quota < 1 or quota >= len(members):
                raise SplitError(
                    f"class {pool.spec.class_labels[j]!r} has {len(members)} instances, "
                    f"cannot reserve a validation quota of {quota}"
                )
            val_idx.extend(rng.permutation(members)[:quota].tolist())
        val_mask = np.zeros(n, dtype=bool)
        val_mask[val_idx] = True
    else:
        n_val = int(round(validation_fraction * n))
        if n_val < 1 or n_val >= n:
            raise SplitError(f"validation fraction {validation_fraction} leaves no usable split")
        val_mask = np.zeros(n, dtype=bool)
        val_mask[n - n_val:] = True

    train = InstancePool(
        pool.spec,
        pool.labels[~val_mask],
        pool._values[~val_mask],
        pool._revealed[~val_mask],
        pool.origin,
    )
    validation = ValidationSet(pool.labels[val_mask], pool._values[val_mask], pool.spec)
    return train, validation
