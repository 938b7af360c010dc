"""Line charts from budgetnb aggregate CSVs.

The CSV schema is the only contract with the experiment engine: a header row
`policy,spend,mean_error,stderr,mean_loss`, one row per (policy, spend) point,
and rows whose policy is `complete_data` carrying the constant full-data
baseline. Each policy becomes one line (with an optional translucent
standard-error ribbon); the baseline becomes a horizontal reference line.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

EXPECTED_COLUMNS = ("policy", "spend", "mean_error", "stderr", "mean_loss")
BASELINE_POLICY = "complete_data"

# deterministic styling: fixed palette, cycled in policy order
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
BASELINE_STYLE = {"color": "#444444", "linestyle": "--", "linewidth": 1.2}


class SchemaError(ValueError):
    """The input CSV does not match the documented aggregate schema."""


@dataclass(frozen=True)
class PlotSpec:
    input_csv: str
    output_path: str
    title: str = ""
    policy_order: tuple[str, ...] | None = None
    display_names: dict | None = None
    x_label: str = "number of purchases"
    y_label: str = "mean validation error"
    y_range: tuple[float, float] | None = None
    show_bands: bool = True
    dpi: int = 120


def read_curves(path):
    """Parse an aggregate CSV into ({policy: [(spend, mean, stderr), ...]}, baseline)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header "
                              f"{','.join(EXPECTED_COLUMNS)}") from None
        for col in EXPECTED_COLUMNS:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        for col in header:
            if col not in EXPECTED_COLUMNS:
                raise SchemaError(f"{path}: unexpected column {col!r}")
        idx = {c: header.index(c) for c in EXPECTED_COLUMNS}

        curves: dict[str, list] = {}
        baseline = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            name = row[idx["policy"]]
            try:
                spend = float(row[idx["spend"]])
                mean = float(row[idx["mean_error"]])
                stderr = float(row[idx["stderr"]])
            except ValueError as err:
                raise SchemaError(f"{path}: row {lineno}: {err}") from None
            if name == BASELINE_POLICY:
                baseline = (mean, stderr)
            else:
                curves.setdefault(name, []).append((spend, mean, stderr))
    return curves, baseline


def build_figure(spec: PlotSpec):
    """Assemble the matplotlib figure; separated from render() for testing."""
    curves, baseline = read_curves(spec.input_csv)
    if not curves:
        raise SchemaError(f"{spec.input_csv}: no policy curves found (baseline rows only)")

    order = list(spec.policy_order) if spec.policy_order else list(curves)
    unknown = [n for n in order if n not in curves]
    if unknown:
        raise SchemaError(f"{spec.input_csv}: ordered policies not in file: {unknown}")
    names = spec.display_names or {}

    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    for k, name in enumerate(order):
        rows = sorted(curves[name])
        xs = [r[0] for r in rows]
        ys = [r[1] for r in rows]
        es = [r[2] for r in rows]
        color = PALETTE[k % len(PALETTE)]
        ax.plot(xs, ys, label=names.get(name, name), color=color, linewidth=1.6)
        if spec.show_bands:
            lo = [y - e for y, e in zip(ys, es)]
            hi = [y + e for y, e in zip(ys, es)]
            ax.fill_between(xs, lo, hi, color=color, alpha=0.15, linewidth=0)
    if baseline is not None:
        ax.axhline(baseline[0], label=names.get(BASELINE_POLICY, "complete training data"),
                   **BASELINE_STYLE)

    ax.set_xlabel(spec.x_label)
    ax.set_ylabel(spec.y_label)
    if spec.title:
        ax.set_title(spec.title)
    if spec.y_range is not None:
        ax.set_ylim(*spec.y_range)
    ax.grid(True, alpha=0.3)
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def render(spec: PlotSpec) -> Path:
    """Write the chart to spec.output_path; deterministic bytes under a pinned
    matplotlib (the version-bearing Software tag is stripped)."""
    fig = build_figure(spec)
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(out, dpi=spec.dpi, metadata={"Software": None})
    finally:
        plt.close(fig)
    return out
