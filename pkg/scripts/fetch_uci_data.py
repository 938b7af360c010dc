#!/usr/bin/env python3
"""Download the UCI datasets used by the experiment configs and normalize them
to header-first CSVs under data/.

Needs ordinary internet access to archive.ics.uci.edu. Run from the repository
root:

    python scripts/fetch_uci_data.py [--dest data]

Produces mushroom.csv (8124 rows, 22 features), votes.csv (435 rows, 16
features), and nursery.csv (12960 rows, 8 features), each with a `class`
column, plus a matching *.schema.json naming the class column.
"""

import argparse
import csv
import io
import json
import urllib.request
from pathlib import Path

BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases"

DATASETS = {
    "mushroom": {
        "url": f"{BASE}/mushroom/agaricus-lepiota.data",
        "class_index": 0,
        "columns": [
            "class",
            "cap-shape", "cap-surface", "cap-color", "bruises", "odor",
            "gill-attachment", "gill-spacing", "gill-size", "gill-color",
            "stalk-shape", "stalk-root", "stalk-surface-above-ring",
            "stalk-surface-below-ring", "stalk-color-above-ring",
            "stalk-color-below-ring", "veil-type", "veil-color", "ring-number",
            "ring-type", "spore-print-color", "population", "habitat",
        ],
        "expected_rows": 8124,
    },
    "votes": {
        "url": f"{BASE}/voting-records/house-votes-84.data",
        "class_index": 0,
        "columns": [
            "class",
            "handicapped-infants", "water-project-cost-sharing",
            "adoption-of-the-budget-resolution", "physician-fee-freeze",
            "el-salvador-aid", "religious-groups-in-schools",
            "anti-satellite-test-ban", "aid-to-nicaraguan-contras", "mx-missile",
            "immigration", "synfuels-corporation-cutback", "education-spending",
            "superfund-right-to-sue", "crime", "duty-free-exports",
            "export-administration-act-south-africa",
        ],
        "expected_rows": 435,
    },
    "nursery": {
        "url": f"{BASE}/nursery/nursery.data",
        "class_index": 8,
        "columns": [
            "parents", "has_nurs", "form", "children", "housing", "finance",
            "social", "health", "class",
        ],
        "expected_rows": 12960,
    },
}


def fetch(name: str, spec: dict, dest: Path) -> None:
    print(f"fetching {name} from {spec['url']} ...")
    with urllib.request.urlopen(spec["url"]) as resp:
        text = resp.read().decode("utf-8")
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) != spec["expected_rows"]:
        raise SystemExit(f"{name}: expected {spec['expected_rows']} rows, got {len(rows)}")

    # move the class column first and add a header
    ci = spec["class_index"]
    out_rows = [["class"] + [c for k, c in enumerate(spec["columns"]) if k != ci and c != "class"]]
    header_order = [ci] + [k for k in range(len(spec["columns"])) if k != ci]
    out_rows = [[spec["columns"][k] for k in header_order]]
    for row in rows:
        out_rows.append([row[k].strip() for k in header_order])

    csv_path = dest / f"{name}.csv"
    with open(csv_path, "w", newline="") as fh:
        csv.writer(fh).writerows(out_rows)
    schema_path = dest / f"{name}.schema.json"
    schema_path.write_text(json.dumps({"class_column": "class", "missing_token": "?"}, indent=1))
    print(f"wrote {csv_path} ({len(rows)} rows) and {schema_path}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dest", default="data")
    parser.add_argument("--only", choices=sorted(DATASETS), action="append")
    args = parser.parse_args()
    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    names = args.only or sorted(DATASETS)
    for name in names:
        fetch(name, DATASETS[name], dest)


if __name__ == "__main__":
    main()
