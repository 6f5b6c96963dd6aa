"""Regenerate the bundled Iris and German Credit CSV/schema pairs.

German Credit is converted from the original coded UCI file into 24 integer
columns: 14 ordinal/count attributes plus 10 binary indicators for nominal
attributes. Credit amount is expressed in hundreds (rounded half up).

    python scripts/build_datasets.py
"""
import csv
import json
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
RAW = ROOT / "data" / "raw"
OUT = ROOT / "src" / "treextract" / "datasets"


def _code(token, prefix):
    # "A34" with prefix "A3" -> 4
    assert token.startswith(prefix), (token, prefix)
    return int(token[len(prefix):])


def build_iris():
    names = ["sepal_length", "sepal_width", "petal_length", "petal_width"]
    bounds = [(4.0, 8.0), (2.0, 4.5), (1.0, 7.0), (0.1, 2.5)]
    with open(RAW / "iris.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    classes = rows[0][2:]
    with open(OUT / "iris.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["species"])
        for r in rows[1:]:
            w.writerow(r[:4] + [classes[int(r[4])]])
    schema = {
        "label_column": "species",
        "classes": classes,
        "features": [
            {"name": n, "kind": "continuous", "lower": lo, "upper": hi}
            for n, (lo, hi) in zip(names, bounds)
        ],
    }
    (OUT / "iris.json").write_text(json.dumps(schema, indent=2) + "\n")


# (name, lower, upper, extractor)
GERMAN_COLUMNS = [
    ("checking_status", 1, 4, lambda a: _code(a[0], "A1")),
    ("duration_months", 4, 72, lambda a: int(a[1])),
    ("credit_history", 0, 4, lambda a: _code(a[2], "A3")),
    ("credit_amount_100", 2, 185, lambda a: (int(a[4]) + 50) // 100),
    ("savings", 1, 5, lambda a: _code(a[5], "A6")),
    ("employment_since", 1, 5, lambda a: _code(a[6], "A7")),
    ("installment_rate", 1, 4, lambda a: int(a[7])),
    ("personal_status_sex", 1, 5, lambda a: _code(a[8], "A9")),
    ("residence_since", 1, 4, lambda a: int(a[10])),
    ("property", 1, 4, lambda a: _code(a[11], "A12")),
    ("age_years", 19, 75, lambda a: int(a[12])),
    ("existing_credits", 1, 4, lambda a: int(a[15])),
    ("job", 1, 4, lambda a: _code(a[16], "A17")),
    ("people_liable", 1, 2, lambda a: int(a[17])),
    ("has_telephone", 0, 1, lambda a: int(a[18] == "A192")),
    ("foreign_worker", 0, 1, lambda a: int(a[19] == "A201")),
    ("debtor_coapplicant", 0, 1, lambda a: int(a[9] == "A102")),
    ("debtor_guarantor", 0, 1, lambda a: int(a[9] == "A103")),
    ("other_plans_bank", 0, 1, lambda a: int(a[13] == "A141")),
    ("other_plans_stores", 0, 1, lambda a: int(a[13] == "A142")),
    ("housing_rent", 0, 1, lambda a: int(a[14] == "A151")),
    ("housing_own", 0, 1, lambda a: int(a[14] == "A152")),
    ("purpose_new_car", 0, 1, lambda a: int(a[3] == "A40")),
    ("purpose_used_car", 0, 1, lambda a: int(a[3] == "A41")),
]


def build_german():
    lines = (RAW / "german.data").read_text().split("\n")
    rows = [ln.split() for ln in lines if ln.strip()]
    labels = {"1": "good", "2": "bad"}
    with open(OUT / "german_numeric.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c[0] for c in GERMAN_COLUMNS] + ["credit_risk"])
        for attrs in rows:
            vals = []
            for name, lo, hi, get in GERMAN_COLUMNS:
                v = get(attrs)
                assert lo <= v <= hi, (name, v)
                vals.append(v)
            w.writerow(vals + [labels[attrs[20]]])
    schema = {
        "label_column": "credit_risk",
        "classes": ["good", "bad"],
        "features": [
            {"name": n, "kind": "integer", "lower": lo, "upper": hi}
            for n, lo, hi, _ in GERMAN_COLUMNS
        ],
    }
    (OUT / "german_numeric.json").write_text(json.dumps(schema, indent=2) + "\n")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    build_iris()
    build_german()
