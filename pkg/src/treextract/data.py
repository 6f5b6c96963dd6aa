"""Dataset schemas, CSV ingestion, imputation, splits and seed selection.

A *sample* is a read-only 1-D ``float64`` numpy array. Categorical features
are stored as the index of the category in :attr:`FeatureSpec.categories`.
Missing positions (only meaningful for :func:`impute_missing`) are ``NaN``.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import (BoundsError, CapacityError, DataFormatError,
                         SchemaError, ValidationError)

log = logging.getLogger(__name__)

CONTINUOUS = "continuous"
INTEGER = "integer"
CATEGORICAL = "categorical"
KINDS = (CONTINUOUS, INTEGER, CATEGORICAL)

MAX_SYNTH_DOMAIN = 10**6


@dataclass(frozen=True)
class FeatureSpec:
    """Constraints of one input feature.

    ``mean`` is the imputation value computed from training data; for
    categorical features it holds the index of the modal category.
    """
    name: str
    kind: str
    lower: float | None = None
    upper: float | None = None
    categories: tuple[str, ...] = ()
    mean: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.categories:
                raise SchemaError(f"feature {self.name!r}: categorical feature needs categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"feature {self.name!r}: duplicate categories")
            object.__setattr__(self, "categories", tuple(self.categories))
            object.__setattr__(self, "lower", 0.0)
            object.__setattr__(self, "upper", float(len(self.categories) - 1))
        else:
            if self.lower is None or self.upper is None:
                raise SchemaError(f"feature {self.name!r}: lower and upper bounds required")
            if not self.lower < self.upper:
                raise SchemaError(f"feature {self.name!r}: lower must be < upper")
            object.__setattr__(self, "lower", float(self.lower))
            object.__setattr__(self, "upper", float(self.upper))
        if self.mean is not None and not self.lower <= self.mean <= self.upper:
            raise SchemaError(f"feature {self.name!r}: mean {self.mean} outside bounds")

    @property
    def is_categorical(self):
        return self.kind == CATEGORICAL

    def contains(self, value: float) -> bool:
        if not math.isfinite(value) or not self.lower <= value <= self.upper:
            return False
        if self.kind != CONTINUOUS:
            return float(value).is_integer()
        return True

    def to_dict(self):
        d = {"name": self.name, "kind": self.kind}
        if self.is_categorical:
            d["categories"] = list(self.categories)
        else:
            d["lower"] = _plain_number(self.lower, self.kind)
            d["upper"] = _plain_number(self.upper, self.kind)
        return d


@dataclass(frozen=True)
class DatasetSchema:
    features: tuple[FeatureSpec, ...]
    label_names: tuple[str, ...]
    label_column: str = "label"

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "label_names", tuple(self.label_names))
        if len(self.label_names) < 2:
            raise SchemaError("at least two classes are required")
        if len(set(self.label_names)) != len(self.label_names):
            raise SchemaError("duplicate class names")
        names = [f.name for f in self.features]
        if not names:
            raise SchemaError("schema has no features")
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names")
        if self.label_column in names:
            raise SchemaError(f"label column {self.label_column!r} is also a feature")

    @property
    def feature_count(self) -> int:
        return len(self.features)

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    @property
    def lower(self) -> np.ndarray:
        return np.array([f.lower for f in self.features])

    @property
    def upper(self) -> np.ndarray:
        return np.array([f.upper for f in self.features])

    @property
    def has_means(self) -> bool:
        return all(f.mean is not None for f in self.features)

    def with_means(self, means: Sequence[float]) -> "DatasetSchema":
        feats = tuple(replace(f, mean=float(m)) for f, m in zip(self.features, means))
        return replace(self, features=feats)

    def validate_sample(self, values, allow_missing=False) -> np.ndarray:
        """Return ``values`` as a read-only sample, raising on length or bounds violations."""
        x = np.array(values, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.feature_count:
            raise ValidationError(
                f"expected {self.feature_count} feature values, got {x.shape[0]}")
        for i, (v, spec) in enumerate(zip(x, self.features)):
            if allow_missing and math.isnan(v):
                continue
            if not spec.contains(v):
                raise BoundsError(
                    f"feature {i} ({spec.name!r}) value {v!r} outside "
                    f"{spec.kind} domain [{spec.lower}, {spec.upper}]")
        x += 0.0  # -0.0 -> 0.0 so equal samples hash equally
        x.flags.writeable = False
        return x

    def to_dict(self):
        return {
            "label_column": self.label_column,
            "classes": list(self.label_names),
            "features": [f.to_dict() for f in self.features],
        }


class LabeledSample(NamedTuple):
    sample: np.ndarray
    label: int


def _plain_number(v, kind):
    return int(v) if kind != CONTINUOUS and float(v).is_integer() else v


def as_sample(values) -> np.ndarray:
    x = np.array(values, dtype=np.float64).reshape(-1) + 0.0
    x.flags.writeable = False
    return x


def to_arrays(data: Sequence[LabeledSample]):
    """Stack labeled samples into ``(X, y)`` arrays."""
    if not data:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64)
    X = np.vstack([d.sample for d in data]).astype(np.float64)
    y = np.array([d.label for d in data], dtype=np.int64)
    return X, y


def schema_from_dict(doc: dict) -> DatasetSchema:
    try:
        feats = []
        for fd in doc["features"]:
            feats.append(FeatureSpec(
                name=str(fd["name"]),
                kind=fd["kind"],
                lower=fd.get("lower"),
                upper=fd.get("upper"),
                categories=tuple(str(c) for c in fd.get("categories") or ()),
            ))
        return DatasetSchema(tuple(feats), tuple(str(c) for c in doc["classes"]),
                             label_column=str(doc["label_column"]))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed schema document: missing or invalid {exc}") from exc


def load_schema(schema_path) -> DatasetSchema:
    path = Path(schema_path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read schema {path}: {exc}") from exc
    return schema_from_dict(doc)


def _parse_cell(text: str, spec: FeatureSpec, row: int) -> float:
    if text == "":
        raise DataFormatError("missing value", row, spec.name)
    if spec.is_categorical:
        try:
            return float(spec.categories.index(text))
        except ValueError:
            raise BoundsError(f"row {row}, column {spec.name!r}: unknown category {text!r}") from None
    try:
        v = float(text)
    except ValueError:
        raise DataFormatError(f"cannot parse {text!r} as a number", row, spec.name) from None
    if spec.kind == INTEGER and math.isfinite(v) and not v.is_integer():
        raise DataFormatError(f"{text!r} is not an integer", row, spec.name)
    if not spec.contains(v):
        raise BoundsError(f"row {row}, column {spec.name!r}: value {text} outside "
                          f"[{spec.lower}, {spec.upper}]")
    return v


def compute_means(schema: DatasetSchema, X: np.ndarray) -> list[float]:
    means = []
    for j, spec in enumerate(schema.features):
        col = X[:, j]
        if spec.is_categorical:
            counts = np.bincount(col.astype(np.int64), minlength=len(spec.categories))
            means.append(float(np.argmax(counts)))
        else:
            m = float(np.mean(col))
            means.append(min(max(m, spec.lower), spec.upper))
    return means


def load_dataset(csv_path, schema_path) -> tuple[DatasetSchema, list[LabeledSample]]:
    """Read a labeled CSV under an explicit schema.

    Row order is preserved and the returned schema carries imputation means
    computed from the loaded rows.
    """
    schema = load_schema(schema_path)
    return load_dataset_with_schema(csv_path, schema)


def load_dataset_with_schema(csv_path, schema: DatasetSchema):
    rows = _read_rows(Path(csv_path), schema)
    return fit_schema(schema, rows), rows


def _read_rows(path: Path, schema: DatasetSchema) -> list[LabeledSample]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{path}: empty file, header row expected")
        header = [h.strip() for h in header]
        expected = [f.name for f in schema.features] + [schema.label_column]
        missing = [c for c in expected if c not in header]
        extra = [c for c in header if c not in expected]
        if missing or extra:
            raise SchemaError(f"{path}: header mismatch (missing {missing}, unexpected {extra})")
        pos = [header.index(f.name) for f in schema.features]
        label_pos = header.index(schema.label_column)

        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataFormatError(
                    f"expected {len(header)} cells, got {len(cells)}", lineno)
            vals = [_parse_cell(cells[p].strip(), spec, lineno)
                    for p, spec in zip(pos, schema.features)]
            label_text = cells[label_pos].strip()
            if label_text not in schema.label_names:
                raise SchemaError(f"row {lineno}: unknown label {label_text!r}")
            rows.append(LabeledSample(as_sample(vals), schema.label_names.index(label_text)))
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return rows


def read_samples(csv_path, schema: DatasetSchema) -> list[np.ndarray]:
    """Read unlabeled samples (e.g. attacker seeds); a label column, if present, is ignored."""
    path = Path(csv_path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        missing = [f.name for f in schema.features if f.name not in header]
        if missing:
            raise SchemaError(f"{path}: missing feature columns {missing}")
        pos = [header.index(f.name) for f in schema.features]
        out = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataFormatError(f"expected {len(header)} cells, got {len(cells)}", lineno)
            out.append(as_sample([_parse_cell(cells[p].strip(), spec, lineno)
                                  for p, spec in zip(pos, schema.features)]))
    return out


def format_value(v: float, spec: FeatureSpec) -> str:
    if spec.is_categorical:
        return spec.categories[int(v)]
    if spec.kind == INTEGER:
        return str(int(v))
    return repr(float(v))


def write_dataset(csv_path, schema: DatasetSchema, data: Sequence[LabeledSample]):
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f.name for f in schema.features] + [schema.label_column])
        for s in data:
            w.writerow([format_value(v, spec) for v, spec in zip(s.sample, schema.features)]
                       + [schema.label_names[s.label]])


def write_schema(schema_path, schema: DatasetSchema):
    Path(schema_path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")


def fit_schema(schema: DatasetSchema, data: Sequence[LabeledSample]) -> DatasetSchema:
    """Return ``schema`` with imputation means computed from ``data``."""
    X, _ = to_arrays(data)
    return schema.with_means(compute_means(schema, X))


def round_half_up(v: float) -> float:
    return float(math.floor(v + 0.5))


def impute_missing(partial, schema: DatasetSchema, mode: str = "mean",
                   rng_seed: int = 0) -> np.ndarray:
    """Fill ``NaN`` positions of ``partial`` so the target model will accept it.

    ``mode="mean"`` uses the schema's imputation values (rounded half up for
    integer features, modal category for categoricals); ``mode="random"``
    draws uniformly from each feature's permitted values.
    """
    if mode not in ("mean", "random"):
        raise ValidationError(f"unknown imputation mode {mode!r}")
    x = np.array(partial, dtype=np.float64).reshape(-1)
    schema.validate_sample(x, allow_missing=True)
    missing = np.flatnonzero(np.isnan(x))
    if missing.size == 0:
        return as_sample(x)
    rng = np.random.default_rng(rng_seed)
    for i in missing:
        spec = schema.features[i]
        if mode == "mean":
            if spec.mean is None:
                raise SchemaError(f"feature {spec.name!r} has no imputation mean")
            v = min(max(spec.mean, spec.lower), spec.upper)
            if spec.kind != CONTINUOUS:
                v = min(max(round_half_up(v), math.ceil(spec.lower)), math.floor(spec.upper))
        elif spec.is_categorical:
            v = float(rng.integers(len(spec.categories)))
        elif spec.kind == INTEGER:
            v = float(rng.integers(math.ceil(spec.lower), math.floor(spec.upper) + 1))
        else:
            v = float(rng.uniform(spec.lower, spec.upper))
        x[i] = v
    return as_sample(x)


def random_sample(schema: DatasetSchema, rng_seed: int = 0) -> np.ndarray:
    return impute_missing(np.full(schema.feature_count, np.nan), schema, "random", rng_seed)


def split(data: Sequence[LabeledSample], train_fraction: float, rng_seed: int = 0):
    """Shuffle deterministically and cut into ``floor(n * train_fraction)`` train rows plus the rest."""
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if not data:
        raise ValidationError("cannot split an empty dataset")
    n = len(data)
    k = int(math.floor(n * train_fraction + 1e-9))
    perm = np.random.default_rng(rng_seed).permutation(n)
    return [data[i] for i in perm[:k]], [data[i] for i in perm[k:]]


def sample_seeds(data: Sequence[LabeledSample], per_class: int, rng_seed: int = 0,
                 n_classes: int | None = None) -> list[np.ndarray]:
    """Draw up to ``per_class`` unlabeled samples of each class, without replacement."""
    if per_class < 0:
        raise ValidationError("per_class must be >= 0")
    if per_class == 0 or not data:
        return []
    if n_classes is None:
        n_classes = max(d.label for d in data) + 1
    rng = np.random.default_rng(rng_seed)
    seeds = []
    for c in range(n_classes):
        members = [d.sample for d in data if d.label == c]
        if len(members) < per_class:
            log.warning("class %d has %d samples, fewer than the %d seeds requested",
                        c, len(members), per_class)
        k = min(per_class, len(members))
        for i in rng.choice(len(members), size=k, replace=False):
            seeds.append(members[i])
    return seeds


def synth_tree_dataset(depth: int, feature_count: int, domain_size: int,
                       rng_seed: int = 0, n_classes: int = 2):
    """Random axis-aligned tree over integer features in ``[0, domain_size)``.

    Returns ``(tree, schema, data)`` where ``data`` enumerates the entire
    input domain, labeled by the tree.
    """
    from .tree import TreeParams, tree_from_dict

    if depth < 1 or feature_count < 1 or domain_size < 2 or n_classes < 2:
        raise ValidationError("need depth >= 1, feature_count >= 1, domain_size >= 2, n_classes >= 2")
    if domain_size ** feature_count > MAX_SYNTH_DOMAIN:
        raise CapacityError(
            f"domain {domain_size}^{feature_count} exceeds {MAX_SYNTH_DOMAIN} points")
    rng = np.random.default_rng(rng_seed)

    def grow(lo, hi, d):
        splittable = [j for j in range(feature_count) if hi[j] > lo[j]]
        if d == depth or not splittable:
            counts = [0] * n_classes
            counts[int(rng.integers(n_classes))] = int(np.prod(np.subtract(hi, lo) + 1))
            return {"counts": counts}
        j = splittable[int(rng.integers(len(splittable)))]
        t = int(rng.integers(lo[j], hi[j]))
        left_hi, right_lo = list(hi), list(lo)
        left_hi[j], right_lo[j] = t, t + 1
        return {"feature": j, "threshold": float(t),
                "left": grow(lo, left_hi, d + 1), "right": grow(right_lo, hi, d + 1)}

    root = grow([0] * feature_count, [domain_size - 1] * feature_count, 0)
    schema = DatasetSchema(
        tuple(FeatureSpec(f"f{j}", INTEGER, 0, domain_size - 1) for j in range(feature_count)),
        tuple(f"c{c}" for c in range(n_classes)),
    )
    grid = np.array(list(itertools.product(range(domain_size), repeat=feature_count)),
                    dtype=np.float64)
    schema = schema.with_means(compute_means(schema, grid))
    tree = tree_from_dict(root, schema, TreeParams(max_depth=depth, min_samples_split=2,
                                                   rng_seed=rng_seed))
    labels = tree.predict_batch(grid)
    data = [LabeledSample(as_sample(x), int(y)) for x, y in zip(grid, labels)]
    return tree, schema, data
