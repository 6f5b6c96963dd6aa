"""CART classifier used both as the victim model and as the extracted surrogate.

Nodes are stored in flat preorder arrays (node 0 is the root); a node with
``feature == -1`` is a leaf. Samples with ``x[feature] <= threshold`` go
left.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .data import DatasetSchema, LabeledSample, to_arrays
from .exceptions import ModelFormatError, ValidationError


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 8
    min_samples_split: int = 2
    rng_seed: int = 0  # recorded for provenance; split ties are broken by index order

    def __post_init__(self):
        if int(self.max_depth) < 1:
            raise ValidationError("max_depth must be >= 1")
        if int(self.min_samples_split) < 2:
            raise ValidationError("min_samples_split must be >= 2")

    def to_dict(self):
        return asdict(self)


def gini(class_counts) -> float:
    """Gini impurity ``1 - sum(p_i^2)`` of a vector of class counts."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if counts.ndim != 1 or np.any(counts < 0):
        raise ValidationError("class counts must be a vector of non-negative numbers")
    total = counts.sum()
    if total <= 0:
        raise ValidationError("class counts must sum to at least 1")
    p = counts / total
    return float(1.0 - np.dot(p, p))


class DecisionTree:
    """Fitted tree. Immutable after construction."""

    def __init__(self, feature, threshold, left, right, counts,
                 schema: DatasetSchema, params: TreeParams, schema_ref: str = ""):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64).reshape(len(self.feature), -1)
        self.leaf_label = np.argmax(self.counts, axis=1).astype(np.int64)
        self.schema = schema
        self.params = params
        self.schema_ref = schema_ref
        for arr in (self.feature, self.threshold, self.left, self.right,
                    self.counts, self.leaf_label):
            arr.flags.writeable = False

    @property
    def n_classes(self):
        return self.counts.shape[1]

    @property
    def node_count(self):
        return len(self.feature)

    def predict(self, sample) -> int:
        x = np.asarray(sample, dtype=np.float64)
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return int(self.leaf_label[node])

    def predict_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        return kernels.predict_batch(self.feature, self.threshold, self.left,
                                     self.right, self.leaf_label, X)

    def depths(self) -> np.ndarray:
        d = np.zeros(self.node_count, dtype=np.int64)
        for i in range(self.node_count):  # preorder: parents precede children
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return d

    def describe(self) -> dict:
        leaves = self.feature < 0
        return {"depth": int(self.depths()[leaves].max()),
                "leaf_count": int(leaves.sum()),
                "node_count": int(self.node_count)}

    def to_dict(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"counts": [int(c) for c in self.counts[node]]}
        return {"feature": int(self.feature[node]),
                "threshold": float(self.threshold[node]),
                "left": self.to_dict(int(self.left[node])),
                "right": self.to_dict(int(self.right[node]))}

    def __eq__(self, other):
        if not isinstance(other, DecisionTree):
            return NotImplemented
        return serialize(self) == serialize(other)

    __hash__ = None


def predict(tree: DecisionTree, sample) -> int:
    return tree.predict(sample)


def describe(tree: DecisionTree) -> dict:
    return tree.describe()


def fit(train: Sequence[LabeledSample], schema: DatasetSchema,
        params: TreeParams = TreeParams()) -> DecisionTree:
    """Greedy CART with Gini impurity.

    Candidate thresholds are midpoints between consecutive distinct values;
    ties go to the lowest feature index, then the lowest threshold.
    """
    if not train:
        raise ValidationError("cannot fit a tree on an empty training set")
    X, y = to_arrays(train)
    if X.shape[1] != schema.feature_count:
        raise ValidationError("training samples do not match the schema width")
    n_classes = schema.n_classes
    feature, threshold, left, right, counts = [], [], [], [], []

    def grow(idx, depth):
        node = len(feature)
        node_counts = np.bincount(y[idx], minlength=n_classes)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(node_counts)
        if (depth >= params.max_depth or len(idx) < params.min_samples_split
                or np.count_nonzero(node_counts) <= 1):
            return node
        j, t, _ = kernels.best_split(X[idx], y[idx], n_classes)
        if j < 0:
            return node
        go_left = X[idx, j] <= t
        feature[node], threshold[node] = j, t
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return DecisionTree(feature, threshold, left, right, np.vstack(counts), schema, params)


def constant_tree(label: int, schema: DatasetSchema, params: TreeParams, weight: int = 1):
    counts = np.zeros((1, schema.n_classes), dtype=np.int64)
    counts[0, label] = weight
    return DecisionTree([-1], [0.0], [-1], [-1], counts, schema, params)


def tree_from_dict(root: dict, schema: DatasetSchema, params: TreeParams,
                   schema_ref: str = "") -> DecisionTree:
    feature, threshold, left, right, counts = [], [], [], [], []

    def walk(doc, path):
        if not isinstance(doc, dict):
            raise ModelFormatError("node must be an object", path)
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        if "counts" in doc:
            c = doc["counts"]
            if (not isinstance(c, list) or len(c) != schema.n_classes
                    or not all(isinstance(v, int) and v >= 0 for v in c) or sum(c) < 1):
                raise ModelFormatError(
                    f"counts must be {schema.n_classes} non-negative integers summing to >= 1", path)
            counts.append(c)
            return node
        missing = [k for k in ("feature", "threshold", "left", "right") if k not in doc]
        if missing:
            raise ModelFormatError(f"internal node missing {missing}", path)
        f, t = doc["feature"], doc["threshold"]
        if not isinstance(f, int) or not 0 <= f < schema.feature_count:
            raise ModelFormatError(f"feature index {f!r} out of range", path)
        if not isinstance(t, (int, float)) or isinstance(t, bool):
            raise ModelFormatError(f"threshold {t!r} is not a number", path)
        counts.append([0] * schema.n_classes)
        feature[node], threshold[node] = f, float(t)
        left[node] = walk(doc["left"], path + ".left")
        right[node] = walk(doc["right"], path + ".right")
        # internal counts are not stored in the document; rebuild from children
        counts[node] = [a + b for a, b in zip(counts[left[node]], counts[right[node]])]
        return node

    walk(root, "root")
    return DecisionTree(feature, threshold, left, right, np.array(counts), schema, params,
                        schema_ref)


def _node_text(node: dict) -> str:
    if "counts" in node:
        return '{"counts": [%s]}' % ", ".join(str(c) for c in node["counts"])
    return '{"feature": %d, "threshold": %s, "left": %s, "right": %s}' % (
        node["feature"], format(node["threshold"], ".17g"),
        _node_text(node["left"]), _node_text(node["right"]))


def serialize(tree: DecisionTree) -> str:
    """Model JSON text. Thresholds carry 17 significant digits."""
    return '{"params": %s, "schema_ref": %s, "root": %s}\n' % (
        json.dumps(tree.params.to_dict()), json.dumps(tree.schema_ref),
        _node_text(tree.to_dict()))


def deserialize(text: str, schema: DatasetSchema) -> DecisionTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON: {exc}", "document") from exc
    if not isinstance(doc, dict) or "root" not in doc:
        raise ModelFormatError("expected an object with a 'root' node", "document")
    try:
        params = TreeParams(**doc.get("params", {}))
    except TypeError as exc:
        raise ModelFormatError(f"bad params: {exc}", "params") from exc
    return tree_from_dict(doc["root"], schema, params, str(doc.get("schema_ref", "")))


def save(tree: DecisionTree, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(tree))


def load(path, schema: DatasetSchema) -> DecisionTree:
    with open(path, encoding="utf-8") as fh:
        return deserialize(fh.read(), schema)
