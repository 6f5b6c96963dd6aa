"""LIME-style tabular explanations for a label-only classifier.

Numeric features are discretized into quartile bins learned from training
data. Perturbations keep or resample each feature's bin with probability
1/2, are weighted by an exponential kernel on the number of changed bins,
and a ridge regression of "same label as the center" on the bin-agreement
bits ranks the features.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .data import CONTINUOUS, INTEGER, DatasetSchema, LabeledSample, to_arrays
from .exceptions import NumericError, ValidationError

PredictBatch = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ExplainerConfig:
    num_perturbations: int = 1000
    kernel_width: float | None = None   # None: 0.75 * sqrt(n_features)
    top_k: int | None = None            # None: min(n_features, 5)
    ridge_lambda: float = 1.0
    rng_seed: int = 0

    def resolve(self, n_features: int) -> "ExplainerConfig":
        cfg = replace(
            self,
            kernel_width=0.75 * math.sqrt(n_features) if self.kernel_width is None else float(self.kernel_width),
            top_k=min(n_features, 5) if self.top_k is None else int(self.top_k),
        )
        if cfg.top_k < 1:
            raise ValidationError("top_k must be >= 1")
        if cfg.num_perturbations < cfg.top_k + 1:
            raise ValidationError("num_perturbations must be >= top_k + 1")
        if cfg.kernel_width <= 0:
            raise ValidationError("kernel_width must be positive")
        if cfg.ridge_lambda < 0:
            raise ValidationError("ridge_lambda must be >= 0")
        return cfg

    def to_dict(self):
        return {"num_perturbations": self.num_perturbations, "kernel_width": self.kernel_width,
                "top_k": self.top_k, "ridge_lambda": self.ridge_lambda, "rng_seed": self.rng_seed}


@dataclass(frozen=True)
class Term:
    feature: int
    weight: float
    lower: float | None = None     # None encodes -inf, or not applicable
    upper: float | None = None     # None encodes +inf, or not applicable
    category: int | None = None

    def contains(self, value: float) -> bool:
        if self.category is not None:
            return int(value) == self.category
        return ((self.lower is None or value > self.lower)
                and (self.upper is None or value <= self.upper))

    def to_dict(self):
        return {"feature": self.feature, "weight": self.weight, "lower": self.lower,
                "upper": self.upper, "category": self.category}


@dataclass(frozen=True)
class Explanation:
    predicted_label: int
    terms: tuple[Term, ...] = field(default_factory=tuple)

    def to_dict(self):
        return {"label": self.predicted_label, "terms": [t.to_dict() for t in self.terms]}

    @classmethod
    def from_dict(cls, doc) -> "Explanation":
        def num(v):
            return None if v is None else float(v)
        terms = tuple(
            Term(int(t["feature"]), float(t["weight"]), num(t.get("lower")), num(t.get("upper")),
                 None if t.get("category") is None else int(t["category"]))
            for t in doc["terms"])
        return cls(int(doc["label"]), terms)


@dataclass(frozen=True)
class Discretizer:
    """Quartile bins per numeric feature.

    Bin ``b`` of a feature with sorted distinct cuts ``c`` is ``(c[b-1], c[b]]``
    with open ends at the extremes. Only bins that intersect the observed
    training range can be sampled.
    """
    schema: DatasetSchema
    quartiles: tuple          # (q1, q2, q3) per numeric feature, None for categorical
    cuts: tuple               # distinct sorted cut points, None for categorical
    train_min: np.ndarray
    train_max: np.ndarray

    def n_bins(self, j: int) -> int:
        if self.cuts[j] is None:
            return len(self.schema.features[j].categories)
        return len(self.cuts[j]) + 1

    def bin_of(self, j: int, value: float) -> int:
        if self.cuts[j] is None:
            return int(value)
        return int(np.searchsorted(self.cuts[j], value, side="left"))

    def interval(self, j: int, b: int):
        c = self.cuts[j]
        lo = None if b == 0 else float(c[b - 1])
        hi = None if b == len(c) else float(c[b])
        return lo, hi

    def sampling_range(self, j: int, b: int):
        """Inclusive value range of bin ``b`` inside the training range, or None if empty."""
        if self.cuts[j] is None:
            return (float(b), float(b))
        lo_cut, hi_cut = self.interval(j, b)
        mn, mx = self.train_min[j], self.train_max[j]
        if self.schema.features[j].kind == INTEGER:
            lo = math.ceil(mn) if lo_cut is None else max(math.floor(lo_cut) + 1, math.ceil(mn))
            hi = math.floor(mx) if hi_cut is None else min(math.floor(hi_cut), math.floor(mx))
            return (float(lo), float(hi)) if lo <= hi else None
        lo = mn if lo_cut is None else max(lo_cut, mn)
        hi = mx if hi_cut is None else min(hi_cut, mx)
        if lo < hi or (lo == hi and (lo_cut is None or lo > lo_cut)):
            return (float(lo), float(hi))
        return None

    def occupied_bins(self, j: int) -> list[int]:
        return [b for b in range(self.n_bins(j)) if self.sampling_range(j, b) is not None]


def quartiles(values) -> tuple[float, float, float]:
    q = np.percentile(np.asarray(values, dtype=np.float64), [25, 50, 75], method="linear")
    return tuple(float(v) for v in q)


def build_discretizer(train: Sequence[LabeledSample], schema: DatasetSchema) -> Discretizer:
    if not train:
        raise ValidationError("cannot build a discretizer from an empty training set")
    X, _ = to_arrays(train)
    return discretizer_from_array(X, schema)


def discretizer_from_array(X: np.ndarray, schema: DatasetSchema) -> Discretizer:
    qs, cuts = [], []
    for j, spec in enumerate(schema.features):
        if spec.is_categorical:
            qs.append(None)
            cuts.append(None)
            continue
        q = quartiles(X[:, j])
        qs.append(q)
        c = np.unique(np.array(q))
        c.flags.writeable = False
        cuts.append(c)
    return Discretizer(schema, tuple(qs), tuple(cuts), X.min(axis=0), X.max(axis=0))


def discretizer_to_dict(disc: Discretizer) -> dict:
    return {"quartiles": [None if q is None else list(q) for q in disc.quartiles],
            "train_min": disc.train_min.tolist(), "train_max": disc.train_max.tolist()}


def discretizer_from_dict(doc: dict, schema: DatasetSchema) -> Discretizer:
    qs, cuts = [], []
    for q in doc["quartiles"]:
        if q is None:
            qs.append(None)
            cuts.append(None)
        else:
            qs.append(tuple(float(v) for v in q))
            cuts.append(np.unique(np.array(q, dtype=np.float64)))
    if len(qs) != schema.feature_count:
        raise ValidationError("discretizer does not match the schema width")
    return Discretizer(schema, tuple(qs), tuple(cuts),
                       np.array(doc["train_min"], dtype=np.float64),
                       np.array(doc["train_max"], dtype=np.float64))


def perturb(center, disc: Discretizer, n: int, rng_seed: int = 0):
    """Return ``(points, agreement)`` arrays of shape ``(n, n_features)``.

    Row 0 is the unmodified center. ``agreement[i, j]`` is 1 when point ``i``
    shares the center's bin (or category) on feature ``j``.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    center = np.asarray(center, dtype=np.float64)
    rng = np.random.default_rng(rng_seed)
    f = center.shape[0]
    points = np.empty((n, f))
    agree = np.ones((n, f), dtype=np.int8)
    for j in range(f):
        spec = disc.schema.features[j]
        own = disc.bin_of(j, center[j])
        others = [b for b in disc.occupied_bins(j) if b != own]
        keep = rng.random(n) < 0.5
        pick = rng.integers(len(others), size=n) if others else np.zeros(n, dtype=np.int64)
        u = rng.random(n)
        keep[0] = True
        if not others:
            keep[:] = True
        bins = np.where(keep, own, np.asarray(others or [own])[pick])
        agree[:, j] = keep
        col = np.empty(n)
        for b in np.unique(bins):
            rows = bins == b
            rng_b = disc.sampling_range(j, int(b))
            if rng_b is None:  # center sits outside the training range
                col[rows] = center[j]
            elif spec.kind == CONTINUOUS:
                lo, hi = rng_b
                col[rows] = lo + u[rows] * (hi - lo)
            else:
                lo, hi = rng_b
                col[rows] = np.minimum(lo + np.floor(u[rows] * (hi - lo + 1)), hi)
        col[0] = center[j]
        points[:, j] = col
    return points, agree


def kernel_weight(agreement, kernel_width: float):
    """``exp(-d^2 / w^2)`` where ``d^2`` counts disagreeing features. Works row-wise on 2-D input."""
    if kernel_width <= 0:
        raise ValidationError("kernel_width must be positive")
    a = np.asarray(agreement)
    d2 = (1 - a).sum(axis=-1)
    return np.exp(-d2 / kernel_width**2)


def _weighted_ridge(Z, t, w, lam):
    sw = w.sum()
    Zc = Z - (w @ Z) / sw
    tc = t - (w @ t) / sw
    Zw = Zc * w[:, None]
    A = Zw.T @ Zc + lam * np.eye(Z.shape[1])
    b = Zw.T @ tc
    if lam == 0 and np.linalg.matrix_rank(A) < A.shape[0]:
        raise NumericError("singular normal matrix; use ridge_lambda > 0")
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"{exc}; use ridge_lambda > 0") from exc


def fit_local(agreement, target, weights, top_k: int, ridge_lambda: float = 1.0):
    """Weighted ridge fit with an unpenalized intercept, keep the ``top_k``
    largest coefficients, refit on those.

    Returns ``[(feature_index, weight), ...]`` sorted by ``|weight|`` descending.
    """
    Z = np.asarray(agreement, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != t.shape[0] or Z.shape[0] != w.shape[0]:
        raise ValidationError("agreement, target and weights must have matching lengths")
    if Z.shape[0] < top_k + 1:
        raise ValidationError("need at least top_k + 1 points")
    top_k = min(top_k, Z.shape[1])
    if np.all(t == t[0]):
        # nothing to explain; avoid rounding noise from the centered solve
        return [(j, 0.0) for j in range(top_k)]
    coef = _weighted_ridge(Z, t, w, ridge_lambda)
    selected = np.argsort(-np.abs(coef), kind="stable")[:top_k]
    refit = _weighted_ridge(Z[:, selected], t, w, ridge_lambda)
    order = np.argsort(-np.abs(refit), kind="stable")
    return [(int(selected[i]), float(refit[i])) for i in order]


def explain(predict_batch: PredictBatch, center, disc: Discretizer,
            config: ExplainerConfig = ExplainerConfig()) -> Explanation:
    """Explain the label ``predict_batch`` assigns to ``center``.

    Issues ``num_perturbations + 1`` predictions: one for the center's label,
    then the perturbation batch (whose row 0 is the center).
    """
    cfg = config.resolve(disc.schema.feature_count)
    center = np.asarray(center, dtype=np.float64)
    label = int(predict_batch(center[None, :])[0])
    points, agree = perturb(center, disc, cfg.num_perturbations, cfg.rng_seed)
    same = (np.asarray(predict_batch(points)) == label).astype(np.float64)
    weights = kernel_weight(agree, cfg.kernel_width)
    terms = []
    for j, w in fit_local(agree, same, weights, cfg.top_k, cfg.ridge_lambda):
        if disc.cuts[j] is None:
            terms.append(Term(j, w, category=int(center[j])))
        else:
            lo, hi = disc.interval(j, disc.bin_of(j, center[j]))
            terms.append(Term(j, w, lo, hi))
    return Explanation(label, tuple(terms))
