"""Extraction metrics and the seed-count x query-budget experiment sweep."""
from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import datasets
from .attack import AttackConfig, extract
from .data import LabeledSample, load_dataset, sample_seeds, split, to_arrays
from .exceptions import ValidationError
from .explain import ExplainerConfig, build_discretizer
from .service import LocalOracle
from .tree import TreeParams, fit

log = logging.getLogger(__name__)

RESULT_COLUMNS = ["dataset", "seed_count", "budget", "budget_fraction", "repetition",
                  "acc_target", "acc_surrogate", "r_test", "queries", "stop_reason"]


def _labels(model, X):
    if hasattr(model, "predict_batch"):
        return np.asarray(model.predict_batch(X))
    return np.asarray(model(X))


def accuracy(model, test: Sequence[LabeledSample]) -> float:
    """Fraction of ``test`` the model labels correctly."""
    if not test:
        raise ValidationError("accuracy needs a non-empty test set")
    X, y = to_arrays(test)
    return float(np.mean(_labels(model, X) == y))


def r_test(target, surrogate, test_inputs) -> float:
    """Label agreement between two models on ``test_inputs``; true labels are ignored.

    ``target``/``surrogate`` are trees or callables mapping an ``(n, f)``
    array to labels. ``test_inputs`` may be samples or labeled samples.
    """
    if len(test_inputs) == 0:
        raise ValidationError("r_test needs at least one input")
    if isinstance(test_inputs[0], LabeledSample):
        X, _ = to_arrays(test_inputs)
    else:
        X = np.vstack([np.asarray(x, dtype=np.float64) for x in test_inputs])
    return float(np.mean(_labels(target, X) == _labels(surrogate, X)))


@dataclass
class EvalReport:
    accuracy_target: float
    accuracy_surrogate: float
    r_test: float
    queries: int
    seed_count: int = 0
    repetition_seed: int = 0
    dataset: str = ""
    budget: int = 0
    budget_fraction: float = 0.0
    stop_reason: str = ""
    seed_queries: int = 0
    constant_surrogate: bool = False

    def to_dict(self):
        return asdict(self)


@dataclass
class SweepConfig:
    data_path: str
    schema_path: str
    dataset: str = ""
    train_fraction: float = 0.4
    target_params: TreeParams = field(default_factory=TreeParams)
    seed_counts: list = field(default_factory=lambda: [50])
    budgets: list = field(default_factory=lambda: [250])
    repetitions: int = 1
    base_seed: int = 0
    attack: AttackConfig = field(default_factory=AttackConfig)
    explainer: ExplainerConfig = field(default_factory=ExplainerConfig)
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValidationError("repetitions must be >= 1")
        if not self.budgets or any(b <= 0 for b in self.budgets):
            raise ValidationError("budgets must be positive")
        if list(self.budgets) != sorted(self.budgets):
            raise ValidationError("budgets must be ascending")
        if any(s < 0 for s in self.seed_counts):
            raise ValidationError("seed counts must be >= 0")

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> "SweepConfig":
        doc = dict(doc)
        for key in ("data", "schema"):
            if key in doc:
                doc[key + "_path"] = str(_resolve(doc.pop(key), base_dir))
        if "target_params" in doc:
            doc["target_params"] = TreeParams(**doc["target_params"])
        if "attack" in doc:
            doc["attack"] = AttackConfig(**doc["attack"])
        if "explainer" in doc:
            doc["explainer"] = ExplainerConfig(**doc["explainer"])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ValidationError(f"bad sweep config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "SweepConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)


def _resolve(ref: str, base_dir) -> Path:
    if ref.startswith("builtin:"):
        return datasets.path(ref[len("builtin:"):])
    p = Path(ref)
    return p if p.is_absolute() else Path(base_dir) / p


def run_cell(config: SweepConfig, schema, data, seed_count: int, budget: int,
             repetition: int) -> EvalReport:
    """One repetition of one (seed_count, budget) cell.

    The split, the target and the attacker's seeds depend only on the
    repetition seed, so cells of the same repetition share a target.
    """
    seed = config.base_seed + repetition
    train, test = split(data, config.train_fraction, seed)
    target = fit(train, schema, config.target_params)
    disc = build_discretizer(train, schema)
    oracle = LocalOracle(target, disc, replace(config.explainer, rng_seed=seed), "per_call")
    seeds = sample_seeds(train, seed_count // schema.n_classes, seed, schema.n_classes)
    attack_cfg = replace(config.attack, max_queries=budget, rng_seed=seed)
    surrogate, trace = extract(oracle, seeds, schema, config.target_params, attack_cfg)
    X, y = to_arrays(test)
    t_pred = target.predict_batch(X)
    s_pred = surrogate.predict_batch(X)
    return EvalReport(
        accuracy_target=float(np.mean(t_pred == y)),
        accuracy_surrogate=float(np.mean(s_pred == y)),
        r_test=float(np.mean(t_pred == s_pred)),
        queries=trace.queries,
        seed_count=seed_count,
        repetition_seed=seed,
        dataset=config.dataset,
        budget=budget,
        budget_fraction=budget / len(train),
        stop_reason=trace.stop_reason,
        seed_queries=trace.seed_queries,
        constant_surrogate=len({v.label for v in trace.visited}) < 2,
    )


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _row(report: EvalReport, repetition) -> list:
    return [report.dataset, report.seed_count, report.budget, report.budget_fraction,
            repetition, report.accuracy_target, report.accuracy_surrogate, report.r_test,
            report.queries, report.stop_reason]


def run_experiment(config: SweepConfig) -> list[list]:
    """Run every (seed_count, budget, repetition) cell and return result rows.

    Rows follow :data:`RESULT_COLUMNS`: per-repetition rows for each cell,
    then a ``mean`` and a ``std`` aggregate row. A failing cell becomes an
    error row and the sweep continues.
    """
    schema, data = load_dataset(config.data_path, config.schema_path)
    cells = [(s, b, r) for s in config.seed_counts for b in config.budgets
             for r in range(config.repetitions)]

    def run(cell):
        s, b, r = cell
        try:
            return run_cell(config, schema, data, s, b, r)
        except Exception as exc:  # noqa: BLE001
            log.exception("cell %s failed", cell)
            return exc

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]

    rows = []
    by_cell = {}
    for (s, b, r), res in zip(cells, results):
        if isinstance(res, Exception):
            rows.append([config.dataset, s, b, "", r, "", "", "", "", f"error: {res}"])
            continue
        rows.append(_row(res, r))
        by_cell.setdefault((s, b), []).append(res)
    for s in config.seed_counts:
        for b in config.budgets:
            reps = by_cell.get((s, b))
            if not reps:
                continue
            metrics = np.array([[r.accuracy_target, r.accuracy_surrogate, r.r_test, r.queries]
                                for r in reps], dtype=np.float64)
            mean = metrics.mean(axis=0)
            std = metrics.std(axis=0, ddof=1) if len(reps) > 1 else np.zeros(4)
            frac = reps[0].budget_fraction
            for name, vals in (("mean", mean), ("std", std)):
                rows.append([config.dataset, s, b, frac, name] + [float(v) for v in vals] + [""])
    return rows


def results_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_results(rows, path):
    Path(path).write_text(results_to_csv(rows), encoding="utf-8")


def aggregate(rows, stat="mean") -> dict:
    """``{(seed_count, budget): {column: value}}`` for the aggregate rows."""
    out = {}
    for row in rows:
        if row[4] == stat:
            rec = dict(zip(RESULT_COLUMNS, row))
            out[(rec["seed_count"], rec["budget"])] = rec
    return out

