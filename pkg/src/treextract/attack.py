"""Explanation-guided traversal that collects a surrogate training set.

Each visited sample is explained by the target; for every feature the
explanation cites, the traversal proposes copies of the sample that differ
only in that feature, pushed just outside the cited interval. Visits are
capped per predicted class and the run stops once every class has more than
``lower_bound`` visits, the frontier empties, or the query budget is spent.
"""
from __future__ import annotations

import csv
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .data import (CONTINUOUS, INTEGER, DatasetSchema, LabeledSample,
                   format_value, random_sample)
from .exceptions import ProtocolError, TransportError, ValidationError
from .explain import Explanation
from .tree import DecisionTree, TreeParams, fit

log = logging.getLogger(__name__)

BUDGET_EXHAUSTED = "budget_exhausted"
FRONTIER_EMPTY = "frontier_empty"
BOUNDS_SATISFIED = "bounds_satisfied"
ORACLE_ERROR = "oracle_error"


@dataclass(frozen=True)
class AttackConfig:
    lower_bound: int = 1        # keep going while any class has <= this many visits
    upper_bound: int = 100      # record at most this many visits per class
    epsilon: float | None = None  # None: 1% of each continuous feature's range
    integer_step: int = 1
    discipline: str = "lifo"
    max_queries: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.lower_bound <= self.upper_bound:
            raise ValidationError("need 0 <= lower_bound <= upper_bound")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if self.integer_step < 1:
            raise ValidationError("integer_step must be >= 1")
        if self.discipline not in ("lifo", "fifo"):
            raise ValidationError(f"unknown frontier discipline {self.discipline!r}")
        if self.max_queries < 1:
            raise ValidationError("max_queries must be >= 1")


class ParsedTerm(NamedTuple):
    feature: int
    lower: float | None = None
    upper: float | None = None
    category: int | None = None


class Visit(NamedTuple):
    sample: np.ndarray
    label: int
    query_index: int
    parent_index: int      # query index of the sample this one was derived from, -1 for seeds
    changed_feature: int   # -1 for seeds


@dataclass
class AttackTrace:
    visited: list[Visit]
    n_visits: list[int]
    queries: int
    stop_reason: str
    frontier_residue: list[np.ndarray] = field(default_factory=list)
    seed_queries: int = 0
    error: str | None = None

    @property
    def samples(self) -> list[LabeledSample]:
        return [LabeledSample(v.sample, v.label) for v in self.visited]

    def key(self):
        """Hashable summary used to compare runs."""
        return (tuple((sample_key(v.sample), v.label, v.query_index, v.parent_index,
                       v.changed_feature) for v in self.visited),
                tuple(self.n_visits), self.queries, self.stop_reason)


def sample_key(x) -> tuple:
    return tuple(np.round(np.asarray(x, dtype=np.float64), 9).tolist())


def parse_explanation(explanation: Explanation, schema: DatasetSchema | None = None) -> list[ParsedTerm]:
    """Feature conditions of an explanation, strongest first, zero-weight terms dropped."""
    terms = sorted(explanation.terms, key=lambda t: -abs(t.weight))
    out = []
    for t in terms:
        if t.weight == 0:
            continue
        if schema is not None and schema.features[t.feature].is_categorical:
            out.append(ParsedTerm(t.feature, category=t.category))
        elif t.category is not None:
            out.append(ParsedTerm(t.feature, category=t.category))
        else:
            out.append(ParsedTerm(t.feature, t.lower, t.upper))
    return out


def _epsilon(spec, config: AttackConfig) -> float:
    return config.epsilon if config.epsilon is not None else 0.01 * (spec.upper - spec.lower)


def generate_candidates(current, parsed: Sequence[ParsedTerm], schema: DatasetSchema,
                        config: AttackConfig) -> list[tuple[np.ndarray, int]]:
    """Single-feature variants of ``current`` just outside each cited interval.

    Returns ``(sample, changed_feature)`` pairs in term order, the variant
    below an interval before the one above it. Variants outside the schema
    bounds are skipped.
    """
    current = np.asarray(current, dtype=np.float64)
    out = []

    def emit(j, v):
        x = current.copy()
        x[j] = v
        x += 0.0
        x.flags.writeable = False
        out.append((x, j))

    for term in parsed:
        j = term.feature
        spec = schema.features[j]
        if spec.is_categorical:
            cur = int(current[j]) if term.category is None else term.category
            for c in range(len(spec.categories)):
                if c != cur:
                    emit(j, float(c))
            continue
        below = above = None
        if spec.kind == INTEGER:
            # nearest integers outside (lower, upper], widened by integer_step - 1
            if term.lower is not None:
                below = float(math.floor(term.lower) - (config.integer_step - 1))
            if term.upper is not None:
                above = float(math.floor(term.upper) + config.integer_step)
        else:
            eps = _epsilon(spec, config)
            if term.lower is not None:
                below = term.lower - eps
            if term.upper is not None:
                above = term.upper + eps
        if below is not None and below >= spec.lower:
            emit(j, below)
        if above is not None and above <= spec.upper:
            emit(j, above)
    return out


def traverse(seeds: Sequence, oracle, schema: DatasetSchema, config: AttackConfig) -> AttackTrace:
    """Run the explanation-guided traversal against ``oracle``.

    With no seeds, a single uniformly random valid sample starts the search.
    Oracle transport/protocol failures end the run with a partial trace.
    """
    if not seeds:
        seeds = [random_sample(schema, config.rng_seed)]
    frontier = deque()
    in_frontier = set()
    for s in seeds:
        x = schema.validate_sample(s)
        k = sample_key(x)
        if k not in in_frontier:
            in_frontier.add(k)
            frontier.append((x, -1, -1))

    queried = set()
    visited: list[Visit] = []
    n_visits = [0] * schema.n_classes
    start = oracle.queries_used()
    used = 0
    cost = getattr(oracle, "explain_cost", 1)
    seed_queries = 0
    query_index = 0
    error = None
    pop = frontier.pop if config.discipline == "lifo" else frontier.popleft

    while (frontier and any(v <= config.lower_bound for v in n_visits)
           and used + cost <= config.max_queries):
        current, parent, changed = pop()
        key = sample_key(current)
        in_frontier.discard(key)
        try:
            exp = oracle.explain(current)
            now = oracle.queries_used() - start
        except (TransportError, ProtocolError) as exc:
            error = str(exc)
            log.error("oracle failure after %d queries: %s", used, exc)
            frontier.append((current, parent, changed))
            break
        cost, used = max(now - used, 1), now
        queried.add(key)
        if parent < 0:
            seed_queries += 1
        label = exp.predicted_label
        if n_visits[label] < config.upper_bound:
            n_visits[label] += 1
            visited.append(Visit(current, label, query_index, parent, changed))
            for cand, j in generate_candidates(current, parse_explanation(exp, schema), schema, config):
                k = sample_key(cand)
                if k not in in_frontier and k not in queried:
                    in_frontier.add(k)
                    frontier.append((cand, query_index, j))
        query_index += 1

    if error is not None:
        reason = ORACLE_ERROR
    elif not any(v <= config.lower_bound for v in n_visits):
        reason = BOUNDS_SATISFIED
    elif frontier:
        reason = BUDGET_EXHAUSTED
    else:
        reason = FRONTIER_EMPTY
    return AttackTrace(visited, n_visits, used, reason,
                       [f[0] for f in frontier], seed_queries, error)


def extract(oracle, seeds: Sequence, schema: DatasetSchema, target_params: TreeParams,
            config: AttackConfig) -> tuple[DecisionTree, AttackTrace]:
    """Traverse, then fit a surrogate with the target's hyperparameters on the visited samples.

    A trace covering fewer than two classes yields a single-leaf surrogate.
    """
    trace = traverse(seeds, oracle, schema, config)
    if not trace.visited:
        from .tree import constant_tree
        log.warning("no samples visited; surrogate is a constant classifier")
        return constant_tree(0, schema, target_params), trace
    if len({v.label for v in trace.visited}) < 2:
        log.warning("trace covers a single class; surrogate is a constant classifier")
    return fit(trace.samples, schema, target_params), trace


def write_trace(path, trace: AttackTrace, schema: DatasetSchema):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query_index"] + [f.name for f in schema.features]
                   + ["predicted_label", "parent_index", "changed_feature"])
        for v in trace.visited:
            changed = schema.features[v.changed_feature].name if v.changed_feature >= 0 else ""
            w.writerow([v.query_index]
                       + [format_value(x, spec) for x, spec in zip(v.sample, schema.features)]
                       + [v.label, v.parent_index, changed])
