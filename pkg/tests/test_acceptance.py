"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the "acceptance criteria" section of the pytest
terminal summary (see conftest.py).
"""
import logging
import threading
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from conftest import free_port, integer_schema, stump
from treextract.attack import AttackConfig, extract, traverse
from treextract.data import LabeledSample, as_sample, sample_seeds, synth_tree_dataset
from treextract.evaluation import SweepConfig, aggregate, r_test, results_to_csv, run_experiment
from treextract.explain import (ExplainerConfig, build_discretizer, discretizer_from_array,
                                explain, fit_local, kernel_weight, perturb)
from treextract.service import LocalOracle, RemoteOracle, ServiceConfig, serve
from treextract.tree import TreeParams, deserialize, fit, gini, serialize

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

pytestmark = pytest.mark.slow


def record(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def german_runs():
    """The German Credit sweep, run twice with the same base seed."""
    cfg = SweepConfig.load(CONFIGS / "german_credit.json")
    t0 = time.perf_counter()
    first = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    second = run_experiment(SweepConfig.load(CONFIGS / "german_credit.json"))
    return cfg, first, second, elapsed


# 1 ------------------------------------------------------------------------------------

def test_c1_exact_recovery_on_integer_domains():
    rng = np.random.default_rng(12345)
    t0 = time.perf_counter()
    exact, failures = 0, []
    logging.disable(logging.WARNING)
    try:
        for i in range(50):
            depth, f, dom = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(2, 17))
            seed = int(rng.integers(2**31))
            tree, schema, data = synth_tree_dataset(depth, f, dom, seed)
            oracle = LocalOracle(tree, build_discretizer(data, schema))
            n = len(data)
            surrogate, _ = extract(oracle, sample_seeds(data, 1, seed, schema.n_classes), schema,
                                   tree.params, AttackConfig(n, n, max_queries=4 * n, rng_seed=seed))
            X = np.vstack([d.sample for d in data])
            agree = r_test(tree, surrogate, X)
            if agree == 1.0:
                exact += 1
            else:
                failures.append((depth, f, dom, round(agree, 3)))
    finally:
        logging.disable(logging.NOTSET)
    elapsed = time.perf_counter() - t0
    ok = exact == 50 and elapsed < 60
    record(1, ok, f"{exact}/50 synthetic targets recovered exactly in {elapsed:.1f}s "
                  f"(need 50/50, <60s); misses (depth, features, domain, agreement): {failures[:8]}")
    assert ok


# 2 and 4 --------------------------------------------------------------------------------

def test_c2_german_credit(german_runs):
    cfg, rows, _, elapsed = german_runs
    mean = aggregate(rows)[(50, 250)]
    reps = [r for r in rows if isinstance(r[4], int)]
    ok = (len(reps) == 10 and mean["r_test"] >= 0.65 and mean["acc_surrogate"] >= 0.58
          and all(r[8] <= 250 for r in reps) and elapsed < 300)
    record(2, ok, f"mean r_test {mean['r_test']:.3f} (>=0.65), mean surrogate accuracy "
                  f"{mean['acc_surrogate']:.3f} (>=0.58), target accuracy {mean['acc_target']:.3f}, "
                  f"{len(reps)} reps in {elapsed:.1f}s (<300s)")
    assert ok


def test_c4_query_efficiency(german_runs):
    _, rows, _, _ = german_runs
    queries = [r[8] for r in rows if isinstance(r[4], int)]
    worst, avg = max(queries), float(np.mean(queries))
    ok = worst <= 250
    record(4, ok, f"max billed queries {worst} (<=250), mean {avg:.1f}; "
                  f"<=215 reference {'met' if worst <= 215 else 'NOT met'} (informational)")
    assert ok


# 3 ------------------------------------------------------------------------------------

def test_c3_iris():
    cfg = SweepConfig.load(CONFIGS / "iris.json")
    t0 = time.perf_counter()
    rows = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    reps = [dict(zip(("r_test", "queries"), (r[7], r[8]))) for r in rows if isinstance(r[4], int)]
    mean = float(np.mean([r["r_test"] for r in reps]))
    worst = min(r["r_test"] for r in reps)
    ok = (len(reps) == 10 and mean >= 0.90 and all(r["queries"] <= 300 for r in reps)
          and elapsed < 60)
    record(3, ok, f"mean r_test {mean:.3f} (>=0.90, min single rep {worst:.3f}), "
                  f"{len(reps)} reps in {elapsed:.1f}s (<60s)")
    assert ok


# 5 ------------------------------------------------------------------------------------

def test_c5_budget_trend():
    cfg = SweepConfig.load(CONFIGS / "german_budget_sweep.json")
    rows = run_experiment(cfg)
    means = aggregate(rows)
    budgets = sorted(b for (_, b) in means)
    curve = [means[(cfg.seed_counts[0], b)]["r_test"] for b in budgets]
    ok = budgets == [50, 100, 200, 400] and all(b >= a - 0.03 for a, b in zip(curve, curve[1:]))
    record(5, ok, "r_test by budget " + ", ".join(f"{b}: {v:.3f}" for b, v in zip(budgets, curve))
                  + " (non-decreasing within 0.03)")
    assert ok


# 6 ------------------------------------------------------------------------------------

def test_c6_metric_identities(german):
    schema, data = german
    t = fit(data[:400], schema, TreeParams(max_depth=11))
    X = [d.sample for d in data]
    same = r_test(t, t, X)

    seen, clean = {}, []
    for d in data:
        if seen.setdefault(tuple(d.sample), d.label) == d.label:
            clean.append(d)
    memo = fit(clean, schema, TreeParams(max_depth=10_000))
    acc = float(np.mean(memo.predict_batch(np.vstack([d.sample for d in clean]))
                        == [d.label for d in clean]))
    g = gini([5, 5])
    ok = same == 1.0 and acc == 1.0 and g == 0.5
    record(6, ok, f"r_test(M, M) = {same!r}, memorizing accuracy = {acc!r}, gini([5,5]) = {g!r}")
    assert ok


# 7 ------------------------------------------------------------------------------------

def _dense_wls(Z, t, w, lam):
    n, f = Z.shape
    A = np.hstack([np.ones((n, 1)), Z])
    W = np.diag(w)
    P = lam * np.eye(f + 1)
    P[0, 0] = 0.0  # intercept is not penalized
    return np.linalg.solve(A.T @ W @ A + P, A.T @ W @ t)[1:]


def test_c7_explainer_correctness():
    schema = integer_schema(4, 0, 100)
    target = stump(schema, 50, feature=2)
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 101, size=(200, 4)).astype(float)
        disc = discretizer_from_array(X, schema)
        center = rng.integers(0, 101, size=4).astype(float)
        exp = explain(target.predict_batch, center, disc, ExplainerConfig(rng_seed=seed))
        hits += exp.terms[0].feature == 2

    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(20):
        n, f = int(rng.integers(20, 120)), int(rng.integers(1, 6))
        Z = rng.integers(0, 2, size=(n, f)).astype(float)
        t = rng.integers(0, 2, size=n).astype(float)
        w = kernel_weight(Z, float(rng.uniform(0.5, 2.0)))
        lam = float(rng.uniform(0.1, 2.0))
        got = dict(fit_local(Z, t, w, top_k=f, ridge_lambda=lam))
        want = _dense_wls(Z, t, w, lam)
        worst = max(worst, float(np.max(np.abs([got[j] - want[j] for j in range(f)]))))
    ok = hits >= 95 and worst <= 1e-8
    record(7, ok, f"split feature ranked first in {hits}/100 runs (>=95); "
                  f"max |coef - dense WLS| = {worst:.2e} (<=1e-8)")
    assert ok


# 8 ------------------------------------------------------------------------------------

def test_c8_http_matches_local(iris, tmp_path):
    schema, data = iris
    model = fit(data, schema, TreeParams(max_depth=3))
    path = tmp_path / "m.json"
    path.write_text(serialize(model))
    model = deserialize(path.read_text(), schema)
    disc = build_discretizer(data, schema)
    explainer = ExplainerConfig(num_perturbations=300)
    seeds = sample_seeds(data, 1, 5, 3)
    cfg = AttackConfig(1000, 1000, max_queries=120, rng_seed=5)

    local = traverse(seeds, LocalOracle(model, disc, explainer), schema, cfg)
    with serve(model, disc, ServiceConfig(port=free_port(), explainer=explainer)) as handle:
        remote_oracle = RemoteOracle(handle.url)
        remote = traverse(seeds, remote_oracle, schema, cfg)
        served = handle.oracle.queries_used()
    ok = local.key() == remote.key() and local.queries == remote.queries == served
    record(8, ok, f"local {local.queries} queries / {len(local.visited)} visits, HTTP "
                  f"{remote.queries} queries / {len(remote.visited)} visits, server billed {served}; "
                  f"traces {'identical' if local.key() == remote.key() else 'differ'}")
    assert ok


# 9 ------------------------------------------------------------------------------------

def test_c9_sweep_determinism(german_runs):
    _, first, second, _ = german_runs
    a, b = results_to_csv(first), results_to_csv(second)
    ok = a.encode() == b.encode()
    record(9, ok, f"two runs of the German Credit sweep: {len(a.encode())} bytes each, "
                  f"{'byte-identical' if ok else 'differ'}")
    assert ok
