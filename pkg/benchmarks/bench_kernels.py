"""Time the compiled and numpy tree kernels on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5]

Reports the best wall time per kernel and the speedup. Also checks that
both backends return identical results on every input it times.
"""
import argparse
import time

import numpy as np

from treextract import _pykernels, datasets
from treextract.data import to_arrays

try:
    from treextract import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def fit_with(backend, X, y, n_classes, max_depth):
    """Recursive CART driven by one backend's best_split, mirroring tree.fit."""
    nodes = 0

    def grow(idx, depth):
        nonlocal nodes
        nodes += 1
        if depth == max_depth or len(idx) < 2 or np.all(y[idx] == y[idx[0]]):
            return
        f, t, _ = backend.best_split(X[idx], y[idx], n_classes)
        if f < 0:
            return
        mask = X[idx, f] <= t
        grow(idx[mask], depth + 1)
        grow(idx[~mask], depth + 1)

    grow(np.arange(len(y)), 0)
    return nodes


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rows", type=int, default=200_000, help="rows for the predict benchmark")
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    from treextract.tree import TreeParams, fit
    schema, data = datasets.load("german_numeric")
    X, y = to_arrays(data)
    tree = fit(data, schema, TreeParams(max_depth=11))
    rng = np.random.default_rng(0)
    Xbig = X[rng.integers(len(X), size=args.rows)]
    arrays = (tree.feature, tree.threshold, tree.left, tree.right, tree.leaf_label)

    cases = [
        (f"predict_batch ({args.rows} rows)",
         lambda b: b.predict_batch(*arrays, Xbig), np.array_equal),
        ("best_split (German, 1000x24)",
         lambda b: b.best_split(X, y, 2), lambda a, c: a == c),
        ("full fit (German, depth 11)",
         lambda b: fit_with(b, X, y, 2, 11), lambda a, c: a == c),
    ]
    print(f"{'kernel':34s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, run, same in cases:
        tp, op = best_of(lambda: run(_pykernels), args.repeat)
        tc, oc = best_of(lambda: run(_ckernels), args.repeat)
        assert same(op, oc), f"backends disagree on {name}"
        print(f"{name:34s} {tp * 1e3:11.2f} {tc * 1e3:12.2f} {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
