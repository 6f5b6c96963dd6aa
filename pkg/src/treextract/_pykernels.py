"""Pure numpy implementations of the tree kernels.

Used when the compiled ``_ckernels`` extension is unavailable or when
``TREEXTRACT_PURE_PYTHON`` is set. Arithmetic mirrors the Cython code
operation for operation so both backends choose identical splits.
"""
import numpy as np

BACKEND = "python"


def predict_batch(feature, threshold, left, right, leaf_label, X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = np.flatnonzero(feature[node] >= 0)
    while active.size:
        nd = node[active]
        go_left = X[active, feature[nd]] <= threshold[nd]
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[feature[node[active]] >= 0]
    return leaf_label[node]


def best_split(X, y, n_classes):
    """Best ``x[:, j] <= t`` split by weighted Gini.

    Returns ``(feature, threshold, score)`` where ``score`` is
    ``sum(l_c^2)/n_l + sum(r_c^2)/n_r`` (higher is purer). ``feature`` is -1
    when no feature has two distinct values.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, n_features = X.shape
    best = (-1, 0.0, -np.inf)
    if n < 2:
        return best
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    for j in range(n_features):
        order = np.argsort(X[:, j], kind="mergesort")
        xs = X[order, j]
        cut = np.flatnonzero(xs[:-1] != xs[1:])
        if cut.size == 0:
            continue
        onehot[:] = 0
        onehot[np.arange(n), y[order]] = 1
        cum = np.cumsum(onehot, axis=0)
        lc = cum[cut]
        rc = cum[-1] - lc
        nl = cut + 1
        nr = n - nl
        score = (lc * lc).sum(axis=1) / nl + (rc * rc).sum(axis=1) / nr
        k = int(np.argmax(score))
        if score[k] > best[2]:
            a, b = xs[cut[k]], xs[cut[k] + 1]
            t = (a + b) / 2.0
            if t == b:
                t = a
            best = (j, float(t), float(score[k]))
    return best
