# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled tree kernels. See ``_pykernels`` for the reference semantics."""
import numpy as np
from libc.stdint cimport int64_t

BACKEND = "cython"


def predict_batch(const int64_t[::1] feature, const double[::1] threshold,
                  const int64_t[::1] left, const int64_t[::1] right,
                  const int64_t[::1] leaf_label, X):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t i, n = Xv.shape[0]
    cdef int64_t node
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if Xv[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            o[i] = leaf_label[node]
    return out


def best_split(X, y, Py_ssize_t n_classes):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const int64_t[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef Py_ssize_t n = Xv.shape[0], n_features = Xv.shape[1]
    cdef Py_ssize_t i, j, c, nl, nr
    cdef int64_t sl, sr, lcount, rcount
    cdef double a, b, score
    cdef Py_ssize_t best_feature = -1
    cdef double best_threshold = 0.0, best_score = -np.inf
    cdef const int64_t[::1] order
    cdef int64_t[::1] total = np.bincount(yv, minlength=n_classes).astype(np.int64)
    cdef int64_t[::1] lc = np.zeros(n_classes, dtype=np.int64)
    cdef int64_t sum_total = 0
    if n < 2:
        return (-1, 0.0, -np.inf)
    for c in range(n_classes):
        sum_total += total[c] * total[c]
    for j in range(n_features):
        order = np.argsort(np.asarray(Xv[:, j]), kind="mergesort").astype(np.int64)
        for c in range(n_classes):
            lc[c] = 0
        sl = 0
        sr = sum_total
        for i in range(n - 1):
            c = yv[order[i]]
            lcount = lc[c]
            rcount = total[c] - lcount
            sl += 2 * lcount + 1
            sr -= 2 * rcount - 1
            lc[c] = lcount + 1
            a = Xv[order[i], j]
            b = Xv[order[i + 1], j]
            if a == b:
                continue
            nl = i + 1
            nr = n - nl
            score = <double>sl / <double>nl + <double>sr / <double>nr
            if score > best_score:
                best_score = score
                best_feature = j
                best_threshold = (a + b) / 2.0
                if best_threshold == b:
                    best_threshold = a
    return (best_feature, best_threshold, best_score)
