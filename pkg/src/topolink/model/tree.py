"""CART classification trees with Gini impurity.

A fitted tree is a set of flat node arrays.  Internal nodes store a feature
index and a threshold (rows with ``x <= threshold`` go left); leaves store
feature ``-1`` and the fraction of positive rows in ``value``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

LEAF = -1
_NO_LIMIT = np.iinfo(np.int64).max


@dataclass
class Tree:
    feature: np.ndarray  # int32, LEAF for leaves
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32 child index, 0 for leaves
    right: np.ndarray
    value: np.ndarray  # positive fraction at every node

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.empty(len(X))
        _predict_tree(self.feature, self.threshold, self.left, self.right, self.value, X, out)
        return out


@numba.njit(nogil=True, cache=True)
def _midpoint(a, b):
    m = a + (b - a) / 2.0
    if m >= b:
        m = a
    return m


@numba.njit(nogil=True, cache=True)
def _grow(X, y, rows, max_features, max_depth, min_split, min_leaf, seed):
    np.random.seed(seed)
    n_feat = X.shape[1]
    idx = rows.copy()
    n = len(idx)
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap)
    left = np.zeros(cap, dtype=np.int32)
    right = np.zeros(cap, dtype=np.int32)
    value = np.zeros(cap)

    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    top = 0
    st_start[0], st_end[0], st_depth[0], st_node[0] = 0, n, 0, 0
    top = 1
    n_nodes = 1

    feats = np.arange(n_feat)
    vals = np.empty(n)
    labs = np.empty(n)
    tmp = np.empty(n, dtype=rows.dtype)

    while top > 0:
        top -= 1
        start, end, depth, node = st_start[top], st_end[top], st_depth[top], st_node[top]
        m = end - start
        pos = 0.0
        for i in range(start, end):
            pos += y[idx[i]]
        value[node] = pos / m
        threshold[node] = value[node]
        if m < min_split or m < 2 * min_leaf or pos == 0.0 or pos == m or depth >= max_depth:
            continue

        best_score = -1.0
        best_f = -1
        best_t = 0.0
        for k in range(max_features):
            j = k + np.random.randint(0, n_feat - k)
            f = feats[j]
            feats[j] = feats[k]
            feats[k] = f
            for i in range(m):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals[:m], kind="mergesort")
            sv = vals[:m][order]
            if sv[0] == sv[m - 1]:
                continue
            for i in range(m):
                labs[i] = y[idx[start + order[i]]]
            pl = 0.0
            for i in range(1, m):
                pl += labs[i - 1]
                if sv[i] == sv[i - 1]:
                    continue
                nl = i
                nr = m - i
                if nl < min_leaf or nr < min_leaf:
                    continue
                pr = pos - pl
                # maximizing this is minimizing the size-weighted Gini
                score = (pl * pl + (nl - pl) * (nl - pl)) / nl + (pr * pr + (nr - pr) * (nr - pr)) / nr
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_t = _midpoint(sv[i - 1], sv[i])
        if best_f < 0:
            continue

        # stable partition of idx[start:end]
        nl = 0
        for i in range(start, end):
            if X[idx[i], best_f] <= best_t:
                tmp[nl] = idx[i]
                nl += 1
        k = nl
        for i in range(start, end):
            if not X[idx[i], best_f] <= best_t:
                tmp[k] = idx[i]
                k += 1
        for i in range(m):
            idx[start + i] = tmp[i]

        feature[node] = best_f
        threshold[node] = best_t
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        st_start[top], st_end[top], st_depth[top], st_node[top] = start + nl, end, depth + 1, rc
        top += 1
        st_start[top], st_end[top], st_depth[top], st_node[top] = start, start + nl, depth + 1, lc
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@numba.njit(nogil=True, cache=True)
def _predict_tree(feature, threshold, left, right, value, X, out):
    for r in range(X.shape[0]):
        i = 0
        while feature[i] != -1:
            if X[r, feature[i]] <= threshold[i]:
                i = left[i]
            else:
                i = right[i]
        out[r] = value[i]


def fit_tree(X, y, max_features=None, max_depth=None, min_samples_split=2, min_samples_leaf=1,
             seed=0, rows=None) -> Tree:
    """Fit one CART tree.

    ``rows`` selects (possibly repeated) training rows, e.g. a bootstrap
    sample; by default every row is used once.  ``seed`` drives the per-node
    feature subsampling; pass a value in ``[0, 2**32)``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("fit_tree needs a non-empty 2-D feature matrix")
    if len(y) != len(X):
        raise ValueError("X and y disagree on row count")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be binary 0/1")
    p = X.shape[1]
    max_features = p if max_features is None else int(max_features)
    if not 1 <= max_features <= p:
        raise ValueError(f"max_features must lie in [1, {p}]")
    rows = np.arange(len(X), dtype=np.int64) if rows is None else np.asarray(rows, dtype=np.int64)
    depth = _NO_LIMIT if max_depth is None else int(max_depth)
    arrays = _grow(X, y, rows, max_features, depth, int(min_samples_split), int(min_samples_leaf), int(seed))
    return Tree(*arrays)
