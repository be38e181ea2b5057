"""Brute-force reference implementations used only by the tests.

Everything here works from explicit Python sets or exhaustive enumeration
and shares no code with the package.
"""
import itertools
import math

import numpy as np


def neighbor_sets(n, edge_pairs):
    nbrs = [set() for _ in range(n)]
    for u, v in edge_pairs:
        if u != v:
            nbrs[u].add(v)
            nbrs[v].add(u)
    return nbrs


def random_graph(rng, n, p):
    pairs = [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < p]
    return pairs


def pair_oracle(nbrs, u, v):
    """All pair and per-node features from explicit neighbor sets."""
    nu, nv = nbrs[u], nbrs[v]
    du, dv = len(nu), len(nv)
    common = nu & nv
    union = nu | nv
    cn = len(common)
    gc = cn * cn / (du * dv) if du * dv else 0.0
    return {
        "DC1": du,
        "DC2": dv,
        "TN": du + dv,
        "CN": cn,
        "JC": cn / len(union) if union else 0.0,
        "SC": cn / min(du, dv) if min(du, dv) else 0.0,
        "GC": gc,
        "CC": math.sqrt(gc),
        "AA": sum(1 / math.log(len(nbrs[w])) for w in common),
        "RA": sum(1 / len(nbrs[w]) for w in common),
        "PA": du * dv,
        "AD1": avg_degree_oracle(nbrs, u),
        "AD2": avg_degree_oracle(nbrs, v),
        "CI1": clustering_oracle(nbrs, u),
        "CI2": clustering_oracle(nbrs, v),
    }


def avg_degree_oracle(nbrs, u):
    if not nbrs[u]:
        return 0.0
    return sum(len(nbrs[w]) for w in nbrs[u]) / len(nbrs[u])


def clustering_oracle(nbrs, u):
    """Edges among N(u) by testing every neighbor pair (quadratic)."""
    d = len(nbrs[u])
    if d < 2:
        return 0.0
    links = sum(1 for a, b in itertools.combinations(sorted(nbrs[u]), 2) if b in nbrs[a])
    return 2 * links / (d * (d - 1))


def pairwise_auc(scores, labels):
    """Wins plus half ties over every positive-negative pair."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    twice = 0
    for p in pos:
        for q in neg:
            twice += 2 if p > q else (1 if p == q else 0)
    return twice / (2 * len(pos) * len(neg))


def jacobi_eigh(a, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix."""
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt((np.tril(a, -1) ** 2).sum())
        if off < tol * max(1.0, np.abs(np.diag(a)).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    return np.diag(a).copy(), v


def brute_root_split(X, y, min_leaf=1):
    """Lowest size-weighted Gini over every feature and midpoint threshold."""
    n = len(y)
    best = math.inf
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for a, b in zip(vals[:-1], vals[1:]):
            t = a + (b - a) / 2
            left = X[:, f] <= t
            nl, nr = left.sum(), n - left.sum()
            if nl < min_leaf or nr < min_leaf:
                continue
            imp = 0.0
            for mask, m in ((left, nl), (~left, nr)):
                p = y[mask].mean()
                imp += m * (1 - p * p - (1 - p) ** 2)
            best = min(best, imp)
    return best


def gini_of_split(X, y, feature, threshold):
    left = X[:, feature] <= threshold
    imp = 0.0
    for mask in (left, ~left):
        m = mask.sum()
        p = y[mask].mean()
        imp += m * (1 - p * p - (1 - p) ** 2)
    return imp
