"""Bagged random forest over CART trees, plus its binary model file."""
from __future__ import annotations

import hashlib
import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numba
import numpy as np

from .tree import LEAF, Tree, fit_tree

MODEL_MAGIC = b"LFRF"
MODEL_VERSION = 1
NODE_DTYPE = np.dtype([("feature", "<i4"), ("threshold", "<f8"), ("left", "<u4"), ("right", "<u4")])


class ModelFileError(ValueError):
    pass


@dataclass(frozen=True)
class ForestConfig:
    """Random-forest hyperparameters.

    The defaults (1250 trees, unlimited depth, min split 7, min leaf 5) are
    tuned for link prediction on the 19 reduced features.
    """

    n_estimators: int = 1250
    max_depth: int | None = None
    min_samples_split: int = 7
    min_samples_leaf: int = 5
    max_features: str | int = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")

    def resolve_max_features(self, n_features):
        if self.max_features == "sqrt":
            return max(1, math.isqrt(n_features))
        if self.max_features in ("all", None):
            return n_features
        return int(self.max_features)

    def to_dict(self):
        return asdict(self)


def tree_seeds(seed, index):
    """Bootstrap generator and 32-bit node-sampling seed for tree ``index``."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))
    return rng, int(rng.integers(0, 2**32))


@dataclass
class ForestModel:
    trees: list
    config: ForestConfig
    n_features: int
    feature_names: tuple = ()
    reducer_json: str | None = None

    def __post_init__(self):
        self._packed = None

    @property
    def reducer_hash(self):
        if self.reducer_json is None:
            return None
        return hashlib.sha256(self.reducer_json.encode()).hexdigest()

    def _pack(self):
        if self._packed is None:
            sizes = np.array([t.n_nodes for t in self.trees], dtype=np.int64)
            offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
            np.cumsum(sizes, out=offsets[1:])
            self._packed = (
                np.concatenate([t.feature for t in self.trees]).astype(np.int32),
                np.concatenate([t.threshold for t in self.trees]),
                np.concatenate([t.left for t in self.trees]).astype(np.int32),
                np.concatenate([t.right for t in self.trees]).astype(np.int32),
                np.concatenate([t.value for t in self.trees]),
                offsets,
            )
        return self._packed

    def predict_proba(self, X, threads=1, n_trees=None):
        """Mean positive-leaf fraction over the first ``n_trees`` trees."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns")
        feat, thr, lft, rgt, val, offs = self._pack()
        k = len(self.trees) if n_trees is None else int(n_trees)
        if not 1 <= k <= len(self.trees):
            raise ValueError(f"n_trees must lie in [1, {len(self.trees)}]")
        out = np.empty(len(X))
        if len(X) == 0:
            return out
        spans = [(0, len(X))] if threads <= 1 else [
            (a, min(a + 8192, len(X))) for a in range(0, len(X), 8192)
        ]

        def work(a, b):
            _predict_forest(feat, thr, lft, rgt, val, offs, k, X[a:b], out[a:b])

        if len(spans) == 1:
            work(*spans[0])
        else:
            with ThreadPoolExecutor(threads) as pool:
                for f in [pool.submit(work, a, b) for a, b in spans]:
                    f.result()
        return out


@numba.njit(nogil=True, cache=True)
def _predict_forest(feature, threshold, left, right, value, offsets, n_trees, X, out):
    for r in range(X.shape[0]):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            i = 0
            while feature[base + i] != -1:
                if X[r, feature[base + i]] <= threshold[base + i]:
                    i = left[base + i]
                else:
                    i = right[base + i]
            acc += value[base + i]
        out[r] = acc / n_trees


def _fit_one(X, y, cfg, index, max_features):
    rng, node_seed = tree_seeds(cfg.seed, index)
    rows = rng.integers(0, len(X), size=len(X)) if cfg.bootstrap else None
    return fit_tree(
        X, y,
        max_features=max_features,
        max_depth=cfg.max_depth,
        min_samples_split=cfg.min_samples_split,
        min_samples_leaf=cfg.min_samples_leaf,
        seed=node_seed,
        rows=rows,
    )


def fit_forest(X, y, cfg: ForestConfig | None = None, threads=1, feature_names=(), reducer_json=None):
    """Fit ``cfg.n_estimators`` trees, each on its own bootstrap sample.

    Tree ``i`` draws all of its randomness from ``(cfg.seed, i)``, so the
    forest does not depend on ``threads``.
    """
    cfg = cfg or ForestConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("fit_forest needs a non-empty 2-D feature matrix")
    mf = cfg.resolve_max_features(X.shape[1])
    if threads <= 1:
        trees = [_fit_one(X, y, cfg, i, mf) for i in range(cfg.n_estimators)]
    else:
        with ThreadPoolExecutor(threads) as pool:
            trees = list(pool.map(lambda i: _fit_one(X, y, cfg, i, mf), range(cfg.n_estimators)))
    return ForestModel(trees, cfg, X.shape[1], tuple(feature_names), reducer_json)


def predict_proba(model: ForestModel, X, threads=1):
    return model.predict_proba(X, threads=threads)


# --- model file ------------------------------------------------------------


def _encode_tree(t: Tree):
    rec = np.zeros(t.n_nodes, dtype=NODE_DTYPE)
    rec["feature"] = t.feature
    leaf = t.feature == LEAF
    rec["threshold"] = np.where(leaf, t.value, t.threshold)
    rec["left"] = np.where(leaf, 0, t.left)
    rec["right"] = np.where(leaf, 0, t.right)
    return rec


def _decode_tree(rec):
    feature = rec["feature"].astype(np.int32)
    leaf = feature == LEAF
    left = rec["left"].astype(np.int32)
    right = rec["right"].astype(np.int32)
    threshold = rec["threshold"].astype(np.float64)
    value = np.zeros(len(rec))
    value[leaf] = threshold[leaf]
    # internal-node fractions are not part of the file format
    return Tree(feature, threshold, left, right, value)


def model_bytes(model: ForestModel) -> bytes:
    header = {
        "config": model.config.to_dict(),
        "n_features": model.n_features,
        "feature_names": list(model.feature_names),
        "n_trees": len(model.trees),
        "reducer_hash": model.reducer_hash,
        "reducer": model.reducer_json,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MODEL_MAGIC, bytes([MODEL_VERSION]), struct.pack("<Q", len(head)), head]
    for t in model.trees:
        parts.append(struct.pack("<I", t.n_nodes))
        parts.append(_encode_tree(t).tobytes())
    return b"".join(parts)


def save_model(model: ForestModel, path):
    with open(path, "wb") as fh:
        fh.write(model_bytes(model))


def load_model(path) -> ForestModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MODEL_MAGIC:
        raise ModelFileError(f"{path}: not a forest model file (bad magic)")
    if len(blob) < 13 or blob[4] != MODEL_VERSION:
        raise ModelFileError(f"{path}: unsupported model file version {blob[4] if len(blob) > 4 else None}")
    (hlen,) = struct.unpack_from("<Q", blob, 5)
    pos = 13
    header = json.loads(blob[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    trees = []
    for _ in range(header["n_trees"]):
        (n,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        rec = np.frombuffer(blob, dtype=NODE_DTYPE, count=n, offset=pos)
        pos += n * NODE_DTYPE.itemsize
        trees.append(_decode_tree(rec))
    if pos != len(blob):
        raise ModelFileError(f"{path}: trailing bytes after last tree")
    cfg = ForestConfig(**header["config"])
    reducer_json = header.get("reducer")
    if reducer_json is not None:
        if hashlib.sha256(reducer_json.encode()).hexdigest() != header["reducer_hash"]:
            raise ModelFileError(f"{path}: reducer hash mismatch")
    return ForestModel(trees, cfg, header["n_features"], tuple(header["feature_names"]), reducer_json)
