"""Candidate pair generation and balanced, reproducible sampling.

All randomness comes from numpy's PCG64 bit generator seeded with a 64-bit
integer, so samples reproduce across platforms.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numba
import numpy as np

from .graph_store import Snapshot

TRAIN, HOLDOUT = "train", "holdout"


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class SamplingConfig:
    min_degree: int = 10
    max_candidates: int | None = None
    seed: int = 0
    balance: bool = True
    two_band: bool = False

    def __post_init__(self):
        if self.min_degree < 0:
            raise ValueError("min_degree must be >= 0")
        if self.max_candidates is not None and self.max_candidates < 0:
            raise ValueError("max_candidates must be >= 0")


@dataclass
class PairSample:
    """Column-oriented set of labeled pairs (``u < v`` on every row)."""

    u: np.ndarray
    v: np.ndarray
    label: np.ndarray
    split: np.ndarray  # object array of "train"/"holdout"

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.int64)
        self.v = np.asarray(self.v, dtype=np.int64)
        self.label = np.asarray(self.label, dtype=np.int8)
        if self.split is None:
            self.split = np.full(len(self.u), TRAIN, dtype=object)
        self.split = np.asarray(self.split, dtype=object)

    def __len__(self):
        return len(self.u)

    @property
    def pairs(self):
        return np.column_stack([self.u, self.v])

    @property
    def n_pos(self):
        return int(self.label.sum())

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return PairSample(self.u[idx], self.v[idx], self.label[idx], self.split[idx])

    def where_split(self, name):
        return self.take(np.flatnonzero(self.split == name))

    def with_split(self, name):
        return PairSample(self.u, self.v, self.label, np.full(len(self), name, dtype=object))

    @staticmethod
    def concat(parts):
        parts = list(parts)
        if not parts:
            return PairSample([], [], [], [])
        return PairSample(
            np.concatenate([p.u for p in parts]),
            np.concatenate([p.v for p in parts]),
            np.concatenate([p.label for p in parts]),
            np.concatenate([p.split for p in parts]),
        )


def write_samples(sample: PairSample, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "label", "split"])
        for row in zip(sample.u.tolist(), sample.v.tolist(), sample.label.tolist(), sample.split.tolist()):
            w.writerow(row)


def read_samples(path) -> PairSample:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    return PairSample(
        [int(r["u"]) for r in rows],
        [int(r["v"]) for r in rows],
        [int(r["label"]) for r in rows],
        [r["split"] for r in rows],
    )


# --- candidate stream ------------------------------------------------------


@numba.njit(nogil=True, cache=True)
def _row_candidates(indptr, indices, nodes, band, i, out_v):
    """Fill ``out_v`` with unconnected partners of ``nodes[i]`` from ``nodes[i+1:]``."""
    u = nodes[i]
    k = 0
    p = indptr[u]
    end = indptr[u + 1]
    for j in range(i + 1, len(nodes)):
        v = nodes[j]
        while p < end and indices[p] < v:
            p += 1
        if p < end and indices[p] == v:
            continue
        if band[v] == band[u]:
            out_v[k] = v
            k += 1
    return k


def _eligibility(s: Snapshot, cfg: SamplingConfig):
    deg = s.degree
    high = deg >= cfg.min_degree
    if not cfg.two_band:
        return high, np.zeros(s.n_nodes, dtype=np.int8)
    low = (deg >= 1) & (deg < cfg.min_degree)
    return high | low, high.astype(np.int8)


def iter_candidate_blocks(s: Snapshot, cfg: SamplingConfig, block=1 << 20):
    """Yield ``(us, vs)`` array blocks of candidate pairs in ascending order.

    Candidates are the unconnected pairs ``u < v`` whose endpoints both have
    degree ``>= cfg.min_degree`` in ``s``.  With ``cfg.two_band`` the pairs
    whose endpoints both fall in ``1 <= degree < min_degree`` are merged in.
    Memory stays bounded by ``block`` plus one node's row.
    """
    eligible, band = _eligibility(s, cfg)
    nodes = np.flatnonzero(eligible)
    cap = cfg.max_candidates
    emitted = 0
    buf_v = np.empty(s.n_nodes, dtype=np.int64)
    us_parts, vs_parts, held = [], [], 0
    for i, u in enumerate(nodes):
        k = _row_candidates(s.indptr, s.indices, nodes, band, i, buf_v)
        if k == 0:
            continue
        if cap is not None:
            k = min(k, cap - emitted)
        us_parts.append(np.full(k, u, dtype=np.int64))
        vs_parts.append(buf_v[:k].copy())
        held += k
        emitted += k
        if held >= block:
            yield np.concatenate(us_parts), np.concatenate(vs_parts)
            us_parts, vs_parts, held = [], [], 0
        if cap is not None and emitted >= cap:
            break
    if held:
        yield np.concatenate(us_parts), np.concatenate(vs_parts)


def candidate_pairs(s: Snapshot, cfg: SamplingConfig):
    """Stream candidate ``(u, v)`` tuples; see :func:`iter_candidate_blocks`."""
    for us, vs in iter_candidate_blocks(s, cfg):
        yield from zip(us.tolist(), vs.tolist())


def count_candidates(s: Snapshot, cfg: SamplingConfig):
    return sum(len(us) for us, _ in iter_candidate_blocks(s, cfg))


# --- labeling and sampling -------------------------------------------------


def label_pairs(pairs, label_snapshot: Snapshot):
    """Label each pair by whether it is an edge of ``label_snapshot``."""
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    lab = label_snapshot.connected_many(arr[:, 0], arr[:, 1]).astype(np.int8)
    return PairSample(arr[:, 0], arr[:, 1], lab, None)


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def _draw_negatives(n_neg, n_pos, seed):
    if n_pos < 1:
        raise SamplingError("balanced undersampling needs at least one positive pair")
    if n_neg < n_pos:
        raise SamplingError(f"only {n_neg} negatives for {n_pos} positives")
    # Sorted ranks into the negative stream so selection can run as a
    # second streaming pass.
    return np.sort(_rng(seed).choice(n_neg, size=n_pos, replace=False))


def balanced_undersample(labeled: PairSample, seed) -> PairSample:
    """Keep every positive and a uniform draw of as many negatives.

    Negatives are drawn without replacement; rows keep their input order.
    """
    pos = np.flatnonzero(labeled.label == 1)
    neg = np.flatnonzero(labeled.label == 0)
    chosen = neg[_draw_negatives(len(neg), len(pos), seed)]
    return labeled.take(np.sort(np.concatenate([pos, chosen])))


def sample_window(feature_snapshot: Snapshot, label_snapshot: Snapshot, cfg: SamplingConfig):
    """Two-pass streaming version of candidates -> labels -> balanced sample.

    Gives the same rows as ``balanced_undersample(label_pairs(all
    candidates), cfg.seed)`` without holding the candidate set in memory.
    Returns ``(sample, stats)``.
    """
    n_pos = n_neg = 0
    for us, vs in iter_candidate_blocks(feature_snapshot, cfg):
        hit = label_snapshot.connected_many(us, vs)
        n_pos += int(hit.sum())
        n_neg += int(len(hit) - hit.sum())
    stats = {"candidates": n_pos + n_neg, "positives": n_pos, "negatives": n_neg}
    if not cfg.balance:
        parts = []
        for us, vs in iter_candidate_blocks(feature_snapshot, cfg):
            parts.append(PairSample(us, vs, label_snapshot.connected_many(us, vs), None))
        return PairSample.concat(parts), stats
    ranks = _draw_negatives(n_neg, n_pos, cfg.seed)
    parts = []
    seen_neg = 0
    for us, vs in iter_candidate_blocks(feature_snapshot, cfg):
        hit = label_snapshot.connected_many(us, vs)
        neg_idx = np.flatnonzero(~hit)
        lo, hi = np.searchsorted(ranks, [seen_neg, seen_neg + len(neg_idx)])
        keep = np.zeros(len(us), dtype=bool)
        keep[hit] = True
        keep[neg_idx[ranks[lo:hi] - seen_neg]] = True
        seen_neg += len(neg_idx)
        parts.append(PairSample(us[keep], vs[keep], hit[keep], None))
    return PairSample.concat(parts), stats


def subsample_balanced(sample: PairSample, k_per_class, seed) -> PairSample:
    """Uniform draw of ``k_per_class`` rows from each label class."""
    rng = _rng(seed)
    picked = []
    for cls in (0, 1):
        idx = np.flatnonzero(sample.label == cls)
        if len(idx) < k_per_class:
            raise SamplingError(f"class {cls} has {len(idx)} rows, fewer than {k_per_class}")
        picked.append(rng.choice(idx, size=k_per_class, replace=False))
    return sample.take(np.sort(np.concatenate(picked)))


def holdout_split(sample: PairSample, holdout_fraction, seed):
    """Stratified split; returns ``(train, holdout)`` with split tags set."""
    if not 0.0 <= holdout_fraction <= 1.0:
        raise ValueError("holdout_fraction must lie in [0, 1]")
    rng = _rng(seed)
    hold = np.zeros(len(sample), dtype=bool)
    for cls in (0, 1):
        idx = np.flatnonzero(sample.label == cls)
        k = int(round(holdout_fraction * len(idx)))
        hold[rng.permutation(idx)[:k]] = True
    train = sample.take(np.flatnonzero(~hold)).with_split(TRAIN)
    holdout = sample.take(np.flatnonzero(hold)).with_split(HOLDOUT)
    return train, holdout
