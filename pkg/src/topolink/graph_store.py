"""Timestamped edge lists and immutable per-cutoff graph snapshots.

Snapshots use a compressed sparse row layout: one contiguous pool of
neighbor ids (``indices``) with per-node offset ranges (``indptr``).  Each
neighbor range is sorted and free of duplicates, which lets pair features
be computed with linear merges.
"""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

EDGE_MAGIC = b"LFEL"
EDGE_VERSION = 1
_EDGE_DTYPE = np.dtype([("u", "<u4"), ("v", "<u4"), ("t", "<i8")])


class GraphError(ValueError):
    """Raised for malformed edge files or invalid node ids."""


class EdgeParseError(GraphError):
    def __init__(self, path, lineno, line, reason):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {reason}: {line.strip()!r}")


@dataclass(frozen=True)
class TemporalEdgeList:
    """Undirected timestamped edges with ``u < v`` on every record."""

    u: np.ndarray
    v: np.ndarray
    t: np.ndarray
    n_nodes: int
    raw_records: int = 0
    self_loops_dropped: int = 0

    def __post_init__(self):
        for arr in (self.u, self.v, self.t):
            arr.setflags(write=False)

    def __len__(self):
        return len(self.u)

    @classmethod
    def from_records(cls, records, n_nodes=None):
        """Build from an ``(m, 3)`` integer array-like of ``(u, v, t)``.

        Self-loops are dropped with a warning and each record is oriented
        so that ``u < v``.  Duplicates are kept; they collapse at snapshot
        time.
        """
        arr = np.asarray(records, dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, 3)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise GraphError(f"expected (m, 3) records, got shape {arr.shape}")
        if arr.shape[0] and arr[:, :2].min() < 0:
            bad = int(np.flatnonzero((arr[:, :2] < 0).any(axis=1))[0])
            raise GraphError(f"negative node id in record {bad}: {arr[bad].tolist()}")
        inferred = int(arr[:, :2].max()) + 1 if arr.shape[0] else 0
        if n_nodes is None:
            n_nodes = inferred
        elif n_nodes < inferred:
            raise GraphError(f"n_nodes={n_nodes} but record references node {inferred - 1}")
        loops = arr[:, 0] == arr[:, 1]
        n_loops = int(loops.sum())
        if n_loops:
            logger.warning("dropped %d self-loop record(s)", n_loops)
        keep = arr[~loops]
        lo = np.minimum(keep[:, 0], keep[:, 1])
        hi = np.maximum(keep[:, 0], keep[:, 1])
        return cls(
            u=lo.astype(np.int64),
            v=hi.astype(np.int64),
            t=keep[:, 2].copy(),
            n_nodes=int(n_nodes),
            raw_records=int(arr.shape[0]),
            self_loops_dropped=n_loops,
        )

    @property
    def duplicate_records(self):
        if len(self) == 0:
            return 0
        keys = self.u * self.n_nodes + self.v
        return int(len(keys) - len(np.unique(keys)))

    @property
    def t_min(self):
        return int(self.t.min()) if len(self) else None

    @property
    def t_max(self):
        return int(self.t.max()) if len(self) else None

    def summary(self):
        return {
            "nodes": self.n_nodes,
            "raw_records": self.raw_records,
            "self_loops_dropped": self.self_loops_dropped,
            "duplicate_records": self.duplicate_records,
        }

    def records(self):
        return np.column_stack([self.u, self.v, self.t])


def _parse_slow(path, delimiter):
    # Only reached when the fast loader fails; finds the offending line.
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split(delimiter) if delimiter else stripped.replace("\t", ",").split(",")
            if len(parts) != 3:
                raise EdgeParseError(path, lineno, line, f"expected 3 fields, got {len(parts)}")
            try:
                u, v, t = (int(p) for p in parts)
            except ValueError:
                raise EdgeParseError(path, lineno, line, "non-integer field") from None
            if u < 0 or v < 0:
                raise GraphError(f"{path}:{lineno}: negative node id: {stripped!r}")
            rows.append((u, v, t))
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


def _read_binary_edges(path):
    with open(path, "rb") as fh:
        head = fh.read(13)
        if len(head) < 13 or head[:4] != EDGE_MAGIC:
            raise GraphError(f"{path}: not a binary edge file (bad magic)")
        version = head[4]
        if version != EDGE_VERSION:
            raise GraphError(f"{path}: unsupported edge file version {version}")
        (count,) = struct.unpack("<Q", head[5:13])
        data = np.frombuffer(fh.read(), dtype=_EDGE_DTYPE)
    if len(data) != count:
        raise GraphError(f"{path}: header says {count} records, found {len(data)}")
    return np.column_stack([data["u"].astype(np.int64), data["v"].astype(np.int64), data["t"]])


def ingest(path, format="csv"):
    """Read an edge file into a :class:`TemporalEdgeList`.

    Text files hold one ``u,v,t`` record per line (comma or tab separated,
    ``#`` comment lines ignored).  ``format="binary"`` reads the packed
    ``LFEL`` layout written by :func:`write_binary_edges`.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if format == "binary":
        return TemporalEdgeList.from_records(_read_binary_edges(path))
    if format not in ("csv", "tsv"):
        raise GraphError(f"unknown edge format {format!r}")
    delimiter = "\t" if format == "tsv" else ","
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        if "\t" in text and delimiter == ",":
            raise ValueError("mixed separators")
        arr = np.loadtxt(
            path, delimiter=delimiter, comments="#", dtype=np.int64, ndmin=2, encoding="utf-8"
        )
        if arr.size == 0:
            arr = arr.reshape(0, 3)
        if arr.shape[1] != 3:
            raise ValueError("wrong field count")
    except ValueError:
        arr = _parse_slow(path, None if delimiter == "," else delimiter)
    return TemporalEdgeList.from_records(arr)


def write_binary_edges(edges: TemporalEdgeList, path):
    data = np.empty(len(edges), dtype=_EDGE_DTYPE)
    data["u"], data["v"], data["t"] = edges.u, edges.v, edges.t
    with open(path, "wb") as fh:
        fh.write(EDGE_MAGIC + bytes([EDGE_VERSION]) + struct.pack("<Q", len(data)))
        fh.write(data.tobytes())


def write_csv_edges(edges: TemporalEdgeList, path):
    np.savetxt(path, edges.records(), fmt="%d", delimiter=",", header="u,v,t")


def load_label_map(path):
    """Read one external concept name per line; line ``i`` names node ``i``."""
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


@dataclass(frozen=True)
class Snapshot:
    """Graph induced by all edges with ``t <= cutoff``.

    Build with :func:`snapshot`; instances are read-only and safe to share
    between threads.
    """

    cutoff: int
    indptr: np.ndarray
    indices: np.ndarray
    n_nodes: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_nodes", len(self.indptr) - 1)
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @cached_property
    def degree(self):
        deg = np.diff(self.indptr)
        deg.setflags(write=False)
        return deg

    @property
    def n_edges(self):
        return len(self.indices) // 2

    def neighbors(self, u):
        self._check(u)
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def _check(self, u):
        if not 0 <= u < self.n_nodes:
            raise IndexError(f"node id {u} out of range [0, {self.n_nodes})")

    def is_connected(self, u, v):
        self._check(u)
        self._check(v)
        if u == v:
            return False
        nbrs = self.indices[self.indptr[u] : self.indptr[u + 1]]
        i = np.searchsorted(nbrs, v)
        return bool(i < len(nbrs) and nbrs[i] == v)

    def connected_many(self, us, vs):
        """Vectorized :meth:`is_connected` over aligned id arrays."""
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        if len(us) == 0:
            return np.zeros(0, dtype=bool)
        for arr in (us, vs):
            if arr.min() < 0 or arr.max() >= self.n_nodes:
                raise IndexError("node id out of range")
        keys = self._directed_keys
        q = us * self.n_nodes + vs
        pos = np.searchsorted(keys, q)
        pos_c = np.minimum(pos, max(len(keys) - 1, 0))
        hit = (pos < len(keys)) & (keys[pos_c] == q) if len(keys) else np.zeros(len(q), bool)
        return hit & (us != vs)

    @cached_property
    def _directed_keys(self):
        # Neighbor lists concatenated in node order are globally sorted by
        # the key u * n + v, so one searchsorted answers any batch of queries.
        keys = np.repeat(np.arange(self.n_nodes, dtype=np.int64), self.degree) * self.n_nodes
        keys += self.indices
        keys.setflags(write=False)
        return keys

    def edge_keys(self):
        """Sorted ``u * n + v`` keys of edges with ``u < v``."""
        src = np.repeat(np.arange(self.n_nodes, dtype=np.int64), self.degree)
        mask = src < self.indices
        return src[mask] * self.n_nodes + self.indices[mask]

    def stats(self):
        deg = self.degree
        return {
            "cutoff": int(self.cutoff),
            "nodes": int(self.n_nodes),
            "edges": int(self.n_edges),
            "isolated": int((deg == 0).sum()),
            "max_degree": int(deg.max()) if len(deg) else 0,
            "mean_degree": float(deg.mean()) if len(deg) else 0.0,
        }


def snapshot(edges: TemporalEdgeList, cutoff: int) -> Snapshot:
    n = edges.n_nodes
    mask = edges.t <= cutoff
    u, v = edges.u[mask], edges.v[mask]
    keys = np.unique(np.concatenate([u * n + v, v * n + u]))
    src = keys // n if n else keys
    dst = (keys % n if n else keys).astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    if len(src):
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return Snapshot(cutoff=int(cutoff), indptr=indptr, indices=dst)


def is_connected(s: Snapshot, u, v):
    return s.is_connected(u, v)


def num_possible_pairs(n):
    """Number of unordered node pairs, ``n * (n - 1) / 2``."""
    n = int(n)
    if n < 0:
        raise ValueError("node count must be non-negative")
    result = n * (n - 1) // 2
    if result >= 2**63:
        raise OverflowError(f"pair count for n={n} exceeds 63 bits")
    return result


@dataclass(frozen=True)
class SnapshotWindow:
    """Three feature snapshots, newest first, plus the label snapshot cutoff."""

    snapshots: tuple
    label_cutoff: int

    def __post_init__(self):
        if len(self.snapshots) != 3:
            raise ValueError("a window holds exactly 3 snapshots")
        c = [s.cutoff for s in self.snapshots]
        if not c[0] > c[1] > c[2]:
            raise ValueError(f"snapshot cutoffs must be strictly decreasing, got {c}")
        if not self.label_cutoff > c[0]:
            raise ValueError("label cutoff must follow the newest feature snapshot")
        if len({s.n_nodes for s in self.snapshots}) != 1:
            raise ValueError("snapshots disagree on node count")

    @classmethod
    def from_edges(cls, edges, cutoffs, label_cutoff):
        cutoffs = sorted(cutoffs, reverse=True)
        return cls(tuple(snapshot(edges, c) for c in cutoffs), int(label_cutoff))

    @property
    def newest(self):
        return self.snapshots[0]

    @property
    def cutoffs(self):
        return [s.cutoff for s in self.snapshots]


def summary_json(edges: TemporalEdgeList):
    return json.dumps(edges.summary(), sort_keys=True)
