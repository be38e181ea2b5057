"""Low-order topological features of node pairs.

Twelve feature families are computed per snapshot: degree centrality (DC),
total neighbors (TN), common neighbors (CN), Jaccard (JC), Simpson (SC),
geometric (GC), cosine (CC), Adamic-Adar (AA), resource allocation (RA),
preferential attachment (PA), average neighbor degree (AD) and clustering
coefficient (CI).  Over a three-snapshot window they expand to 45 columns.

Ratios with a vanishing denominator are defined as 0.
"""
from __future__ import annotations

import csv
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .graph_store import Snapshot, SnapshotWindow

# Per-snapshot block layout produced by the pair kernel.
_DC1, _DC2, _TN, _CN, _JC, _SC, _GC, _CC, _AA, _RA, _PA, _AD1, _AD2, _CI1, _CI2 = range(15)
_BLOCK = 15
_YEARS = ("y1", "y2", "y3")


def _column_names():
    names = []
    for fam in ("DC",):
        for y in _YEARS:
            names += [f"{fam}[v1,{y}]", f"{fam}[v2,{y}]"]
    for fam in ("TN", "CN", "JC", "SC", "GC", "CC", "AA", "RA", "PA"):
        names += [f"{fam}[{y}]" for y in _YEARS]
    for fam in ("AD", "CI"):
        for y in _YEARS:
            names += [f"{fam}[v1,{y}]", f"{fam}[v2,{y}]"]
    return tuple(names)


COLUMN_NAMES = _column_names()
N_FEATURES = len(COLUMN_NAMES)  # 45


def _layout():
    # (window column) -> (snapshot index, block slot)
    cols = []
    for y in range(3):
        cols += [(y, _DC1), (y, _DC2)]
    for slot in (_TN, _CN, _JC, _SC, _GC, _CC, _AA, _RA, _PA):
        cols += [(y, slot) for y in range(3)]
    for a, b in ((_AD1, _AD2), (_CI1, _CI2)):
        for y in range(3):
            cols += [(y, a), (y, b)]
    return np.array(cols, dtype=np.int64)


_LAYOUT = _layout()


# --- kernels ---------------------------------------------------------------


@numba.njit(nogil=True, cache=True)
def _merge_common(indices, a0, a1, b0, b1, degree, out):
    """Return (|C|, AA, RA) for two sorted ranges of ``indices``."""
    i, j = a0, b0
    cn = 0
    aa = 0.0
    ra = 0.0
    while i < a1 and j < b1:
        x = indices[i]
        y = indices[j]
        if x == y:
            cn += 1
            d = degree[x]
            aa += 1.0 / math.log(d)
            ra += 1.0 / d
            i += 1
            j += 1
        elif x < y:
            i += 1
        else:
            j += 1
    out[0] = aa
    out[1] = ra
    return cn


@numba.njit(nogil=True, cache=True)
def _node_stats_kernel(indptr, indices, degree, nodes, avg_deg, clustering):
    for k in range(len(nodes)):
        u = nodes[k]
        a0 = indptr[u]
        a1 = indptr[u + 1]
        du = a1 - a0
        if du == 0:
            avg_deg[k] = 0.0
            clustering[k] = 0.0
            continue
        total = 0
        links = 0
        for p in range(a0, a1):
            w = indices[p]
            total += degree[w]
            # edges among N(u) incident to w, counted once per endpoint
            i, j = a0, indptr[w]
            b1 = indptr[w + 1]
            while i < a1 and j < b1:
                x = indices[i]
                y = indices[j]
                if x == y:
                    links += 1
                    i += 1
                    j += 1
                elif x < y:
                    i += 1
                else:
                    j += 1
        avg_deg[k] = total / du
        if du < 2:
            clustering[k] = 0.0
        else:
            clustering[k] = links / (du * (du - 1.0))


@numba.njit(nogil=True, cache=True)
def _pair_kernel(indptr, indices, degree, us, vs, node_pos, avg_deg, clustering, out, col0):
    tmp = np.zeros(2)
    for r in range(len(us)):
        u = us[r]
        v = vs[r]
        a0, a1 = indptr[u], indptr[u + 1]
        b0, b1 = indptr[v], indptr[v + 1]
        du = a1 - a0
        dv = b1 - b0
        cn = _merge_common(indices, a0, a1, b0, b1, degree, tmp)
        union = du + dv - cn
        mn = min(du, dv)
        prod = float(du) * float(dv)
        o = out[r]
        o[col0 + 0] = du
        o[col0 + 1] = dv
        o[col0 + 2] = du + dv
        o[col0 + 3] = cn
        o[col0 + 4] = cn / union if union > 0 else 0.0
        o[col0 + 5] = cn / mn if mn > 0 else 0.0
        gc = (float(cn) * cn) / prod if prod > 0 else 0.0
        o[col0 + 6] = gc
        o[col0 + 7] = math.sqrt(gc)
        o[col0 + 8] = tmp[0]
        o[col0 + 9] = tmp[1]
        o[col0 + 10] = prod
        pu = node_pos[u]
        pv = node_pos[v]
        o[col0 + 11] = avg_deg[pu]
        o[col0 + 12] = avg_deg[pv]
        o[col0 + 13] = clustering[pu]
        o[col0 + 14] = clustering[pv]


# --- scalar feature ops ----------------------------------------------------


def _nbrs(s: Snapshot, u):
    return s.neighbors(u)


def degree_centrality(s: Snapshot, u):
    s._check(u)
    return int(s.degree[u])


def total_neighbors(s: Snapshot, u, v):
    return degree_centrality(s, u) + degree_centrality(s, v)


def _common(s, u, v):
    return np.intersect1d(_nbrs(s, u), _nbrs(s, v), assume_unique=True)


def common_neighbors(s: Snapshot, u, v):
    s._check(u)
    s._check(v)
    tmp = np.zeros(2)
    return int(
        _merge_common(
            s.indices, s.indptr[u], s.indptr[u + 1], s.indptr[v], s.indptr[v + 1], s.degree, tmp
        )
    )


def jaccard(s: Snapshot, u, v):
    cn = common_neighbors(s, u, v)
    union = s.degree[u] + s.degree[v] - cn
    return cn / union if union > 0 else 0.0


def simpson(s: Snapshot, u, v):
    cn = common_neighbors(s, u, v)
    mn = min(s.degree[u], s.degree[v])
    return cn / mn if mn > 0 else 0.0


def geometric(s: Snapshot, u, v):
    cn = common_neighbors(s, u, v)
    prod = float(s.degree[u]) * float(s.degree[v])
    return (float(cn) * cn) / prod if prod > 0 else 0.0


def cosine(s: Snapshot, u, v):
    return math.sqrt(geometric(s, u, v))


def adamic_adar(s: Snapshot, u, v):
    deg = s.degree[_common(s, u, v)]
    assert (deg >= 2).all()
    return float(sum(1.0 / math.log(d) for d in deg))


def resource_allocation(s: Snapshot, u, v):
    deg = s.degree[_common(s, u, v)]
    return float(sum(1.0 / d for d in deg))


def preferential_attachment(s: Snapshot, u, v):
    return degree_centrality(s, u) * degree_centrality(s, v)


def _node_stats(s: Snapshot, nodes):
    nodes = np.asarray(nodes, dtype=np.int64)
    avg = np.empty(len(nodes))
    clu = np.empty(len(nodes))
    _node_stats_kernel(s.indptr, s.indices, s.degree, nodes, avg, clu)
    return avg, clu


def avg_neighbor_degree(s: Snapshot, u):
    s._check(u)
    return float(_node_stats(s, [u])[0][0])


def clustering_coefficient(s: Snapshot, u):
    s._check(u)
    return float(_node_stats(s, [u])[1][0])


# --- FeatureMatrix ---------------------------------------------------------


@dataclass
class FeatureMatrix:
    """Dense feature rows with column names, pair ids and optional labels."""

    column_names: tuple
    rows: np.ndarray
    pair_ids: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.column_names = tuple(self.column_names)
        self.rows = np.asarray(self.rows, dtype=np.float64).reshape(-1, len(self.column_names))
        self.pair_ids = np.asarray(self.pair_ids, dtype=np.int64).reshape(-1, 2)
        if len(self.pair_ids) != len(self.rows):
            raise ValueError("pair_ids and rows disagree on row count")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int8)
            if len(self.labels) != len(self.rows):
                raise ValueError("labels and rows disagree on row count")

    def __len__(self):
        return len(self.rows)

    @property
    def width(self):
        return len(self.column_names)

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        labels = None if self.labels is None else self.labels[idx]
        return FeatureMatrix(self.column_names, self.rows[idx], self.pair_ids[idx], labels)

    def column(self, name):
        return self.rows[:, self.column_names.index(name)]


def _normalize_pairs(pairs, n_nodes):
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    bad = (arr < 0).any(axis=1) | (arr >= n_nodes).any(axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise IndexError(f"pair {i} {tuple(arr[i].tolist())} has a node id outside [0, {n_nodes})")
    same = arr[:, 0] == arr[:, 1]
    if same.any():
        i = int(np.flatnonzero(same)[0])
        raise ValueError(f"pair {i} {tuple(arr[i].tolist())} joins a node to itself")
    return np.sort(arr, axis=1)


def _chunks(n, threads, min_chunk=4096):
    if threads <= 1 or n <= min_chunk:
        return [(0, n)]
    size = max(min_chunk, -(-n // (threads * 4)))
    return [(a, min(a + size, n)) for a in range(0, n, size)]


def _run_chunked(fn, n, threads):
    spans = _chunks(n, threads)
    if len(spans) == 1:
        fn(*spans[0])
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for f in [pool.submit(fn, a, b) for a, b in spans]:
            f.result()


def snapshot_block(s: Snapshot, pairs, threads=1):
    """The 15 per-snapshot feature values for ``pairs`` (already oriented)."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    out = np.zeros((len(pairs), _BLOCK))
    if len(pairs) == 0:
        return out
    nodes = np.unique(pairs)
    avg, clu = np.empty(len(nodes)), np.empty(len(nodes))

    def stats(a, b):
        _node_stats_kernel(s.indptr, s.indices, s.degree, nodes[a:b], avg[a:b], clu[a:b])

    _run_chunked(stats, len(nodes), threads)
    node_pos = np.zeros(s.n_nodes, dtype=np.int64)
    node_pos[nodes] = np.arange(len(nodes))
    us = np.ascontiguousarray(pairs[:, 0])
    vs = np.ascontiguousarray(pairs[:, 1])

    def work(a, b):
        _pair_kernel(s.indptr, s.indices, s.degree, us[a:b], vs[a:b], node_pos, avg, clu, out[a:b], 0)

    _run_chunked(work, len(pairs), threads)
    return out


def extract_window(w: SnapshotWindow, pairs, labels=None, threads=1) -> FeatureMatrix:
    """45-column feature rows for ``pairs`` over the three window snapshots.

    Pairs are oriented so that ``v1`` is the smaller id.  Output is
    independent of ``threads``: chunks write disjoint rows.
    """
    pairs = _normalize_pairs(pairs, w.newest.n_nodes)
    blocks = [snapshot_block(s, pairs, threads) for s in w.snapshots]
    stacked = np.stack(blocks, axis=0)  # (3, n, 15)
    rows = stacked[_LAYOUT[:, 0], :, _LAYOUT[:, 1]].T.copy() if len(pairs) else np.zeros((0, N_FEATURES))
    return FeatureMatrix(COLUMN_NAMES, rows, pairs, labels)


# --- persistence -----------------------------------------------------------

MATRIX_MAGIC = b"LFFM"
MATRIX_VERSION = 1
_LEAD = ("u", "v", "label")


def write_matrix(m: FeatureMatrix, path, format="binary"):
    """Persist as CSV (leading ``u,v,label``) or the ``LFFM`` binary layout.

    In both layouts the leading ``u``, ``v`` and ``label`` columns carry the
    pair ids and label (``-1`` when unlabeled).
    """
    labels = np.full(len(m), -1, dtype=np.int64) if m.labels is None else m.labels.astype(np.int64)
    if format == "csv":
        # column names contain commas, so the header goes through csv quoting
        with open(path, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(_LEAD + m.column_names)
            for (u, v), lab, row in zip(m.pair_ids, labels, m.rows):
                fh.write(f"{u},{v},{lab}," + ",".join(repr(float(x)) for x in row) + "\n")
        return
    if format != "binary":
        raise ValueError(f"unknown matrix format {format!r}")
    names = _LEAD + m.column_names
    data = np.column_stack([m.pair_ids.astype(np.float64), labels.astype(np.float64), m.rows])
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC + bytes([MATRIX_VERSION]))
        fh.write(struct.pack("<IQ", len(names), len(m)))
        for name in names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)) + raw)
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def read_matrix(path, format=None) -> FeatureMatrix:
    path = Path(path)
    if format is None:
        with open(path, "rb") as fh:
            format = "binary" if fh.read(4) == MATRIX_MAGIC else "csv"
    if format == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            header = next(csv.reader(fh))
        if tuple(header[:3]) != _LEAD:
            raise ValueError(f"{path}: CSV matrix must start with u,v,label")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2).reshape(-1, len(header))
        names = header[3:]
    else:
        with open(path, "rb") as fh:
            head = fh.read(5)
            if head[:4] != MATRIX_MAGIC:
                raise ValueError(f"{path}: bad magic")
            if head[4] != MATRIX_VERSION:
                raise ValueError(f"{path}: unsupported matrix version {head[4]}")
            n_cols, n_rows = struct.unpack("<IQ", fh.read(12))
            all_names = []
            for _ in range(n_cols):
                (ln,) = struct.unpack("<H", fh.read(2))
                all_names.append(fh.read(ln).decode("utf-8"))
            data = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
        if data.size != n_cols * n_rows:
            raise ValueError(f"{path}: truncated matrix data")
        data = data.reshape(n_rows, n_cols)
        if tuple(all_names[:3]) != _LEAD:
            raise ValueError(f"{path}: binary matrix must start with u,v,label")
        names = all_names[3:]
    labels = data[:, 2].astype(np.int64)
    labels = None if len(labels) and (labels < 0).all() else labels
    return FeatureMatrix(names, data[:, 3:], data[:, :2].astype(np.int64), labels)
