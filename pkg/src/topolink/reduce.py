"""Correlation analysis and grouped first-component PCA.

Each group of correlated columns is replaced by its projection on the
group's first principal component; the remaining columns pass through.  The
resulting columns are then standardized with parameters fitted on training
rows only.

PCA runs on mean-centred, unscaled columns, so a group's component weights
reflect the raw column scales.
"""
from __future__ import annotations

import hashlib
import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .features import COLUMN_NAMES, FeatureMatrix

logger = logging.getLogger(__name__)


class ReducerError(ValueError):
    pass


def _cols(*names):
    return [COLUMN_NAMES.index(n) for n in names]


def _fam(fam, per_node=None):
    if per_node is None:
        return _cols(*(f"{fam}[{y}]" for y in ("y1", "y2", "y3")))
    return _cols(*(f"{fam}[{per_node},{y}]" for y in ("y1", "y2", "y3")))


@dataclass(frozen=True)
class FeatureGroups:
    """Named column-index groups plus passthrough columns."""

    groups: tuple  # of (name, tuple of column indices)
    passthrough: tuple
    n_columns: int = len(COLUMN_NAMES)

    def __post_init__(self):
        used = [i for _, g in self.groups for i in g] + list(self.passthrough)
        if sorted(used) != list(range(self.n_columns)):
            raise ValueError("groups and passthrough must partition all columns exactly once")
        if any(len(g) == 0 for _, g in self.groups):
            raise ValueError("empty feature group")

    @classmethod
    def standard(cls):
        groups = (
            ("G1", _fam("DC", "v1")),
            ("G2", _fam("DC", "v2")),
            ("G3", _fam("TN")),
            ("G4", _fam("CN")),
            ("G5", _fam("JC") + _fam("GC") + _fam("CC")),
            ("G6", _fam("SC")),
            ("G7", _fam("AA") + _fam("RA") + _fam("PA")),
        )
        passthrough = tuple(i for i, c in enumerate(COLUMN_NAMES) if c[:2] in ("AD", "CI"))
        return cls(tuple((n, tuple(g)) for n, g in groups), passthrough)

    @classmethod
    def from_correlation(cls, corr, threshold=0.6):
        """Greedy grouping: seed with the lowest unassigned column, absorb
        every unassigned column whose |r| with the seed reaches ``threshold``.
        Singletons become passthrough columns."""
        corr = np.asarray(corr)
        n = corr.shape[0]
        free = list(range(n))
        groups, passthrough = [], []
        while free:
            seed = free.pop(0)
            members = [seed] + [j for j in free if abs(corr[seed, j]) >= threshold]
            free = [j for j in free if j not in members]
            if len(members) == 1:
                passthrough.append(seed)
            else:
                groups.append((f"G{len(groups) + 1}", tuple(members)))
        return cls(tuple(groups), tuple(passthrough), n)

    def to_dict(self):
        return {"groups": [[n, list(g)] for n, g in self.groups], "passthrough": list(self.passthrough)}

    @classmethod
    def from_dict(cls, d, n_columns=len(COLUMN_NAMES)):
        return cls(tuple((n, tuple(g)) for n, g in d["groups"]), tuple(d["passthrough"]), n_columns)


# --- univariate screening --------------------------------------------------


def _equal_frequency_bins(x, n_bins):
    edges = np.unique(np.quantile(x, np.linspace(0, 1, n_bins + 1)[1:-1]))
    return np.searchsorted(edges, x, side="right")


def univariate_screen(m: FeatureMatrix, n_bins=16):
    """Mutual information (nats) and chi-squared of each column vs the label.

    Both use the same equal-frequency binning.  Nothing is dropped; this is a
    report.
    """
    if m.labels is None:
        raise ReducerError("univariate screening needs labels")
    y = m.labels.astype(np.int64)
    report = []
    for j, name in enumerate(m.column_names):
        x = m.rows[:, j]
        entry = {"column": name, "mutual_information": 0.0, "chi2": None, "p_value": None, "note": None}
        if len(x) == 0 or np.all(x == x[0]):
            entry["note"] = "constant column"
            report.append(entry)
            continue
        b = _equal_frequency_bins(x, n_bins)
        table = np.zeros((b.max() + 1, 2))
        np.add.at(table, (b, y), 1)
        table = table[table.sum(axis=1) > 0]
        p = table / table.sum()
        px = p.sum(axis=1, keepdims=True)
        py = p.sum(axis=0, keepdims=True)
        nz = p > 0
        entry["mutual_information"] = float(np.sum(p[nz] * np.log(p[nz] / (px @ py)[nz])))
        if table.shape[0] > 1 and (table.sum(axis=0) > 0).all():
            expected = table.sum(axis=1, keepdims=True) @ table.sum(axis=0, keepdims=True) / table.sum()
            chi2 = float(((table - expected) ** 2 / expected).sum())
            dof = (table.shape[0] - 1) * (table.shape[1] - 1)
            entry["chi2"] = chi2
            entry["p_value"] = float(stats.chi2.sf(chi2, dof))
        else:
            entry["note"] = "chi-squared undefined for a single label class"
        report.append(entry)
    return report


def pearson_matrix(m):
    """Pearson correlation of all columns; constant columns get 0 off-diagonal."""
    x = m.rows if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=np.float64)
    xc = x - x.mean(axis=0)
    sd = np.sqrt((xc**2).sum(axis=0))
    const = sd == 0
    if const.any():
        warnings.warn(f"{int(const.sum())} constant column(s) in correlation input", RuntimeWarning)
    z = np.divide(xc, sd, out=np.zeros_like(xc), where=~const)
    corr = np.clip(z.T @ z, -1.0, 1.0)
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    return corr


# --- first principal component --------------------------------------------


def first_component(cov, tol=1e-12, max_iter=10_000, squarings=40):
    """Leading eigenvector and eigenvalue of a symmetric PSD matrix.

    Power iteration from the normalized all-ones vector.  The matrix is first
    squared ``squarings`` times (each squaring doubles the number of implicit
    power steps) so small eigengaps cannot stall convergence; plain power
    steps on ``cov`` then polish the vector to ``tol``.  The largest-magnitude
    coefficient is made positive.
    """
    cov = np.asarray(cov, dtype=np.float64)
    k = cov.shape[0]
    if np.trace(cov) <= 0:
        raise ReducerError("zero-variance covariance")
    a = cov / np.abs(cov).max()
    for _ in range(squarings):
        a = a @ a
        a = (a + a.T) / 2
        a /= np.abs(a).max()
    v = a @ (np.ones(k) / np.sqrt(k))
    if not np.linalg.norm(v) > 0:
        v = a[:, np.argmax(np.diag(a))].copy()
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = cov @ v
        w /= np.linalg.norm(w)
        if w @ v < 0:
            w = -w
        delta = np.abs(w - v).max()
        v = w
        if delta < tol:
            break
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v, float(v @ cov @ v)


@dataclass
class GroupComponent:
    name: str
    columns: tuple
    mean: np.ndarray
    component: np.ndarray
    explained_variance_ratio: float


@dataclass
class PcaGroupModel:
    groups: FeatureGroups
    components: list
    input_columns: tuple
    scale_mean: np.ndarray
    scale_sd: np.ndarray
    fitted_on: int
    output_columns: tuple = field(default=())

    def to_dict(self):
        return {
            "input_columns": list(self.input_columns),
            "output_columns": list(self.output_columns),
            "feature_groups": self.groups.to_dict(),
            "fitted_on": self.fitted_on,
            "groups": [
                {
                    "name": g.name,
                    "columns": [self.input_columns[i] for i in g.columns],
                    "column_indices": list(g.columns),
                    "mean": [float(x) for x in g.mean],
                    "component": [float(x) for x in g.component],
                    "explained_variance_ratio": g.explained_variance_ratio,
                }
                for g in self.components
            ],
            "scale_mean": [float(x) for x in self.scale_mean],
            "scale_sd": [float(x) for x in self.scale_sd],
        }

    @classmethod
    def from_dict(cls, d):
        groups = FeatureGroups.from_dict(d["feature_groups"], len(d["input_columns"]))
        comps = [
            GroupComponent(
                g["name"], tuple(g["column_indices"]), np.array(g["mean"]),
                np.array(g["component"]), float(g["explained_variance_ratio"]),
            )
            for g in d["groups"]
        ]
        return cls(
            groups, comps, tuple(d["input_columns"]), np.array(d["scale_mean"]),
            np.array(d["scale_sd"]), int(d["fitted_on"]), tuple(d["output_columns"]),
        )

    def to_json(self):
        # repr-based float formatting round-trips every double exactly
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def digest(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _project(m_rows, model):
    cols = [m_rows[:, list(g.columns)] - g.mean for g in model.components]
    proj = [c @ g.component for c, g in zip(cols, model.components)]
    passthrough = m_rows[:, list(model.groups.passthrough)]
    return np.column_stack(proj + [passthrough]) if len(m_rows) else np.zeros((0, len(model.output_columns)))


def fit_reducer(m: FeatureMatrix, groups: FeatureGroups | None = None) -> PcaGroupModel:
    groups = groups or FeatureGroups.standard()
    if len(m) < 2:
        raise ReducerError("fitting the reducer needs at least 2 rows")
    if groups.n_columns != m.width:
        raise ReducerError(f"groups cover {groups.n_columns} columns, matrix has {m.width}")
    comps = []
    for name, cols in groups.groups:
        x = m.rows[:, list(cols)]
        mean = x.mean(axis=0)
        xc = x - mean
        cov = xc.T @ xc / (len(x) - 1)
        total = float(np.trace(cov))
        if total <= 0:
            raise ReducerError(f"feature group {name} has zero variance")
        vec, lam = first_component(cov)
        comps.append(GroupComponent(name, tuple(cols), mean, vec, min(max(lam / total, 0.0), 1.0)))
    out_names = tuple(f"PCA-{n}" for n, _ in groups.groups) + tuple(
        m.column_names[i] for i in groups.passthrough
    )
    model = PcaGroupModel(groups, comps, m.column_names, np.zeros(0), np.zeros(0), len(m), out_names)
    z = _project(m.rows, model)
    model.scale_mean = z.mean(axis=0)
    sd = z.std(axis=0)
    model.scale_sd = np.where(sd > 0, sd, 1.0)
    return model


def apply_reducer(m: FeatureMatrix, r: PcaGroupModel) -> FeatureMatrix:
    """Project and standardize ``m`` with parameters fitted elsewhere."""
    if tuple(m.column_names) != tuple(r.input_columns):
        raise ReducerError("matrix column layout does not match the fitted reducer")
    z = (_project(m.rows, r) - r.scale_mean) / r.scale_sd
    return FeatureMatrix(r.output_columns, z, m.pair_ids, m.labels)


def export_components(r: PcaGroupModel):
    """Per-group component coefficients and explained variance, as a dict."""
    return {
        g.name: {
            "coefficients": {r.input_columns[c]: float(w) for c, w in zip(g.columns, g.component)},
            "explained_variance_ratio": g.explained_variance_ratio,
        }
        for g in r.components
    }
