"""ROC AUC, stratified cross-validation and cross-window drift reports."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


class EvaluationError(ValueError):
    pass


@dataclass
class RocResult:
    auc: float
    n_pos: int
    n_neg: int
    roc_points: np.ndarray | None = None  # (k, 2) array of (fpr, tpr)


def auc(scores, labels, roc_points=False) -> RocResult:
    """Mann-Whitney AUC with midranks for tied scores."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise EvaluationError("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError(f"AUC needs both classes (got {n_pos} positive, {n_neg} negative)")
    # Doubled midranks are integers, so the numerator is exact.
    ranks2 = (2 * rankdata(scores, method="average")).astype(np.int64)
    u2 = int(ranks2[pos].sum()) - n_pos * (n_pos + 1)
    value = u2 / (2 * n_pos * n_neg)
    pts = _roc_points(scores, pos, n_pos, n_neg) if roc_points else None
    return RocResult(float(value), n_pos, n_neg, pts)


def _roc_points(scores, pos, n_pos, n_neg):
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    p = pos[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(p)[last]
    fp = (last + 1) - tp
    return np.vstack([[0.0, 0.0], np.column_stack([fp / n_neg, tp / n_pos])])


def auc_score(scores, labels):
    return auc(scores, labels).auc


def stratified_folds(labels, k, seed):
    """Fold id per row; each fold keeps the class ratio to within one row."""
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.Generator(np.random.PCG64(seed))
    fold = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < k:
            raise EvaluationError(f"class {cls} has {len(idx)} rows, fewer than k={k} folds")
        # continue the round-robin across classes so fold sizes stay level
        fold[rng.permutation(idx)] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return fold


def cross_validate(X, y, config, family="forest", k=5, seed=0, threads=1, folds=None):
    """Per-fold and mean AUC of ``family`` fitted with ``config``."""
    from .model import fit_model

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if folds is None:
        folds = stratified_folds(y, k, seed)
    fold_aucs = []
    for f in range(k):
        test = folds == f
        if len(np.unique(y[test])) < 2 or len(np.unique(y[~test])) < 2:
            raise EvaluationError(f"fold {f} has a single class")
        model = fit_model(family, X[~test], y[~test], config, threads=threads)
        fold_aucs.append(auc_score(model.predict_proba(X[test], threads=threads), y[test]))
    return {"fold_auc": fold_aucs, "mean_auc": float(np.mean(fold_aucs))}


def table_csv(rows, columns):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def format_table(rows, columns):
    """Fixed-width text table for terminal output."""
    cells = [[str(c) for c in columns]] + [
        [f"{r[c]:.4f}" if isinstance(r[c], float) else str(r[c]) for c in columns] for r in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    lines = ["  ".join(v.rjust(wd) for v, wd in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * wd for wd in widths))
    return "\n".join(lines)


DRIFT_COLUMNS = ("train_window", "eval_window", "auc", "eval_rows")


def drift_report(edges, train_windows, eval_windows, cfg, out_dir=None):
    """Train once per train window and score each eval window.

    Windows are ``{"name", "feature_years", "label_year"}`` dicts.  When
    an eval window is the train window itself, its holdout rows are scored,
    which reproduces the holdout AUC of a single run.
    """
    from .pipeline import evaluate_window, train_window

    rows = []
    for tw in train_windows:
        trained = train_window(edges, tw, cfg)
        for ew in eval_windows:
            res = evaluate_window(edges, ew, trained, cfg)
            rows.append({
                "train_window": tw["name"],
                "eval_window": ew["name"],
                "auc": res["auc"],
                "eval_rows": res["rows"],
            })
    if out_dir is not None:
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "drift.json").write_text(json.dumps(rows, indent=1) + "\n")
        (out / "drift.csv").write_text(table_csv(rows, DRIFT_COLUMNS))
    return rows
