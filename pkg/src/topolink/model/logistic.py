"""Elastic-net logistic regression fitted by accelerated proximal gradient.

The objective is

    mean_i log(1 + exp(-s_i * (x_i . w + b)))
        + alpha * (l1_ratio * |w|_1 + (1 - l1_ratio) / 2 * |w|_2^2)

with ``s_i = 2 y_i - 1``.  The intercept ``b`` is not penalized.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit, log_expit


@dataclass(frozen=True)
class LogisticConfig:
    l1_ratio: float = 0.15
    alpha: float = 1e-4
    max_epochs: int = 5000
    tolerance: float = 1e-8
    seed: int = 0  # unused by the deterministic solver; kept for search bookkeeping

    def __post_init__(self):
        if not 0.0 <= self.l1_ratio <= 1.0:
            raise ValueError("l1_ratio must lie in [0, 1]")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")

    def to_dict(self):
        return asdict(self)


@dataclass
class LogisticModel:
    coef: np.ndarray
    intercept: float
    config: LogisticConfig
    n_iter: int = 0

    def decision_function(self, X):
        return np.asarray(X, dtype=np.float64) @ self.coef + self.intercept

    def predict_proba(self, X, threads=1):
        return expit(self.decision_function(X))


def smooth_loss(w, b, X, y, alpha=0.0, l1_ratio=0.0):
    """Logistic loss plus the differentiable L2 part of the penalty."""
    s = 2.0 * np.asarray(y, dtype=np.float64) - 1.0
    z = X @ w + b
    return float(-np.mean(log_expit(s * z)) + alpha * (1 - l1_ratio) / 2 * (w @ w))


def smooth_grad(w, b, X, y, alpha=0.0, l1_ratio=0.0):
    """Gradient of :func:`smooth_loss` with respect to ``(w, b)``."""
    y = np.asarray(y, dtype=np.float64)
    r = expit(X @ w + b) - y
    gw = X.T @ r / len(y) + alpha * (1 - l1_ratio) * w
    return gw, float(r.mean())


def objective(w, b, X, y, cfg: LogisticConfig):
    return smooth_loss(w, b, X, y, cfg.alpha, cfg.l1_ratio) + cfg.alpha * cfg.l1_ratio * np.abs(w).sum()


def _soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def fit_logistic(X, y, cfg: LogisticConfig | None = None) -> LogisticModel:
    cfg = cfg or LogisticConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in logistic regression input")
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ValueError("X must be (n, p) with n = len(y) > 0")
    n, p = X.shape
    lam1 = cfg.alpha * cfg.l1_ratio
    # Lipschitz bound of the smooth gradient over (w, b)
    col = np.column_stack([X, np.ones(n)])
    lip = 0.25 * np.linalg.norm(col, 2) ** 2 / n + cfg.alpha * (1 - cfg.l1_ratio)
    step = 1.0 / lip

    w = np.zeros(p)
    b = 0.0
    zw, zb = w.copy(), b
    t = 1.0
    f_prev = np.inf
    it = 0
    for it in range(1, cfg.max_epochs + 1):
        gw, gb = smooth_grad(zw, zb, X, y, cfg.alpha, cfg.l1_ratio)
        w_new = _soft(zw - step * gw, step * lam1)
        b_new = zb - step * gb
        f_new = objective(w_new, b_new, X, y, cfg)
        if f_new > f_prev:
            # momentum overshoot: restart from the last iterate
            t = 1.0
            zw, zb = w.copy(), b
            gw, gb = smooth_grad(zw, zb, X, y, cfg.alpha, cfg.l1_ratio)
            w_new = _soft(zw - step * gw, step * lam1)
            b_new = zb - step * gb
            f_new = objective(w_new, b_new, X, y, cfg)
        change = max(np.abs(w_new - w).max(initial=0.0), abs(b_new - b))
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        mom = (t - 1) / t_new
        zw = w_new + mom * (w_new - w)
        zb = b_new + mom * (b_new - b)
        w, b, t, f_prev = w_new, b_new, t_new, f_new
        if change < cfg.tolerance:
            break
    return LogisticModel(w, float(b), cfg, it)
