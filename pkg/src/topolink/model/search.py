"""Seeded random search over hyperparameters, scored by k-fold mean AUC."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .forest import ForestConfig
from .logistic import LogisticConfig


def _draw(dist, rng):
    kind = dist["type"]
    if kind == "categorical":
        choices = dist["choices"]
        return choices[int(rng.integers(len(choices)))]
    if kind == "int_uniform":
        return int(rng.integers(dist["low"], dist["high"] + 1))
    if kind == "uniform":
        return float(rng.uniform(dist["low"], dist["high"]))
    if kind == "log_uniform":
        return float(math.exp(rng.uniform(math.log(dist["low"]), math.log(dist["high"]))))
    raise ValueError(f"unknown distribution type {kind!r}")


def _recenter(dist, center, shrink):
    """Narrow ``dist`` around ``center`` to ``shrink`` of its original width."""
    kind = dist["type"]
    if kind == "categorical" or center is None:
        return dist
    if kind == "log_uniform":
        lo, hi = math.log(dist["low"]), math.log(dist["high"])
        half = (hi - lo) * shrink / 2
        c = math.log(center)
        return {**dist, "low": math.exp(max(lo, c - half)), "high": math.exp(min(hi, c + half))}
    half = (dist["high"] - dist["low"]) * shrink / 2
    low = max(dist["low"], center - half)
    high = min(dist["high"], center + half)
    if kind == "int_uniform":
        low, high = int(math.floor(low)), int(math.ceil(high))
    return {**dist, "low": low, "high": high}


@dataclass(frozen=True)
class SearchSpec:
    """Parameter distributions keyed by config field name.

    Each distribution is a dict with ``type`` in ``uniform``,
    ``log_uniform``, ``int_uniform`` (bounds inclusive) or ``categorical``
    (``choices``).
    """

    distributions: dict
    n_draws: int = 20
    k_folds: int = 5
    seed: int = 0
    second_round: bool = False
    shrink: float = 0.25
    second_round_draws: int | None = None

    def __post_init__(self):
        if self.n_draws < 1:
            raise ValueError("n_draws must be >= 1")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return {
            "distributions": self.distributions, "n_draws": self.n_draws, "k_folds": self.k_folds,
            "seed": self.seed, "second_round": self.second_round, "shrink": self.shrink,
            "second_round_draws": self.second_round_draws,
        }


FOREST_SPACE = {
    "n_estimators": {"type": "int_uniform", "low": 50, "high": 1500},
    "max_depth": {"type": "categorical", "choices": [None, 8, 16, 32]},
    "min_samples_split": {"type": "int_uniform", "low": 2, "high": 20},
    "min_samples_leaf": {"type": "int_uniform", "low": 1, "high": 20},
}

LOGISTIC_SPACE = {
    "l1_ratio": {"type": "uniform", "low": 0.0, "high": 1.0},
    "alpha": {"type": "log_uniform", "low": 1e-6, "high": 1e-1},
}


def _base(family, base):
    if base is not None:
        return base
    return ForestConfig() if family == "forest" else LogisticConfig()


def random_search(X, y, spec: SearchSpec, family="forest", base=None, threads=1):
    """Return ``(best_config, report)``.

    Every trial uses the same stratified folds.  The best trial maximizes the
    mean fold AUC; ties go to the earliest trial.
    """
    from ..evaluate import cross_validate, stratified_folds

    base = _base(family, base)
    y = np.asarray(y)
    if len(y) < spec.k_folds:
        raise ValueError("fewer rows than folds")
    folds = stratified_folds(y, spec.k_folds, spec.seed)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    trials = []

    def run_round(dists, n, round_no):
        for _ in range(n):
            params = {name: _draw(d, rng) for name, d in dists.items()}
            cfg = replace(base, **params)
            cv = cross_validate(X, y, cfg, family, spec.k_folds, spec.seed, threads=threads, folds=folds)
            trials.append({
                "trial": len(trials), "round": round_no, "params": params,
                "fold_auc": cv["fold_auc"], "mean_auc": cv["mean_auc"], "config": cfg,
            })

    def best():
        # max() keeps the first maximal element
        return max(trials, key=lambda t: t["mean_auc"])

    run_round(spec.distributions, spec.n_draws, 1)
    if spec.second_round:
        winner = best()["params"]
        dists = {k: _recenter(d, winner[k], spec.shrink) for k, d in spec.distributions.items()}
        run_round(dists, spec.second_round_draws or spec.n_draws, 2)
    top = best()
    report = {
        "family": family,
        "best_trial": top["trial"],
        "best_params": top["params"],
        "best_mean_auc": top["mean_auc"],
        "trials": [{k: v for k, v in t.items() if k != "config"} for t in trials],
    }
    return top["config"], report
