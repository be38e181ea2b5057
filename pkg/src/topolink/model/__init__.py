"""Classifiers: CART trees, random forests, elastic-net logistic regression."""
from .forest import (
    ForestConfig,
    ForestModel,
    ModelFileError,
    fit_forest,
    load_model,
    model_bytes,
    predict_proba,
    save_model,
)
from .logistic import LogisticConfig, LogisticModel, fit_logistic
from .tree import Tree, fit_tree

FAMILIES = ("forest", "logistic")


def fit_model(family, X, y, config, threads=1):
    if family == "forest":
        return fit_forest(X, y, config, threads=threads)
    if family == "logistic":
        return fit_logistic(X, y, config)
    raise ValueError(f"unknown model family {family!r}")


from .search import FOREST_SPACE, LOGISTIC_SPACE, SearchSpec, random_search  # noqa: E402

__all__ = [
    "FAMILIES", "FOREST_SPACE", "LOGISTIC_SPACE", "ForestConfig", "ForestModel", "LogisticConfig", "LogisticModel", "ModelFileError",
    "SearchSpec", "Tree", "fit_forest", "fit_logistic", "fit_model", "fit_tree", "load_model",
    "model_bytes", "predict_proba", "random_search", "save_model",
]
