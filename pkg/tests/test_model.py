import numpy as np
import pytest

from oracles import brute_root_split, gini_of_split
from topolink.evaluate import auc_score, stratified_folds
from topolink.model import (
    FOREST_SPACE,
    ForestConfig,
    LogisticConfig,
    ModelFileError,
    SearchSpec,
    fit_forest,
    fit_logistic,
    fit_tree,
    load_model,
    model_bytes,
    random_search,
    save_model,
)
from topolink.model.forest import tree_seeds
from topolink.model.logistic import objective, smooth_grad, smooth_loss
from topolink.model.tree import LEAF


def _blobs(rng, n=400, p=4, shift=1.5):
    y = rng.integers(0, 2, size=n)
    X = rng.normal(size=(n, p)) + shift * y[:, None] * (np.arange(p) % 2 == 0)
    return X, y


# --- single tree -----------------------------------------------------------


@pytest.mark.parametrize("label", [0, 1])
def test_pure_labels_give_single_leaf(rng, label):
    t = fit_tree(rng.normal(size=(30, 3)), np.full(30, label))
    assert t.n_nodes == 1 and t.feature[0] == LEAF and t.value[0] == label


def test_separable_one_dimensional(rng):
    x = rng.normal(size=100)
    y = (x > 0).astype(int)
    t = fit_tree(x[:, None], y)
    assert t.depth == 1
    assert x[y == 0].max() < t.threshold[0] < x[y == 1].min()
    assert (t.predict(x[:, None]) == y).all()


def test_min_leaf_equal_to_n_gives_base_rate(rng):
    X, y = _blobs(rng, 50)
    t = fit_tree(X, y, min_samples_leaf=50)
    assert t.n_nodes == 1 and t.value[0] == pytest.approx(y.mean())


def test_root_split_matches_brute_force(rng):
    for _ in range(60):
        n = int(rng.integers(2, 201))
        X = np.round(rng.normal(size=(n, 2)), int(rng.integers(0, 3)))
        y = (X[:, 0] + rng.normal(scale=1.0, size=n) > 0).astype(int)
        leaf = int(rng.integers(1, 6))
        t = fit_tree(X, y, max_features=2, max_depth=1, min_samples_leaf=leaf)
        best = brute_root_split(X, y, leaf)
        if t.feature[0] == LEAF:
            assert best == np.inf or len(np.unique(y)) == 1
            continue
        assert gini_of_split(X, y, int(t.feature[0]), t.threshold[0]) == pytest.approx(best, abs=1e-9)


def test_tree_errors():
    with pytest.raises(ValueError):
        fit_tree(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError, match="binary"):
        fit_tree(np.zeros((3, 1)), np.array([0, 1, 2]))


def test_max_depth_respected(rng):
    X, y = _blobs(rng, 300, shift=0.3)
    for d in (0, 1, 3):
        assert fit_tree(X, y, max_depth=d).depth <= d


# --- forest ----------------------------------------------------------------


def test_forest_defaults_echoed():
    cfg = ForestConfig()
    assert (cfg.n_estimators, cfg.max_depth, cfg.min_samples_split, cfg.min_samples_leaf) == (1250, None, 7, 5)
    model = fit_forest(np.arange(20.0)[:, None], np.arange(20) % 2, ForestConfig(n_estimators=2))
    assert model.config.to_dict()["min_samples_split"] == 7


def test_single_tree_forest_is_a_bootstrap_tree(rng):
    X, y = _blobs(rng)
    cfg = ForestConfig(n_estimators=1, seed=3)
    model = fit_forest(X, y, cfg)
    boot, node_seed = tree_seeds(3, 0)
    rows = boot.integers(0, len(X), size=len(X))
    t = fit_tree(X, y, max_features=2, min_samples_split=7, min_samples_leaf=5, seed=node_seed, rows=rows)
    assert np.array_equal(model.predict_proba(X), t.predict(X))


def test_forest_matches_hand_average(rng):
    X, y = _blobs(rng)
    model = fit_forest(X, y, ForestConfig(n_estimators=3, seed=1))
    manual = sum(t.predict(X) for t in model.trees) / 3
    np.testing.assert_array_equal(model.predict_proba(X), manual)


def test_forest_deterministic_across_runs_and_threads(rng):
    X, y = _blobs(rng)
    cfg = ForestConfig(n_estimators=40, seed=9)
    a = fit_forest(X, y, cfg, threads=1)
    b = fit_forest(X, y, cfg, threads=4)
    assert model_bytes(a) == model_bytes(b)
    assert np.array_equal(a.predict_proba(X, threads=1), b.predict_proba(X, threads=3))
    c = fit_forest(X, y, ForestConfig(n_estimators=40, seed=10))
    assert model_bytes(a) != model_bytes(c)


def test_forest_scores_and_prefix_convergence(rng):
    X, y = _blobs(rng, 600, shift=1.0)
    model = fit_forest(X, y, ForestConfig(n_estimators=200, seed=2))
    full = model.predict_proba(X)
    assert ((full >= 0) & (full <= 1)).all()
    assert np.array_equal(model.predict_proba(X, n_trees=200), full)
    assert np.abs(model.predict_proba(X, n_trees=100) - full).mean() < 0.05
    with pytest.raises(ValueError):
        model.predict_proba(X, n_trees=0)


def test_forest_learns(rng):
    X, y = _blobs(rng, 800)
    Xt, yt = _blobs(rng, 400)
    model = fit_forest(X, y, ForestConfig(n_estimators=50))
    assert auc_score(model.predict_proba(Xt), yt) > 0.85


def test_model_file_round_trip(tmp_path, rng):
    X, y = _blobs(rng, 1000)
    model = fit_forest(X, y, ForestConfig(n_estimators=25, seed=4), feature_names=[f"f{i}" for i in range(4)],
                       reducer_json='{"x": 1}')
    save_model(model, tmp_path / "m.lfrf")
    back = load_model(tmp_path / "m.lfrf")
    assert back.feature_names == model.feature_names and back.reducer_json == '{"x": 1}'
    assert back.predict_proba(X).tobytes() == model.predict_proba(X).tobytes()
    assert model_bytes(back) == (tmp_path / "m.lfrf").read_bytes()


def test_model_file_errors(tmp_path, rng):
    X, y = _blobs(rng, 50)
    raw = model_bytes(fit_forest(X, y, ForestConfig(n_estimators=2)))
    bad = tmp_path / "bad.lfrf"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ModelFileError, match="magic"):
        load_model(bad)
    bad.write_bytes(raw[:4] + bytes([9]) + raw[5:])
    with pytest.raises(ModelFileError, match="version"):
        load_model(bad)
    bad.write_bytes(raw + b"\0")
    with pytest.raises(ModelFileError, match="trailing"):
        load_model(bad)


# --- logistic --------------------------------------------------------------


def test_large_alpha_shrinks_to_base_rate(rng):
    x = rng.normal(size=200)
    y = (x > 0.5).astype(int)
    m = fit_logistic(x[:, None], y, LogisticConfig(alpha=1e3, l1_ratio=0.0))
    assert abs(m.coef[0]) < 1e-3
    assert np.allclose(m.predict_proba(x[:, None]), y.mean(), atol=1e-3)


def test_lasso_gives_exact_zeros(rng):
    X, y = _blobs(rng)
    m = fit_logistic(X, y, LogisticConfig(alpha=10.0, l1_ratio=1.0))
    assert np.all(m.coef == 0.0)


def test_elastic_net_selects_informative_columns(rng):
    X, y = _blobs(rng, 2000, p=6)
    m = fit_logistic(X, y, LogisticConfig(alpha=0.05, l1_ratio=1.0))
    assert np.all(m.coef[1::2] == 0.0) and np.all(m.coef[0::2] > 0)


def test_gradient_matches_central_differences(rng):
    X, y = _blobs(rng, 300, p=5)
    h = 1e-6
    for _ in range(10):
        w = rng.normal(size=5)
        b = float(rng.normal())
        alpha, l1 = float(rng.uniform(0, 0.5)), float(rng.uniform(0, 1))
        gw, gb = smooth_grad(w, b, X, y, alpha, l1)
        num = np.zeros(6)
        for j in range(6):
            e = np.zeros(6)
            e[j] = h
            f = lambda d: smooth_loss(w + d[:5], b + d[5], X, y, alpha, l1)  # noqa: E731
            num[j] = (f(e) - f(-e)) / (2 * h)
        analytic = np.append(gw, gb)
        assert np.linalg.norm(analytic - num) / np.linalg.norm(num) < 1e-5


def test_gradient_vanishes_at_optimum(rng):
    X, y = _blobs(rng, 500, p=3, shift=0.8)
    m = fit_logistic(X, y, LogisticConfig(alpha=1e-10, l1_ratio=0.0, tolerance=1e-12, max_epochs=100000))
    gw, gb = smooth_grad(m.coef, m.intercept, X, y)
    assert np.abs(np.append(gw, gb)).max() < 1e-6


def test_fit_decreases_objective(rng):
    X, y = _blobs(rng)
    cfg = LogisticConfig()
    m = fit_logistic(X, y, cfg)
    assert objective(m.coef, m.intercept, X, y, cfg) < objective(np.zeros(4), 0.0, X, y, cfg)


def test_logistic_rejects_non_finite():
    with pytest.raises(ValueError, match="non-finite"):
        fit_logistic(np.array([[np.nan], [1.0]]), np.array([0, 1]))


# --- search ----------------------------------------------------------------


def test_single_draw_wins(rng):
    X, y = _blobs(rng, 120)
    spec = SearchSpec({"alpha": {"type": "log_uniform", "low": 1e-4, "high": 1e-1}}, n_draws=1, k_folds=3)
    cfg, report = random_search(X, y, spec, "logistic")
    assert report["best_trial"] == 0 and len(report["trials"]) == 1
    assert cfg.alpha == report["best_params"]["alpha"]


def test_degenerate_forest_never_wins(rng):
    X, y = _blobs(rng, 150, shift=3.0)
    spec = SearchSpec({"min_samples_leaf": {"type": "categorical", "choices": [150, 1, 2]},
                       "n_estimators": {"type": "categorical", "choices": [5]}}, n_draws=8, k_folds=3, seed=5)
    cfg, report = random_search(X, y, spec, "forest")
    assert len(report["trials"]) == 8
    assert cfg.min_samples_leaf != 150
    degenerate = [t for t in report["trials"] if t["params"]["min_samples_leaf"] == 150]
    assert degenerate and all(t["mean_auc"] == 0.5 for t in degenerate)


def test_search_is_seeded_and_second_round(rng):
    X, y = _blobs(rng, 120)
    space = {k: FOREST_SPACE[k] for k in ("min_samples_leaf", "min_samples_split")}
    space["n_estimators"] = {"type": "int_uniform", "low": 3, "high": 6}
    spec = SearchSpec(space, n_draws=3, k_folds=3, seed=2, second_round=True, second_round_draws=2)
    a = random_search(X, y, spec, "forest")[1]
    b = random_search(X, y, spec, "forest")[1]
    assert a == b
    assert [t["round"] for t in a["trials"]] == [1, 1, 1, 2, 2]
    assert a["best_mean_auc"] == max(t["mean_auc"] for t in a["trials"])


def test_search_spec_validation():
    with pytest.raises(ValueError):
        SearchSpec({}, n_draws=0)
    with pytest.raises(ValueError):
        SearchSpec({}, k_folds=1)


def test_stratified_folds_balance(rng):
    for _ in range(30):
        n = int(rng.integers(20, 500))
        y = (rng.random(n) < rng.uniform(0.1, 0.9)).astype(int)
        k = int(rng.integers(2, 8))
        fold = stratified_folds(y, k, int(rng.integers(1000)))
        assert set(fold.tolist()) == set(range(k))
        for f in range(k):
            members = fold == f
            expected = y.sum() * members.sum() / n
            assert abs(y[members].sum() - expected) <= 1 + 1e-9
