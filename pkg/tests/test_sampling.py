import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import edges_from_pairs
from oracles import neighbor_sets, random_graph
from topolink import sampling as S
from topolink.graph_store import TemporalEdgeList, snapshot


def test_g1_candidates(g1):
    got = list(S.candidate_pairs(g1, S.SamplingConfig(min_degree=1)))
    assert got == [(1, 4), (2, 4)]


def test_min_degree_above_max_gives_nothing(g1):
    assert list(S.candidate_pairs(g1, S.SamplingConfig(min_degree=4))) == []


def test_empty_graph_min_degree_zero():
    s = snapshot(edges_from_pairs([], n_nodes=3), 0)
    assert list(S.candidate_pairs(s, S.SamplingConfig(min_degree=0))) == [(0, 1), (0, 2), (1, 2)]


def _brute_candidates(nbrs, min_degree, two_band=False):
    deg = [len(x) for x in nbrs]

    def band(d):
        if d >= min_degree:
            return "high"
        if two_band and d >= 1:
            return "low"
        return None

    out = []
    for u, v in itertools.combinations(range(len(nbrs)), 2):
        if v in nbrs[u]:
            continue
        bu, bv = band(deg[u]), band(deg[v])
        if bu is not None and bu == bv:
            out.append((u, v))
    return out


@pytest.mark.parametrize("two_band", [False, True])
def test_candidates_match_brute_force(rng, two_band):
    for _ in range(150):
        n = int(rng.integers(1, 61))
        pairs = random_graph(rng, n, float(rng.choice([0.05, 0.2, 0.5])))
        s = snapshot(edges_from_pairs(pairs, n_nodes=n), 0)
        k = int(rng.integers(0, 8))
        cfg = S.SamplingConfig(min_degree=k, two_band=two_band)
        assert list(S.candidate_pairs(s, cfg)) == _brute_candidates(neighbor_sets(n, pairs), k, two_band)
        assert S.count_candidates(s, cfg) == len(_brute_candidates(neighbor_sets(n, pairs), k, two_band))


def test_max_candidates_truncates_stream(rng):
    pairs = random_graph(rng, 40, 0.2)
    s = snapshot(edges_from_pairs(pairs, n_nodes=40), 0)
    full = list(S.candidate_pairs(s, S.SamplingConfig(min_degree=2)))
    for cap in (0, 1, 17, len(full), len(full) + 5):
        got = list(S.candidate_pairs(s, S.SamplingConfig(min_degree=2, max_candidates=cap)))
        assert got == full[:cap]


def test_small_blocks_preserve_stream(rng):
    pairs = random_graph(rng, 50, 0.1)
    s = snapshot(edges_from_pairs(pairs, n_nodes=50), 0)
    cfg = S.SamplingConfig(min_degree=1)
    big = np.concatenate([np.column_stack(b) for b in S.iter_candidate_blocks(s, cfg)])
    small = np.concatenate([np.column_stack(b) for b in S.iter_candidate_blocks(s, cfg, block=7)])
    assert np.array_equal(big, small)


def test_label_pairs(g1):
    later = snapshot(edges_from_pairs([(1, 2), (1, 3), (2, 3), (3, 4), (1, 4)]), 0)
    lab = S.label_pairs(list(S.candidate_pairs(g1, S.SamplingConfig(min_degree=1))), later)
    assert lab.label.tolist() == [1, 0]


def _synthetic_labeled(n_pos, n_neg, seed=0):
    rng = np.random.default_rng(seed)
    label = np.zeros(n_pos + n_neg, dtype=np.int8)
    label[rng.choice(len(label), n_pos, replace=False)] = 1
    idx = np.arange(len(label))
    return S.PairSample(idx, idx + 1, label, None)


def test_balanced_undersample_large():
    labeled = _synthetic_labeled(523721, 2_000_000)
    out = S.balanced_undersample(labeled, seed=5)
    assert len(out) == 1047442
    assert out.n_pos == 523721
    assert np.all(np.diff(out.u) > 0)
    assert len(np.unique(out.u)) == len(out)
    again = S.balanced_undersample(labeled, seed=5)
    assert np.array_equal(out.u, again.u)
    other = S.balanced_undersample(labeled, seed=6)
    assert not np.array_equal(out.u, other.u)


def test_balanced_undersample_errors():
    with pytest.raises(S.SamplingError):
        S.balanced_undersample(_synthetic_labeled(0, 10), 0)
    with pytest.raises(S.SamplingError, match="negatives"):
        S.balanced_undersample(_synthetic_labeled(10, 5), 0)


def test_subsample_balanced():
    sample = S.balanced_undersample(_synthetic_labeled(60000, 90000), 1)
    sub = S.subsample_balanced(sample, 50000, seed=2)
    assert len(sub) == 100000 and sub.n_pos == 50000
    with pytest.raises(S.SamplingError):
        S.subsample_balanced(sample, 60001, seed=2)


def test_holdout_split_counts():
    sample = S.PairSample(np.arange(100), np.arange(100) + 1, [0, 1] * 50, None)
    train, hold = S.holdout_split(sample, 0.1, seed=3)
    assert (len(train), len(hold)) == (90, 10)
    assert (train.n_pos, len(train) - train.n_pos) == (45, 45)
    assert (hold.n_pos, len(hold) - hold.n_pos) == (5, 5)
    assert set(train.split) == {"train"} and set(hold.split) == {"holdout"}
    assert not set(train.u) & set(hold.u)


@pytest.mark.parametrize("frac,n_hold", [(0.0, 0), (1.0, 100)])
def test_holdout_split_edges(frac, n_hold):
    sample = S.PairSample(np.arange(100), np.arange(100) + 1, [0, 1] * 50, None)
    train, hold = S.holdout_split(sample, frac, seed=0)
    assert len(hold) == n_hold and len(train) == 100 - n_hold
    with pytest.raises(ValueError):
        S.holdout_split(sample, 1.5, seed=0)


def _growing_pair(rng, n=80):
    old = random_graph(rng, n, 0.12)
    extra = random_graph(rng, n, 0.03)
    recs = [(u, v, 0) for u, v in old] + [(u, v, 1) for u, v in extra]
    e = TemporalEdgeList.from_records(np.array(recs).reshape(-1, 3), n_nodes=n)
    return snapshot(e, 0), snapshot(e, 1)


@pytest.mark.parametrize("two_band", [False, True])
def test_streaming_sample_equals_in_memory(rng, two_band):
    feat, label = _growing_pair(rng)
    cfg = S.SamplingConfig(min_degree=8, seed=11, two_band=two_band)
    streamed, stats = S.sample_window(feat, label, cfg)
    labeled = S.label_pairs(list(S.candidate_pairs(feat, cfg)), label)
    direct = S.balanced_undersample(labeled, cfg.seed)
    assert np.array_equal(streamed.pairs, direct.pairs)
    assert np.array_equal(streamed.label, direct.label)
    assert stats == {"candidates": len(labeled), "positives": labeled.n_pos,
                     "negatives": len(labeled) - labeled.n_pos}


def test_unbalanced_sample_keeps_everything(rng):
    feat, label = _growing_pair(rng)
    cfg = S.SamplingConfig(min_degree=8, balance=False)
    sample, stats = S.sample_window(feat, label, cfg)
    assert len(sample) == stats["candidates"]


def test_samples_csv_byte_identical(tmp_path, rng):
    feat, label = _growing_pair(rng)
    cfg = S.SamplingConfig(min_degree=8, seed=4)
    for name in ("a.csv", "b.csv"):
        sample, _ = S.sample_window(feat, label, cfg)
        train, hold = S.holdout_split(sample, 0.2, seed=9)
        S.write_samples(S.PairSample.concat([train, hold]), tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    back = S.read_samples(tmp_path / "a.csv")
    assert back.split.tolist().count("holdout") == len(hold)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 300), st.integers(0, 300), st.integers(0, 2**63 - 1))
def test_balance_invariant(n_pos, extra, seed):
    labeled = _synthetic_labeled(n_pos, n_pos + extra, seed=seed % 1000)
    out = S.balanced_undersample(labeled, seed)
    assert out.n_pos == n_pos and len(out) == 2 * n_pos
    pos_in = set(labeled.u[labeled.label == 1].tolist())
    assert set(out.u[out.label == 1].tolist()) == pos_in


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 200), st.integers(0, 200), st.floats(0, 1), st.integers(0, 1000))
def test_holdout_partition_invariant(n0, n1, frac, seed):
    label = np.array([0] * n0 + [1] * n1, dtype=np.int8)
    sample = S.PairSample(np.arange(len(label)), np.arange(len(label)) + 1, label, None)
    train, hold = S.holdout_split(sample, frac, seed)
    assert sorted(train.u.tolist() + hold.u.tolist()) == list(range(len(label)))
    assert hold.n_pos == round(frac * n1)
    assert len(hold) - hold.n_pos == round(frac * n0)
