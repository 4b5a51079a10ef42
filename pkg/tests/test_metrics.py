import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnmsr import metrics
from rnmsr.baselines import ItemKNN, Pop
from oracles import rank_metrics


def test_rank_one():
    s = [0.9, 0.1, 0.0]
    assert metrics.rank_of(s, 0) == 1
    assert metrics.precision_at(s, 0, 1) == 1.0
    assert metrics.mrr_at(s, 0, 1) == 1.0
    assert metrics.ndcg_at(s, 0, 1) == 1.0


def test_rank_beyond_cutoff_scores_zero():
    s = np.arange(30.0)[::-1]
    assert metrics.rank_of(s, 20) == 21
    assert metrics.precision_at(s, 20, 20) == metrics.mrr_at(s, 20, 20) == metrics.ndcg_at(s, 20, 20) == 0.0


def test_rank_two_ndcg():
    s = [0.5, 0.9, 0.1]
    assert metrics.rank_of(s, 0) == 2
    assert metrics.ndcg_at(s, 0, 3) == pytest.approx(0.63093, abs=1e-5)
    assert metrics.mrr_at(s, 0, 3) == 0.5


def test_ties_break_toward_lower_index():
    s = [1.0, 1.0, 1.0]
    assert [metrics.rank_of(s, k) for k in range(3)] == [1, 2, 3]


def test_matches_bruteforce_oracle():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        size = int(rng.integers(1, 60))
        s = rng.integers(0, 8, size=size).astype(float) if rng.random() < 0.5 else rng.normal(size=size)
        t = int(rng.integers(size))
        for n in metrics.DEFAULT_NS:
            rank, p, mrr, ndcg = rank_metrics(list(s), t, n)
            assert metrics.rank_of(s, t) == rank
            assert metrics.precision_at(s, t, n) == p
            assert metrics.mrr_at(s, t, n) == pytest.approx(mrr)
            assert metrics.ndcg_at(s, t, n) == pytest.approx(ndcg)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=40), st.data())
def test_monotone_in_cutoff(s, data):
    t = data.draw(st.integers(0, len(s) - 1))
    for f in (metrics.precision_at, metrics.mrr_at, metrics.ndcg_at):
        vals = [f(s, t, n) for n in metrics.DEFAULT_NS]
        assert vals == sorted(vals)
        assert all(0.0 <= v <= 1.0 for v in vals)


def test_report_and_evaluate_scorer():
    pairs = [([1], 1), ([2], 3), ([3], 2)]
    scores = np.array([[0, 0.9, 0.5, 0.1], [0, 0.9, 0.5, 0.1], [0, 0.9, 0.5, 0.1]])
    rep = metrics.evaluate_scorer(lambda p: scores[: len(p)], pairs, batch_size=2)
    assert rep.count == 3
    assert rep["P@1"] == pytest.approx(1 / 3)
    assert rep["MRR@3"] == pytest.approx((1 + 1 / 3 + 1 / 2) / 3)
    assert rep["NDCG@3"] == pytest.approx((1 + 1 / math.log2(4) + 1 / math.log2(3)) / 3)
    assert rep.csv_header()[0] == "P@1" and len(rep.csv_row()) == 15


def test_pop_counts_targets():
    pairs = [([1], 2), ([1, 2], 3), ([3], 2), ([2], 4)]
    pop = Pop(5).fit(pairs)
    assert pop.counts.tolist() == [0, 0, 2, 1, 1, 0]
    assert pop([[1], [5]]).shape == (2, 6)


def test_itemknn_cooccurrence():
    pairs = [([1], 2), ([1], 2), ([1], 3), ([4], 5)]
    knn = ItemKNN(5).fit(pairs)
    s = knn([[1]])[0]
    # rows: {1,2} x2, {1,3}, {4,5}; |1|=3, |2|=2, |3|=1
    assert s[2] == pytest.approx(2 / math.sqrt(6))
    assert s[3] == pytest.approx(1 / math.sqrt(3))
    assert s[1] == 0 and s[4] == s[5] == 0
    assert ItemKNN(5, k=1).fit(pairs)([[1]])[0].tolist() == pytest.approx([0, 0, 2 / math.sqrt(6), 0, 0, 0])


def test_single_pair_ranked_first():
    rep = metrics.evaluate_scorer(lambda p: np.array([[0, 0.1, 0.9]]), [([1], 2)])
    assert all(v == 1.0 for v in rep.metrics.values())


def test_report_independent_of_pair_order():
    rng = np.random.default_rng(5)
    table = {k: rng.integers(0, 4, size=11).astype(float) for k in range(1, 40)}
    pairs = [([k], int(rng.integers(1, 11))) for k in range(1, 40)]

    def score(prefixes):
        return np.stack([table[p[0]] for p in prefixes])

    a = metrics.evaluate_scorer(score, pairs, batch_size=7)
    b = metrics.evaluate_scorer(score, pairs[::-1], batch_size=5)
    for k in a.metrics:
        assert a[k] == pytest.approx(b[k], abs=1e-15)
    assert a["MRR@20"] >= a["MRR@10"]


def test_pop_ranks_most_frequent_first():
    pairs = [([2], 1), ([3], 1), ([1], 1), ([1], 2), ([1], 3)]
    scores = Pop(4).fit(pairs)([[2], [4, 3]])
    assert all(metrics.rank_of(s[1:], 0) == 1 for s in scores)


def test_itemknn_prefers_cooccurring_item():
    pairs = [([1], 2), ([3], 4), ([4], 3)]
    s = ItemKNN(4).fit(pairs)([[1]])[0]
    assert s[2] > s[3]
