from __future__ import annotations

import warnings

import numpy as np
import pytest

from narrate.metrics import accuracy, macro_f1, mrr, ndcg_at_k, recall_at_k

from oracles import macro_f1_naive, mrr_naive, ndcg_naive, recall_naive


def _rank_lists(first_ranks, pool=10):
    """Rankings of ids 0..pool-1 whose only relevant id ("r") sits at the given rank."""
    rankings, rel = [], []
    for r in first_ranks:
        ranking = list(range(pool - 1))
        if r is not None:
            ranking.insert(r - 1, "r")
        else:
            ranking.append("x")
        rankings.append(ranking)
        rel.append({"r"})
    return rankings, rel


def test_recall_examples():
    rk, rel = _rank_lists([1, 1, 1])
    assert recall_at_k(rk, rel, 1) == 1.0
    rk, rel = _rank_lists([1, 6, 3])
    assert recall_at_k(rk, rel, 5) == pytest.approx(2 / 3)
    rk, rel = _rank_lists([None, None])
    assert recall_at_k(rk, rel, 3) == 0.0


def test_recall_clamps_k():
    rk, rel = _rank_lists([2], pool=3)
    with pytest.warns(UserWarning, match="clamped"):
        assert recall_at_k(rk, rel, 10) == 1.0
    with pytest.raises(ValueError):
        recall_at_k(rk, rel, 0)


def test_mrr_examples():
    assert mrr(*_rank_lists([1, 1])) == 1.0
    assert mrr(*_rank_lists([1, 2, 4])) == pytest.approx(0.58333333333, abs=1e-9)
    assert mrr(*_rank_lists([10], pool=12)) == pytest.approx(0.1)
    with pytest.warns(UserWarning, match="excluded"):
        assert mrr(*_rank_lists([2, None])) == 0.5


def test_ndcg_examples():
    assert ndcg_at_k([["a", "b"]], [{"a": 2, "b": 1}], 2) == pytest.approx(1.0)
    assert ndcg_at_k([["a", "b"]], [{"a": 0, "b": 1}], 2) == pytest.approx(0.6309, abs=1e-4)
    with pytest.warns(UserWarning, match="excluded"):
        assert ndcg_at_k([["a"], ["b"]], [{"a": 1}, {"b": 0}], 1) == 1.0
    with pytest.raises(ValueError), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ndcg_at_k([["a"]], [{"a": 0}], 1)


def test_accuracy_and_f1_examples():
    assert accuracy(list("aabb"), list("aaba")) == 0.75
    assert macro_f1(["a", "a", "b"], ["a", "b", "b"], ["a", "b"]) == pytest.approx(2 / 3, abs=1e-12)
    assert accuracy(["a", "b"], ["a", "b"]) == 1.0
    assert macro_f1(["a", "b"], ["a", "b"], ["a", "b", "c"]) == 1.0
    with pytest.raises(ValueError):
        accuracy([], [])
    with pytest.raises(ValueError):
        macro_f1(["a"], ["z"], ["a"])


def test_random_instances_match_naive_references():
    rng = np.random.default_rng(0)
    for _ in range(100):
        nq = int(rng.integers(1, 21))
        pool = int(rng.integers(2, 51))
        k = int(rng.integers(1, pool + 1))
        rankings, rel, grades, first = [], [], [], []
        for _ in range(nq):
            ranking = [int(i) for i in rng.permutation(pool)]
            relevant = {int(i) for i in rng.choice(pool, int(rng.integers(1, min(4, pool) + 1)), replace=False)}
            g = {int(i): int(rng.integers(0, 3)) for i in range(pool)}
            g[next(iter(relevant))] = 2
            rankings.append(ranking)
            rel.append(relevant)
            grades.append(g)
            first.append(min(ranking.index(i) for i in relevant) + 1)
        assert recall_at_k(rankings, rel, k) == pytest.approx(recall_naive(first, k), abs=1e-12)
        assert mrr(rankings, rel) == pytest.approx(mrr_naive(first), abs=1e-12)
        ref = sum(ndcg_naive(r, g, k) for r, g in zip(rankings, grades)) / nq
        assert ndcg_at_k(rankings, grades, k) == pytest.approx(ref, abs=1e-12)
        classes = [f"c{i}" for i in range(int(rng.integers(2, 6)))]
        golds = [classes[i] for i in rng.integers(0, len(classes), nq)]
        preds = [classes[i] for i in rng.integers(0, len(classes), nq)]
        assert accuracy(preds, golds) == pytest.approx(np.mean(np.array(preds) == np.array(golds)), abs=1e-12)
        assert macro_f1(preds, golds, classes) == pytest.approx(macro_f1_naive(preds, golds), abs=1e-12)
