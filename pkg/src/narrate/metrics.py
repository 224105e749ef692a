"""Ranking and classification metrics.

A ranking is a sequence of candidate ids, best first. Relevance is given per
query as a set of relevant ids (binary metrics) or a mapping id -> grade.
Ranks are 1-based throughout.
"""

from __future__ import annotations

import math
import warnings
from typing import Hashable, Mapping, Sequence


def first_relevant_rank(ranking: Sequence[Hashable], relevant) -> int | None:
    for r, cid in enumerate(ranking, start=1):
        if cid in relevant:
            return r
    return None


def recall_at_k(rankings: Sequence[Sequence[Hashable]], relevance: Sequence, k: int) -> float:
    """Fraction of queries with at least one relevant candidate in the top ``k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(rankings) != len(relevance):
        raise ValueError("rankings and relevance differ in length")
    if not rankings:
        raise ValueError("no queries")
    pool = max(len(r) for r in rankings)
    if k > pool:
        warnings.warn(f"k={k} exceeds pool size {pool}; clamped", stacklevel=2)
        k = pool
    hits = 0
    for ranking, rel in zip(rankings, relevance):
        r = first_relevant_rank(ranking, rel)
        hits += r is not None and r <= k
    return hits / len(rankings)


def mrr(rankings: Sequence[Sequence[Hashable]], relevance: Sequence) -> float:
    """Mean reciprocal rank of the first relevant candidate.

    Queries without any relevant candidate are excluded (with a warning).
    """
    if len(rankings) != len(relevance):
        raise ValueError("rankings and relevance differ in length")
    recip = []
    excluded = 0
    for ranking, rel in zip(rankings, relevance):
        r = first_relevant_rank(ranking, rel)
        if r is None:
            excluded += 1
        else:
            recip.append(1.0 / r)
    if excluded:
        warnings.warn(f"mrr: {excluded} queries without a relevant candidate excluded", stacklevel=2)
    if not recip:
        raise ValueError("no query has a relevant candidate")
    return sum(recip) / len(recip)


def dcg(gains: Sequence[float], k: int) -> float:
    return sum((2.0 ** g - 1.0) / math.log2(i + 2) for i, g in enumerate(list(gains)[:k]))


def ndcg_at_k(
    rankings: Sequence[Sequence[Hashable]], grades: Sequence[Mapping[Hashable, float]], k: int
) -> float:
    """Mean nDCG@k with exponential gains 2^rel - 1.

    The ideal ordering sorts every graded candidate of the query. Queries
    whose grades are all zero are excluded (with a warning).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(rankings) != len(grades):
        raise ValueError("rankings and grades differ in length")
    vals = []
    excluded = 0
    for ranking, g in zip(rankings, grades):
        ideal = sorted((v for v in g.values() if v > 0), reverse=True)
        if not ideal:
            excluded += 1
            continue
        got = dcg([g.get(cid, 0) for cid in ranking], k)
        vals.append(got / dcg(ideal, k))
    if excluded:
        warnings.warn(f"ndcg: {excluded} queries with all-zero relevance excluded", stacklevel=2)
    if not vals:
        raise ValueError("no query has a positive relevance grade")
    return sum(vals) / len(vals)


def accuracy(preds: Sequence[str], golds: Sequence[str]) -> float:
    if len(preds) != len(golds):
        raise ValueError("preds and golds differ in length")
    if not preds:
        raise ValueError("empty prediction list")
    return sum(p == g for p, g in zip(preds, golds)) / len(preds)


def macro_f1(preds: Sequence[str], golds: Sequence[str], classes: Sequence[str]) -> float:
    """Unweighted mean F1 over classes present in ``preds`` or ``golds``."""
    if len(preds) != len(golds):
        raise ValueError("preds and golds differ in length")
    if not preds:
        raise ValueError("empty prediction list")
    class_set = set(classes)
    stray = set(golds) - class_set
    if stray:
        raise ValueError(f"gold classes outside the class set: {sorted(stray)}")
    f1s = []
    for c in classes:
        tp = sum(p == c and g == c for p, g in zip(preds, golds))
        fp = sum(p == c and g != c for p, g in zip(preds, golds))
        fn = sum(p != c and g == c for p, g in zip(preds, golds))
        if tp + fp + fn == 0:
            continue
        f1s.append(2 * tp / (2 * tp + fp + fn))
    return sum(f1s) / len(f1s)
