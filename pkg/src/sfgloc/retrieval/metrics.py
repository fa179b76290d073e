"""Ranking metrics: P@K, AvgP, MAP and MRR."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from ..errors import MetricError


@dataclass
class RankedRun:
    """Per-query rankings (best first) of (id, score) and relevance labels."""

    rankings: dict = field(default_factory=dict)
    relevant: dict = field(default_factory=dict)

    def add(self, query, ranked, relevant):
        self.rankings[query] = list(ranked)
        self.relevant[query] = set(relevant)

    def check(self):
        if set(self.rankings) != set(self.relevant):
            missing = set(self.rankings) ^ set(self.relevant)
            raise MetricError(f"queries without both a ranking and labels: {sorted(map(str, missing))[:5]}")
        for q, ranked in self.rankings.items():
            ids = [i for i, _ in ranked]
            if len(set(ids)) != len(ids):
                raise MetricError(f"query {q}: ranking repeats an id")
            scores = [s for _, s in ranked]
            if any(b > a for a, b in zip(scores, scores[1:])):
                raise MetricError(f"query {q}: scores are not non-increasing")
            if not self.relevant[q]:
                raise MetricError(f"query {q}: no relevant changesets")


def _ids(ranking):
    return [r[0] if isinstance(r, tuple) else r for r in ranking]


def precision_at_k(ranking, relevant, k: int) -> float:
    top = _ids(ranking)[:k]
    return sum(1 for i in top if i in relevant) / k


def average_precision(ranking, relevant) -> float:
    """Sum of P@j over relevant ranks j, divided by the number of relevant items."""
    relevant = set(relevant)
    if not relevant:
        raise MetricError("average precision needs at least one relevant item")
    hits, total = 0, 0.0
    for j, i in enumerate(_ids(ranking), start=1):
        if i in relevant:
            hits += 1
            total += hits / j
    return total / len(relevant)


def reciprocal_rank(ranking, relevant) -> float:
    for j, i in enumerate(_ids(ranking), start=1):
        if i in relevant:
            return 1.0 / j
    return 0.0


def evaluate_run(run: RankedRun, ks=(1, 3, 5)) -> dict:
    run.check()
    qs = list(run.rankings)
    if not qs:
        raise MetricError("empty run")
    out = {}
    for k in ks:
        out[f"P@{k}"] = float(np.mean([precision_at_k(run.rankings[q], run.relevant[q], k) for q in qs]))
    out["MAP"] = float(np.mean([average_precision(run.rankings[q], run.relevant[q]) for q in qs]))
    out["MRR"] = float(np.mean([reciprocal_rank(run.rankings[q], run.relevant[q]) for q in qs]))
    return out


def random_mrr(pool_size: int, n_relevant: int = 1) -> float:
    """Expected reciprocal rank of the first of n relevant items in a uniformly shuffled pool."""
    # P(first relevant at rank j) = C(N - j, r - 1) / C(N, r)
    N, r = pool_size, n_relevant
    return sum(comb(N - j, r - 1) / comb(N, r) / j for j in range(1, N - r + 2))
