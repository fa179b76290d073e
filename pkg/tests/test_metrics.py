import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfgloc.errors import MetricError
from sfgloc.retrieval import RankedRun, average_precision, evaluate_run, precision_at_k, random_mrr, reciprocal_rank


def ranking_with_hits(n, hits):
    return [(f"r{j}" if j in hits else f"x{j}", float(n - j)) for j in range(1, n + 1)]


def run_of(*hit_sets, n=6):
    run = RankedRun()
    for q, hits in enumerate(hit_sets):
        run.add(q, ranking_with_hits(n, hits), {f"r{j}" for j in hits})
    return run


def test_single_hit_at_top():
    m = evaluate_run(run_of({1}))
    assert m["MRR"] == 1.0 and m["P@1"] == 1.0 and m["MAP"] == 1.0


def test_ranks_one_and_three():
    assert abs(average_precision(ranking_with_hits(5, {1, 3}), {"r1", "r3"}) - (1 + 2 / 3) / 2) < 1e-12
    assert round(average_precision(ranking_with_hits(5, {1, 3}), {"r1", "r3"}), 4) == 0.8333


def test_mean_reciprocal_rank_of_two_queries():
    assert abs(evaluate_run(run_of({1}, {2}))["MRR"] - 0.75) < 1e-12


def test_hit_at_rank_four():
    m = evaluate_run(run_of({4}))
    assert m["P@3"] == 0.0 and m["MRR"] == 0.25 and m["P@5"] == 0.2


def test_missing_relevant_contributes_nothing():
    assert average_precision(ranking_with_hits(3, {2}), {"r2", "gone"}) == pytest.approx(0.25, abs=1e-12)
    assert reciprocal_rank([("a", 1.0)], {"b"}) == 0.0


def test_errors():
    with pytest.raises(MetricError):
        average_precision([("a", 1.0)], set())
    run = RankedRun()
    run.add("q", [("a", 0.1), ("b", 0.5)], {"a"})
    with pytest.raises(MetricError):
        evaluate_run(run)
    run = RankedRun()
    run.add("q", [("a", 0.5), ("a", 0.1)], {"a"})
    with pytest.raises(MetricError):
        evaluate_run(run)
    run = RankedRun(rankings={"q": [("a", 1.0)]}, relevant={"p": {"a"}})
    with pytest.raises(MetricError):
        evaluate_run(run)


def test_random_baseline_closed_form():
    assert random_mrr(1) == 1.0
    assert math.isclose(random_mrr(4), (1 + 1 / 2 + 1 / 3 + 1 / 4) / 4)
    # two relevant among three: first hit at 1 w.p. 2/3, at 2 w.p. 1/3
    assert math.isclose(random_mrr(3, 2), 2 / 3 + 1 / 6)


def test_random_baseline_matches_simulation():
    rng = random.Random(0)
    pool, rel = 30, 2
    sims = []
    for _ in range(20000):
        order = list(range(pool))
        rng.shuffle(order)
        sims.append(1 / (1 + min(order.index(0), order.index(1))))
    assert abs(sum(sims) / len(sims) - random_mrr(pool, rel)) < 0.01


def _oracle_ap(flags, n_rel):
    """Textbook AvgP from a 0/1 relevance vector."""
    return sum(sum(flags[: j + 1]) / (j + 1) for j, f in enumerate(flags) if f) / n_rel


hit_sets = st.lists(st.sets(st.integers(1, 12), min_size=1, max_size=5), min_size=1, max_size=6)


@settings(max_examples=100, deadline=None)
@given(hit_sets)
def test_metric_ranges_and_oracle(sets):
    run = run_of(*sets, n=12)
    m = evaluate_run(run)
    assert all(0.0 <= v <= 1.0 for v in m.values())
    ap = [_oracle_ap([int(j in s) for j in range(1, 13)], len(s)) for s in sets]
    assert abs(m["MAP"] - sum(ap) / len(ap)) < 1e-12
    assert (m["MRR"] == 1.0) == all(1 in s for s in sets)
    for k in (1, 3, 5):
        want = sum(len([j for j in s if j <= k]) / k for s in sets) / len(sets)
        assert abs(m[f"P@{k}"] - want) < 1e-12


@settings(max_examples=50, deadline=None)
@given(hit_sets, st.randoms())
def test_metrics_ignore_id_names(sets, rnd):
    run = run_of(*sets, n=12)
    names = {i for r in run.rankings.values() for i, _ in r}
    new = dict(zip(sorted(names), rnd.sample([f"id{k}" for k in range(len(names))], len(names))))
    other = RankedRun()
    for q in run.rankings:
        other.add(q, [(new[i], s) for i, s in run.rankings[q]], {new[i] for i in run.relevant[q]})
    assert evaluate_run(other) == evaluate_run(run)


def test_precision_divides_by_k():
    assert precision_at_k(["a", "b"], {"a"}, 5) == 0.2
