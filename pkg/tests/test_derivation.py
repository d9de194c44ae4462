import math
import random
import warnings

import pytest
from hypothesis import given, strategies as st

from freshsched.derivation import (DegeneratePeriodWarning, DerivationError, critical_predecessor, derive_periods,
                                   dominant_chain)
from freshsched.model import DependencyEdge, GraphError, TaskGraph, TaskSpec

from conftest import MS, aeb


def periods(g):
    return {t.id: t.period for t in g.tasks}


def one_edge(t_consumer, freshness):
    return TaskGraph((TaskSpec("p", MS), TaskSpec("c", MS, t_consumer)), (DependencyEdge("p", "c", freshness),))


def test_consumer_period_dominates_loose_bound():
    assert periods(derive_periods(one_edge(20 * MS, 5 * MS)))["p"] == 20 * MS


def test_freshness_dominates_fast_consumer():
    assert periods(derive_periods(one_edge(10 * MS, 25 * MS)))["p"] == 25 * MS


def test_shared_producer_takes_gcd():
    g = TaskGraph((TaskSpec("p", MS), TaskSpec("a", MS, 20 * MS), TaskSpec("b", MS, 50 * MS)),
                  (DependencyEdge("p", "a", 5 * MS), DependencyEdge("p", "b", 5 * MS)))
    assert periods(derive_periods(g))["p"] == 10 * MS


def test_gcd_of_one_tick_warns():
    g = TaskGraph((TaskSpec("p", 1), TaskSpec("a", 1, 7), TaskSpec("b", 1, 5)),
                  (DependencyEdge("p", "a", 2), DependencyEdge("p", "b", 2)))
    with pytest.warns(DegeneratePeriodWarning):
        derive_periods(g)


def test_declared_period_kept_when_it_divides():
    g = TaskGraph((TaskSpec("p", MS, 10 * MS), TaskSpec("c", MS, 20 * MS)), (DependencyEdge("p", "c", 5 * MS),))
    assert periods(derive_periods(g))["p"] == 10 * MS


def test_declared_period_rejected_when_it_does_not_divide():
    g = TaskGraph((TaskSpec("p", MS, 15 * MS), TaskSpec("c", MS, 20 * MS)), (DependencyEdge("p", "c", 5 * MS),))
    with pytest.raises(DerivationError):
        derive_periods(g)


def test_period_shorter_than_wcet_is_an_error():
    g = TaskGraph((TaskSpec("p", 6), TaskSpec("a", 1, 8), TaskSpec("b", 1, 12)),
                  (DependencyEdge("p", "a", 6), DependencyEdge("p", "b", 6)))
    with pytest.raises(DerivationError):
        derive_periods(g)  # gcd(8, 12) = 4 < 6


def test_invalid_graph_never_derived():
    g = TaskGraph((TaskSpec("a", 1, 10), TaskSpec("b", 1, 10)),
                  (DependencyEdge("a", "b", 5), DependencyEdge("b", "a", 5)))
    with pytest.raises(GraphError):
        derive_periods(g)


def test_critical_predecessor_is_strictest():
    assert critical_predecessor(aeb(), "ctrl") == "imu"
    assert critical_predecessor(aeb(), "imu") is None


def test_critical_predecessor_tie_goes_to_smaller_id():
    g = TaskGraph((TaskSpec("zeta", 1), TaskSpec("alpha", 1), TaskSpec("c", 1, 10)),
                  (DependencyEdge("zeta", "c", 5), DependencyEdge("alpha", "c", 5)))
    assert critical_predecessor(g, "c") == "alpha"


def test_dominant_chain_aeb():
    assert dominant_chain(aeb(), "ctrl").path == ("ctrl", "imu")


def test_dominant_chain_linear():
    g = TaskGraph((TaskSpec("a", 1), TaskSpec("b", 1), TaskSpec("c", 1, 10)),
                  (DependencyEdge("a", "b", 5), DependencyEdge("b", "c", 5)))
    assert dominant_chain(g, "c").path == ("c", "b", "a")


def test_dominant_chain_diamond_tie_is_deterministic():
    edges = [DependencyEdge("s", "l", 5), DependencyEdge("s", "r", 5), DependencyEdge("l", "k", 5),
             DependencyEdge("r", "k", 5)]
    tasks = [TaskSpec("s", 1), TaskSpec("l", 1), TaskSpec("r", 1), TaskSpec("k", 1, 10)]
    paths = set()
    for seed in range(10):
        rng = random.Random(seed)
        rng.shuffle(edges)
        rng.shuffle(tasks)
        paths.add(dominant_chain(TaskGraph(tuple(tasks), tuple(edges)), "k").path)
    assert paths == {("k", "l", "s")}


def test_dominant_chain_requires_sink():
    with pytest.raises(GraphError):
        dominant_chain(aeb(), "imu")


PERIOD_MENU = [4, 5, 6, 8, 10, 12, 15, 20, 30, 40, 60]


@st.composite
def derivable_dags(draw):
    n = draw(st.integers(2, 8))
    pairs = [(i, j) for j in range(1, n) for i in range(j) if draw(st.booleans())]
    has_succ = {i for i, _ in pairs}
    tasks = [TaskSpec(f"t{i}", 1, None if i in has_succ else draw(st.sampled_from(PERIOD_MENU))) for i in range(n)]
    edges = [DependencyEdge(f"t{i}", f"t{j}", draw(st.sampled_from(PERIOD_MENU))) for i, j in pairs]
    return TaskGraph(tuple(tasks), tuple(edges))


@given(derivable_dags(), st.randoms(use_true_random=False))
def test_derivation_independent_of_declaration_order(g, rnd):
    tasks, edges = list(g.tasks), list(g.edges)
    rnd.shuffle(tasks)
    rnd.shuffle(edges)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneratePeriodWarning)
        assert periods(derive_periods(g)) == periods(derive_periods(TaskGraph(tuple(tasks), tuple(edges))))


@given(derivable_dags())
def test_derived_periods_serve_every_consumer(g):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneratePeriodWarning)
        d = derive_periods(g)
    p = periods(d)
    for tid in d.task_ids:
        outs = d.outgoing(tid)
        demands = [max(p[e.consumer], e.freshness) for e in outs]
        if len(outs) == 1:
            assert p[tid] == demands[0]
        elif outs:
            assert all(x % p[tid] == 0 for x in demands)
            assert p[tid] == math.gcd(*demands)


@given(derivable_dags())
def test_dominant_chain_is_simple_path(g):
    for sink in g.sinks():
        chain = dominant_chain(g, sink)
        assert len(chain) <= len(g.tasks) and len(set(chain.path)) == len(chain.path)
        for a, b in zip(chain.path, chain.path[1:]):
            assert critical_predecessor(g, a) == b
        assert not g.predecessors(chain.path[-1])
