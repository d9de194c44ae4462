import random
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from freshsched.derivation import DegeneratePeriodWarning, derive_periods
from freshsched.generators import random_dag
from freshsched.model import DependencyEdge, PlatformSpec, TaskGraph, TaskSpec
from freshsched.simulator import (AgeAnchor, ConsumptionInstant, Policy, SimulationConfig, audit_to_csv,
                                  compare_policies, freshness_audit, hyperperiod, simulate, trace_to_csv)
from freshsched.synthesis import Mode, SynthesisError, SynthesisResult, assign_offsets

from conftest import MS, aeb, fixture_graph

FINISH_FINISH = dict(age_anchor=AgeAnchor.PRODUCER_FINISH, consumption_instant=ConsumptionInstant.CONSUMER_FINISH)
RELEASE_FINISH = dict(age_anchor=AgeAnchor.PRODUCER_RELEASE, consumption_instant=ConsumptionInstant.CONSUMER_FINISH)


def imu_ages(trace):
    return {r.age for r in trace.records("imu", "ctrl")}


# --- worked scenarios ---

def test_fixed_order_serves_imu_too_early():
    g = aeb(1)
    cfg = SimulationConfig(Policy.FIXED_ORDER, order=("imu", "vis", "ctrl"), **FINISH_FINISH)
    trace = simulate(g, None, cfg)
    assert trace.job("imu", 1).finish == 2 * MS
    assert (trace.job("ctrl", 1).start, trace.job("ctrl", 1).finish) == (12 * MS, 13 * MS)
    assert imu_ages(trace) == {11 * MS}
    assert freshness_audit(trace, g)


def test_deadline_order_serves_imu_just_in_time():
    g = aeb(1)
    r = assign_offsets(g, Mode.SINGLE)
    trace = simulate(g, r, SimulationConfig(Policy.JIT, **FINISH_FINISH))
    first = sorted(trace.jobs, key=lambda j: j.start)[:3]
    assert [j.task for j in first] == ["vis", "imu", "ctrl"]
    assert imu_ages(trace) == {1 * MS}
    assert not freshness_audit(trace, g)


def test_two_core_jit_ages_under_each_mode():
    g = aeb(2)
    r = assign_offsets(g)
    trace = simulate(g, r)
    imu = trace.job("imu", 1)
    assert (imu.start, imu.finish) == (6 * MS, 8 * MS)
    assert trace.job("ctrl", 1).start == 10 * MS
    assert imu_ages(trace) == {4 * MS}
    assert imu_ages(simulate(g, r, SimulationConfig(**RELEASE_FINISH))) == {5 * MS}
    assert not freshness_audit(trace, g)


def test_two_core_asap_is_stale_under_both_modes():
    g = aeb(2)
    trace = simulate(g, None, SimulationConfig(Policy.ASAP))
    assert imu_ages(trace) == {10 * MS}
    assert {r.age for r in freshness_audit(trace, g, SimulationConfig(Policy.ASAP, **FINISH_FINISH))} == {9 * MS}
    assert all(r.producer == "imu" for r in freshness_audit(trace, g))


def test_camera_imu_fusion_ages():
    g = fixture_graph("camera_imu.json")
    r = assign_offsets(g)
    assert r.offsets["imu"] == 9 * MS
    jit = simulate(g, r)
    assert {x.age for x in jit.records("imu", "fusion")} == {1 * MS}
    asap = simulate(g, None, SimulationConfig(Policy.ASAP))
    assert {x.time for x in asap.records("imu", "fusion", audited_only=False)} == {10 * MS, 30 * MS, 50 * MS}
    assert {x.age for x in asap.records("imu", "fusion")} == {10 * MS}


def test_fresh_sample_when_freshness_sets_the_period():
    g = derive_periods(TaskGraph((TaskSpec("p", MS), TaskSpec("c", MS, 10 * MS)),
                                 (DependencyEdge("p", "c", 25 * MS),)))
    assert g.task("p").period == 25 * MS
    trace = simulate(g, None, SimulationConfig(Policy.ASAP, horizon=4))
    ages = [r.age for r in trace.records("p", "c")]
    assert ages and max(ages) <= 25 * MS


# --- hyperperiod ---

def test_hyperperiod_values():
    assert hyperperiod(aeb()) == 20 * MS
    g = TaskGraph((TaskSpec("a", 1, 20), TaskSpec("b", 1, 50), TaskSpec("c", 1, 10)))
    assert hyperperiod(g) == 100


def test_hyperperiod_with_decomposed_subtasks():
    g = fixture_graph("decomposition.json")
    r = assign_offsets(g)
    assert hyperperiod(g, r) == 20 * MS


def test_hyperperiod_overflow_guidance():
    big = [TaskSpec(f"t{i}", 1, p) for i, p in enumerate([2**31 - 1, 2**31 - 19, 2**31 - 61])]
    with pytest.raises(OverflowError, match="tick_base"):
        hyperperiod(TaskGraph(tuple(big)))


# --- comparison and export ---

def test_compare_policies_on_camera_example():
    g = fixture_graph("camera_imu.json")
    report = compare_policies(g, assign_offsets(g))
    imu = next(e for e in report.edges if e.producer == "imu")
    assert (imu.asap_worst, imu.jit_worst) == (10 * MS, 1 * MS)
    assert imu.reduction == 9 * MS


def test_compare_policies_on_aeb():
    g = aeb(2)
    cfg = SimulationConfig(horizon=3, warmup=1)
    report = compare_policies(g, assign_offsets(g), cfg)
    assert report.asap_violations >= 2  # at least one per audited period
    assert report.jit_violations == 0


def test_compare_single_task_graph():
    g = TaskGraph((TaskSpec("only", 1, 10),))
    report = compare_policies(g, assign_offsets(g))
    assert report.edges == () and report.asap_misses == report.jit_misses == 0


def test_csv_exports():
    g = aeb(2)
    trace = simulate(g, assign_offsets(g))
    assert trace_to_csv(trace).splitlines()[0] == "event,time_ticks,task,job,core,detail"
    audit = audit_to_csv(trace.consumptions).splitlines()
    assert audit[0] == "consumer,producer,k,age_ticks,bound_ticks,fresh"
    assert len(audit) == 1 + len(trace.consumptions)


def test_cold_start_is_flagged_but_not_audited():
    g = aeb(2)
    r = assign_offsets(g)
    late = SynthesisResult(Mode.GLOBAL, {**r.offsets, "ctrl": 0}, {**r.effective_deadlines, "ctrl": 20 * MS})
    trace = simulate(g, late, SimulationConfig(warmup=1))
    first = [c for c in trace.consumptions if c.consumer_job == 1]
    assert first and all(c.age is None and not c.audited for c in first)


def test_config_bounds():
    with pytest.raises(ValueError):
        SimulationConfig(horizon=2, warmup=2)
    with pytest.raises(ValueError):
        SimulationConfig(horizon=0, warmup=0)


def test_jit_needs_result():
    with pytest.raises(ValueError):
        simulate(aeb(), None, SimulationConfig(Policy.JIT))


# --- trace invariants on random graphs ---

def check_trace(trace, graph):
    m = trace.cores
    wcet = {t.id: t.wcet for t in graph.tasks}
    for j in trace.jobs:
        assert j.start >= j.release
        assert j.executed == wcet[j.stream]
        assert j.finish == j.segments[-1][1] and j.start == j.segments[0][0]
    for lane in trace.core_timeline:
        for (a0, b0, *_), (a1, b1, *_) in zip(lane, lane[1:]):
            assert b0 <= a1
    # work conservation: whenever a core idles, nothing released is left waiting
    events = sorted({x for j in trace.jobs for x in (j.release, j.finish)} |
                    {s[0] for j in trace.jobs for s in j.segments})
    for t in events:
        running = sum(1 for j in trace.jobs for a, b, _ in j.segments if a <= t < b)
        waiting = sum(1 for j in trace.jobs if j.release <= t < j.finish
                      and not any(a <= t < b for a, b, _ in j.segments))
        assert waiting == 0 or running == m


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 3), st.sampled_from(list(Policy)))
def test_trace_invariants(seed, cores, policy):
    rng = random.Random(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneratePeriodWarning)
        g = random_dag(rng, rng.randint(1, 6), rng.uniform(0.2, 0.9) * cores, cores=cores, tick=1,
                       periods_ms=(4, 8, 10, 20, 40))
    result = None
    if policy is Policy.JIT:
        try:
            result = assign_offsets(g, verify=False)
        except SynthesisError:
            return
    order = tuple(sorted(g.task_ids, reverse=True)) if policy is Policy.FIXED_ORDER else ()
    cfg = SimulationConfig(policy, horizon=2, warmup=1, order=order)
    trace = simulate(g, result, cfg)
    check_trace(trace, g)
    assert simulate(g, result, cfg) == trace  # deterministic


def test_decomposed_trace_invariants():
    g = fixture_graph("decomposition.json")
    trace = simulate(g, assign_offsets(g), SimulationConfig(horizon=5))
    check_trace(trace, g)
    assert not freshness_audit(trace, g) and not trace.misses
