"""Deterministic preemptive global-EDF simulator with data-age tracking.

Jobs never block on data: a consumer that finds no finished producer job
still executes and its consumption is recorded as ``no-data``. Ordering
between producers and consumers comes only from release offsets and
deadlines, exactly as in the time-triggered schedules the synthesis emits.
"""

from __future__ import annotations

import bisect
import csv
import enum
import io
from dataclasses import dataclass, field
from statistics import fmean
from typing import TYPE_CHECKING, Callable, Optional, Sequence

from .model import Job, TaskGraph, TaskSpec, Tick, earliest_phases, lcm

if TYPE_CHECKING:
    from .synthesis import SynthesisResult

MAX_HYPERPERIOD = 2**62


class Policy(enum.Enum):
    ASAP = "asap"
    JIT = "jit"
    FIXED_ORDER = "order"


class AgeAnchor(enum.Enum):
    PRODUCER_RELEASE = "release"
    PRODUCER_START = "start"
    PRODUCER_FINISH = "finish"


class ConsumptionInstant(enum.Enum):
    CONSUMER_START = "start"
    CONSUMER_FINISH = "finish"


@dataclass(frozen=True)
class SimulationConfig:
    policy: Policy = Policy.JIT
    horizon: int = 3
    warmup: int = 1
    age_anchor: AgeAnchor = AgeAnchor.PRODUCER_RELEASE
    consumption_instant: ConsumptionInstant = ConsumptionInstant.CONSUMER_START
    order: tuple[str, ...] = ()
    cores: Optional[int] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least one hyperperiod")
        if not 0 <= self.warmup < self.horizon:
            raise ValueError("warmup must be in [0, horizon)")
        object.__setattr__(self, "order", tuple(self.order))


@dataclass(frozen=True)
class ConsumptionRecord:
    consumer: str
    consumer_job: int
    producer: str
    producer_job: Optional[int]
    time: Tick
    age: Optional[Tick]
    bound: Tick
    audited: bool = True
    producer_task: Optional[str] = None  # differs from producer for decomposed sub-tasks

    @property
    def fresh(self) -> bool:
        return self.age is not None and self.age <= self.bound


@dataclass(frozen=True)
class SimulationTrace:
    jobs: tuple[Job, ...]
    consumptions: tuple[ConsumptionRecord, ...]
    misses: tuple[Job, ...]
    core_timeline: tuple[tuple[tuple[Tick, Tick, str, int], ...], ...]
    hyperperiod: Tick
    warmup_end: Tick
    config: SimulationConfig = field(default_factory=SimulationConfig)

    @property
    def cores(self) -> int:
        return len(self.core_timeline)

    def jobs_of(self, task: str) -> list[Job]:
        return [j for j in self.jobs if j.task == task]

    def job(self, task: str, index: int) -> Job:
        for j in self.jobs:
            if j.task == task and j.index == index:
                return j
        raise KeyError((task, index))

    def records(self, producer: str, consumer: str, audited_only: bool = True) -> list[ConsumptionRecord]:
        return [r for r in self.consumptions
                if r.producer == producer and r.consumer == consumer and (r.audited or not audited_only)]


@dataclass(frozen=True)
class _Stream:
    task: str
    stream: str
    wcet: Tick
    period: Tick
    phase: Tick
    deadline: Tick  # frame-relative absolute deadline


def hyperperiod(graph: TaskGraph, result: Optional["SynthesisResult"] = None) -> Tick:
    periods = []
    for t in graph.tasks:
        if t.period is None:
            raise ValueError(f"task {t.id!r} has no period; derive periods first")
        periods.append(t.period)
    if result is not None:
        for subs in result.decomposed.values():
            periods.extend(s.period for s in subs)
    h = lcm(periods)
    if h > MAX_HYPERPERIOD:
        raise OverflowError(f"hyperperiod {h} ticks is too large; use a coarser tick_base")
    return h


def _streams(graph: TaskGraph, result, config: SimulationConfig) -> list[_Stream]:
    out = []
    if config.policy is Policy.JIT:
        if result is None:
            raise ValueError("JIT policy needs a synthesis result")
        for t in graph.tasks:
            subs = result.decomposed.get(t.id)
            if subs:
                out.extend(_Stream(s.id, t.id, t.wcet, s.period, s.offset, s.deadline) for s in subs)
                continue
            phase = result.offsets.get(t.id, t.offset)
            deadline = result.effective_deadlines.get(t.id, phase + t.deadline)
            out.append(_Stream(t.id, t.id, t.wcet, t.period, phase, deadline))
    else:
        phases = earliest_phases(graph)
        for t in graph.tasks:
            out.append(_Stream(t.id, t.id, t.wcet, t.period, phases[t.id], phases[t.id] + t.period))
    return out


def _dispatch(rel, dl, wcet, m: int, key: Callable[[int], tuple]):
    """Preemptive priority dispatch of independent jobs on ``m`` identical cores.

    At every release or completion the ``m`` highest-priority pending jobs run;
    jobs that keep running stay on their core, newly dispatched jobs take the
    lowest free core index.
    """
    n = len(rel)
    pending = sorted(range(n), key=lambda i: (rel[i], key(i)))
    remaining = list(wcet)
    start: list[Optional[int]] = [None] * n
    finish: list[Optional[int]] = [None] * n
    segments: list[list[tuple[int, int, int]]] = [[] for _ in range(n)]
    opened: dict[int, int] = {}
    running: dict[int, int] = {}
    ready: set[int] = set()
    p = 0
    t = rel[pending[0]] if n else 0
    inf = float("inf")
    while p < n or ready or running:
        if not ready and not running and rel[pending[p]] > t:
            t = rel[pending[p]]
        while p < n and rel[pending[p]] <= t:
            ready.add(pending[p])
            p += 1
        chosen = sorted(list(ready) + list(running.values()), key=key)[:m]
        chosen_set = set(chosen)
        for core, j in list(running.items()):
            if j not in chosen_set:
                del running[core]
                segments[j].append((opened.pop(j), t, core))
                ready.add(j)
        active = set(running.values())
        free = sorted(set(range(m)) - set(running))
        for j in chosen:
            if j in active:
                continue
            core = free.pop(0)
            running[core] = j
            ready.discard(j)
            opened[j] = t
            if start[j] is None:
                start[j] = t
        next_release = rel[pending[p]] if p < n else inf
        next_finish = min(t + remaining[j] for j in running.values()) if running else inf
        nt = min(next_release, next_finish)
        for core, j in list(running.items()):
            remaining[j] -= nt - t
            if remaining[j] == 0:
                segments[j].append((opened.pop(j), nt, core))
                finish[j] = nt
                del running[core]
        t = nt
    return start, finish, segments


def _age_anchor(job: Job, anchor: AgeAnchor) -> Tick:
    if anchor is AgeAnchor.PRODUCER_RELEASE:
        return job.release
    if anchor is AgeAnchor.PRODUCER_START:
        return job.start
    return job.finish


def compute_consumptions(jobs: Sequence[Job], graph: TaskGraph, config: SimulationConfig,
                         warmup_end: Tick) -> list[ConsumptionRecord]:
    """Pair every consumer job with the latest producer job available when it starts."""
    by_stream: dict[str, list[Job]] = {}
    for j in jobs:
        by_stream.setdefault(j.stream, []).append(j)
    records = []
    for e in sorted(graph.edges, key=lambda e: e.key):
        lat = graph.latency(e)
        prod = sorted(by_stream.get(e.producer, []), key=lambda j: (j.finish + lat, j.release))
        avail = [j.finish + lat for j in prod]
        # prefix argmax over release: the most recent job available so far
        latest: list[Job] = []
        for j in prod:
            latest.append(j if not latest or j.release >= latest[-1].release else latest[-1])
        for c in sorted(by_stream.get(e.consumer, []), key=lambda j: (j.release, j.index)):
            idx = bisect.bisect_right(avail, c.start) - 1
            instant = c.start if config.consumption_instant is ConsumptionInstant.CONSUMER_START else c.finish
            audited = c.frame_start >= warmup_end
            if idx < 0:
                records.append(ConsumptionRecord(c.task, c.index, e.producer, None, instant, None, e.freshness, audited))
                continue
            src = latest[idx]
            age = instant - _age_anchor(src, config.age_anchor)
            records.append(ConsumptionRecord(c.task, c.index, e.producer, src.index, instant, age, e.freshness, audited,
                                             src.task))
    return records


def simulate(graph: TaskGraph, result: Optional["SynthesisResult"] = None,
             config: SimulationConfig = SimulationConfig()) -> SimulationTrace:
    streams = _streams(graph, result, config)
    m = config.cores or graph.platform.cores
    h = hyperperiod(graph, result)
    end = config.horizon * h

    meta = []  # (stream, k, frame_start)
    rel, dl, wcet = [], [], []
    for s in streams:
        k = 0
        while k * s.period < end:
            frame = k * s.period
            meta.append((s, k + 1, frame))
            rel.append(frame + s.phase)
            dl.append(frame + s.deadline)
            wcet.append(s.wcet)
            k += 1

    if config.policy is Policy.FIXED_ORDER:
        rank = {tid: i for i, tid in enumerate(config.order)}
        fallback = len(rank)

        def key(i):
            s, k, _ = meta[i]
            return (rank.get(s.stream, fallback), s.task, k)
    else:
        def key(i):
            s, k, _ = meta[i]
            return (dl[i], s.task, k)

    start, finish, segments = _dispatch(rel, dl, wcet, m, key)

    jobs = []
    for i, (s, k, frame) in enumerate(meta):
        segs = tuple(segments[i])
        jobs.append(Job(task=s.task, index=k, release=rel[i], deadline=dl[i], start=start[i], finish=finish[i],
                        core=segs[0][2], segments=segs, stream=s.stream, frame_start=frame))
    jobs.sort(key=lambda j: (j.release, j.task, j.index))

    timeline = [[] for _ in range(m)]
    for j in jobs:
        for a, b, core in j.segments:
            timeline[core].append((a, b, j.task, j.index))
    core_timeline = tuple(tuple(sorted(lane)) for lane in timeline)

    warmup_end = config.warmup * h
    consumptions = compute_consumptions(jobs, graph, config, warmup_end)
    misses = tuple(j for j in jobs if j.missed)
    return SimulationTrace(tuple(jobs), tuple(consumptions), misses, core_timeline, h, warmup_end, config)


def simulate_task_set(tasks: Sequence[TaskSpec], cores: int = 1, until: Optional[Tick] = None) -> list[Job]:
    """EDF over independent periodic tasks, releasing every job before ``until``.

    ``until`` defaults to the hyperperiod plus the largest offset.
    """
    if until is None:
        until = lcm(t.period for t in tasks) + max((t.offset for t in tasks), default=0)
    meta, rel, dl, wcet = [], [], [], []
    for t in tasks:
        k = 0
        while t.offset + k * t.period < until:
            meta.append((t, k + 1))
            rel.append(t.offset + k * t.period)
            dl.append(t.offset + k * t.period + t.deadline)
            wcet.append(t.wcet)
            k += 1
    start, finish, segments = _dispatch(rel, dl, wcet, cores, lambda i: (dl[i], meta[i][0].id, meta[i][1]))
    jobs = [Job(task=t.id, index=k, release=rel[i], deadline=dl[i], start=start[i], finish=finish[i],
                core=segments[i][0][2], segments=tuple(segments[i]), stream=t.id, frame_start=rel[i] - t.offset)
            for i, (t, k) in enumerate(meta)]
    jobs.sort(key=lambda j: (j.release, j.task, j.index))
    return jobs


def freshness_audit(trace: SimulationTrace, graph: TaskGraph,
                    config: Optional[SimulationConfig] = None) -> list[ConsumptionRecord]:
    """Audited consumptions that are stale or found no data.

    With ``config`` the ages are recomputed from the trace's jobs under that
    config's anchor modes, so one run can be audited several ways.
    """
    records = trace.consumptions
    if config is not None:
        records = compute_consumptions(trace.jobs, graph, config, trace.warmup_end)
    return [r for r in records if r.audited and not r.fresh]


@dataclass(frozen=True)
class EdgeComparison:
    producer: str
    consumer: str
    bound: Tick
    asap_worst: Optional[Tick]
    asap_mean: Optional[float]
    asap_violations: int
    jit_worst: Optional[Tick]
    jit_mean: Optional[float]
    jit_violations: int

    @property
    def reduction(self) -> Optional[Tick]:
        if self.asap_worst is None or self.jit_worst is None:
            return None
        return self.asap_worst - self.jit_worst


@dataclass(frozen=True)
class ComparisonReport:
    edges: tuple[EdgeComparison, ...]
    asap_misses: int
    jit_misses: int

    @property
    def asap_violations(self) -> int:
        return sum(e.asap_violations for e in self.edges)

    @property
    def jit_violations(self) -> int:
        return sum(e.jit_violations for e in self.edges)


def _edge_stats(trace: SimulationTrace, producer: str, consumer: str):
    recs = trace.records(producer, consumer)
    ages = [r.age for r in recs if r.age is not None]
    worst = max(ages) if ages else None
    mean = fmean(ages) if ages else None
    return worst, mean, sum(1 for r in recs if not r.fresh)


def compare_policies(graph: TaskGraph, result: "SynthesisResult",
                     config: SimulationConfig = SimulationConfig()) -> ComparisonReport:
    """Run ASAP and JIT under otherwise identical settings and compare per-edge ages."""
    from dataclasses import replace

    asap = simulate(graph, result, replace(config, policy=Policy.ASAP))
    jit = simulate(graph, result, replace(config, policy=Policy.JIT))
    rows = []
    for e in sorted(graph.edges, key=lambda e: e.key):
        aw, am, av = _edge_stats(asap, e.producer, e.consumer)
        jw, jm, jv = _edge_stats(jit, e.producer, e.consumer)
        rows.append(EdgeComparison(e.producer, e.consumer, e.freshness, aw, am, av, jw, jm, jv))
    return ComparisonReport(tuple(rows), len(asap.misses), len(jit.misses))


def trace_to_csv(trace: SimulationTrace) -> str:
    events = []
    for j in trace.jobs:
        events.append((j.release, 0, "release", j.task, j.index, "", f"deadline={j.deadline}"))
        for a, b, core in j.segments:
            events.append((a, 2, "run", j.task, j.index, core, f"until={b}"))
        events.append((j.finish, 1, "finish", j.task, j.index, j.segments[-1][2], ""))
        if j.missed:
            events.append((j.deadline, 3, "deadline_miss", j.task, j.index, "", f"finish={j.finish}"))
    events.sort(key=lambda e: (e[0], e[1], e[3], e[4]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["event", "time_ticks", "task", "job", "core", "detail"])
    for time, _, ev, task, k, core, detail in events:
        w.writerow([ev, time, task, k, core, detail])
    return buf.getvalue()


def audit_to_csv(records: Sequence[ConsumptionRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["consumer", "producer", "k", "age_ticks", "bound_ticks", "fresh"])
    for r in records:
        w.writerow([r.consumer, r.producer, r.consumer_job, "" if r.age is None else r.age, r.bound,
                    "true" if r.fresh else "false"])
    return buf.getvalue()
