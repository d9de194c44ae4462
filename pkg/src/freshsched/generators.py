"""Seeded random task sets and graphs for property campaigns."""

from __future__ import annotations

import math
import random
from typing import Optional, Sequence

from .model import DependencyEdge, PlatformSpec, TaskGraph, TaskSpec, Tick

# Harmonic-ish period menu (ms) that keeps hyperperiods small.
PERIODS_MS = (5, 10, 20, 25, 40, 50, 100)


def uunifast(n: int, total: float, rng: random.Random) -> list[float]:
    """Split ``total`` utilization over ``n`` tasks uniformly at random."""
    utils = []
    remaining = total
    for i in range(1, n):
        nxt = remaining * rng.random() ** (1.0 / (n - i))
        utils.append(remaining - nxt)
        remaining = nxt
    utils.append(remaining)
    return utils


def random_task_set(rng: random.Random, n: int, total_util: float, tick: int = 1000,
                    periods_ms: Sequence[int] = PERIODS_MS, offsets: bool = True) -> list[TaskSpec]:
    """Implicit-deadline tasks with ``U <= total_util``; offsets drawn from ``[0, T)``."""
    tasks = []
    for i, u in enumerate(uunifast(n, total_util, rng)):
        period = rng.choice(periods_ms) * tick
        wcet = max(1, math.floor(u * period))
        if wcet > period:
            wcet = period
        phi = rng.randrange(period) if offsets else 0
        tasks.append(TaskSpec(f"t{i}", wcet, period, phi))
    # flooring to one tick can push U over the budget for tiny utilizations
    while sum(t.wcet / t.period for t in tasks) > total_util + 1e-12:
        big = max(tasks, key=lambda t: t.wcet / t.period)
        if big.wcet == 1:
            break
        tasks[tasks.index(big)] = TaskSpec(big.id, big.wcet - 1, big.period, big.offset)
    return tasks


def random_chain(rng: random.Random, n: int, tick: int = 1000, periods_ms: Sequence[int] = PERIODS_MS,
                 max_util: float = 1.0) -> TaskGraph:
    """Linear chain ``c0 -> ... -> c{n-1}`` sharing one period, with ``E <= T`` on every edge."""
    period = rng.choice(periods_ms) * tick
    budget = max(n, math.floor(period * max_util))
    cuts = sorted(rng.sample(range(1, budget), n - 1)) if n > 1 else []
    wcets = [b - a for a, b in zip([0] + cuts, cuts + [budget])]
    tasks = [TaskSpec(f"c{i}", w, period if i == n - 1 else None) for i, w in enumerate(wcets)]
    edges = [DependencyEdge(f"c{i}", f"c{i + 1}", rng.randint(wcets[i], period)) for i in range(n - 1)]
    from .derivation import derive_periods

    return derive_periods(TaskGraph(tuple(tasks), tuple(edges), platform=PlatformSpec(cores=1, tick_base=10**6 // tick)))


def random_dag(rng: random.Random, n: int, total_util: float, cores: int = 1, tick: int = 1000,
               edge_prob: float = 0.35, periods_ms: Sequence[int] = PERIODS_MS) -> TaskGraph:
    """Layered DAG with periods derived from sink periods and freshness bounds.

    Freshness bounds come from the period menu so shared producers keep a
    useful GCD; WCETs come from UUniFast and are capped so every edge
    satisfies ``E >= C``.
    """
    from .derivation import derive_periods

    ids = [f"v{i}" for i in range(n)]
    edges = []
    for j in range(1, n):
        preds = [i for i in range(j) if rng.random() < edge_prob]
        for i in preds:
            edges.append((i, j))
    has_succ = {i for i, _ in edges}
    sink_period = {j: rng.choice(periods_ms) * tick for j in range(n) if j not in has_succ}
    deps = [DependencyEdge(ids[i], ids[j], rng.choice(periods_ms) * tick) for i, j in edges]
    skeleton = TaskGraph(tuple(TaskSpec(ids[i], 1, sink_period.get(i)) for i in range(n)), tuple(deps))
    derived = derive_periods(skeleton)

    min_e = {tid: min((e.freshness for e in derived.outgoing(tid)), default=None) for tid in ids}
    tasks = []
    for t, u in zip(derived.tasks, uunifast(n, total_util, rng)):
        wcet = max(1, math.floor(u * t.period))
        if min_e[t.id] is not None:
            wcet = min(wcet, min_e[t.id])
        tasks.append(TaskSpec(t.id, min(wcet, t.period), sink_period.get(ids.index(t.id))))
    graph = TaskGraph(tuple(tasks), tuple(deps), platform=PlatformSpec(cores, 10**6 // tick))
    return derive_periods(graph)


def shared_producer_instance(rng: random.Random, consumers: int, frames: Sequence[Tick] = (4, 6, 8, 10, 12, 20, 24),
                             latency: Optional[Tick] = None) -> tuple[TaskGraph, dict[str, Tick]]:
    """One source feeding several consumers, plus random consumer phases.

    Durations are small tick counts so exhaustive offset enumeration stays
    cheap. Returns the derived graph and the phase map the windows are built
    from.
    """
    from .derivation import DerivationError, derive_periods

    while True:
        c_s = rng.randint(1, 2)
        tasks = [TaskSpec("S", c_s)]
        edges = []
        phases: dict[str, Tick] = {}
        for i in range(consumers):
            frame = rng.choice(frames)
            c_v = rng.randint(1, max(1, frame // 4))
            lat = rng.randint(0, 2) if latency is None else latency
            e = rng.randint(c_s + lat, 2 * frame)
            tasks.append(TaskSpec(f"C{i}", c_v, frame))
            edges.append(DependencyEdge("S", f"C{i}", e, lat))
            phases[f"C{i}"] = rng.randrange(frame)
        try:
            graph = derive_periods(TaskGraph(tuple(tasks), tuple(edges)))
        except DerivationError:
            continue  # GCD of the consumer frames fell below the source WCET
        phases["S"] = 0
        return graph, phases
