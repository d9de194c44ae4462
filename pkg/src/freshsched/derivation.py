"""Backward period derivation and dominant-chain decomposition."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

from .model import GraphError, Issue, Role, Severity, TaskGraph, ValidationReport, require_valid

DerivationReport = ValidationReport


class DerivationError(GraphError):
    pass


class DegeneratePeriodWarning(UserWarning):
    """A shared producer's derived period collapsed to a single tick."""


@dataclass(frozen=True)
class DominantChain:
    sink: str
    path: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.path)


def demanded_period(graph: TaskGraph, producer: str, periods: dict[str, int]) -> Optional[int]:
    """Period a producer must run at to serve every consumer.

    A single consumer imposes ``max(T_c, E)``; several consumers impose the
    GCD of those values so the producer stays harmonic with all of them.
    """
    demands = [max(periods[e.consumer], e.freshness) for e in graph.outgoing(producer)]
    if not demands:
        return None
    if len(demands) == 1:
        return demands[0]
    return math.gcd(*demands)


def derive_periods(graph: TaskGraph) -> TaskGraph:
    require_valid(graph)
    periods: dict[str, int] = {}
    issues: list[Issue] = []
    for tid in reversed(graph.topological_order()):
        task = graph.task(tid)
        derived = demanded_period(graph, tid, periods)
        if derived is None:
            # sink: validate() already guarantees a declared period
            periods[tid] = task.period
            continue
        if len(graph.successors(tid)) > 1 and derived == 1:
            warnings.warn(f"{tid}: shared producer period collapsed to 1 tick", DegeneratePeriodWarning, stacklevel=2)
        if task.period is not None and task.period != derived:
            if derived % task.period != 0:
                issues.append(Issue(Severity.ERROR, tid,
                                    f"declared period {task.period} does not divide derived period {derived}"))
                periods[tid] = derived
                continue
            derived = task.period
        if derived < task.wcet:
            issues.append(Issue(Severity.ERROR, tid, f"derived period {derived} is shorter than wcet {task.wcet}"))
        periods[tid] = derived

    if issues:
        report = ValidationReport(tuple(issues))
        raise DerivationError("; ".join(str(i) for i in issues), report)
    return graph.with_tasks(t.with_period(periods[t.id]) for t in graph.tasks)


def critical_predecessor(graph: TaskGraph, task: str) -> Optional[str]:
    """Producer with the tightest freshness bound into ``task`` (ties: smallest id)."""
    graph.task(task)
    incoming = graph.incoming(task)
    if not incoming:
        return None
    return min(incoming, key=lambda e: (e.freshness, e.producer)).producer


def dominant_chain(graph: TaskGraph, sink: str) -> DominantChain:
    if graph.role(sink) is not Role.SINK:
        raise GraphError(f"{sink!r} is not a sink")
    path = [sink]
    nxt = critical_predecessor(graph, sink)
    while nxt is not None:
        if nxt in path:
            raise GraphError("cycle while following critical predecessors")
        path.append(nxt)
        nxt = critical_predecessor(graph, nxt)
    return DominantChain(sink, tuple(path))
