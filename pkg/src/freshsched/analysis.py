"""Demand-bound functions and the offset-aware EDF schedulability test."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .model import TaskSpec, Tick, lcm


def _check(task: TaskSpec) -> None:
    if task.period is None:
        raise ValueError(f"{task.id}: period not set")


def dbf_sync(task: TaskSpec, t: Tick) -> Tick:
    """Demand of jobs released at or after 0 with deadlines in ``[0, t]``, first release at 0."""
    _check(task)
    return max(0, (t - task.deadline) // task.period + 1) * task.wcet


def dbf_async(task: TaskSpec, t: Tick) -> Tick:
    """Same as :func:`dbf_sync` with the first release delayed to the task offset."""
    _check(task)
    return max(0, (t - task.offset - task.deadline) // task.period + 1) * task.wcet


def released_before(task: TaskSpec, t: Tick) -> int:
    """Number of jobs released in ``[0, t)``; a job released exactly at ``t`` is not counted."""
    if t <= task.offset:
        return 0
    return -(-(t - task.offset) // task.period)


def utilization(tasks: Iterable[TaskSpec]) -> Fraction:
    total = Fraction(0)
    for task in tasks:
        _check(task)
        total += Fraction(task.wcet, task.period)
    return total


def default_horizon(tasks: Sequence[TaskSpec]) -> Tick:
    if not tasks:
        return 0
    return lcm(t.period for t in tasks) + max(0, max(t.offset for t in tasks))


def checkpoints(tasks: Sequence[TaskSpec], horizon: Tick) -> list[Tick]:
    """Release and deadline instants in ``(0, horizon]``."""
    points: set[Tick] = set()
    for task in tasks:
        _check(task)
        k = 0
        while True:
            r = task.offset + k * task.period
            if r > horizon:
                break
            for x in (r, r + task.deadline):
                if 0 < x <= horizon:
                    points.add(x)
            k += 1
    return sorted(points)


@dataclass(frozen=True)
class Violation:
    t: Tick
    demand: Tick
    supply: Tick


@dataclass(frozen=True)
class TestVerdict:
    schedulable: bool
    first_violation: Optional[Violation]
    checkpoints_evaluated: int

    def __bool__(self) -> bool:
        return self.schedulable


@dataclass(frozen=True)
class DemandCurve:
    points: tuple[tuple[Tick, Tick], ...]
    cores: int = 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "demand", "supply"])
        for t, d in self.points:
            w.writerow([t, d, self.cores * t])
        return buf.getvalue()


def release_demand(tasks: Sequence[TaskSpec], t: Tick) -> Tick:
    return sum(released_before(task, t) * task.wcet for task in tasks)


def demand_curve(tasks: Sequence[TaskSpec], cores: int = 1, horizon: Optional[Tick] = None) -> DemandCurve:
    tasks = list(tasks)
    h = default_horizon(tasks) if horizon is None else horizon
    return DemandCurve(tuple((t, release_demand(tasks, t)) for t in checkpoints(tasks, h)), cores)


def offset_aware_test(tasks: Iterable[TaskSpec], cores: int = 1, horizon: Optional[Tick] = None) -> TestVerdict:
    """Check released demand against ``cores * t`` at every checkpoint up to the horizon.

    The horizon defaults to the hyperperiod plus the largest offset, which
    covers the transient before the release pattern repeats.
    """
    if cores < 1:
        raise ValueError("cores must be >= 1")
    tasks = list(tasks)
    if not tasks:
        return TestVerdict(True, None, 0)
    h = default_horizon(tasks) if horizon is None else horizon
    points = checkpoints(tasks, h)
    for n, t in enumerate(points, 1):
        demand = release_demand(tasks, t)
        if demand > cores * t:
            return TestVerdict(False, Violation(t, demand, cores * t), n)
    return TestVerdict(True, None, len(points))


def dominance_check(tasks: Iterable[TaskSpec], horizon: Tick) -> bool:
    """Whether every task's offset demand stays at or below its synchronous demand up to ``horizon``.

    Both functions are right-continuous steps, so comparing them at every
    step instant of either is exhaustive.
    """
    for task in tasks:
        _check(task)
        if task.offset < 0:
            raise ValueError(f"{task.id}: negative offset")
        steps = set(range(task.deadline, horizon + 1, task.period))
        steps.update(range(task.offset + task.deadline, horizon + 1, task.period))
        if any(dbf_async(task, t) > dbf_sync(task, t) for t in steps):
            return False
    return True
