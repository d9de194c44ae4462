"""Domain types and primitive temporal formulas.

All durations are integer ticks. One tick is ``PlatformSpec.tick_base``
nanoseconds (1 us by default), so a value quoted in milliseconds is stored as
a multiple of 1000.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional

Tick = int

NS_PER_US = 1_000
DEFAULT_TICK_BASE = NS_PER_US


class Role(enum.Enum):
    SOURCE = "source"
    INTERMEDIATE = "intermediate"
    SINK = "sink"


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class TaskSpec:
    id: str
    wcet: Tick
    period: Optional[Tick] = None
    offset: Tick = 0
    relative_deadline: Optional[Tick] = None
    role: Optional[Role] = None
    node: str = ""

    @property
    def deadline(self) -> Optional[Tick]:
        """Relative deadline; implicit (equal to the period) unless set."""
        if self.relative_deadline is not None:
            return self.relative_deadline
        return self.period

    def with_period(self, period: Tick) -> "TaskSpec":
        return replace(self, period=period)


@dataclass(frozen=True)
class LinkSpec:
    id: str
    pdu_bits: int
    bandwidth: int  # bits per second
    stack_overhead: Tick = 0
    slot_delay: Tick = 0


@dataclass(frozen=True)
class DependencyEdge:
    producer: str
    consumer: str
    freshness: Tick
    latency: Optional[Tick] = None
    link: Optional[str] = None

    @property
    def key(self) -> tuple[str, str]:
        return (self.producer, self.consumer)


@dataclass(frozen=True)
class PlatformSpec:
    cores: int = 1
    tick_base: int = DEFAULT_TICK_BASE  # nanoseconds per tick


@dataclass(frozen=True)
class Issue:
    severity: Severity
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity.value}: {self.subject}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    items: tuple[Issue, ...] = ()

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.items if i.severity is Severity.ERROR]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.items if i.severity is Severity.WARNING]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __iter__(self) -> Iterator[Issue]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)


class GraphError(ValueError):
    """Raised when a graph is structurally unusable."""

    def __init__(self, message: str, report: Optional[ValidationReport] = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class TaskGraph:
    tasks: tuple[TaskSpec, ...]
    edges: tuple[DependencyEdge, ...] = ()
    links: tuple[LinkSpec, ...] = ()
    platform: PlatformSpec = field(default_factory=PlatformSpec)

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "_task_index", {t.id: t for t in self.tasks})
        object.__setattr__(self, "_link_index", {l.id: l for l in self.links})
        object.__setattr__(self, "_edge_index", {e.key: e for e in self.edges})
        incoming: dict[str, list[DependencyEdge]] = {}
        outgoing: dict[str, list[DependencyEdge]] = {}
        for e in sorted(self.edges, key=lambda e: e.key):
            incoming.setdefault(e.consumer, []).append(e)
            outgoing.setdefault(e.producer, []).append(e)
        object.__setattr__(self, "_incoming", incoming)
        object.__setattr__(self, "_outgoing", outgoing)

    # lookups

    def task(self, task_id: str) -> TaskSpec:
        try:
            return self._task_index[task_id]
        except KeyError:
            raise KeyError(f"unknown task {task_id!r}") from None

    def has_task(self, task_id: str) -> bool:
        return task_id in self._task_index

    def edge(self, producer: str, consumer: str) -> DependencyEdge:
        return self._edge_index[(producer, consumer)]

    def link(self, link_id: str) -> LinkSpec:
        return self._link_index[link_id]

    @property
    def task_ids(self) -> list[str]:
        return [t.id for t in self.tasks]

    def predecessors(self, task_id: str) -> list[str]:
        return [e.producer for e in self._incoming.get(task_id, ())]

    def successors(self, task_id: str) -> list[str]:
        return [e.consumer for e in self._outgoing.get(task_id, ())]

    def incoming(self, task_id: str) -> list[DependencyEdge]:
        return list(self._incoming.get(task_id, ()))

    def outgoing(self, task_id: str) -> list[DependencyEdge]:
        return list(self._outgoing.get(task_id, ()))

    def latency(self, edge: DependencyEdge) -> Tick:
        """Communication latency of an edge; an explicit value wins over a link."""
        if edge.latency is not None:
            return edge.latency
        if edge.link is not None:
            return wccl(self.link(edge.link), self.platform.tick_base)
        return 0

    def role(self, task_id: str) -> Role:
        """Role inferred from the edge structure."""
        if not self.successors(task_id):
            return Role.SINK
        if not self.predecessors(task_id):
            return Role.SOURCE
        return Role.INTERMEDIATE

    def sources(self) -> list[str]:
        return [t for t in sorted(self.task_ids) if not self.predecessors(t)]

    def sinks(self) -> list[str]:
        return [t for t in sorted(self.task_ids) if not self.successors(t)]

    def topological_order(self) -> list[str]:
        """Kahn's algorithm, ties broken by task id. Raises on cycles."""
        indeg = {t: 0 for t in self.task_ids}
        for e in self.edges:
            if e.consumer in indeg and e.producer in indeg:
                indeg[e.consumer] += 1
        ready = sorted(t for t, d in indeg.items() if d == 0)
        order = []
        while ready:
            t = ready.pop(0)
            order.append(t)
            for s in self.successors(t):
                if s not in indeg:
                    continue
                indeg[s] -= 1
                if indeg[s] == 0:
                    ready.append(s)
                    ready.sort()
        if len(order) != len(indeg):
            raise GraphError("task graph contains a cycle")
        return order

    def with_tasks(self, tasks: Iterable[TaskSpec]) -> "TaskGraph":
        return replace(self, tasks=tuple(tasks))

    def replace_task(self, task: TaskSpec) -> "TaskGraph":
        return self.with_tasks(task if t.id == task.id else t for t in self.tasks)

    def with_platform(self, **changes) -> "TaskGraph":
        return replace(self, platform=replace(self.platform, **changes))


@dataclass(frozen=True)
class Job:
    """One executed job; ``segments`` holds (start, end, core) execution slices."""

    task: str
    index: int
    release: Tick
    deadline: Tick
    start: Tick
    finish: Tick
    core: int
    segments: tuple[tuple[Tick, Tick, int], ...] = ()
    stream: str = ""
    frame_start: Tick = 0

    @property
    def executed(self) -> Tick:
        return sum(end - start for start, end, _ in self.segments)

    @property
    def missed(self) -> bool:
        return self.finish > self.deadline


def wccl(link: LinkSpec, tick_base: int = DEFAULT_TICK_BASE) -> Tick:
    """Worst-case communication latency of one PDU over ``link``.

    The transmission term is rounded up to whole ticks.
    """
    if link.bandwidth <= 0:
        raise ValueError(f"link {link.id!r}: bandwidth must be positive")
    if link.pdu_bits < 0 or link.stack_overhead < 0 or link.slot_delay < 0:
        raise ValueError(f"link {link.id!r}: negative size or delay")
    # bits * (ns/s) / (bits/s * ns/tick)
    num = link.pdu_bits * 1_000_000_000
    den = link.bandwidth * tick_base
    transmission = -(-num // den)
    return transmission + link.stack_overhead + link.slot_delay


def release_time(task: TaskSpec, k: int) -> Tick:
    """Release instant of the k-th job (k >= 1)."""
    if task.period is None:
        raise ValueError(f"task {task.id!r} has no period")
    if k < 1:
        raise ValueError("job index starts at 1")
    return (k - 1) * task.period + task.offset


def lcm(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, v)
    return out


def earliest_phases(graph: TaskGraph, source_offsets: Optional[dict[str, Tick]] = None) -> dict[str, Tick]:
    """Data-ready release phases assuming every job runs as soon as it is released.

    Sources start at their given offset (0 by default); every other task is
    released the instant the last of its inputs becomes available.
    """
    source_offsets = source_offsets or {}
    phase: dict[str, Tick] = {}
    for tid in graph.topological_order():
        incoming = graph.incoming(tid)
        if not incoming:
            phase[tid] = source_offsets.get(tid, 0)
            continue
        phase[tid] = max(phase[e.producer] + graph.task(e.producer).wcet + graph.latency(e) for e in incoming)
    return phase


def _find_cycle(graph: TaskGraph) -> Optional[list[str]]:
    color: dict[str, int] = {}
    stack: list[str] = []

    def visit(u: str) -> Optional[list[str]]:
        color[u] = 1
        stack.append(u)
        for v in graph.successors(u):
            if not graph.has_task(v):
                continue
            if color.get(v) == 1:
                return stack[stack.index(v):] + [v]
            if color.get(v) is None:
                found = visit(v)
                if found:
                    return found
        stack.pop()
        color[u] = 2
        return None

    for t in sorted(graph.task_ids):
        if t not in color:
            found = visit(t)
            if found:
                return found
    return None


def validate(graph: TaskGraph) -> ValidationReport:
    """Collect every structural and feasibility problem of ``graph``.

    The graph is accepted iff the report holds no error-severity item.
    """
    items: list[Issue] = []

    def error(subject, msg):
        items.append(Issue(Severity.ERROR, subject, msg))

    def warn(subject, msg):
        items.append(Issue(Severity.WARNING, subject, msg))

    if graph.platform.cores < 1:
        error("platform", "at least one core is required")
    if graph.platform.tick_base <= 0:
        error("platform", "tick_base must be positive")

    seen = set()
    for t in graph.tasks:
        if t.id in seen:
            error(t.id, "duplicate task id")
        seen.add(t.id)
        if t.wcet <= 0:
            error(t.id, "wcet must be positive")
        if t.period is not None and t.period <= 0:
            error(t.id, "period must be positive")
        if t.relative_deadline is not None:
            if t.relative_deadline <= 0:
                error(t.id, "relative deadline must be positive")
            elif t.period is not None and t.relative_deadline > t.period:
                error(t.id, "relative deadline exceeds period")

    link_ids = set()
    for l in graph.links:
        if l.id in link_ids:
            error(l.id, "duplicate link id")
        link_ids.add(l.id)
        if l.bandwidth <= 0:
            error(l.id, "bandwidth must be positive")
        if l.pdu_bits < 0:
            error(l.id, "pdu_bits must be non-negative")
        if l.stack_overhead < 0 or l.slot_delay < 0:
            error(l.id, "stack and slot delays must be non-negative")

    seen_edges = set()
    dangling = False
    for e in graph.edges:
        name = f"{e.producer}->{e.consumer}"
        if e.key in seen_edges:
            error(name, "duplicate edge")
        seen_edges.add(e.key)
        missing = [x for x in (e.producer, e.consumer) if not graph.has_task(x)]
        if missing:
            dangling = True
            error(name, f"edge references unknown task(s) {', '.join(missing)}")
            continue
        if e.producer == e.consumer:
            error(name, "self-dependency")
            continue
        if e.link is not None and e.link not in link_ids:
            error(name, f"edge references unknown link {e.link!r}")
            continue
        if e.latency is not None and e.latency < 0:
            error(name, "latency must be non-negative")
            continue
        if e.latency is not None and e.link is not None:
            warn(name, "explicit latency overrides link-derived latency")
        if e.freshness < 0:
            error(name, "freshness bound must be non-negative")
            continue
        try:
            lat = graph.latency(e)
        except ValueError as exc:
            error(name, str(exc))
            continue
        need = graph.task(e.producer).wcet + lat
        if e.freshness < need:
            error(name, f"freshness bound {e.freshness} below producer wcet + latency = {need}")

    cycle = _find_cycle(graph)
    if cycle:
        error("->".join(cycle), "dependency cycle")

    if not dangling:
        for t in graph.tasks:
            has_pred = bool(graph.predecessors(t.id))
            has_succ = bool(graph.successors(t.id))
            if not has_succ and t.period is None:
                error(t.id, "sink task needs a period")
            if t.role is None:
                continue
            if t.role is Role.SOURCE and has_pred:
                error(t.id, "declared source has predecessors")
            elif t.role is Role.SINK and has_succ:
                error(t.id, "declared sink has successors")
            elif t.role is Role.INTERMEDIATE and not (has_pred and has_succ):
                error(t.id, "declared intermediate task lacks a predecessor or successor")

    return ValidationReport(tuple(items))


def require_valid(graph: TaskGraph) -> None:
    report = validate(graph)
    if not report.ok:
        raise GraphError("; ".join(str(i) for i in report.errors), report)
