"""Release-offset and effective-deadline synthesis for data freshness.

Phases are frame-relative release instants. Internally a phase may exceed its
period (a pipelined consumer released in the next frame); emitted offsets are
reduced into ``[0, T)`` together with their deadlines, which leaves the
steady-state release pattern unchanged.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .model import TaskGraph, TaskSpec, Tick, earliest_phases, lcm, require_valid


class Mode(enum.Enum):
    GLOBAL = "global"
    SINGLE = "single"


class SynthesisError(ValueError):
    def __init__(self, message: str, result: Optional["SynthesisResult"] = None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class FreshnessWindow:
    """Release interval of a shared producer that keeps one consumer fresh.

    ``lower`` and ``upper`` are relative to the start of each consumer frame of
    length ``frame``; either may fall outside ``[0, frame)``.
    """

    consumer: str
    lower: Tick
    upper: Tick
    frame: Tick

    @property
    def empty(self) -> bool:
        return self.lower > self.upper


@dataclass(frozen=True)
class SubTask:
    id: str
    parent: str
    period: Tick
    offset: Tick
    wcet: Tick
    deadline: Tick  # frame-relative absolute deadline


@dataclass(frozen=True)
class SynthesisResult:
    mode: Mode
    offsets: dict[str, Tick]
    effective_deadlines: dict[str, Tick]
    anchors: dict[str, Tick] = field(default_factory=dict)
    decomposed: dict[str, tuple[SubTask, ...]] = field(default_factory=dict)
    margins: dict[tuple[str, str], Optional[Tick]] = field(default_factory=dict)
    windows: dict[str, tuple[FreshnessWindow, ...]] = field(default_factory=dict)
    pre_boot: bool = False

    @property
    def fresh(self) -> bool:
        return all(m is not None and m >= 0 for m in self.margins.values())

    def task_set(self, graph: TaskGraph) -> list[TaskSpec]:
        """The periodic task set the schedule actually releases."""
        out = []
        for t in graph.tasks:
            subs = self.decomposed.get(t.id)
            if subs:
                out.extend(TaskSpec(s.id, t.wcet, s.period, s.offset, s.deadline - s.offset, node=t.node)
                           for s in subs)
                continue
            off = self.offsets.get(t.id, t.offset)
            d = self.effective_deadlines.get(t.id)
            rel = t.deadline if d is None else d - off
            out.append(replace(t, offset=off, relative_deadline=rel))
        return out


def _require_periods(graph: TaskGraph) -> None:
    missing = [t.id for t in graph.tasks if t.period is None]
    if missing:
        raise SynthesisError(f"periods not derived for {', '.join(missing)}")


# --- primitive formulas -----------------------------------------------------

def effective_deadlines(chain: Sequence[TaskSpec], period: Tick,
                        latencies: Optional[Sequence[Tick]] = None,
                        freshness: Optional[Sequence[Optional[Tick]]] = None) -> dict[str, Tick]:
    """Deadlines that make EDF run a linear chain in order within one frame.

    ``chain`` runs source first, head last; ``latencies[i]`` and
    ``freshness[i]`` belong to the link from ``chain[i]`` to ``chain[i+1]``.
    A freshness bound clamps the producer's deadline to ``offset + E``.
    """
    n = len(chain)
    if n == 0:
        return {}
    lat = list(latencies) if latencies is not None else [0] * (n - 1)
    if len(lat) != n - 1 or (freshness is not None and len(freshness) != n - 1):
        raise ValueError("latencies/freshness need one entry per chain link")
    d = [0] * n
    d[-1] = period
    for i in range(n - 2, -1, -1):
        d[i] = d[i + 1] - chain[i + 1].wcet - lat[i]
        if freshness is not None and freshness[i] is not None:
            d[i] = min(d[i], chain[i].offset + freshness[i])
    for task, deadline in zip(chain, d):
        if deadline - task.offset < task.wcet:
            raise SynthesisError(f"chain infeasible: {task.id} has effective deadline {deadline} "
                                 f"but needs {task.wcet} from release {task.offset}")
    return {task.id: deadline for task, deadline in zip(chain, d)}


def anchor_time(graph: TaskGraph, consumer: str, offsets: dict[str, Tick]) -> Tick:
    """Earliest completion of ``consumer`` once its slowest input has arrived."""
    incoming = graph.incoming(consumer)
    if not incoming:
        raise SynthesisError(f"{consumer!r} has no predecessors")
    ready = max(offsets.get(e.producer, 0) + graph.task(e.producer).wcet + graph.latency(e) for e in incoming)
    return ready + graph.task(consumer).wcet


def latest_safe_start(anchor: Tick, freshness: Tick) -> Tick:
    if freshness < 0:
        raise ValueError("freshness bound must be non-negative")
    return anchor - freshness


def bottleneck(graph: TaskGraph, consumer: str, phases: dict[str, Tick]) -> str:
    """Predecessor whose data arrives last (largest phase + wcet + latency); ties go to the smallest id."""
    incoming = graph.incoming(consumer)
    return min(incoming, key=lambda e: (-(phases[e.producer] + graph.task(e.producer).wcet + graph.latency(e)),
                                        e.producer)).producer


# --- shared producers -------------------------------------------------------

def freshness_windows(graph: TaskGraph, producer: str, phases: dict[str, Tick]) -> list[FreshnessWindow]:
    c_s = graph.task(producer).wcet
    out = []
    for e in graph.outgoing(producer):
        v = graph.task(e.consumer)
        anchor = phases[v.id] + v.wcet
        out.append(FreshnessWindow(v.id, anchor - e.freshness, anchor - c_s - graph.latency(e) - v.wcet, v.period))
    return out


def window_satisfied(phi: Tick, period: Tick, window: FreshnessWindow) -> bool:
    """Whether releases ``phi + j*period`` put one instance in the window of every consumer frame."""
    frames = lcm((period, window.frame)) // window.frame
    for k in range(frames):
        a = k * window.frame + window.lower
        b = k * window.frame + window.upper
        if a + (phi - a) % period > b:
            return False
    return True


def _adjust_offset(phi: Tick, period: Tick, window: FreshnessWindow) -> Tick:
    # The smallest satisfying value above phi is phi + 1 or the left edge of
    # one per-frame interval, so only those need testing.
    frames = lcm((period, window.frame)) // window.frame
    edges = {(k * window.frame + window.lower) % period for k in range(frames)}
    for c in sorted(x for x in edges | {phi + 1} if x > phi):
        if c >= period:
            break
        if window_satisfied(c, period, window):
            return c
    return period


def search_offset(period: Tick, windows: Iterable[FreshnessWindow]) -> Optional[Tick]:
    """Consensus search over one producer's windows; ``None`` when no offset fits.

    Consumers are checked in ascending frame length. On a conflict the offset
    jumps to the next value that satisfies the violated window and every
    consumer is checked again from the start.
    """
    ordered = sorted(windows, key=lambda w: (w.frame, w.consumer))
    if any(w.empty for w in ordered):
        return None
    phi = 0
    while phi < period:
        for w in ordered:
            if not window_satisfied(phi, period, w):
                phi = _adjust_offset(phi, period, w)
                break
        else:
            return phi
    return None


def consensus_search(graph: TaskGraph, producer: str, phases: dict[str, Tick]) -> Optional[Tick]:
    period = graph.task(producer).period
    return search_offset(period, freshness_windows(graph, producer, phases))


def decompose_windows(period: Tick, windows: Sequence[FreshnessWindow]) -> list[Tick]:
    """Per-slot release instants over the hyperperiod of the producer and its consumers.

    Each consumer frame is served by the slot holding the upper end of its
    window, i.e. the latest release that still finishes in time. A slot takes
    the smallest instant in the intersection of the windows it serves; slots
    serving nobody keep their nominal start ``j * period``.
    """
    hyper = lcm([period] + [w.frame for w in windows])
    slots = hyper // period
    allowed: list[Optional[tuple[Tick, Tick]]] = [None] * slots
    owners: list[list[str]] = [[] for _ in range(slots)]
    for w in windows:
        if w.empty:
            raise SynthesisError(f"window of consumer {w.consumer} is empty")
        for k in range(hyper // w.frame):
            b = k * w.frame + w.upper
            q = b % hyper
            a = k * w.frame + w.lower - (b - q)
            j = q // period
            lo, hi = max(a, j * period), q
            cur = allowed[j]
            allowed[j] = (lo, hi) if cur is None else (max(cur[0], lo), min(cur[1], hi))
            owners[j].append(w.consumer)
    offsets = []
    for j, iv in enumerate(allowed):
        if iv is None:
            offsets.append(j * period)
        elif iv[0] > iv[1]:
            raise SynthesisError(f"slot {j} has no release satisfying consumers {sorted(set(owners[j]))}")
        else:
            offsets.append(iv[0])
    return offsets


def hyperperiod_decompose(graph: TaskGraph, producer: str, phases: dict[str, Tick]) -> tuple[SubTask, ...]:
    task = graph.task(producer)
    windows = freshness_windows(graph, producer, phases)
    offsets = decompose_windows(task.period, windows)
    hyper = task.period * len(offsets)
    return tuple(SubTask(f"{producer}#{j}", producer, hyper, off, task.wcet, off + task.period)
                 for j, off in enumerate(offsets))


# --- whole-graph synthesis ----------------------------------------------------

def _assign_global(graph: TaskGraph, pre_boot: bool) -> SynthesisResult:
    order = graph.topological_order()
    earliest = earliest_phases(graph)
    phase = dict(earliest)
    dominant = {v: bottleneck(graph, v, earliest) for v in order if graph.predecessors(v)}
    delayed: set[tuple[str, str]] = set()
    windows: dict[str, tuple[FreshnessWindow, ...]] = {}
    decomposed: dict[str, tuple[SubTask, ...]] = {}

    for p in reversed(order):
        outs = graph.outgoing(p)
        if not outs:
            continue
        period = graph.task(p).period
        if len(outs) == 1:
            (w,) = freshness_windows(graph, p, phase)
            is_dominant = dominant[w.consumer] == p
            if pre_boot and not graph.predecessors(p) and not is_dominant:
                cand = w.lower
            else:
                cand = max(phase[p], w.lower)
            if cand > w.upper:
                raise SynthesisError(f"freshness window of {p}->{w.consumer} is empty: "
                                     f"earliest safe release {cand} > latest ready release {w.upper}")
            if cand != phase[p] and not is_dominant:
                delayed.add((p, w.consumer))
            phase[p] = cand
            continue

        ws = tuple(freshness_windows(graph, p, phase))
        windows[p] = ws
        for w in ws:
            if w.empty:
                raise SynthesisError(f"freshness window of {p}->{w.consumer} is empty")
        phi = search_offset(period, ws)
        if phi is None:
            if graph.predecessors(p):
                raise SynthesisError(f"no common offset for shared producer {p}; "
                                     "decomposition is only supported for source tasks")
            decomposed[p] = hyperperiod_decompose(graph, p, phase)
            phase[p] = decomposed[p][0].offset
            continue
        if phi < phase[p]:
            phi += -(-(phase[p] - phi) // period) * period
        phase[p] = phi

    deff: dict[str, Tick] = {}
    for p in reversed(order):
        if p in decomposed:
            continue
        task = graph.task(p)
        period, ph = task.period, phase[p]
        outs = graph.outgoing(p)
        if not outs:
            d = (ph // period + 1) * period
            if d - ph < task.wcet:
                d = ph + period
        else:
            cands = [ph + period]
            for e in outs:
                v = graph.task(e.consumer)
                if v.period != period or v.id in decomposed:
                    continue
                if (p, v.id) in delayed:
                    cands.append(phase[v.id] + v.wcet)
                else:
                    cands.append(deff[v.id] - v.wcet - graph.latency(e))
            d = min(cands)
        if d - ph < task.wcet:
            raise SynthesisError(f"{p}: effective deadline {d} leaves less than wcet after release {ph}")
        deff[p] = d

    offsets, deadlines = {}, {}
    for tid, d in deff.items():
        period = graph.task(tid).period
        shift = (phase[tid] // period) * period if phase[tid] >= period else 0
        offsets[tid] = phase[tid] - shift
        deadlines[tid] = d - shift
    for p, subs in decomposed.items():
        for s in subs:
            deadlines[s.id] = s.deadline
    anchors = {v: offsets[v] + graph.task(v).wcet for v in order if graph.predecessors(v)}
    return SynthesisResult(Mode.GLOBAL, offsets, deadlines, anchors, decomposed, {}, windows, pre_boot)


def _assign_single(graph: TaskGraph) -> SynthesisResult:
    from .simulator import Policy, SimulationConfig, simulate

    order = graph.topological_order()
    cands: dict[str, list[Tick]] = {t: [] for t in order}
    deff: dict[str, Tick] = {}
    for v in reversed(order):
        task = graph.task(v)
        d = min(cands[v] + [task.period])
        if d < task.wcet:
            raise SynthesisError(f"{v}: effective deadline {d} is shorter than wcet {task.wcet}")
        deff[v] = d
        # virtual chain: loosest input first, strictest right before the consumer
        prev: Optional[tuple[Tick, Tick]] = None
        for e in sorted(graph.incoming(v), key=lambda e: (e.freshness, e.producer)):
            p = graph.task(e.producer)
            if p.period != task.period:
                continue
            c = d - task.wcet - graph.latency(e)
            if prev is not None:
                c = min(c, prev[0] - prev[1])
            cands[p.id].append(c)
            prev = (c, p.wcet)

    zero = SynthesisResult(Mode.SINGLE, {t: 0 for t in order}, deff)
    dry = simulate(graph, zero, SimulationConfig(Policy.JIT, horizon=1, warmup=0, cores=1))
    if dry.misses:
        j = dry.misses[0]
        raise SynthesisError(f"single-core EDF misses {j.task}/{j.index} (finish {j.finish} > deadline {j.deadline})",
                             zero)
    # Releasing each job no later than EDF first dispatches it leaves the
    # schedule untouched and moves every sampling instant as late as possible.
    offsets = {t: min(j.start - j.release for j in dry.jobs_of(t)) for t in order}
    anchors = {v: max(j.finish - j.frame_start for j in dry.jobs_of(v)) for v in order if graph.predecessors(v)}
    return SynthesisResult(Mode.SINGLE, offsets, deff, anchors)


def compute_margins(graph: TaskGraph, result: SynthesisResult, cores: int,
                    horizon: int = 3, warmup: int = 1) -> dict[tuple[str, str], Optional[Tick]]:
    """Per-edge slack ``E - worst simulated age``; ``None`` when a consumer found no data."""
    from .simulator import Policy, SimulationConfig, simulate

    trace = simulate(graph, result, SimulationConfig(Policy.JIT, horizon=horizon, warmup=warmup, cores=cores))
    margins: dict[tuple[str, str], Optional[Tick]] = {}
    for e in graph.edges:
        recs = trace.records(e.producer, e.consumer)
        if any(r.age is None for r in recs):
            margins[e.key] = None
        else:
            margins[e.key] = e.freshness - max((r.age for r in recs), default=0)
    return margins


def assign_offsets(graph: TaskGraph, mode: Mode = Mode.GLOBAL, pre_boot: bool = False,
                   verify: bool = True) -> SynthesisResult:
    """Synthesize release offsets and effective deadlines for a derived graph.

    With ``verify`` the schedule is simulated on the target platform and a
    :class:`SynthesisError` is raised unless every edge keeps a non-negative
    freshness margin.
    """
    require_valid(graph)
    _require_periods(graph)
    if mode is Mode.GLOBAL:
        result = _assign_global(graph, pre_boot)
        cores = graph.platform.cores
    else:
        result = _assign_single(graph)
        cores = 1
    if not graph.edges:
        return result
    margins = compute_margins(graph, result, cores)
    result = replace(result, margins=margins)
    if verify and not result.fresh:
        bad = sorted(k for k, m in margins.items() if m is None or m < 0)
        raise SynthesisError("freshness violated on " + ", ".join(f"{p}->{c}" for p, c in bad), result)
    return result


def propagate_shift(result: SynthesisResult, subtree: Iterable[str], delta: Tick,
                    graph: Optional[TaskGraph] = None) -> SynthesisResult:
    """Delay every task of ``subtree`` (and its anchor) by ``delta``.

    Relative timing inside the subtree is untouched, so consumption ages stay
    the same. With ``graph`` given, a shift that pushes an offset to or past
    its period is rejected unless pre-boot releases are enabled.
    """
    if delta < 0:
        raise ValueError("shift must be non-negative")
    ids = set(subtree)
    offsets = dict(result.offsets)
    deadlines = dict(result.effective_deadlines)
    anchors = dict(result.anchors)
    decomposed = dict(result.decomposed)
    for tid in ids:
        if tid in decomposed:
            decomposed[tid] = tuple(replace(s, offset=s.offset + delta, deadline=s.deadline + delta)
                                    for s in decomposed[tid])
            for s in decomposed[tid]:
                deadlines[s.id] = s.deadline
        if tid in offsets:
            offsets[tid] += delta
            if graph is not None and not result.pre_boot and offsets[tid] >= graph.task(tid).period:
                raise SynthesisError(f"shift by {delta} pushes {tid} offset {offsets[tid]} past its period")
        if tid in deadlines:
            deadlines[tid] += delta
        if tid in anchors:
            anchors[tid] += delta
    return replace(result, offsets=offsets, effective_deadlines=deadlines, anchors=anchors, decomposed=decomposed)
