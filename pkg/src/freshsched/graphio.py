"""JSON graph documents with unit-suffixed durations.

Durations are strings such as ``"5ms"`` or ``"250us"`` (units ns, us, ms, s),
or bare integers meaning ticks. Conversion is exact: a duration that is not a
whole number of ticks is rejected.
"""

from __future__ import annotations

import json
import re
from fractions import Fraction
from typing import Any, Optional, Union

from .model import (DEFAULT_TICK_BASE, DependencyEdge, GraphError, Issue, LinkSpec, PlatformSpec, Role,
                    Severity, TaskGraph, TaskSpec, Tick, ValidationReport, validate)

UNIT_NS = {"ns": 1, "us": 1_000, "ms": 1_000_000, "s": 1_000_000_000}
_DURATION = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*(ns|us|ms|s)\s*$")

_TOP = {"platform", "tasks", "links", "edges"}
_PLATFORM = {"cores", "tick_base"}
_TASK = {"id", "wcet", "period", "offset", "deadline", "role", "node"}
_LINK = {"id", "pdu_bits", "bandwidth", "stack_overhead", "slot_delay"}
_EDGE = {"producer", "consumer", "freshness", "latency", "link"}


def _fail(message: str) -> GraphError:
    return GraphError(message, ValidationReport((Issue(Severity.ERROR, "document", message),)))


def duration_ns(value: Union[str, int], where: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise _fail(f"{where}: expected a duration string, got {value!r}")
    if isinstance(value, int):
        raise _fail(f"{where}: a nanosecond value needs a unit suffix")
    m = _DURATION.match(value)
    if not m:
        raise _fail(f"{where}: cannot parse duration {value!r}")
    return Fraction(m.group(1)) * UNIT_NS[m.group(2)]


def to_ticks(value: Union[str, int], tick_base: int, where: str) -> Tick:
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    ticks = duration_ns(value, where) / tick_base
    if ticks.denominator != 1:
        raise _fail(f"{where}: {value!r} is not a whole number of {tick_base}ns ticks")
    return int(ticks)


def format_duration(ticks: Tick, tick_base: int = DEFAULT_TICK_BASE) -> str:
    ns = ticks * tick_base
    for unit in ("ms", "us"):
        if ns % UNIT_NS[unit] == 0:
            return f"{ns // UNIT_NS[unit]}{unit}"
    return f"{ns}ns"


def _fields(obj: Any, allowed: set[str], required: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise _fail(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise _fail(f"{where}: unknown field(s) {', '.join(unknown)}")
    missing = sorted(required - set(obj))
    if missing:
        raise _fail(f"{where}: missing field(s) {', '.join(missing)}")
    return obj


def _int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _fail(f"{where}: expected an integer")
    return value


def _opt(obj: dict, key: str, tick_base: int, where: str) -> Optional[Tick]:
    return None if obj.get(key) is None else to_ticks(obj[key], tick_base, f"{where}.{key}")


def graph_from_dict(doc: Any) -> TaskGraph:
    doc = _fields(doc, _TOP, {"tasks"}, "document")
    plat = _fields(doc.get("platform", {}), _PLATFORM, set(), "platform")
    tick_base = DEFAULT_TICK_BASE
    if "tick_base" in plat:
        ns = duration_ns(plat["tick_base"], "platform.tick_base")
        if ns.denominator != 1 or ns <= 0:
            raise _fail("platform.tick_base must be a positive whole number of nanoseconds")
        tick_base = int(ns)
    platform = PlatformSpec(_int(plat.get("cores", 1), "platform.cores"), tick_base)

    tasks = []
    for i, t in enumerate(doc["tasks"]):
        where = f"tasks[{i}]"
        t = _fields(t, _TASK, {"id", "wcet"}, where)
        role = t.get("role")
        try:
            role = None if role is None else Role(role)
        except ValueError:
            raise _fail(f"{where}.role: unknown role {role!r}") from None
        tasks.append(TaskSpec(str(t["id"]), to_ticks(t["wcet"], tick_base, f"{where}.wcet"),
                              _opt(t, "period", tick_base, where), _opt(t, "offset", tick_base, where) or 0,
                              _opt(t, "deadline", tick_base, where), role, str(t.get("node", ""))))

    links = []
    for i, l in enumerate(doc.get("links", [])):
        where = f"links[{i}]"
        l = _fields(l, _LINK, {"id", "pdu_bits", "bandwidth"}, where)
        links.append(LinkSpec(str(l["id"]), _int(l["pdu_bits"], f"{where}.pdu_bits"),
                              _int(l["bandwidth"], f"{where}.bandwidth"),
                              _opt(l, "stack_overhead", tick_base, where) or 0,
                              _opt(l, "slot_delay", tick_base, where) or 0))

    edges = []
    for i, e in enumerate(doc.get("edges", [])):
        e = _fields(e, _EDGE, {"producer", "consumer", "freshness"}, f"edges[{i}]")
        where = f"edge {e['producer']}->{e['consumer']}"
        edges.append(DependencyEdge(str(e["producer"]), str(e["consumer"]),
                                    to_ticks(e["freshness"], tick_base, f"{where}.freshness"),
                                    _opt(e, "latency", tick_base, where), e.get("link")))
    return TaskGraph(tuple(tasks), tuple(edges), tuple(links), platform)


def parse_graph(text: str) -> TaskGraph:
    """Parse and validate a graph document; raises :class:`GraphError`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _fail(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    graph = graph_from_dict(doc)
    report = validate(graph)
    if not report.ok:
        raise GraphError("; ".join(str(i) for i in report.errors), report)
    return graph


def load_graph(path: str) -> TaskGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())


def graph_to_dict(graph: TaskGraph) -> dict:
    tb = graph.platform.tick_base
    fmt = lambda v: format_duration(v, tb)  # noqa: E731
    tasks = []
    for t in graph.tasks:
        d: dict[str, Any] = {"id": t.id, "wcet": fmt(t.wcet)}
        if t.period is not None:
            d["period"] = fmt(t.period)
        if t.offset:
            d["offset"] = fmt(t.offset)
        if t.relative_deadline is not None:
            d["deadline"] = fmt(t.relative_deadline)
        if t.role is not None:
            d["role"] = t.role.value
        if t.node:
            d["node"] = t.node
        tasks.append(d)
    links = []
    for l in graph.links:
        d = {"id": l.id, "pdu_bits": l.pdu_bits, "bandwidth": l.bandwidth}
        if l.stack_overhead:
            d["stack_overhead"] = fmt(l.stack_overhead)
        if l.slot_delay:
            d["slot_delay"] = fmt(l.slot_delay)
        links.append(d)
    edges = []
    for e in graph.edges:
        d = {"producer": e.producer, "consumer": e.consumer, "freshness": fmt(e.freshness)}
        if e.latency is not None:
            d["latency"] = fmt(e.latency)
        if e.link is not None:
            d["link"] = e.link
        edges.append(d)
    out: dict[str, Any] = {"platform": {"cores": graph.platform.cores, "tick_base": f"{tb}ns"}, "tasks": tasks}
    if links:
        out["links"] = links
    if edges:
        out["edges"] = edges
    return out


def serialize_graph(graph: TaskGraph) -> str:
    return json.dumps(graph_to_dict(graph), indent=2) + "\n"
