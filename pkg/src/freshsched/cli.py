"""Command-line entry point.

Exit codes: 0 success (valid, schedulable, fresh), 1 violation or infeasible,
2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any, Optional, Sequence

from .analysis import offset_aware_test, utilization
from .derivation import DerivationError, derive_periods, dominant_chain
from .gantt import export_gantt
from .graphio import format_duration, graph_from_dict, parse_graph, to_ticks
from .model import GraphError, TaskGraph, validate
from .simulator import (AgeAnchor, ConsumptionInstant, Policy, SimulationConfig, audit_to_csv, compare_policies,
                        freshness_audit, simulate, trace_to_csv)
from .synthesis import Mode, SynthesisError, SynthesisResult, assign_offsets

OK, VIOLATION, INPUT_ERROR = 0, 1, 2


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load(path: str) -> TaskGraph:
    return parse_graph(_read(path))


def _derived(path: str) -> TaskGraph:
    return derive_periods(_load(path))


class Reporter:
    def __init__(self, as_json: bool, graph: Optional[TaskGraph] = None):
        self.as_json = as_json
        self.tick_base = graph.platform.tick_base if graph is not None else 1000
        self.lines: list[str] = []

    def d(self, ticks: Optional[int]) -> Optional[str]:
        return None if ticks is None else format_duration(ticks, self.tick_base)

    def line(self, text: str = "") -> None:
        self.lines.append(text)

    def emit(self, payload: dict[str, Any]) -> None:
        if self.as_json:
            print(json.dumps(payload, indent=2, sort_keys=True))
        else:
            print("\n".join(self.lines))


def _synthesize(graph: TaskGraph, args) -> SynthesisResult:
    return assign_offsets(graph, Mode(args.mode), pre_boot=args.pre_boot, verify=False)


def cmd_validate(args) -> int:
    text = _read(args.graph)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        parse_graph(text)  # raises with line/column
        raise
    graph = graph_from_dict(doc)
    report = validate(graph)
    rep = Reporter(args.json, graph)
    for item in report:
        rep.line(str(item))
    rep.line(f"{len(graph.tasks)} tasks, {len(graph.edges)} edges: {'ok' if report.ok else 'invalid'}")
    rep.emit({"ok": report.ok, "issues": [{"severity": i.severity.value, "subject": i.subject,
                                           "message": i.message} for i in report]})
    return OK if report.ok else INPUT_ERROR


def cmd_derive(args) -> int:
    graph = _derived(args.graph)
    rep = Reporter(args.json, graph)
    periods = {t.id: t.period for t in graph.tasks}
    for tid in graph.topological_order():
        rep.line(f"T_{tid} = {rep.d(periods[tid])}")
    chains = {s: list(dominant_chain(graph, s).path) for s in graph.sinks()}
    for s, path in chains.items():
        rep.line(f"dominant chain of {s}: {' <- '.join(path)}")
    rep.emit({"periods": {k: rep.d(v) for k, v in periods.items()}, "periods_ticks": periods,
              "dominant_chains": chains})
    return OK


def _result_payload(rep: Reporter, result: SynthesisResult) -> dict[str, Any]:
    return {
        "mode": result.mode.value,
        "offsets": {k: rep.d(v) for k, v in sorted(result.offsets.items())},
        "offsets_ticks": dict(sorted(result.offsets.items())),
        "effective_deadlines": {k: rep.d(v) for k, v in sorted(result.effective_deadlines.items())},
        "anchors": {k: rep.d(v) for k, v in sorted(result.anchors.items())},
        "decomposed": {p: [{"id": s.id, "offset": rep.d(s.offset), "period": rep.d(s.period)} for s in subs]
                       for p, subs in sorted(result.decomposed.items())},
        "margins": {f"{p}->{c}": rep.d(m) for (p, c), m in sorted(result.margins.items())},
    }


def cmd_synthesize(args) -> int:
    graph = _derived(args.graph)
    rep = Reporter(args.json, graph)
    try:
        result = assign_offsets(graph, Mode(args.mode), pre_boot=args.pre_boot)
    except SynthesisError as exc:
        rep.line(f"synthesis failed: {exc}")
        payload: dict[str, Any] = {"ok": False, "error": str(exc)}
        if exc.result is not None:
            payload.update(_result_payload(rep, exc.result))
        rep.emit(payload)
        return VIOLATION
    for tid in graph.topological_order():
        if tid in result.decomposed:
            subs = ", ".join(f"{s.id}@{rep.d(s.offset)}" for s in result.decomposed[tid])
            rep.line(f"{tid}: decomposed into {subs}")
            continue
        rep.line(f"Φ_{tid}={rep.d(result.offsets[tid])}  D^eff={rep.d(result.effective_deadlines[tid])}")
    for v, a in sorted(result.anchors.items()):
        rep.line(f"anchor {v}: {rep.d(a)}")
    for (p, c), m in sorted(result.margins.items()):
        rep.line(f"margin {p}->{c}: {rep.d(m)}")
    rep.emit({"ok": True, **_result_payload(rep, result)})
    return OK


def cmd_check(args) -> int:
    graph = _derived(args.graph)
    rep = Reporter(args.json, graph)
    if args.synthesize:
        tasks = assign_offsets(graph, Mode(args.synthesize), verify=False).task_set(graph)
    else:
        tasks = list(graph.tasks)
    cores = args.cores or graph.platform.cores
    horizon = None if args.horizon is None else to_ticks(args.horizon, graph.platform.tick_base, "--horizon")
    verdict = offset_aware_test(tasks, cores, horizon)
    u = utilization(tasks)
    rep.line(f"utilization {u} ({float(u):.3f}) on {cores} core(s)")
    rep.line(f"{verdict.checkpoints_evaluated} checkpoints evaluated")
    v = verdict.first_violation
    if v is None:
        rep.line("schedulable")
    else:
        rep.line(f"unschedulable: demand {rep.d(v.demand)} exceeds supply {rep.d(v.supply)} at t={rep.d(v.t)}")
    rep.emit({"schedulable": verdict.schedulable, "utilization": str(u), "cores": cores,
              "checkpoints_evaluated": verdict.checkpoints_evaluated,
              "first_violation": None if v is None else {"t": v.t, "demand": v.demand, "supply": v.supply}})
    return OK if verdict.schedulable else VIOLATION


def _config(args) -> SimulationConfig:
    return SimulationConfig(policy=Policy(args.policy), horizon=args.horizon, warmup=args.warmup,
                            age_anchor=AgeAnchor(args.age_anchor),
                            consumption_instant=ConsumptionInstant(args.consumption),
                            order=tuple(args.order.split(",")) if args.order else (), cores=args.cores)


def cmd_simulate(args) -> int:
    graph = _derived(args.graph)
    config = _config(args)
    if config.policy is Policy.FIXED_ORDER and not config.order:
        raise InputError("--policy order needs --order")
    result = _synthesize(graph, args) if config.policy is Policy.JIT else None
    trace = simulate(graph, result, config)
    stale = freshness_audit(trace, graph)
    rep = Reporter(args.json, graph)
    rep.line(f"{len(trace.jobs)} jobs over {config.horizon} hyperperiod(s) of {rep.d(trace.hyperperiod)} "
             f"on {trace.cores} core(s), policy {config.policy.value}")
    for e in sorted(graph.edges, key=lambda e: e.key):
        ages = [r.age for r in trace.records(e.producer, e.consumer) if r.age is not None]
        worst = max(ages) if ages else None
        rep.line(f"{e.producer}->{e.consumer}: worst age {rep.d(worst)} (bound {rep.d(e.freshness)})")
    for r in stale:
        what = "no data" if r.age is None else f"age {rep.d(r.age)} > {rep.d(r.bound)}"
        rep.line(f"VIOLATION {r.producer}->{r.consumer} at {r.consumer}/{r.consumer_job}: {what}")
    for j in trace.misses:
        rep.line(f"MISS {j.task}/{j.index}: finish {rep.d(j.finish)} > deadline {rep.d(j.deadline)}")
    if args.trace:
        _write(args.trace, trace_to_csv(trace))
    if args.audit:
        _write(args.audit, audit_to_csv([r for r in trace.consumptions if r.audited]))
    if args.gantt:
        try:
            export_gantt(trace, args.gantt)
        except OSError as exc:
            raise InputError(f"cannot write {args.gantt}: {exc.strerror}") from None
    rep.emit({"policy": config.policy.value, "hyperperiod": trace.hyperperiod, "jobs": len(trace.jobs),
              "violations": [{"producer": r.producer, "consumer": r.consumer, "job": r.consumer_job,
                              "age": r.age, "bound": r.bound} for r in stale],
              "misses": [{"task": j.task, "job": j.index, "finish": j.finish, "deadline": j.deadline}
                         for j in trace.misses]})
    return VIOLATION if stale or trace.misses else OK


def cmd_compare(args) -> int:
    graph = _derived(args.graph)
    result = _synthesize(graph, args)
    config = SimulationConfig(horizon=args.horizon, warmup=args.warmup, age_anchor=AgeAnchor(args.age_anchor),
                              consumption_instant=ConsumptionInstant(args.consumption), cores=args.cores)
    report = compare_policies(graph, result, config)
    rep = Reporter(args.json, graph)
    rep.line(f"{'edge':<24}{'bound':>8}{'asap worst':>12}{'jit worst':>12}{'asap bad':>10}{'jit bad':>9}")
    for e in report.edges:
        rep.line(f"{e.producer + '->' + e.consumer:<24}{rep.d(e.bound):>8}{str(rep.d(e.asap_worst)):>12}"
                 f"{str(rep.d(e.jit_worst)):>12}{e.asap_violations:>10}{e.jit_violations:>9}")
    rep.line(f"deadline misses: asap {report.asap_misses}, jit {report.jit_misses}")
    rep.emit({"edges": [{"producer": e.producer, "consumer": e.consumer, "bound": e.bound,
                         "asap_worst": e.asap_worst, "asap_mean": e.asap_mean, "asap_violations": e.asap_violations,
                         "jit_worst": e.jit_worst, "jit_mean": e.jit_mean, "jit_violations": e.jit_violations,
                         "reduction": e.reduction} for e in report.edges],
              "asap_misses": report.asap_misses, "jit_misses": report.jit_misses})
    return VIOLATION if report.jit_violations or report.jit_misses else OK


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("graph", help="graph JSON file ('-' for stdin)")
    common.add_argument("--json", action="store_true", help="emit the report as JSON")

    synth = argparse.ArgumentParser(add_help=False)
    synth.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.GLOBAL.value)
    synth.add_argument("--pre-boot", action="store_true", help="allow releases before time zero")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--horizon", type=int, default=3, help="hyperperiods to simulate")
    sim.add_argument("--warmup", type=int, default=1, help="hyperperiods excluded from the audit")
    sim.add_argument("--age-anchor", choices=[a.value for a in AgeAnchor], default=AgeAnchor.PRODUCER_RELEASE.value)
    sim.add_argument("--consumption", choices=[c.value for c in ConsumptionInstant],
                     default=ConsumptionInstant.CONSUMER_START.value)
    sim.add_argument("--cores", type=int, help="override the platform core count")

    p = argparse.ArgumentParser(prog="freshsched", description="Freshness-driven offset synthesis for EDF task graphs.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check a graph document").set_defaults(func=cmd_validate)
    sub.add_parser("derive", parents=[common], help="derive producer periods").set_defaults(func=cmd_derive)
    sub.add_parser("synthesize", parents=[common, synth],
                   help="compute offsets and effective deadlines").set_defaults(func=cmd_synthesize)

    c = sub.add_parser("check", parents=[common], help="offset-aware schedulability test")
    c.add_argument("--cores", type=int)
    c.add_argument("--horizon", help="test horizon as a duration, e.g. 200ms")
    c.add_argument("--synthesize", choices=[m.value for m in Mode], help="test the synthesized task set")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("simulate", parents=[common, synth, sim], help="simulate and audit freshness")
    s.add_argument("--policy", choices=[x.value for x in Policy], default=Policy.JIT.value)
    s.add_argument("--order", help="comma-separated priority order for --policy order")
    s.add_argument("--trace", metavar="PATH", help="write the event trace as CSV")
    s.add_argument("--audit", metavar="PATH", help="write the consumption audit as CSV")
    s.add_argument("--gantt", metavar="PATH", help="write an SVG Gantt chart")
    s.set_defaults(func=cmd_simulate)

    sub.add_parser("compare", parents=[common, synth, sim],
                   help="compare ASAP and JIT release policies").set_defaults(func=cmd_compare)
    return p


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code else OK
    try:
        return args.func(args)
    except (GraphError, InputError, ValueError) as exc:
        if isinstance(exc, SynthesisError):
            print(f"synthesis failed: {exc}", file=sys.stderr)
            return VIOLATION
        kind = "derivation error" if isinstance(exc, DerivationError) else "error"
        print(f"{kind}: {exc}", file=sys.stderr)
        return INPUT_ERROR


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
