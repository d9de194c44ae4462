"""Deterministic SVG Gantt charts of simulation traces."""

from __future__ import annotations

from html import escape
from typing import Optional

from .simulator import SimulationTrace

PALETTE = ("#4e79a7", "#f28e2b", "#59a14f", "#b07aa1", "#76b7b2", "#edc948", "#9c755f", "#bab0ac", "#e15759",
           "#ff9da7")
LANE = 48
BAR = 28
LEFT = 70
TOP = 30
WIDTH = 1000


def _f(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def render_gantt(trace: SimulationTrace, until: Optional[int] = None) -> str:
    if not trace.jobs:
        raise ValueError("trace has no jobs to draw")
    end = until if until is not None else max(max(j.finish, j.deadline) for j in trace.jobs)
    end = max(end, 1)
    scale = WIDTH / end
    tasks = sorted({j.task for j in trace.jobs})
    color = {t: PALETTE[i % len(PALETTE)] for i, t in enumerate(tasks)}
    height = TOP + LANE * trace.cores + 30

    def x(t: int) -> str:
        return _f(LEFT + t * scale)

    def lane_y(core: int) -> int:
        return TOP + core * LANE + (LANE - BAR) // 2

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{LEFT + WIDTH + 20}" height="{height}" '
           f'font-family="monospace" font-size="10">',
           '<defs><marker id="arrow" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto">'
           '<path d="M0,0 L6,3 L0,6 z" fill="context-stroke"/></marker></defs>']
    for core in range(trace.cores):
        y = TOP + core * LANE
        out.append(f'<text x="4" y="{y + LANE // 2 + 4}">core {core}</text>')
        out.append(f'<line x1="{LEFT}" y1="{y + LANE}" x2="{LEFT + WIDTH}" y2="{y + LANE}" stroke="#ddd"/>')

    for j in trace.jobs:
        if j.release > end:
            continue
        for a, b, core in j.segments:
            if a >= end:
                continue
            b = min(b, end)
            y = lane_y(core)
            out.append(f'<rect class="job" data-task="{escape(j.task)}" data-job="{j.index}" x="{x(a)}" y="{y}" '
                       f'width="{_f((b - a) * scale)}" height="{BAR}" fill="{color[j.task]}" stroke="#333"/>')
            out.append(f'<text x="{x(a)}" y="{y + BAR // 2 + 4}" dx="2">{escape(j.task)}/{j.index}</text>')
        core = j.segments[0][2]
        y = lane_y(core)
        out.append(f'<line class="release" x1="{x(j.release)}" y1="{y - 6}" x2="{x(j.release)}" y2="{y}" '
                   f'stroke="#2a2" stroke-width="2"/>')
        if j.deadline <= end:
            out.append(f'<line class="deadline" x1="{x(j.deadline)}" y1="{y + BAR}" x2="{x(j.deadline)}" '
                       f'y2="{y + BAR + 6}" stroke="#c22" stroke-width="2"/>')

    index = {(j.task, j.index): j for j in trace.jobs}
    for r in trace.consumptions:
        if r.time > end or r.producer_job is None:
            continue
        src = index[(r.producer_task or r.producer, r.producer_job)]
        dst = index[(r.consumer, r.consumer_job)]
        stroke = "#2a2" if r.fresh else "#c22"
        y1 = lane_y(src.segments[-1][2]) + BAR // 2
        y2 = lane_y(dst.segments[0][2]) + BAR // 2
        out.append(f'<line class="consumption" data-fresh="{str(r.fresh).lower()}" x1="{x(src.finish)}" '
                   f'y1="{y1}" x2="{x(r.time)}" y2="{y2}" stroke="{stroke}" marker-end="url(#arrow)"/>')

    axis_y = TOP + LANE * trace.cores + 14
    step = max(1, end // 10)
    for t in range(0, end + 1, step):
        out.append(f'<text x="{x(t)}" y="{axis_y}" text-anchor="middle">{t}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_gantt(trace: SimulationTrace, path: str, until: Optional[int] = None) -> None:
    svg = render_gantt(trace, until)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
