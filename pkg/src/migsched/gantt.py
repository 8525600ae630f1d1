"""Gantt rendering: a self-contained SVG (one lane per slice) and a terminal view."""

from __future__ import annotations

import math
import string
from xml.sax.saxutils import escape

from .gpu import Instance
from .schedule import CREATE, Schedule

CREATE_COLOR = "#22c3d6"
DESTROY_COLOR = "#e0413a"
TASK_COLORS = ("#7aa6d8", "#9fd07a", "#f2c46d", "#c9a0dc", "#f59c8b", "#8fd3c1", "#d8b48a")

LANE_H = 28
LEFT = 48
TOP = 12
AXIS_H = 30


def _footprint(schedule: Schedule, inst: Instance) -> Instance:
    try:
        return schedule.model.footprint(inst)
    except KeyError:
        return inst


def _tick_step(span: float) -> float:
    # 1-2-5 steps giving roughly ten ticks
    raw = span / 10 if span > 0 else 1
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if raw <= m * mag:
            return m * mag
    return 10 * mag


def render_svg(schedule: Schedule, px_per_second: float = 10.0) -> str:
    """Task rectangles labelled by id; create and destroy events in their own colors.

    Every task and every reconfiguration event is exactly one ``<rect>``;
    lanes and axis use lines only.
    """
    if px_per_second <= 0:
        raise ValueError("px_per_second must be positive")
    lanes = schedule.model.num_slices
    span = float(schedule.makespan) if schedule.tasks or schedule.reconfigs else 0.0
    if schedule.reconfigs:
        span = max(span, max(float(e.end) for e in schedule.reconfigs))
    width = LEFT + max(span, 1.0) * px_per_second + 20
    height = TOP + lanes * LANE_H + AXIS_H

    def x(t) -> float:
        return LEFT + float(t) * px_per_second

    def y(slice_index: int) -> float:
        return TOP + slice_index * LANE_H

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}" height="{height}" '
           f'viewBox="0 0 {width:.1f} {height}" font-family="monospace" font-size="10">',
           f"<title>{escape(schedule.model.name)} schedule, makespan {span:.3f} s</title>"]
    for s in range(lanes + 1):
        out.append(f'<line x1="{LEFT}" y1="{y(s)}" x2="{width - 10:.1f}" y2="{y(s)}" stroke="#ddd"/>')
    for s in range(lanes):
        out.append(f'<text x="4" y="{y(s) + LANE_H / 2 + 3:.1f}">S{s}</text>')

    for e in schedule.reconfigs:
        fp = _footprint(schedule, e.instance)
        color = CREATE_COLOR if e.kind == CREATE else DESTROY_COLOR
        out.append(f'<rect class="{e.kind}" x="{x(e.start):.2f}" y="{y(fp.start_slice) + 1}" '
                   f'width="{float(e.duration) * px_per_second:.2f}" '
                   f'height="{fp.size * LANE_H - 2}" fill="{color}" opacity="0.85">'
                   f"<title>{e.kind} {escape(str(e.instance))} at {float(e.start):.3f} s</title></rect>")

    for i, t in enumerate(sorted(schedule.tasks, key=lambda t: (t.start, t.node.start_slice))):
        color = TASK_COLORS[i % len(TASK_COLORS)]
        top = y(t.node.start_slice) + 3
        h = t.node.size * LANE_H - 6
        w = float(t.duration) * px_per_second
        label = escape(str(t.task_id))
        out.append(f'<rect class="task" x="{x(t.start):.2f}" y="{top}" width="{w:.2f}" height="{h}" '
                   f'fill="{color}" stroke="#333" stroke-width="0.5">'
                   f"<title>{label}: {float(t.start):.3f}–{float(t.end):.3f} s, "
                   f"{t.size_used} slice(s)</title></rect>")
        if w >= 7 * len(str(t.task_id)):
            out.append(f'<text x="{x(t.start) + 3:.2f}" y="{top + h / 2 + 3:.1f}">{label}</text>')

    base = y(lanes)
    out.append(f'<line class="axis" x1="{LEFT}" y1="{base}" x2="{width - 10:.1f}" y2="{base}" stroke="#000"/>')
    step = _tick_step(span)
    k = 0
    while k * step <= span + 1e-9 or k == 0:
        tx = x(k * step)
        out.append(f'<line x1="{tx:.2f}" y1="{base}" x2="{tx:.2f}" y2="{base + 4}" stroke="#000"/>')
        out.append(f'<text x="{tx:.2f}" y="{base + 15}" text-anchor="middle">{k * step:g}</text>')
        k += 1
        if span <= 0:
            break
    out.append(f'<text x="{width - 12:.1f}" y="{base + 27}" text-anchor="end">time (s)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_text(schedule: Schedule, width: int = 72) -> str:
    """Fixed-width lanes: a letter per task, ``+`` for creation, ``-`` for destruction."""
    lanes = schedule.model.num_slices
    span = float(schedule.makespan) if schedule.tasks else 0.0
    if schedule.reconfigs:
        span = max(span, max(float(e.end) for e in schedule.reconfigs))
    scale = width / span if span > 0 else 0.0
    grid = [[" "] * width for _ in range(lanes)]

    def cols(start, end) -> range:
        a = min(width - 1, int(float(start) * scale))
        b = max(a + 1, min(width, int(round(float(end) * scale))))
        return range(a, b)

    for e in schedule.reconfigs:
        mark = "+" if e.kind == CREATE else "-"
        for s in _footprint(schedule, e.instance).slices:
            for c in cols(e.start, e.end):
                grid[s][c] = mark
    symbols = string.ascii_letters + string.digits
    legend = []
    for i, t in enumerate(sorted(schedule.tasks, key=lambda t: (t.start, t.node.start_slice))):
        sym = symbols[i % len(symbols)]
        legend.append(f"{sym}={t.task_id}")
        for s in t.node.slices:
            for c in cols(t.start, t.end):
                grid[s][c] = sym
    lines = [f"S{s:<2}|" + "".join(row) + "|" for s, row in enumerate(grid)]
    lines.append("   +" + "-" * width + "+")
    lines.append(f"    0{f'{span:.3f} s':>{width}}")
    if legend:
        lines.append("    " + " ".join(legend))
    return "\n".join(lines) + "\n"


def render_gantt(schedule: Schedule, fmt: str = "svg", px_per_second: float = 10.0) -> bytes:
    if fmt == "svg":
        return render_svg(schedule, px_per_second).encode()
    if fmt == "text":
        return render_text(schedule).encode()
    raise ValueError(f"unknown gantt format {fmt!r} (svg or text)")
