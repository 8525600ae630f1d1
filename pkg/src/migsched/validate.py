"""Feasibility checks for schedules: slice exclusivity, valid partitions, reconfiguration."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

from .gpu import Instance, is_feasible_instance_set
from .schedule import CREATE, DESTROY, Schedule


@dataclass
class Violation:
    constraint: int  # 1 slice exclusivity, 2 valid partition, 3 reconfiguration
    time: float
    detail: str

    def to_dict(self) -> dict:
        return {"constraint": self.constraint, "time": float(self.time), "detail": self.detail}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


@dataclass
class _Life:
    instance: Instance
    footprint: Instance
    begin: float        # reconfiguration starts touching the slices
    usable_from: float  # creation finished
    usable_until: float  # destruction starts
    end: float          # destruction finished


def _check_slices(schedule: Schedule, tol, out: list[Violation]) -> None:
    per_slice = defaultdict(list)
    for t in schedule.tasks:
        for s in t.node.slices:
            per_slice[s].append(t)
    for s, ts in sorted(per_slice.items()):
        ts.sort(key=lambda t: (t.start, t.end))
        for a, b in zip(ts, ts[1:]):
            if b.start < a.end - tol:
                out.append(Violation(1, b.start,
                                     f"slice S{s}: {a.task_id!r} and {b.task_id!r} overlap"))


def _check_partitions(schedule: Schedule, tol, out: list[Violation]) -> None:
    model = schedule.model
    for t in schedule.tasks:
        logical = Instance(t.node.start_slice, t.size_used)
        try:
            ok = model.footprint(logical) == t.node
        except KeyError:
            ok = False
        if not ok:
            out.append(Violation(2, t.start, f"task {t.task_id!r} on invalid instance {logical}"))
    instants = sorted({t.start for t in schedule.tasks} |
                      {e.start for e in schedule.reconfigs} | {e.end for e in schedule.reconfigs})
    by_start = sorted(schedule.tasks, key=lambda t: t.start)
    running: list = []
    j = 0
    for now in instants:
        while j < len(by_start) and by_start[j].start <= now + tol:
            running.append(by_start[j])
            j += 1
        running = [t for t in running if t.end > now + tol]
        active = {Instance(t.node.start_slice, t.size_used) for t in running}
        if len(active) > 1 and not is_feasible_instance_set(model, active):
            out.append(Violation(2, now, "active instances "
                                 + ", ".join(str(i) for i in sorted(active))
                                 + " do not form a valid partition"))


def _lives(schedule: Schedule, tol, out: list[Violation]) -> list[_Life]:
    model = schedule.model
    by_inst = defaultdict(list)
    for e in schedule.reconfigs:
        by_inst[e.instance].append(e)
    lives: list[_Life] = []
    insts = set(by_inst) | set(schedule.initial_instances)
    for inst in sorted(insts):
        try:
            fp = model.footprint(inst)
        except KeyError:
            out.append(Violation(2, 0, f"reconfiguration of non-existent instance {inst}"))
            continue
        open_life = None
        if inst in schedule.initial_instances:
            open_life = [-math.inf, -math.inf]
        for e in sorted(by_inst[inst], key=lambda e: e.start):
            if e.kind == CREATE:
                if open_life is not None:
                    out.append(Violation(3, e.start, f"create of live instance {inst}"))
                    continue
                open_life = [e.start, e.end]
            elif e.kind == DESTROY:
                if open_life is None:
                    out.append(Violation(3, e.start, f"destroy of absent instance {inst}"))
                    continue
                lives.append(_Life(inst, fp, open_life[0], open_life[1], e.start, e.end))
                open_life = None
            else:
                out.append(Violation(3, e.start, f"unknown reconfiguration kind {e.kind!r}"))
        if open_life is not None:
            lives.append(_Life(inst, fp, open_life[0], open_life[1], math.inf, math.inf))
    return lives


def _check_reconfig(schedule: Schedule, tol, out: list[Violation]) -> None:
    model = schedule.model
    events = sorted(schedule.reconfigs, key=lambda e: (e.start, e.end))
    for a, b in zip(events, events[1:]):
        if b.start < a.end - tol:
            out.append(Violation(3, b.start, f"{a.kind} {a.instance} overlaps {b.kind} {b.instance}"))
    for e in events:
        if e.duration < 0:
            out.append(Violation(3, e.start, f"negative duration for {e.kind} {e.instance}"))
            continue
        if schedule.zero_reconfig or e.kind not in (CREATE, DESTROY):
            continue
        costs = model.t_create if e.kind == CREATE else model.t_destroy
        want = costs.get(e.instance.size)
        if want is not None and abs(e.duration - want) > tol:
            out.append(Violation(3, e.start, f"{e.kind} {e.instance} lasts {e.duration}, expected {want}"))

    lives = _lives(schedule, tol, out)
    by_fp = defaultdict(list)
    for life in lives:
        by_fp[life.footprint].append(life)
    for t in schedule.tasks:
        if not any(l.usable_from <= t.start + tol and t.end <= l.usable_until + tol
                   for l in by_fp.get(t.node, ())):
            out.append(Violation(3, t.start, f"task {t.task_id!r} runs on {t.node} while no "
                                 "instance with that footprint is available"))
    per_slice = defaultdict(list)
    for life in lives:
        for s in life.footprint.slices:
            per_slice[s].append(life)
    for s, ls in sorted(per_slice.items()):
        ls.sort(key=lambda l: l.begin)
        for a, b in zip(ls, ls[1:]):
            if b.begin < a.end - tol:
                out.append(Violation(3, b.begin, f"slice S{s}: instance {b.instance} set up while "
                                     f"{a.instance} still exists"))


def validate(schedule: Schedule) -> ValidationReport:
    """Run all three feasibility checks; violations are returned as data, never raised."""
    report = ValidationReport()
    tol = 1e-9 * max(1.0, float(schedule.makespan))
    _check_slices(schedule, tol, report.violations)
    _check_partitions(schedule, tol, report.violations)
    _check_reconfig(schedule, tol, report.violations)
    return report
