"""Joining per-batch schedules: time mirroring, slice-wise overlap, seam moves/swaps.

Whenever tasks are shifted in time, reconfiguration events are re-derived by
replaying instance lifecycles against one sequential reconfiguration channel
(the driver performs one create/destroy at a time).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .core import far_schedule, schedule_from_node_lists, tree_times
from .gpu import GpuModel, Instance
from .refine import RefineOptions, _move_candidate, _swap_candidate
from .schedule import CREATE, DESTROY, ReconfigEvent, Schedule, ScheduledTask
from .workload import Task

_NEG = -math.inf


class _Channel:
    """Busy intervals of the reconfiguration channel (disjoint, sorted)."""

    def __init__(self, starts=None, ends=None):
        self.starts: list = starts or []
        self.ends: list = ends or []

    def copy(self) -> "_Channel":
        return _Channel(list(self.starts), list(self.ends))

    def reserve(self, earliest, duration):
        """Earliest start >= ``earliest`` where ``duration`` fits; books it."""
        t = earliest
        j = bisect.bisect_right(self.ends, t)
        while j < len(self.starts):
            if t + duration <= self.starts[j]:
                break
            t = max(t, self.ends[j])
            j += 1
        if duration > 0:
            self.starts.insert(j, t)
            self.ends.insert(j, t + duration)
        return t

    def prune(self, before) -> None:
        j = bisect.bisect_right(self.ends, before)
        del self.starts[:j]
        del self.ends[:j]


@dataclass
class _Alive:
    instance: Instance
    footprint: Instance
    ready: float
    last_use: float


@dataclass
class _Tail:
    """Timeline state after the already placed batches."""

    model: GpuModel
    makespan: float
    slice_end: list
    alive: dict
    free_at: list
    channel: _Channel

    def copy(self) -> "_Tail":
        return _Tail(self.model, self.makespan, list(self.slice_end),
                     {k: replace(v) for k, v in self.alive.items()},
                     list(self.free_at), self.channel.copy())

    @classmethod
    def empty(cls, model: GpuModel, initial: Sequence[Instance] = ()) -> "_Tail":
        alive = {i: _Alive(i, model.footprint(i), _NEG, _NEG) for i in initial}
        return cls(model, 0, [0] * model.num_slices, alive, [0] * model.num_slices, _Channel())

    @classmethod
    def from_schedule(cls, s: Schedule) -> "_Tail":
        model = s.model
        tail = cls.empty(model, s.initial_instances)
        for e in sorted(s.reconfigs, key=lambda e: (e.start, e.end)):
            if e.duration > 0:
                tail.channel.starts.append(e.start)
                tail.channel.ends.append(e.end)
            fp = model.footprint(e.instance)
            if e.kind == CREATE:
                tail.alive[e.instance] = _Alive(e.instance, fp, e.end, e.end)
            else:
                tail.alive.pop(e.instance, None)
                for x in fp.slices:
                    tail.free_at[x] = max(tail.free_at[x], e.end)
        for t in s.tasks:
            for a in tail.alive.values():
                if a.footprint == t.node and t.start >= a.ready - 1e-12:
                    a.last_use = max(a.last_use, t.end)
        tail.makespan = s.makespan
        tail.slice_end = s.slice_end
        return tail

    def horizon(self):
        """No future reconfiguration can start before this time."""
        avail = list(self.free_at)
        for a in self.alive.values():
            for x in a.footprint.slices:
                avail[x] = max(avail[x], a.last_use)
        return min(avail)


def _groups(tasks: Sequence[ScheduledTask]):
    by_node: dict[Instance, list[ScheduledTask]] = {}
    for t in sorted(tasks, key=lambda t: (t.start, t.node)):
        by_node.setdefault(t.node, []).append(t)
    out = []
    for node, ts in by_node.items():
        logical = Instance(node.start_slice, max(t.size_used for t in ts))
        out.append((node, logical, ts))
    out.sort(key=lambda g: (g[2][0].start, g[0].start_slice, -g[0].size))
    return out


def _materialize(tail: _Tail, groups, offset, zero_reconfig: bool):
    """Place ``groups`` at ``offset`` on top of ``tail`` (mutated).

    Returns (tasks, events, max delay of a task versus its desired start).
    """
    model = tail.model
    placed: list[ScheduledTask] = []
    events: list[ReconfigEvent] = []
    delay = 0
    for node, logical, ts in groups:
        rec = tail.alive.get(logical)
        doomed = sorted((a for a in tail.alive.values()
                         if a is not rec and a.footprint.overlaps(node)),
                        key=lambda a: (max(a.last_use, a.ready), a.instance))
        for other in doomed:
            cost = 0 if zero_reconfig else model.destroy_cost(other.instance)
            at = tail.channel.reserve(max(other.last_use, other.ready, 0), cost)
            events.append(ReconfigEvent(DESTROY, other.instance, at, cost))
            for x in other.footprint.slices:
                tail.free_at[x] = max(tail.free_at[x], at + cost)
            del tail.alive[other.instance]
        if rec is None:
            cost = 0 if zero_reconfig else model.create_cost(logical)
            at = tail.channel.reserve(max(tail.free_at[x] for x in node.slices), cost)
            events.append(ReconfigEvent(CREATE, logical, at, cost))
            rec = _Alive(logical, node, at + cost, at + cost)
            tail.alive[logical] = rec
        clock = max(rec.ready, rec.last_use)
        for t in ts:
            want = t.start + offset
            start = want if want >= clock else clock
            delay = max(delay, start - want)
            placed.append(replace(t, start=start))
            clock = start + t.duration
        rec.last_use = clock
    for t in placed:
        for x in t.node.slices:
            tail.slice_end[x] = max(tail.slice_end[x], t.end)
    tail.makespan = max([tail.makespan] + [t.end for t in placed])
    return placed, events, delay


def _fit(tail: _Tail, groups, lo, zero_reconfig: bool, cap=None):
    """Smallest offset >= lo at which every task keeps its relative start.

    Beyond ``cap`` the search gives up and keeps the placement at ``lo`` with
    tasks pushed back individually, which is always feasible.
    """

    def attempt(o):
        t = tail.copy()
        placed, events, delay = _materialize(t, groups, o, zero_reconfig)
        return delay <= 1e-9 * max(1.0, abs(float(o))), delay, (o, t, placed, events)

    ok, delay, first = attempt(lo)
    if ok:
        return first
    if cap is None:
        span = max((t.end for _, _, ts in groups for t in ts), default=0)
        cap = max(lo, tail.makespan) + span + 1
    step = max(delay, 1e-6)
    while True:
        if lo + step > cap:
            return first
        ok, delay, hi_res = attempt(lo + step)
        if ok:
            break
        step *= 2
    a, b = lo, lo + step
    for _ in range(60):
        if b - a <= 1e-9 * max(1.0, abs(b)):
            break
        mid = (a + b) / 2
        ok, _, res = attempt(mid)
        if ok:
            b, hi_res = mid, res
        else:
            a = mid
    if first[1].makespan < hi_res[1].makespan:
        return first
    return hi_res


def reverse_schedule(s: Schedule) -> Schedule:
    """Time-mirror the tasks and re-derive the reconfigurations."""
    M = s.makespan
    mirrored = [replace(t, start=M - t.end) for t in s.tasks]
    tail = _Tail.empty(s.model, s.initial_instances)
    placed, events, _ = _materialize(tail, _groups(mirrored), 0, s.zero_reconfig)
    return Schedule(s.model, placed, events, s.zero_reconfig, s.initial_instances, not s.reversed)


# -- seam improvement -------------------------------------------------------

def _forward_lists(s: Schedule) -> dict[Instance, list[ScheduledTask]]:
    lists = s.node_lists()
    if s.reversed:
        lists = {k: v[::-1] for k, v in lists.items()}
    return lists


def _estimate(model: GpuModel, lists, reversed_: bool, prev_end, prev_makespan):
    """Reconfiguration-free offset and combined makespan for the given lists."""
    times = tree_times(model, lists)
    S = model.num_slices
    fe = [None] * S
    fs = [None] * S
    for inst, ts in lists.items():
        if not ts:
            continue
        start, end = times[inst]
        for x in inst.slices:
            fe[x] = end if fe[x] is None else max(fe[x], end)
            fs[x] = start if fs[x] is None else min(fs[x], start)
    M = max((e for e in fe if e is not None), default=0)
    if reversed_:
        first = [None if fe[x] is None else M - fe[x] for x in range(S)]
    else:
        first = fs
    gaps = [prev_end[x] - first[x] for x in range(S) if first[x] is not None]
    o = max([0] + gaps)
    return o, max(prev_makespan, o + M), first


def _seam_improve(model: GpuModel, lists, reversed_: bool, prev_end, prev_makespan,
                  max_iterations: int):
    """Refinement-style passes where the idle window between the batches
    plays the part of the makespan margin.

    A pass visits the nodes limiting the offset (leaves first, then parents),
    moving or swapping tasks toward the same-size node with the most slack.
    Passes that do not shorten the estimated combined makespan are undone.
    """
    moves = swaps = 0
    o, total, first = _estimate(model, lists, reversed_, prev_end, prev_makespan)
    root = model.tree.instance
    tol = 1e-9 * max(1.0, float(total))
    gaps = list(prev_end)

    def slack(inst):
        return min(o + first[x] - gaps[x] for x in inst.slices if first[x] is not None)

    def shift(inst, delta):
        # a longer forward node ends later; mirrored, its slices start earlier
        for x in inst.slices:
            if first[x] is not None and reversed_:
                first[x] -= delta

    for _ in range(max_iterations):
        if o <= tol:
            break
        snapshot = {k: list(v) for k, v in lists.items()}
        first = list(first)
        queue, opened = [], set()
        for x in range(model.num_slices):
            if first[x] is not None and gaps[x] - first[x] >= o - tol:
                leaf = model.leaf_of(x).instance
                if leaf not in opened:
                    opened.add(leaf)
                    queue.append(leaf)
        m = w = 0
        while queue:
            inst = queue.pop(0)
            if inst == root:
                break
            acted = False
            mine = lists.get(inst)
            if mine:
                alts = [n.instance for n in model.nodes_of_size(inst.size)
                        if n.instance != inst and lists.get(n.instance)
                        and {t.size_used for t in mine} <= set(n.hosted_sizes)]
                if alts:
                    alt = max(alts, key=lambda a: (slack(a), -a.start_slice))
                    margin = slack(alt)
                    pos = _move_candidate(mine, margin)
                    if pos is not None:
                        task = mine.pop(pos)
                        lists[alt].insert(_slot(lists[alt], task), task)
                        shift(inst, -task.duration)
                        shift(alt, task.duration)
                        m += 1
                        acted = True
                    else:
                        pair = _swap_candidate(mine, lists[alt], margin)
                        if pair is not None:
                            tk = mine.pop(pair[0])
                            tj = lists[alt].pop(pair[1])
                            mine.insert(_slot(mine, tj), tj)
                            lists[alt].insert(_slot(lists[alt], tk), tk)
                            shift(inst, tj.duration - tk.duration)
                            shift(alt, tk.duration - tj.duration)
                            w += 1
                            acted = True
            if not acted:
                parent = model.parent(inst)
                if parent is not None and parent not in opened:
                    opened.add(parent)
                    queue.append(parent)
        if m + w == 0:
            break
        o2, total2, first2 = _estimate(model, lists, reversed_, prev_end, prev_makespan)
        if total2 >= total - tol:
            lists.clear()
            lists.update(snapshot)
            break
        moves += m
        swaps += w
        o, total, first = o2, total2, first2
    return moves, swaps


def _slot(ts: list[ScheduledTask], task: ScheduledTask) -> int:
    # forward lists run longest first
    keys = [(-t.duration, t.index) for t in ts]
    return bisect.bisect_right(keys, (-task.duration, task.index))


# -- concatenation ------------------------------------------------------------

@dataclass
class ConcatReport:
    offset: float
    trivial_offset: float
    makespan: float
    trivial_makespan: float
    moves: int = 0
    swaps: int = 0
    seam_reconfigs: list = field(default_factory=list)

    @property
    def overlap_gain(self):
        return self.trivial_makespan - self.makespan

    def to_dict(self) -> dict:
        return {
            "offset": float(self.offset),
            "trivial_offset": float(self.trivial_offset),
            "makespan": float(self.makespan),
            "trivial_makespan": float(self.trivial_makespan),
            "overlap_gain": float(self.overlap_gain),
            "moves": self.moves,
            "swaps": self.swaps,
        }


@dataclass
class ConcatOptions:
    move_swap: bool = True
    max_iterations: int = RefineOptions().max_iterations


def _join(tail: _Tail, nxt: Schedule, opts: ConcatOptions, min_offset=0):
    """Place ``nxt`` after ``tail``; returns (offset, new tail, tasks, events, report)."""
    model = tail.model
    zero = nxt.zero_reconfig
    first = nxt.first_use
    gaps = [tail.slice_end[x] - first[x] for x in range(model.num_slices) if first[x] is not None]
    lo = max([min_offset, 0] + gaps)
    tail.channel.prune(tail.horizon())

    o, t_tail, placed, events = _fit(tail, _groups(nxt.tasks), lo, zero)
    trivial = _fit(tail, _groups(nxt.tasks), max(lo, tail.makespan), zero)
    best = (o, t_tail, placed, events, 0, 0)

    if opts.move_swap and not nxt.initial_instances:
        lists = _forward_lists(nxt)
        moves, swaps = _seam_improve(model, lists, nxt.reversed, tail.slice_end,
                                     tail.makespan, opts.max_iterations)
        if moves + swaps:
            alt = schedule_from_node_lists(model, lists, zero)
            if nxt.reversed:
                alt = reverse_schedule(alt)
            first2 = alt.first_use
            gaps2 = [tail.slice_end[x] - first2[x] for x in range(model.num_slices)
                     if first2[x] is not None]
            lo2 = max([min_offset, 0] + gaps2)
            o2, t2, placed2, events2 = _fit(tail, _groups(alt.tasks), lo2, zero)
            if t2.makespan < t_tail.makespan:
                best = (o2, t2, placed2, events2, moves, swaps)

    if trivial[1].makespan < best[1].makespan:
        best = trivial + (0, 0)
    o, t_tail, placed, events, moves, swaps = best
    report = ConcatReport(o, trivial[0], t_tail.makespan, trivial[1].makespan, moves, swaps,
                          list(events))
    return o, t_tail, placed, events, report


def concat(prev: Schedule, nxt: Schedule, opts: ConcatOptions | None = None):
    """Start ``nxt`` as early as the per-slice ends of ``prev`` and the
    reconfiguration channel allow.  Returns (offset, combined schedule, report)."""
    if prev.model.name != nxt.model.name:
        raise ValueError(f"model mismatch: {prev.model.name} vs {nxt.model.name}")
    opts = opts or ConcatOptions()
    tail = _Tail.from_schedule(prev)
    o, _, placed, events, report = _join(tail, nxt, opts)
    combined = Schedule(prev.model, list(prev.tasks) + placed, list(prev.reconfigs) + events,
                        prev.zero_reconfig and nxt.zero_reconfig, prev.initial_instances,
                        prev.reversed)
    return o, combined, report


def trivial_concat(prev: Schedule, nxt: Schedule):
    """``nxt`` unchanged, started no earlier than the last task of ``prev``.

    Returns (offset, combined schedule).
    """
    tail = _Tail.from_schedule(prev)
    o, t_tail, placed, events = _fit(tail, _groups(nxt.tasks), tail.makespan, nxt.zero_reconfig)
    combined = Schedule(prev.model, list(prev.tasks) + placed, list(prev.reconfigs) + events,
                        prev.zero_reconfig and nxt.zero_reconfig, prev.initial_instances,
                        prev.reversed)
    return o, combined


# -- streams ----------------------------------------------------------------

@dataclass
class ConcatPlan:
    batch_schedules: list[Schedule]
    reversed: list[bool]
    offsets: list[float]
    seam_reconfigs: list[list[ReconfigEvent]]
    combined: Schedule

    def to_dict(self) -> dict:
        return {
            "model": self.combined.model.name,
            "makespan": float(self.combined.makespan),
            "batches": [
                {"offset": float(o), "reversed": r, "schedule": s.to_dict()}
                for s, r, o in zip(self.batch_schedules, self.reversed, self.offsets)
            ],
            "combined": self.combined.to_dict(),
        }


@dataclass
class StreamResult:
    total_makespan: float
    seams: list[ConcatReport]
    lower_bound: float
    p_multibatch: float


def run_stream(batches: Sequence[Sequence[Task]], model: GpuModel, refine: bool = True,
               zero_reconfig: bool = False, opts: ConcatOptions | None = None,
               alternate: bool = True) -> tuple[ConcatPlan, StreamResult]:
    """FAR per batch, alternately mirrored, folded left to right."""
    from .baselines import lower_bound_multibatch

    if not batches:
        raise ValueError("run_stream needs at least one batch")
    opts = opts or ConcatOptions()
    tail = _Tail.empty(model)
    schedules, flags, offsets, seam_events, reports = [], [], [], [], []
    tasks_all: list[ScheduledTask] = []
    events_all: list[ReconfigEvent] = []
    last_offset = 0
    for k, batch in enumerate(batches):
        if not batch:
            raise ValueError(f"batch {k} is empty")
        sched = far_schedule(batch, model, refine=refine, zero_reconfig=zero_reconfig).schedule
        sched = _prefixed(sched, f"b{k}:")
        rev = alternate and k % 2 == 1
        if rev:
            sched = reverse_schedule(sched)
        if k == 0:
            placed, events = list(sched.tasks), list(sched.reconfigs)
            tail = _Tail.from_schedule(sched)
            o = 0
        else:
            o, tail, placed, events, report = _join(tail, sched, opts, min_offset=last_offset)
            reports.append(report)
            seam_events.append(events)
        last_offset = o
        schedules.append(sched)
        flags.append(rev)
        offsets.append(o)
        tasks_all += placed
        events_all += events
    combined = Schedule(model, tasks_all, events_all, zero_reconfig)
    lb = lower_bound_multibatch(batches, model)
    total = combined.makespan
    plan = ConcatPlan(schedules, flags, offsets, seam_events, combined)
    return plan, StreamResult(total, reports, lb, (total / lb - 1) * 100 if lb else 0.0)


def _prefixed(s: Schedule, prefix: str) -> Schedule:
    return replace(s, tasks=[replace(t, task_id=prefix + t.task_id) for t in s.tasks])
