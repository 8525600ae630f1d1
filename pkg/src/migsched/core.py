"""Phase 2 (list scheduling over the repartitioning tree) and the FAR driver."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .allocator import Allocation, allocation_family
from .gpu import GpuModel, Instance, TreeNode
from .schedule import CREATE, DESTROY, ReconfigEvent, Schedule, ScheduledTask
from .workload import Task


class UnschedulableSize(ValueError):
    pass


class _SizeGroups:
    """Unscheduled tasks grouped by allocated size, each group in LPT order."""

    def __init__(self, tasks: Sequence[Task], allocation: Allocation):
        groups: dict[int, list[int]] = {}
        for i, s in enumerate(allocation):
            groups.setdefault(s, []).append(i)
        self.tasks = tasks
        self.groups = {
            s: deque(sorted(idx, key=lambda i: (-tasks[i].times[s], i)))
            for s, idx in groups.items()
        }
        self.remaining = len(allocation)

    def take(self, node: TreeNode):
        for s in node.hosted_sizes:
            group = self.groups.get(s)
            if group:
                i = group.popleft()
                self.remaining -= 1
                t = self.tasks[i]
                return i, t.id, s, t.times[s]
        return None

    def pending(self) -> bool:
        return self.remaining > 0


class _FixedLists:
    """Per-node task queues decided beforehand (refinement, oracle, reversal)."""

    def __init__(self, lists: Mapping[Instance, Sequence[ScheduledTask]]):
        self.lists = {inst: deque(ts) for inst, ts in lists.items() if ts}
        self.remaining = sum(len(q) for q in self.lists.values())

    def take(self, node: TreeNode):
        q = self.lists.get(node.instance)
        if q:
            t = q.popleft()
            self.remaining -= 1
            return t.index, t.task_id, t.size_used, t.duration
        return None

    def pending(self) -> bool:
        return self.remaining > 0


def _repartition(model: GpuModel, source, zero_reconfig: bool) -> Schedule:
    placed: list[ScheduledTask] = []
    events: list[ReconfigEvent] = []
    reconfig_end = 0
    has_tasks: set[Instance] = set()
    root = model.tree
    # ties on end time: smaller start slice, then larger instance
    heap = [(0, root.instance.start_slice, -root.instance.size, root)]
    while heap:
        end, _, _, node = heapq.heappop(heap)
        inst = node.instance
        item = source.take(node)
        if item is not None:
            if inst not in has_tasks:
                cost = 0 if zero_reconfig else model.t_create[inst.size]
                reconfig_end = max(reconfig_end, end)
                events.append(ReconfigEvent(CREATE, inst, reconfig_end, cost))
                reconfig_end = reconfig_end + cost
                end = reconfig_end
                has_tasks.add(inst)
            index, task_id, size_used, duration = item
            placed.append(ScheduledTask(task_id, inst, size_used, end, duration, index))
            end = end + duration
            heapq.heappush(heap, (end, inst.start_slice, -inst.size, node))
        elif source.pending():
            if inst in has_tasks:
                cost = 0 if zero_reconfig else model.t_destroy[inst.size]
                reconfig_end = max(reconfig_end, end)
                events.append(ReconfigEvent(DESTROY, inst, reconfig_end, cost))
                reconfig_end = reconfig_end + cost
            for child in node.children:
                c = child.instance
                heapq.heappush(heap, (end, c.start_slice, -c.size, child))
    if source.pending():
        raise UnschedulableSize("unschedulable size: some tasks fit no tree node")
    return Schedule(model, placed, events, zero_reconfig=zero_reconfig)


def schedule_allocation(tasks: Sequence[Task], allocation: Allocation, model: GpuModel,
                        zero_reconfig: bool = False) -> Schedule:
    """List-schedule one allocation by repartitioning the instance tree."""
    if len(allocation) != len(tasks):
        raise ValueError("allocation length must match the number of tasks")
    hosted = {s for n in model.nodes for s in n.hosted_sizes}
    bad = sorted({s for s in allocation if s not in hosted})
    if bad:
        raise UnschedulableSize(f"unschedulable size(s) {bad}")
    return _repartition(model, _SizeGroups(tasks, allocation), zero_reconfig)


def schedule_from_node_lists(model: GpuModel, lists: Mapping[Instance, Sequence[ScheduledTask]],
                             zero_reconfig: bool = False) -> Schedule:
    """Re-time fixed per-node task queues with the same repartitioning engine."""
    for inst, ts in lists.items():
        if ts and not model.is_node(inst):
            raise UnschedulableSize(f"{inst} is not a node of the {model.name} tree")
        for t in ts:
            if t.size_used not in model.node(inst).hosted_sizes:
                raise UnschedulableSize(f"node {inst} cannot host size {t.size_used}")
    return _repartition(model, _FixedLists(lists), zero_reconfig)


def tree_times(model: GpuModel, lists: Mapping[Instance, Sequence[ScheduledTask]]):
    """Zero-reconfiguration start/end of every node: children start at their parent's end.

    Returns ``{instance: (start, end)}`` for every tree node.
    """
    out = {}
    stack = [(model.tree, 0)]
    while stack:
        node, ready = stack.pop()
        end = ready
        for t in lists.get(node.instance, ()):
            end = end + t.duration
        out[node.instance] = (ready, end)
        for child in node.children:
            stack.append((child, end))
    return out


def allocation_lower_bound(tasks: Sequence[Task], allocation: Allocation, num_slices: int):
    longest = max(t.times[s] for t, s in zip(tasks, allocation))
    area = sum(s * t.times[s] for t, s in zip(tasks, allocation))
    return max(longest, area / num_slices)


@dataclass
class FarResult:
    schedule: Schedule
    family: list[Allocation]
    makespans: list  # per family member, None where skipped by the bound
    chosen: int
    unrefined: Schedule
    refine_report: object = None

    @property
    def makespan(self):
        return self.schedule.makespan


def far_schedule(tasks: Sequence[Task], model: GpuModel, refine: bool = True,
                 zero_reconfig: bool = False, refine_opts=None, prune: bool = False) -> FarResult:
    """Family of allocations, repartitioning list scheduler on each, then refinement.

    With ``prune`` an allocation is skipped when its trivial lower bound
    (longest task, or total area over the slices) already reaches the best
    makespan found; that never changes the winner.
    """
    if not tasks:
        raise ValueError("far_schedule needs at least one task")
    family = allocation_family(tasks, model)
    makespans: list = []
    best = None
    chosen = -1
    for k, alloc in enumerate(family):
        if prune and best is not None and \
                allocation_lower_bound(tasks, alloc, model.num_slices) >= best.makespan:
            makespans.append(None)
            continue
        sched = schedule_allocation(tasks, alloc, model, zero_reconfig)
        makespans.append(sched.makespan)
        if best is None or sched.makespan < best.makespan:
            best, chosen = sched, k
    result = FarResult(best, family, makespans, chosen, best)
    if refine:
        from .refine import refine as run_refine

        refined, report = run_refine(best, refine_opts)
        result.schedule = refined
        result.refine_report = report
    return result
