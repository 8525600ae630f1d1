"""Comparison schedulers (MISO-style rounds, fixed partitions) and oracles."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import far_schedule, schedule_from_node_lists
from .gpu import GpuModel, Instance, enumerate_partitions, is_feasible_instance_set
from .schedule import CREATE, DESTROY, ReconfigEvent, Schedule, ScheduledTask
from .workload import Task

ORACLE_MAX_N = 6


@dataclass
class PartitionChoice:
    instances: tuple[Instance, ...]
    assignment: list[list[int]]  # FIFO task indices per instance


def _placed(model: GpuModel, task: Task, index: int, inst: Instance, start) -> ScheduledTask:
    # tasks sit on the instance's footprint node; size_used keeps the logical size
    return ScheduledTask(task.id, model.footprint(inst), inst.size, start, task.times[inst.size], index)


def _miso_choice(tasks: Sequence[Task], k: int, partitions) -> tuple[Instance, ...]:
    best_key, best = None, None
    for order, part in enumerate(partitions):
        score = 0
        for i, inst in enumerate(part):
            if k + i < len(tasks):
                score += tasks[k + i].speedup(inst.size)
        key = (-score, len(part), order)
        if best_key is None or key < best_key:
            best_key, best = key, part
    return best


def miso_schedule(tasks: Sequence[Task], model: GpuModel, zero_reconfig: bool = False) -> Schedule:
    """Rounds of FIFO tasks on the partition maximizing the summed speedups.

    The i-th remaining task goes to the i-th instance by start slice; a round
    only starts once every task of the previous round finished.
    """
    partitions = enumerate_partitions(model)
    placed: list[ScheduledTask] = []
    events: list[ReconfigEvent] = []
    alive: list[Instance] = []
    clock = 0
    k = 0
    while k < len(tasks):
        part = _miso_choice(tasks, k, partitions)
        used = list(part[: len(tasks) - k])
        keep = [a for a in alive if a in used]
        doomed = [a for a in alive if a not in used and
                  any(model.footprint(a).overlaps(model.footprint(u)) for u in used)]
        for inst in doomed:
            cost = 0 if zero_reconfig else model.destroy_cost(inst)
            events.append(ReconfigEvent(DESTROY, inst, clock, cost))
            clock = clock + cost
        for inst in used:
            if inst not in keep:
                cost = 0 if zero_reconfig else model.create_cost(inst)
                events.append(ReconfigEvent(CREATE, inst, clock, cost))
                clock = clock + cost
        alive = [a for a in alive if a not in doomed and a not in used] + used
        round_end = clock
        for i, inst in enumerate(used):
            t = _placed(model, tasks[k + i], k + i, inst, clock)
            placed.append(t)
            round_end = max(round_end, t.end)
        clock = round_end
        k += len(used)
    return Schedule(model, placed, events, zero_reconfig=zero_reconfig)


def fixpart_schedule(tasks: Sequence[Task], model: GpuModel,
                     partition: Iterable[Instance]) -> Schedule:
    """FIFO onto the earliest-free instance of a static partition (no reconfiguration)."""
    part = tuple(sorted(partition))
    if part not in set(enumerate_partitions(model)):
        if not is_feasible_instance_set(model, part):
            raise ValueError(f"invalid partition for {model.name}: {list(part)}")
        raise ValueError(f"partition does not cover the {model.name}: {list(part)}")
    free = [(0, inst.start_slice, inst) for inst in part]
    heapq.heapify(free)
    placed = []
    for i, task in enumerate(tasks):
        at, _, inst = heapq.heappop(free)
        t = _placed(model, task, i, inst, at)
        placed.append(t)
        heapq.heappush(free, (t.end, inst.start_slice, inst))
    return Schedule(model, placed, [], zero_reconfig=False, initial_instances=part)


def fixpart_best(tasks: Sequence[Task], model: GpuModel) -> tuple[tuple[Instance, ...], Schedule]:
    best = None
    for part in enumerate_partitions(model):
        sched = fixpart_schedule(tasks, model, part)
        if best is None or sched.makespan < best[1].makespan:
            best = (part, sched)
    return best


def lower_bound(tasks: Sequence[Task], model: GpuModel):
    """Minimum total area spread evenly over the slices."""
    return sum(min(s * t.times[s] for s in model.sizes) for t in tasks) / model.num_slices


def lower_bound_multibatch(batches: Sequence[Sequence[Task]], model: GpuModel):
    return lower_bound([t for b in batches for t in b], model)


class InstanceTooLarge(ValueError):
    pass


def _options(model: GpuModel) -> list[tuple[Instance, int]]:
    return [(n.instance, s) for n in model.nodes for s in n.hosted_sizes]


def brute_force_optimal(tasks: Sequence[Task], model: GpuModel, zero_reconfig: bool = True,
                        max_n: int = ORACLE_MAX_N):
    """Exact optimum over every (size, tree node) choice per task.

    Tasks on nodes crossing a slice must run one after the other, and the
    tree order realizes exactly that, so for a fixed node assignment the best
    reconfiguration-free makespan is the heaviest slice load.  Branch-and-bound
    over assignments then gives the optimum.  With reconfiguration costs the
    reconfiguration-free optimum's assignment is re-timed with costs, which is
    an upper bound rather than a certified optimum.

    Returns ``(makespan, schedule)``.
    """
    n = len(tasks)
    if n > max_n:
        raise InstanceTooLarge(f"instance too large for oracle: n={n} > {max_n}")
    if n == 0:
        return 0, Schedule(model, [], [], zero_reconfig=zero_reconfig)
    S = model.num_slices
    opts = _options(model)
    # longest tasks first gives the bound something to bite on early
    order = sorted(range(n), key=lambda i: -min(tasks[i].times.values()))
    min_area = [min(s * tasks[i].times[s] for s in model.sizes) for i in order]
    rest_area = [0] * (n + 1)
    for j in range(n - 1, -1, -1):
        rest_area[j] = rest_area[j + 1] + min_area[j]

    # incumbent: the phase-2 assignment of the reconfiguration-free FAR run
    seed = far_schedule(tasks, model, refine=False, zero_reconfig=True).schedule
    best_assign: list = [None] * n
    load = [0] * S
    for t in seed.tasks:
        best_assign[t.index] = (t.node, t.size_used)
    for i in order:
        node, s = best_assign[i]
        for x in node.slices:
            load[x] += tasks[i].times[s]
    best_val = max(load)
    load = [0] * S
    assign: list = [None] * n

    def search(j: int, area) -> None:
        nonlocal best_val, best_assign
        if j == n:
            peak = max(load)
            if peak < best_val:
                best_val = peak
                best_assign = list(assign)
            return
        i = order[j]
        cands = []
        for node, s in opts:
            d = tasks[i].times[s]
            peak = max(load[x] for x in node.slices) + d
            cands.append((peak, node.size * d, node, s, d))
        cands.sort(key=lambda c: (c[0], c[1]))
        for peak, a, node, s, d in cands:
            if peak >= best_val:
                break
            if (area + a + rest_area[j + 1]) / S >= best_val:
                continue
            for x in node.slices:
                load[x] += d
            assign[i] = (node, s)
            search(j + 1, area + a)
            for x in node.slices:
                load[x] -= d

    search(0, 0)
    lists: dict[Instance, list[ScheduledTask]] = {}
    for i in range(n):
        node, s = best_assign[i]
        lists.setdefault(node, []).append(
            ScheduledTask(tasks[i].id, node, s, 0, tasks[i].times[s], i))
    sched = schedule_from_node_lists(model, lists, zero_reconfig=zero_reconfig)
    return sched.makespan, sched
