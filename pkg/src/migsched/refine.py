"""Phase 3: move and swap critical tasks between same-size tree nodes."""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass

from .core import schedule_from_node_lists
from .gpu import GpuModel, Instance
from .schedule import Schedule, ScheduledTask


@dataclass
class RefineOptions:
    max_iterations: int = 100
    min_improvement: float = 0.001  # fraction of the makespan per iteration

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if not 0 <= self.min_improvement < 1:
            raise ValueError("min_improvement must be within [0, 1)")


@dataclass
class RefineReport:
    moves: int
    swaps: int
    makespan_before: float
    makespan_after: float
    iterations: int = 0


def _reaches(value, target) -> bool:
    return value >= target - 1e-9 * max(1, abs(target))


class _State:
    """Per-node task lists plus incrementally maintained slice end times."""

    def __init__(self, schedule: Schedule):
        self.model: GpuModel = schedule.model
        self.lists: dict[Instance, list[ScheduledTask]] = {
            inst: sorted(ts, key=lambda t: (-t.duration, t.index))
            for inst, ts in schedule.node_lists().items()
        }
        self.ends = list(schedule.slice_end)

    def node_end(self, inst: Instance):
        return max(self.ends[s] for s in inst.slices)

    def shift(self, inst: Instance, delta) -> None:
        for s in inst.slices:
            self.ends[s] = self.ends[s] + delta

    def alternative(self, inst: Instance, size_used: set[int]) -> Instance | None:
        best = None
        for node in self.model.nodes_of_size(inst.size):
            cand = node.instance
            if cand == inst or not self.lists.get(cand):
                continue
            if not size_used <= set(node.hosted_sizes):
                continue
            end = self.node_end(cand)
            if best is None or end < best[0]:
                best = (end, cand)
        return None if best is None else best[1]

    def insert(self, inst: Instance, task: ScheduledTask) -> None:
        lst = self.lists.setdefault(inst, [])
        keys = [(-t.duration, t.index) for t in lst]
        lst.insert(bisect.bisect_right(keys, (-task.duration, task.index)), task)


def _move_candidate(tasks: list[ScheduledTask], margin):
    best = None
    half = margin / 2
    for pos, t in enumerate(tasks):
        if t.duration < margin:
            key = (abs(t.duration - half), t.index)
            if best is None or key < best[0]:
                best = (key, pos)
    return None if best is None else best[1]


def _swap_candidate(mine: list[ScheduledTask], theirs: list[ScheduledTask], margin):
    best = None
    half = margin / 2
    for pk, tk in enumerate(mine):
        for pj, tj in enumerate(theirs):
            diff = tk.duration - tj.duration
            if 0 < diff < margin:
                key = (abs(diff - half), tk.index, tj.index)
                if best is None or key < best[0]:
                    best = (key, pk, pj)
    return None if best is None else best[1:]


def _iterate(state: _State, omega) -> tuple[int, int, bool]:
    """One pass over the critical nodes; returns (moves, swaps, reached_root)."""
    model = state.model
    root = model.tree.instance
    queue: deque[Instance] = deque()
    opened: set[Instance] = set()
    for s in range(model.num_slices):
        if _reaches(state.ends[s], omega):
            leaf = model.leaf_of(s).instance
            if leaf not in opened:
                opened.add(leaf)
                queue.append(leaf)
    moves = swaps = 0
    while queue:
        inst = queue.popleft()
        if inst == root:
            return moves, swaps, True
        acted = False
        mine = state.lists.get(inst)
        if mine:
            alt = state.alternative(inst, {t.size_used for t in mine})
            if alt is not None:
                margin = omega - state.node_end(alt)
                pos = _move_candidate(mine, margin)
                if pos is not None:
                    task = mine.pop(pos)
                    state.insert(alt, task)
                    state.shift(inst, -task.duration)
                    state.shift(alt, task.duration)
                    moves += 1
                    acted = True
                else:
                    pair = _swap_candidate(mine, state.lists[alt], margin)
                    if pair is not None:
                        tk = mine.pop(pair[0])
                        tj = state.lists[alt].pop(pair[1])
                        state.insert(inst, tj)
                        state.insert(alt, tk)
                        diff = tk.duration - tj.duration
                        state.shift(inst, -diff)
                        state.shift(alt, diff)
                        swaps += 1
                        acted = True
        if not acted:
            parent = model.parent(inst)
            if parent is not None and parent not in opened:
                opened.add(parent)
                queue.append(parent)
    return moves, swaps, False


def refine(schedule: Schedule, opts: RefineOptions | None = None) -> tuple[Schedule, RefineReport]:
    """Local search over critical nodes; never returns a longer schedule.

    Task lists are edited on a private copy and re-timed once at the end by
    the phase-2 engine, which also recomputes reconfiguration events.
    """
    opts = opts or RefineOptions()
    before = schedule.makespan
    unchanged = (schedule.copy(), RefineReport(0, 0, before, before))
    if opts.max_iterations == 0 or not schedule.tasks:
        return unchanged
    if schedule.reversed or schedule.initial_instances:
        raise ValueError("refine expects a forward schedule from the repartitioning scheduler")

    state = _State(schedule)
    omega = max(state.ends)
    moves = swaps = iterations = 0
    while iterations < opts.max_iterations:
        iterations += 1
        m, s, at_root = _iterate(state, omega)
        moves += m
        swaps += s
        new_omega = max(state.ends)
        gained = omega - new_omega
        omega = new_omega
        if at_root or m + s == 0 or gained <= opts.min_improvement * omega:
            break
    if moves + swaps == 0:
        return unchanged

    refined = schedule_from_node_lists(schedule.model, state.lists, schedule.zero_reconfig)
    if refined.makespan > before:
        # the reconfiguration-free estimate can disagree with the re-timed
        # schedule; keep the input rather than regress
        return unchanged
    return refined, RefineReport(moves, swaps, before, refined.makespan, iterations)
