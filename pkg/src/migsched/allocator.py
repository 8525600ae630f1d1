"""Phase 1: the family of candidate allocations (slice counts per task)."""

from __future__ import annotations

from typing import Sequence

from .gpu import GpuModel
from .workload import Task

Allocation = tuple[int, ...]


def _argmin_work(task: Task, sizes: Sequence[int]) -> int:
    # min() keeps the first (smallest) size on ties
    return min(sizes, key=lambda s: s * task.times[s])


def allocation_family(tasks: Sequence[Task], model: GpuModel) -> list[Allocation]:
    """Turek-style family: start at minimum work, then keep widening the longest task.

    Consecutive members differ in one task whose size strictly grows, so the
    family has at most ``len(sizes) * n`` members.
    """
    if not tasks:
        return []
    sizes = model.sizes
    current = [_argmin_work(t, sizes) for t in tasks]
    family = [tuple(current)]
    while True:
        durations = [t.times[s] for t, s in zip(tasks, current)]
        longest = max(durations)
        i = durations.index(longest)  # lowest index on ties
        larger = [s for s in sizes if s > current[i]]
        if not larger:
            return family
        current[i] = _argmin_work(tasks[i], larger)
        family.append(tuple(current))
