"""Schedule value types and their JSON wire format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable

from .gpu import GpuModel, Instance, get_model

CREATE, DESTROY = "create", "destroy"


@dataclass(frozen=True)
class ScheduledTask:
    task_id: str
    node: Instance
    size_used: int
    start: float
    duration: float
    index: int = -1  # position in the input task list, -1 if unknown

    @property
    def end(self):
        return self.start + self.duration

    def shifted(self, delta) -> "ScheduledTask":
        return replace(self, start=self.start + delta)


@dataclass(frozen=True)
class ReconfigEvent:
    kind: str
    instance: Instance
    start: float
    duration: float

    @property
    def end(self):
        return self.start + self.duration


@dataclass
class Schedule:
    model: GpuModel
    tasks: list[ScheduledTask] = field(default_factory=list)
    reconfigs: list[ReconfigEvent] = field(default_factory=list)
    zero_reconfig: bool = False
    # instances that exist before time 0 (static configurations)
    initial_instances: tuple[Instance, ...] = ()
    reversed: bool = False

    @property
    def makespan(self):
        return max((t.end for t in self.tasks), default=0)

    @property
    def slice_end(self) -> list:
        ends = [0] * self.model.num_slices
        for t in self.tasks:
            for s in t.node.slices:
                if t.end > ends[s]:
                    ends[s] = t.end
        return ends

    @property
    def first_use(self) -> list:
        """Earliest task start per slice, None where the slice is unused."""
        first = [None] * self.model.num_slices
        for t in self.tasks:
            for s in t.node.slices:
                if first[s] is None or t.start < first[s]:
                    first[s] = t.start
        return first

    def node_lists(self) -> dict[Instance, list[ScheduledTask]]:
        """Tasks per node in execution order."""
        lists: dict[Instance, list[ScheduledTask]] = {}
        for t in sorted(self.tasks, key=lambda t: (t.start, t.node)):
            lists.setdefault(t.node, []).append(t)
        return lists

    def count(self, kind: str) -> int:
        return sum(1 for e in self.reconfigs if e.kind == kind)

    def copy(self) -> "Schedule":
        return replace(self, tasks=list(self.tasks), reconfigs=list(self.reconfigs))

    def to_dict(self) -> dict:
        d = {
            "model": self.model.name,
            "makespan": float(self.makespan),
            "zero_reconfig": self.zero_reconfig,
            "reversed": self.reversed,
            "tasks": [
                {
                    "id": t.task_id,
                    "slice_start": t.node.start_slice,
                    "size": t.node.size,
                    "size_used": t.size_used,
                    "start": float(t.start),
                    "duration": float(t.duration),
                }
                for t in sorted(self.tasks, key=lambda t: (t.start, t.node))
            ],
            "reconfigs": [
                {
                    "kind": e.kind,
                    "slice_start": e.instance.start_slice,
                    "size": e.instance.size,
                    "start": float(e.start),
                    "duration": float(e.duration),
                }
                for e in sorted(self.reconfigs, key=lambda e: e.start)
            ],
        }
        if self.initial_instances:
            d["initial_instances"] = [
                {"slice_start": i.start_slice, "size": i.size} for i in self.initial_instances
            ]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def schedule_from_dict(data: dict, model: GpuModel | None = None) -> Schedule:
    model = model or get_model(data["model"])
    tasks = [
        ScheduledTask(
            task_id=str(t["id"]),
            node=Instance(int(t["slice_start"]), int(t["size"])),
            size_used=int(t.get("size_used", t["size"])),
            start=float(t["start"]),
            duration=float(t["duration"]),
            index=i,
        )
        for i, t in enumerate(data.get("tasks", []))
    ]
    events = [
        ReconfigEvent(
            kind=e["kind"],
            instance=Instance(int(e["slice_start"]), int(e["size"])),
            start=float(e["start"]),
            duration=float(e["duration"]),
        )
        for e in data.get("reconfigs", [])
    ]
    initial = tuple(
        Instance(int(i["slice_start"]), int(i["size"])) for i in data.get("initial_instances", [])
    )
    return Schedule(model, tasks, events, bool(data.get("zero_reconfig", False)),
                    initial, bool(data.get("reversed", False)))


def load_schedule(path: str, model: GpuModel | None = None) -> Schedule:
    with open(path) as fh:
        return schedule_from_dict(json.load(fh), model)


def save_schedule(path: str, schedule: Schedule) -> None:
    with open(path, "w") as fh:
        json.dump(schedule.to_dict(), fh, indent=2)


def slice_profile(model: GpuModel, tasks: Iterable[ScheduledTask]) -> list:
    ends = [0] * model.num_slices
    for t in tasks:
        for s in t.node.slices:
            ends[s] = max(ends[s], t.end)
    return ends
