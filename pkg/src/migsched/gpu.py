"""MIG-capable GPU topologies.

A model is a binary-ish tree of instances (the repartitioning order), plus the
per-size creation/destruction costs.  Valid partitions are exactly the frontier
cuts of the tree, so everything here is derived from the tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Iterator


class UnsupportedModel(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Instance:
    start_slice: int
    size: int

    @property
    def stop(self) -> int:
        return self.start_slice + self.size

    @property
    def slices(self) -> range:
        return range(self.start_slice, self.stop)

    def overlaps(self, other: "Instance") -> bool:
        return self.start_slice < other.stop and other.start_slice < self.stop

    def contains(self, other: "Instance") -> bool:
        return self.start_slice <= other.start_slice and other.stop <= self.stop

    def __str__(self) -> str:
        return f"[S{self.start_slice}..S{self.stop - 1}]"


@dataclass(frozen=True)
class TreeNode:
    instance: Instance
    hosted_sizes: tuple[int, ...]
    children: tuple["TreeNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["TreeNode"]:
        """Pre-order (parents before children, left to right)."""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class GpuModel:
    name: str
    num_slices: int
    tree: TreeNode
    t_create: dict[int, float]
    t_destroy: dict[int, float]
    # derived
    sizes: tuple[int, ...] = field(init=False)
    nodes: tuple[TreeNode, ...] = field(init=False, repr=False)
    catalog: tuple[Instance, ...] = field(init=False, repr=False)
    _node_of: dict = field(init=False, repr=False, compare=False)
    _parent: dict = field(init=False, repr=False, compare=False)
    _footprint: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = tuple(self.tree.walk())
        _check_tree(self.tree, self.num_slices)
        node_of = {n.instance: n for n in nodes}
        if len(node_of) != len(nodes):
            raise ValueError("duplicate instance in repartitioning tree")
        parent = {}
        for n in nodes:
            for c in n.children:
                parent[c.instance] = n.instance
        # A node hosting a smaller size (e.g. 3 slices on the 4-slice node)
        # exposes an extra creatable instance that still blocks the whole node.
        footprint = {n.instance: n.instance for n in nodes}
        for n in nodes:
            for s in n.hosted_sizes:
                if s != n.instance.size:
                    footprint[Instance(n.instance.start_slice, s)] = n.instance
        sizes = sorted({s for n in nodes for s in n.hosted_sizes})
        for s in sizes:
            if s not in self.t_create or s not in self.t_destroy:
                raise ValueError(f"missing reconfiguration cost for size {s}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "sizes", tuple(sizes))
        object.__setattr__(self, "catalog", tuple(sorted(footprint)))
        object.__setattr__(self, "_node_of", node_of)
        object.__setattr__(self, "_parent", parent)
        object.__setattr__(self, "_footprint", footprint)

    def __hash__(self):
        return hash(self.name)

    @property
    def max_size(self) -> int:
        return self.sizes[-1]

    def node(self, instance: Instance) -> TreeNode:
        return self._node_of[instance]

    def is_node(self, instance: Instance) -> bool:
        return instance in self._node_of

    def parent(self, instance: Instance) -> Instance | None:
        return self._parent.get(instance)

    def footprint(self, instance: Instance) -> Instance:
        """Slices an instance blocks.  KeyError if it is not creatable."""
        return self._footprint[instance]

    def leaf_of(self, slice_index: int) -> TreeNode:
        node = self.tree
        while node.children:
            node = next(c for c in node.children if slice_index in c.instance.slices)
        return node

    def nodes_of_size(self, size: int) -> list[TreeNode]:
        return [n for n in self.nodes if n.instance.size == size]

    def hosting(self, size: int) -> list[TreeNode]:
        return [n for n in self.nodes if size in n.hosted_sizes]

    def create_cost(self, instance: Instance) -> float:
        return self.t_create[instance.size]

    def destroy_cost(self, instance: Instance) -> float:
        return self.t_destroy[instance.size]

    def to_dict(self) -> dict:
        def node_dict(n: TreeNode) -> dict:
            return {
                "start_slice": n.instance.start_slice,
                "size": n.instance.size,
                "hosted_sizes": list(n.hosted_sizes),
                "children": [node_dict(c) for c in n.children],
            }

        return {
            "name": self.name,
            "num_slices": self.num_slices,
            "tree": node_dict(self.tree),
            "t_create": {str(k): v for k, v in self.t_create.items()},
            "t_destroy": {str(k): v for k, v in self.t_destroy.items()},
        }


def _check_tree(node: TreeNode, num_slices: int) -> None:
    inst = node.instance
    if inst.start_slice < 0 or inst.size < 1 or inst.stop > num_slices:
        raise ValueError(f"instance {inst} out of range")
    if inst.size not in node.hosted_sizes:
        raise ValueError(f"node {inst} must host its own size")
    if any(s > inst.size for s in node.hosted_sizes):
        raise ValueError(f"node {inst} hosts a size larger than itself")
    if node.children:
        cover = sorted(node.children, key=lambda c: c.instance.start_slice)
        pos = inst.start_slice
        for c in cover:
            if c.instance.start_slice != pos:
                raise ValueError(f"children of {inst} do not partition it")
            pos = c.instance.stop
        if pos != inst.stop:
            raise ValueError(f"children of {inst} do not partition it")
    for c in node.children:
        _check_tree(c, num_slices)


def _leaf(start: int) -> TreeNode:
    return TreeNode(Instance(start, 1), (1,))


def _pair(start: int) -> TreeNode:
    return TreeNode(Instance(start, 2), (2,), (_leaf(start), _leaf(start + 1)))


def _seven_slice_tree() -> TreeNode:
    four = TreeNode(Instance(0, 4), (4, 3), (_pair(0), _pair(2)))
    three = TreeNode(Instance(4, 3), (3,), (_pair(4), _leaf(6)))
    return TreeNode(Instance(0, 7), (7,), (four, three))


# seconds, per instance size
_COSTS = {
    "A30": ({1: 0.11, 2: 0.12, 4: 0.13}, {1: 0.10, 2: 0.10, 4: 0.10}),
    "A100": (
        {1: 0.16, 2: 0.17, 3: 0.20, 4: 0.21, 7: 0.24},
        {1: 0.20, 2: 0.20, 3: 0.21, 4: 0.21, 7: 0.22},
    ),
    "H100": (
        {1: 0.16, 2: 0.21, 3: 0.33, 4: 0.38, 7: 0.42},
        {1: 0.21, 2: 0.23, 3: 0.25, 4: 0.26, 7: 0.26},
    ),
}

_BUILTIN: dict[str, GpuModel] = {}


def builtin_model(name: str) -> GpuModel:
    key = name.upper()
    if key not in _COSTS:
        raise UnsupportedModel(f"unsupported model: {name!r}")
    if key not in _BUILTIN:
        create, destroy = _COSTS[key]
        if key == "A30":
            tree = TreeNode(Instance(0, 4), (4,), (_pair(0), _pair(2)))
            model = GpuModel(key, 4, tree, dict(create), dict(destroy))
        else:
            model = GpuModel(key, 7, _seven_slice_tree(), dict(create), dict(destroy))
        _BUILTIN[key] = model
    return _BUILTIN[key]


def get_model(name_or_path: str | GpuModel) -> GpuModel:
    """Resolve a built-in name or a JSON model definition file."""
    if isinstance(name_or_path, GpuModel):
        return name_or_path
    if name_or_path.upper() in _COSTS:
        return builtin_model(name_or_path)
    if name_or_path.endswith(".json"):
        return load_model(name_or_path)
    raise UnsupportedModel(f"unsupported model: {name_or_path!r}")


def model_from_dict(data: dict) -> GpuModel:
    def build(d: dict) -> TreeNode:
        inst = Instance(int(d["start_slice"]), int(d["size"]))
        hosted = tuple(int(s) for s in d.get("hosted_sizes", [inst.size]))
        return TreeNode(inst, hosted, tuple(build(c) for c in d.get("children", [])))

    return GpuModel(
        name=data["name"],
        num_slices=int(data["num_slices"]),
        tree=build(data["tree"]),
        t_create={int(k): float(v) for k, v in data["t_create"].items()},
        t_destroy={int(k): float(v) for k, v in data["t_destroy"].items()},
    )


def load_model(path: str) -> GpuModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def _cuts(node: TreeNode) -> list[tuple[Instance, ...]]:
    own = [(Instance(node.instance.start_slice, s),) for s in node.hosted_sizes]
    if not node.children:
        return own
    below = [sum(combo, ()) for combo in product(*(_cuts(c) for c in node.children))]
    return own + below


def enumerate_partitions(model: GpuModel) -> list[tuple[Instance, ...]]:
    """All valid full partitions, each as instances ordered by start slice.

    The 3-slice use of the A100/H100 4-slice node shows up as
    ``Instance(0, 3)``; its footprint is still the whole node.
    """
    return [tuple(sorted(p)) for p in _cuts(model.tree)]


def is_feasible_instance_set(model: GpuModel, instances: Iterable[Instance]) -> bool:
    insts = list(instances)
    try:
        prints = [model.footprint(i) for i in insts]
    except KeyError:
        return False
    for a in range(len(prints)):
        for b in range(a + 1, len(prints)):
            if prints[a].overlaps(prints[b]):
                return False
    return True


def parse_partition(model: GpuModel, text: str) -> tuple[Instance, ...]:
    """Parse a partition given as sizes by start slice, e.g. ``"4,2,1"``."""
    sizes = tuple(int(x) for x in text.replace(" ", "").split(",") if x)
    for p in enumerate_partitions(model):
        if tuple(i.size for i in p) == sizes:
            return p
    raise ValueError(f"{text!r} is not a valid {model.name} partition")


def partition_label(partition: Iterable[Instance]) -> str:
    return ",".join(str(i.size) for i in sorted(partition))
