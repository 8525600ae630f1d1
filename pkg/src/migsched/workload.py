"""Tasks, profile files and the synthetic speedup-curve generator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .gpu import GpuModel

# tolerated relative increase of t(s) over the previous size before rejecting
MONOTONY_SLACK = 0.02


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class Task:
    id: str
    times: Mapping[int, float]

    def __post_init__(self):
        if any(not t > 0 for t in self.times.values()):
            raise ProfileError(f"invalid time in task {self.id!r}")

    def time(self, size: int) -> float:
        return self.times[size]

    def work(self, size: int) -> float:
        return size * self.times[size]

    def speedup(self, size: int) -> float:
        return self.times[1] / self.times[size]

    def min_work(self) -> float:
        return min(s * t for s, t in self.times.items())


def enforce_monotony(task_id: str, times: Mapping[int, float], sizes: Sequence[int]) -> dict[int, float]:
    """Clamp small time increases with size; reject larger ones."""
    out: dict[int, float] = {}
    prev = None
    for s in sorted(sizes):
        t = times[s]
        if prev is not None and t > prev:
            if t > prev * (1 + MONOTONY_SLACK):
                raise ProfileError(
                    f"non-monotone profile: task {task_id!r} t({s})={t} > t(prev)={prev}"
                )
            t = prev
        out[s] = t
        prev = t
    return out


def task_from_dict(data: Mapping, model: GpuModel) -> Task:
    tid = str(data["id"])
    raw = {int(k): v for k, v in data["times"].items()}
    missing = [s for s in model.sizes if s not in raw]
    if missing:
        raise ProfileError(f"incomplete profile: task {tid!r} lacks sizes {missing}")
    times = {}
    for s in model.sizes:
        try:
            t = float(raw[s])
        except (TypeError, ValueError):
            raise ProfileError(f"invalid time: task {tid!r} size {s}") from None
        if not (t > 0 and math.isfinite(t)):
            raise ProfileError(f"invalid time: task {tid!r} size {s} = {raw[s]!r}")
        times[s] = t
    return Task(tid, enforce_monotony(tid, times, model.sizes))


def tasks_from_json(data, model: GpuModel) -> list[Task]:
    if isinstance(data, Mapping) and "tasks" in data:
        entries = data["tasks"]
    elif isinstance(data, Mapping):
        entries = [data]
    else:
        entries = data
    return [task_from_dict(e, model) for e in entries]


def load_profile(path: str, model: GpuModel) -> list[Task]:
    with open(path) as fh:
        return tasks_from_json(json.load(fh), model)


def profile_to_dict(tasks: Sequence[Task], model: GpuModel) -> dict:
    return {
        "model": model.name,
        "tasks": [
            {"id": t.id, "times": {str(s): float(t.times[s]) for s in model.sizes}}
            for t in tasks
        ],
    }


def save_profile(path: str, tasks: Sequence[Task], model: GpuModel) -> None:
    with open(path, "w") as fh:
        json.dump(profile_to_dict(tasks, model), fh, indent=2)


# -- synthetic generator ---------------------------------------------------

SUPER, NEAR, SUB = "super", "near", "sub"

# (mean, std, low, high) of the per-step factor r
R_DISTRIBUTIONS = {
    SUPER: (-0.25, 0.25, -0.5, 0.0),
    NEAR: (0.1, 0.1, 0.0, 0.2),
    SUB: (0.75, 0.25, 0.5, 1.0),
}

SCALING_CONFIGS = {
    "PoorScaling": {1: 50, 2: 50, 3: 0, 4: 0, 7: 0},
    "MixedScaling": {1: 20, 2: 20, 3: 20, 4: 20, 7: 20},
    "GoodScaling": {1: 0, 2: 0, 3: 0, 4: 50, 7: 50},
}
TIME_CONFIGS = {"WideTimes": (1.0, 100.0), "NarrowTimes": (90.0, 100.0)}


@dataclass
class SyntheticConfig:
    n: int
    p: dict[int, float]
    p_sup: float = 50.0
    t_min: float = 1.0
    t_max: float = 100.0
    transition_prob: float = 0.3
    seed: int | None = None

    def __post_init__(self):
        self.p = {int(k): v for k, v in self.p.items()}
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if abs(sum(self.p.values()) - 100) > 1e-9:
            raise ValueError(f"scaling shares must sum to 100, got {sum(self.p.values())}")
        if not 0 <= self.p_sup <= 100:
            raise ValueError("p_sup must be within [0, 100]")
        if not 0 < self.t_min <= self.t_max:
            raise ValueError("need 0 < t_min <= t_max")

    @classmethod
    def named(cls, scaling: str, times: str, n: int, p_sup: float = 50.0, seed=None):
        t_min, t_max = TIME_CONFIGS[times]
        return cls(n=n, p=dict(SCALING_CONFIGS[scaling]), p_sup=p_sup,
                   t_min=t_min, t_max=t_max, seed=seed)


def size_counts(n: int, p: Mapping[int, float], sizes: Sequence[int] | None = None) -> dict[int, int]:
    """Integer task counts per scaling class summing exactly to n."""
    sizes = sorted(sizes if sizes is not None else p)
    exact = {s: Fraction(n) * Fraction(p.get(s, 0)).limit_denominator(10**9) / 100 for s in sizes}
    counts = {s: math.floor(exact[s]) for s in sizes}
    while sum(counts.values()) < n:
        # max() keeps the first (smallest) size on ties
        j = max(sizes, key=lambda s: exact[s] - counts[s])
        counts[j] += 1
    return counts


def _draw_r(rng: np.random.Generator, regime: str) -> float:
    mu, sigma, lo, hi = R_DISTRIBUTIONS[regime]
    return float(np.clip(rng.normal(mu, sigma), lo, hi))


def _curve(rng, t1: float, scale_class: int, memory_bound: bool, max_size: int,
           transition_prob: float) -> dict[int, float]:
    times = {1: t1}
    t = t1
    compute_bound = not memory_bound
    for s in range(1, max_size):
        if s >= scale_class:
            regime = SUB
        elif compute_bound:
            # tasks that start compute-bound stay near-linear within their class;
            # memory-bound ones that turned compute-bound stop scaling well
            regime = NEAR if not memory_bound else SUB
        else:
            if s > 1 and rng.random() < transition_prob:
                compute_bound = True
                regime = SUB
            else:
                regime = SUPER
        r = _draw_r(rng, regime)
        t = (s + r) / (s + 1) * t
        times[s + 1] = t
    return times


def generate_synthetic(cfg: SyntheticConfig, model: GpuModel,
                       rng: np.random.Generator | None = None) -> list[Task]:
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    sizes = model.sizes
    counts = size_counts(cfg.n, cfg.p, sizes)
    classes: list[tuple[int, bool]] = []
    for s in sizes:
        n_s = counts[s]
        n_mem = math.ceil(cfg.p_sup / 100 * n_s) if s > 1 else 0
        classes += [(s, True)] * n_mem + [(s, False)] * (n_s - n_mem)
    order = rng.permutation(len(classes))
    tasks = []
    for i, k in enumerate(order):
        scale_class, memory_bound = classes[k]
        t1 = float(rng.uniform(cfg.t_min, cfg.t_max))
        curve = _curve(rng, t1, scale_class, memory_bound, model.max_size, cfg.transition_prob)
        tasks.append(Task(f"t{i}", {s: curve[s] for s in sizes}))
    return tasks


def quantize(tasks: Sequence[Task], step: float = 1 / 64) -> list[Task]:
    """Round times to a dyadic grid so float sums become exact.

    Rounding is monotone, so non-increasing curves stay non-increasing.
    """
    out = []
    for t in tasks:
        q = {s: max(step, round(v / step) * step) for s, v in t.times.items()}
        out.append(Task(t.id, q))
    return out
