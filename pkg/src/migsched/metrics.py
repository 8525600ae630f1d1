"""Evaluation ratios and their aggregation into table rows."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

METRICS = ("rho", "sigma", "p_ref", "p_rev", "p_move_swap", "p_multibatch",
           "moves", "swaps")


@dataclass
class MetricRow:
    metric: str
    config: str
    n: int
    trials: int
    mean: float
    stddev: float

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not math.isfinite(self.mean):
            raise ValueError(f"non-finite mean for {self.metric}/{self.config}/n={self.n}")

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num, den, what: str) -> float:
    if den == 0:
        raise ZeroDivisionError(f"{what}: zero denominator (empty workload?)")
    return float(num) / float(den)


def rho(makespan, baseline) -> float:
    """Makespan over the area lower bound."""
    return _ratio(makespan, baseline, "rho")


def sigma(makespan_other, makespan_far) -> float:
    """Another scheduler's makespan relative to FAR's."""
    return _ratio(makespan_other, makespan_far, "sigma")


def percent_gain(reference, improved, what: str = "gain") -> float:
    """``(reference / improved - 1) * 100`` in percentage points."""
    return (_ratio(reference, improved, what) - 1.0) * 100.0


def p_ref(unrefined, refined) -> float:
    return percent_gain(unrefined, refined, "p_ref")


def p_rev(trivial, reversed_concat) -> float:
    return percent_gain(trivial, reversed_concat, "p_rev")


def p_move_swap(trivial, move_swap_concat) -> float:
    return percent_gain(trivial, move_swap_concat, "p_move_swap")


def p_multibatch(makespan, baseline) -> float:
    return percent_gain(makespan, baseline, "p_multibatch")


def aggregate(metric: str, config: str, n: int, values: Sequence[float]) -> MetricRow:
    """Mean and population standard deviation of per-trial values."""
    if len(values) == 0:
        raise ValueError(f"no values for {metric}/{config}/n={n}")
    arr = np.asarray(values, dtype=float)
    return MetricRow(metric, config, int(n), int(arr.size), float(arr.mean()), float(arr.std()))
