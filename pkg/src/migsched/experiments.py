"""Experiment grids over synthetic workloads, CSV/JSON output and summary plots."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import metrics as M
from .baselines import fixpart_best, fixpart_schedule, lower_bound, miso_schedule
from .core import far_schedule
from .gpu import GpuModel, get_model, parse_partition
from .multibatch import ConcatOptions, concat, reverse_schedule, run_stream, trivial_concat
from .workload import SCALING_CONFIGS, TIME_CONFIGS, SyntheticConfig, Task, generate_synthetic

CSV_COLUMNS = ("metric", "config", "n", "trials", "mean", "stddev")
SCALINGS = tuple(SCALING_CONFIGS)
TIMES = tuple(TIME_CONFIGS)
ALL_CONFIGS = tuple(f"{s}/{t}" for s in SCALINGS for t in TIMES)


class UnknownGrid(ValueError):
    pass


@dataclass
class ExperimentSpec:
    grid: str = "custom"
    model: str = "A100"
    configs: Sequence[str] = ("MixedScaling/WideTimes",)
    ns: Sequence[int] = (15,)
    trials: int = 100
    seed: int = 0
    kind: str = "rho"  # rho | sigma | refine | concat | multibatch
    metrics: Sequence[str] | None = None  # subset of the kind's metrics to keep
    p_sup: float = 50.0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {sorted(KINDS)}")
        for c in self.configs:
            _parse_config(c)


def _parse_config(text: str) -> tuple[str, str]:
    try:
        scaling, times = text.split("/")
    except ValueError:
        raise ValueError(f"config must look like 'MixedScaling/WideTimes', got {text!r}") from None
    if scaling not in SCALING_CONFIGS or times not in TIME_CONFIGS:
        raise ValueError(f"unknown config {text!r}; scalings {list(SCALINGS)}, times {list(TIMES)}")
    return scaling, times


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream per (seed, trial): results never depend on execution order."""
    return np.random.default_rng(np.random.SeedSequence([seed, trial]))


def _workload(spec: ExperimentSpec, config: str, n: int, trial: int, model: GpuModel) -> list[Task]:
    scaling, times = _parse_config(config)
    cfg = SyntheticConfig.named(scaling, times, n, p_sup=spec.p_sup)
    return generate_synthetic(cfg, model, trial_rng(spec.seed, trial))


# -- per-kind trial runners ---------------------------------------------------
# each returns {metric name: list of per-trial values}

def _run_rho(spec, config, n, model):
    out = {"rho": []}
    for k in range(spec.trials):
        tasks = _workload(spec, config, n, k, model)
        out["rho"].append(M.rho(far_schedule(tasks, model).makespan, lower_bound(tasks, model)))
    return out


def _run_sigma(spec, config, n, model):
    ones = parse_partition(model, ",".join(["1"] * model.num_slices))
    whole = parse_partition(model, str(model.num_slices))
    label_ones = f"sigma_FixPart({'1x' + str(model.num_slices)})"
    label_whole = f"sigma_FixPart({model.num_slices})"
    out = {"sigma_MISO": [], label_ones: [], "sigma_FixPartBest": [], label_whole: []}
    for k in range(spec.trials):
        tasks = _workload(spec, config, n, k, model)
        far = far_schedule(tasks, model).makespan
        out["sigma_MISO"].append(M.sigma(miso_schedule(tasks, model).makespan, far))
        out[label_ones].append(M.sigma(fixpart_schedule(tasks, model, ones).makespan, far))
        out["sigma_FixPartBest"].append(M.sigma(fixpart_best(tasks, model)[1].makespan, far))
        out[label_whole].append(M.sigma(fixpart_schedule(tasks, model, whole).makespan, far))
    return out


def _run_refine(spec, config, n, model):
    out = {"p_ref": [], "moves": [], "swaps": []}
    for k in range(spec.trials):
        res = far_schedule(_workload(spec, config, n, k, model), model)
        rep = res.refine_report
        out["p_ref"].append(M.p_ref(res.unrefined.makespan, res.schedule.makespan))
        out["moves"].append(rep.moves)
        out["swaps"].append(rep.swaps)
    return out


def seam_gains(first, second, k: int) -> dict:
    """Gains of one seam between FAR schedules ``first`` and ``second``.

    Even seams mirror the second batch, odd seams the first, as in a stream
    that alternates orientation.  Gains compare the time each method adds on
    top of the first batch with the time trivial concatenation adds.
    """
    prev, nxt = (first, reverse_schedule(second)) if k % 2 == 0 else (reverse_schedule(first), second)
    _, trivial = trivial_concat(first, second)
    _, same_pair = trivial_concat(prev, nxt)
    _, rev, _ = concat(prev, nxt, ConcatOptions(move_swap=False))
    _, full, report = concat(prev, nxt)
    added_trivial = trivial.makespan - first.makespan
    return {
        "p_rev": M.p_rev(added_trivial, rev.makespan - prev.makespan),
        "p_move_swap": M.p_move_swap(added_trivial, full.makespan - prev.makespan),
        "moves": report.moves,
        "swaps": report.swaps,
        # overlap must never lose to plain back-to-back placement of the same pair
        "violation": rev.makespan > same_pair.makespan + 1e-9 * max(1.0, same_pair.makespan),
    }


def _run_concat(spec, config, n, model):
    out = {"p_rev": [], "p_move_swap": [], "moves": [], "swaps": []}
    batches = [far_schedule(_workload(spec, config, n, k, model), model).schedule
               for k in range(spec.trials + 1)]
    for k in range(spec.trials):
        g = seam_gains(batches[k], batches[k + 1], k)
        for key in out:
            out[key].append(g[key])
    return out


def _run_multibatch(spec, config, n, model):
    # one stream of `trials` batches yields a single value
    batches = [_workload(spec, config, n, k, model) for k in range(spec.trials)]
    _, result = run_stream(batches, model)
    return {"p_multibatch": [M.p_multibatch(result.total_makespan, result.lower_bound)]}


KINDS: dict[str, Callable] = {
    "rho": _run_rho,
    "sigma": _run_sigma,
    "refine": _run_refine,
    "concat": _run_concat,
    "multibatch": _run_multibatch,
}

_WIDE = tuple(f"{s}/WideTimes" for s in SCALINGS)
GRIDS = {
    "table4": dict(kind="rho", configs=_WIDE, ns=(10, 15, 20, 25, 30, 35)),
    "table5": dict(kind="sigma", configs=ALL_CONFIGS, ns=(15,)),
    "table6": dict(kind="refine", configs=ALL_CONFIGS, ns=(10, 20, 30)),
    "table7": dict(kind="concat", configs=ALL_CONFIGS, ns=(10, 20, 30),
                   metrics=("p_rev", "p_move_swap")),
    "table8": dict(kind="concat", configs=ALL_CONFIGS, ns=(10, 20, 30),
                   metrics=("moves", "swaps")),
    "table9": dict(kind="multibatch", configs=_WIDE, ns=(10, 15, 20, 25, 30, 35)),
}


def grid_spec(grid: str, trials: int = 1000, seed: int = 0, model: str = "A100",
              ns: Sequence[int] | None = None, configs: Sequence[str] | None = None,
              **custom) -> ExperimentSpec:
    """Built-in grid by name (optionally narrowed), or ``custom`` from keyword args."""
    if grid == "custom":
        return ExperimentSpec(grid="custom", model=model, trials=trials, seed=seed,
                              ns=tuple(ns or (15,)),
                              configs=tuple(configs or ("MixedScaling/WideTimes",)), **custom)
    if grid not in GRIDS:
        raise UnknownGrid(f"unknown grid {grid!r}; choose from {sorted(GRIDS)} or 'custom'")
    base = dict(GRIDS[grid])
    if ns:
        base["ns"] = tuple(ns)
    if configs:
        base["configs"] = tuple(configs)
    base.update(custom)
    return ExperimentSpec(grid=grid, model=model, trials=trials, seed=seed, **base)


def run_experiment(spec: ExperimentSpec) -> list[M.MetricRow]:
    model = get_model(spec.model)
    runner = KINDS[spec.kind]
    rows = []
    for config in spec.configs:
        for n in spec.ns:
            values = runner(spec, config, n, model)
            for metric, vals in values.items():
                if spec.metrics is None or metric in spec.metrics:
                    rows.append(M.aggregate(metric, config, n, vals))
    return rows


# -- output ---------------------------------------------------------------------

def rows_to_csv(rows: Sequence[M.MetricRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.metric, r.config, r.n, r.trials, repr(r.mean), repr(r.stddev)])
    return buf.getvalue()


def rows_to_json(rows: Sequence[M.MetricRow], spec: ExperimentSpec | None = None) -> str:
    doc = {"rows": [r.to_dict() for r in rows]}
    if spec is not None:
        doc["spec"] = {"grid": spec.grid, "model": spec.model, "kind": spec.kind,
                       "configs": list(spec.configs), "ns": list(spec.ns),
                       "trials": spec.trials, "seed": spec.seed, "p_sup": spec.p_sup}
    return json.dumps(doc, indent=2)


def plot_rows(rows: Sequence[M.MetricRow], path: str) -> None:
    """One panel per metric: mean vs n per config, with ±1 stddev bars."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = list(dict.fromkeys(r.metric for r in rows))
    fig, axes = plt.subplots(len(names), 1, figsize=(7, 2.8 * max(1, len(names))), squeeze=False)
    for ax, metric in zip(axes[:, 0], names):
        sel = [r for r in rows if r.metric == metric]
        for config in dict.fromkeys(r.config for r in sel):
            pts = sorted((r.n, r.mean, r.stddev) for r in sel if r.config == config)
            xs, ys, es = zip(*pts)
            if len(xs) > 1:
                ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=config)
            else:
                ax.bar(config, ys[0], yerr=es[0], capsize=3)
        ax.set_ylabel(metric)
        if any(len({r.n for r in sel if r.config == c}) > 1 for c in {r.config for r in sel}):
            ax.set_xlabel("tasks per batch (n)")
            ax.legend(fontsize="small")
        else:
            ax.tick_params(axis="x", labelrotation=20, labelsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
