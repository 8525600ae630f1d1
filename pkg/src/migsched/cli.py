"""Command-line interface: ``migsched <subcommand> ...``.

Tabular output is tab-delimited on stdout; schedules and plans are JSON files.
The default GPU model comes from ``--model``, else ``$MIGSCHED_MODEL``, else
the profile's own ``model`` field, else A100.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .baselines import (InstanceTooLarge, brute_force_optimal, fixpart_best, fixpart_schedule,
                        lower_bound, miso_schedule)
from .core import allocation_lower_bound, far_schedule
from .gpu import GpuModel, UnsupportedModel, get_model, parse_partition, partition_label
from .multibatch import ConcatOptions, concat, reverse_schedule, run_stream
from .refine import RefineOptions, refine
from .schedule import Schedule, load_schedule, save_schedule
from .validate import validate
from .workload import (ProfileError, SyntheticConfig, generate_synthetic, profile_to_dict,
                       tasks_from_json)

ENV_MODEL = "MIGSCHED_MODEL"


def _resolve_model(arg: str | None, data: dict | None = None) -> GpuModel:
    name = arg or os.environ.get(ENV_MODEL)
    if not name and isinstance(data, dict):
        name = data.get("model")
    return get_model(name or "A100")


def _read_json(path: str):
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _load_tasks(path: str, model_arg: str | None):
    data = _read_json(path)
    model = _resolve_model(model_arg, data)
    return tasks_from_json(data, model), model


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _emit_schedule(s: Schedule, out: str | None) -> None:
    if out in (None, "-"):
        print(s.to_json(indent=2))
    else:
        save_schedule(out, s)


def _row(*fields) -> None:
    print("\t".join(str(f) for f in fields))


def _fmt(x) -> str:
    return f"{float(x):.6g}"


# -- subcommands -----------------------------------------------------------------

def cmd_schedule(args) -> int:
    tasks, model = _load_tasks(args.profile, args.model)
    opts = RefineOptions(max_iterations=args.max_iterations)
    res = far_schedule(tasks, model, refine=not args.no_refine,
                       zero_reconfig=args.zero_reconfig, refine_opts=opts)
    _emit_schedule(res.schedule, args.out)
    if args.out not in (None, "-"):
        lb = lower_bound(tasks, model)
        _row("makespan", "unrefined", "lower_bound", "rho", "allocation")
        _row(_fmt(res.makespan), _fmt(res.unrefined.makespan), _fmt(lb),
             _fmt(res.makespan / lb), res.chosen)
    return 0


def cmd_family(args) -> int:
    tasks, model = _load_tasks(args.profile, args.model)
    res = far_schedule(tasks, model, refine=False, zero_reconfig=args.zero_reconfig)
    _row("index", "makespan", "lower_bound", "chosen", "sizes")
    for k, (alloc, ms) in enumerate(zip(res.family, res.makespans)):
        _row(k, _fmt(ms), _fmt(allocation_lower_bound(tasks, alloc, model.num_slices)),
             "*" if k == res.chosen else "", ",".join(map(str, alloc)))
    return 0


def cmd_refine(args) -> int:
    s = load_schedule(args.schedule, _resolve_model(args.model) if args.model else None)
    out, report = refine(s, RefineOptions(args.max_iterations, args.min_improvement))
    _emit_schedule(out, args.out)
    if args.out not in (None, "-"):
        _row("before", "after", "moves", "swaps", "iterations")
        _row(_fmt(report.makespan_before), _fmt(report.makespan_after), report.moves,
             report.swaps, report.iterations)
    return 0


def cmd_concat(args) -> int:
    prev = load_schedule(args.prev)
    nxt = load_schedule(args.next)
    if args.reverse_next:
        nxt = reverse_schedule(nxt)
    offset, combined, report = concat(prev, nxt, ConcatOptions(move_swap=not args.no_move_swap))
    _emit_schedule(combined, args.out)
    if args.out not in (None, "-"):
        _row("offset", "trivial_offset", "makespan", "trivial_makespan", "moves", "swaps")
        _row(_fmt(offset), _fmt(report.trivial_offset), _fmt(report.makespan),
             _fmt(report.trivial_makespan), report.moves, report.swaps)
    return 0


def _batch_paths(spec: str) -> list[str]:
    p = Path(spec)
    if p.is_dir():
        paths = sorted(str(x) for x in p.glob("*.json"))
        if not paths:
            raise FileNotFoundError(f"no *.json profiles in {spec}")
        return paths
    return [x for x in spec.split(",") if x]


def cmd_stream(args) -> int:
    model = _resolve_model(args.model)
    batches = [tasks_from_json(_read_json(path), model) for path in _batch_paths(args.batches)]
    plan, result = run_stream(batches, model, refine=not args.no_refine,
                              zero_reconfig=args.zero_reconfig,
                              opts=ConcatOptions(move_swap=not args.no_move_swap),
                              alternate=not args.no_reverse)
    doc = plan.to_dict()
    doc["total_makespan"] = float(result.total_makespan)
    doc["lower_bound"] = float(result.lower_bound)
    doc["p_multibatch"] = float(result.p_multibatch)
    doc["seams"] = [r.to_dict() for r in result.seams]
    _write(json.dumps(doc, indent=2) + "\n", args.out)
    if args.out not in (None, "-"):
        _row("batch", "offset", "reversed", "moves", "swaps", "overlap_gain")
        for k, (o, rev) in enumerate(zip(plan.offsets, plan.reversed)):
            seam = result.seams[k - 1] if k else None
            _row(k, _fmt(o), int(rev), seam.moves if seam else 0, seam.swaps if seam else 0,
                 _fmt(seam.overlap_gain) if seam else 0)
        _row("total", _fmt(result.total_makespan), "", "", "", "")
        _row("p_multibatch", _fmt(result.p_multibatch), "", "", "", "")
    return 0


def cmd_compare(args) -> int:
    tasks, model = _load_tasks(args.profile, args.model)
    far = far_schedule(tasks, model, zero_reconfig=args.zero_reconfig).makespan
    lb = lower_bound(tasks, model)
    rows = [("FAR", far), ("MISO", miso_schedule(tasks, model, args.zero_reconfig).makespan)]
    best_part, best = fixpart_best(tasks, model)
    rows.append((f"FixPartBest({partition_label(best_part)})", best.makespan))
    for text in args.partition or [",".join(["1"] * model.num_slices), str(model.num_slices)]:
        part = parse_partition(model, text)
        rows.append((f"FixPart({partition_label(part)})", fixpart_schedule(tasks, model, part).makespan))
    _row("scheduler", "makespan", "sigma", "rho")
    for name, ms in rows:
        _row(name, _fmt(ms), _fmt(ms / far), _fmt(ms / lb))
    _row("lower_bound", _fmt(lb), "", "")
    return 0


def cmd_oracle(args) -> int:
    tasks, model = _load_tasks(args.profile, args.model)
    try:
        opt, sched = brute_force_optimal(tasks, model, zero_reconfig=not args.with_reconfig,
                                         max_n=args.max_n)
    except InstanceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    far = far_schedule(tasks, model, zero_reconfig=not args.with_reconfig).makespan
    if args.out:
        save_schedule(args.out, sched)
    _row("oracle", "far", "ratio")
    _row(_fmt(opt), _fmt(far), _fmt(far / opt))
    return 0


def cmd_gen(args) -> int:
    model = _resolve_model(args.model)
    shares = [float(x) for x in args.p.split(",")]
    if len(shares) != len(model.sizes):
        raise ValueError(f"--p needs {len(model.sizes)} shares for {model.name} sizes {model.sizes}")
    cfg = SyntheticConfig(n=args.n, p=dict(zip(model.sizes, shares)), p_sup=args.psup,
                          t_min=args.tmin, t_max=args.tmax, seed=args.seed)
    tasks = generate_synthetic(cfg, model, np.random.default_rng(args.seed))
    _write(json.dumps(profile_to_dict(tasks, model), indent=2) + "\n", args.out)
    return 0


def cmd_validate(args) -> int:
    report = validate(load_schedule(args.schedule))
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        _row("constraint", "time", "detail")
        for v in report.violations:
            _row(v.constraint, _fmt(v.time), v.detail)
        print("ok" if report.ok else f"{len(report.violations)} violation(s)")
    return 0 if report.ok else 1


def cmd_gantt(args) -> int:
    from .gantt import render_gantt

    data = render_gantt(load_schedule(args.schedule), args.format, args.px_per_second)
    if args.out in (None, "-"):
        sys.stdout.write(data.decode())
    else:
        Path(args.out).write_bytes(data)
    return 0


def cmd_experiment(args) -> int:
    from .experiments import grid_spec, plot_rows, rows_to_csv, rows_to_json, run_experiment

    custom = {}
    if args.kind:
        custom["kind"] = args.kind
    spec = grid_spec(args.grid, trials=args.trials, seed=args.seed,
                     model=args.model or os.environ.get(ENV_MODEL) or "A100",
                     ns=[int(x) for x in args.n.split(",")] if args.n else None,
                     configs=args.configs.split(",") if args.configs else None,
                     p_sup=args.psup, **custom)
    rows = run_experiment(spec)
    text = rows_to_csv(rows)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        out.with_suffix(".json").write_text(rows_to_json(rows, spec) + "\n")
        if not args.no_figure:
            plot_rows(rows, str(out.with_suffix(".png")))
    return 0


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="migsched",
                                description="Moldable batch scheduling on reconfigurable GPU partitions.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=func)
        return sp

    def model_opt(sp):
        sp.add_argument("--model", help=f"A30, A100, H100 or a model JSON file (default ${ENV_MODEL})")

    sp = add("schedule", cmd_schedule, "Schedule a task profile with FAR")
    sp.add_argument("--profile", required=True)
    model_opt(sp)
    sp.add_argument("--no-refine", action="store_true")
    sp.add_argument("--zero-reconfig", action="store_true")
    sp.add_argument("--max-iterations", type=int, default=RefineOptions().max_iterations)
    sp.add_argument("--out")

    sp = add("family", cmd_family, "List the candidate allocations and their makespans")
    sp.add_argument("--profile", required=True)
    model_opt(sp)
    sp.add_argument("--zero-reconfig", action="store_true")

    sp = add("refine", cmd_refine, "Apply move/swap refinement to a schedule file")
    sp.add_argument("--schedule", required=True)
    model_opt(sp)
    sp.add_argument("--max-iterations", type=int, default=RefineOptions().max_iterations)
    sp.add_argument("--min-improvement", type=float, default=RefineOptions().min_improvement)
    sp.add_argument("--out")

    sp = add("concat", cmd_concat, "Concatenate two schedules with overlap")
    sp.add_argument("--prev", required=True)
    sp.add_argument("--next", required=True)
    sp.add_argument("--reverse-next", action="store_true", help="mirror the next schedule first")
    sp.add_argument("--no-move-swap", action="store_true")
    sp.add_argument("--out")

    sp = add("stream", cmd_stream, "Schedule a sequence of batches and concatenate them")
    sp.add_argument("--batches", required=True, help="directory of profile JSONs or comma-separated paths")
    model_opt(sp)
    sp.add_argument("--no-refine", action="store_true")
    sp.add_argument("--zero-reconfig", action="store_true")
    sp.add_argument("--no-move-swap", action="store_true")
    sp.add_argument("--no-reverse", action="store_true", help="keep every batch forward")
    sp.add_argument("--out")

    sp = add("compare", cmd_compare, "Compare FAR with MISO and fixed partitions")
    sp.add_argument("--profile", required=True)
    model_opt(sp)
    sp.add_argument("--zero-reconfig", action="store_true")
    sp.add_argument("--partition", action="append",
                    help="extra fixed partition as sizes, e.g. 4,2,1 (repeatable)")

    sp = add("oracle", cmd_oracle, "Exact optimum for small instances")
    sp.add_argument("--profile", required=True)
    model_opt(sp)
    sp.add_argument("--with-reconfig", action="store_true",
                    help="re-time the optimum assignment with reconfiguration costs")
    sp.add_argument("--max-n", type=int, default=6)
    sp.add_argument("--out")

    sp = add("gen", cmd_gen, "Generate a synthetic task profile")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", default="20,20,20,20,20", help="scaling-class shares per size, in percent")
    sp.add_argument("--psup", type=float, default=50.0)
    sp.add_argument("--tmin", type=float, default=1.0)
    sp.add_argument("--tmax", type=float, default=100.0)
    sp.add_argument("--seed", type=int, required=True)
    model_opt(sp)
    sp.add_argument("--out")

    sp = add("validate", cmd_validate, "Check a schedule file: slice exclusivity, valid partitions, reconfiguration")
    sp.add_argument("--schedule", required=True)
    sp.add_argument("--json", action="store_true")

    sp = add("gantt", cmd_gantt, "Render a schedule as SVG or text")
    sp.add_argument("--schedule", required=True)
    sp.add_argument("--format", choices=("svg", "text"), default="svg")
    sp.add_argument("--px-per-second", type=float, default=10.0)
    sp.add_argument("--out")

    sp = add("experiment", cmd_experiment, "Run an experiment grid; writes CSV, JSON and a PNG figure")
    sp.add_argument("--grid", required=True, help="table4..table9 or custom")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    model_opt(sp)
    sp.add_argument("--n", help="comma-separated batch sizes (overrides the grid)")
    sp.add_argument("--configs", help="comma-separated Scaling/Times configs")
    sp.add_argument("--kind", help="custom grids: rho, sigma, refine, concat or multibatch")
    sp.add_argument("--psup", type=float, default=50.0)
    sp.add_argument("--no-figure", action="store_true")
    sp.add_argument("--out", help="CSV path; .json and .png are written next to it")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, UnsupportedModel, ProfileError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
