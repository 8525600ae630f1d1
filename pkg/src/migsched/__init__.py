"""Moldable batch scheduling on reconfigurable GPU partitions."""

from .allocator import allocation_family
from .baselines import (brute_force_optimal, fixpart_best, fixpart_schedule, lower_bound,
                        lower_bound_multibatch, miso_schedule)
from .core import FarResult, far_schedule, schedule_allocation, schedule_from_node_lists
from .gpu import GpuModel, Instance, builtin_model, enumerate_partitions, get_model
from .multibatch import concat, reverse_schedule, run_stream, trivial_concat
from .refine import RefineOptions, refine
from .schedule import ReconfigEvent, Schedule, ScheduledTask, load_schedule, save_schedule
from .validate import ValidationReport, validate
from .workload import SyntheticConfig, Task, generate_synthetic, load_profile

__version__ = "0.1.0"

__all__ = [
    "FarResult", "GpuModel", "Instance", "ReconfigEvent", "RefineOptions", "Schedule",
    "ScheduledTask", "SyntheticConfig", "Task", "ValidationReport", "allocation_family",
    "brute_force_optimal", "builtin_model", "concat", "enumerate_partitions", "far_schedule",
    "fixpart_best", "fixpart_schedule", "generate_synthetic", "get_model", "load_profile",
    "load_schedule", "lower_bound", "lower_bound_multibatch", "miso_schedule", "refine",
    "reverse_schedule", "run_stream", "save_schedule", "schedule_allocation",
    "schedule_from_node_lists", "trivial_concat", "validate",
]
