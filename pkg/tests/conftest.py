import numpy as np
import pytest

from migsched.gpu import builtin_model
from migsched.workload import SyntheticConfig, Task, generate_synthetic


@pytest.fixture(scope="session")
def a30():
    return builtin_model("A30")


@pytest.fixture(scope="session")
def a100():
    return builtin_model("A100")


def task(tid, **times):
    """``task("x", s1=4, s2=2, s4=1)`` -> Task with {1: 4, 2: 2, 4: 1}."""
    return Task(tid, {int(k[1:]): v for k, v in times.items()})


def synthetic(model, n, seed, scaling="MixedScaling", times="WideTimes"):
    if model.name == "A30":
        shares = {"PoorScaling": {1: 50, 2: 50, 4: 0}, "MixedScaling": {1: 34, 2: 33, 4: 33},
                  "GoodScaling": {1: 0, 2: 50, 4: 50}}[scaling]
        lo, hi = (1.0, 100.0) if times == "WideTimes" else (90.0, 100.0)
        cfg = SyntheticConfig(n=n, p=shares, t_min=lo, t_max=hi)
    else:
        cfg = SyntheticConfig.named(scaling, times, n)
    return generate_synthetic(cfg, model, np.random.default_rng(seed))
