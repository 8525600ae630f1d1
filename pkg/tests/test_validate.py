import pytest

from migsched.baselines import brute_force_optimal, fixpart_schedule, miso_schedule
from migsched.core import far_schedule
from migsched.gpu import Instance, builtin_model, enumerate_partitions
from migsched.multibatch import concat, reverse_schedule, run_stream
from migsched.schedule import CREATE, DESTROY, ReconfigEvent, Schedule, ScheduledTask
from migsched.validate import validate

from conftest import synthetic

I = Instance


def st_(tid, inst, start, dur, used=None):
    return ScheduledTask(tid, inst, used or inst.size, start, dur)


def constraints(s):
    return {v.constraint for v in validate(s).violations}


def test_slice_overlap(a30):
    s = Schedule(a30, [st_("a", I(0, 1), 0, 2), st_("b", I(0, 1), 1, 2)], [], zero_reconfig=True,
                 initial_instances=(I(0, 1), I(1, 1), I(2, 2)))
    assert 1 in constraints(s)


def test_middle_pair_is_not_an_instance(a30):
    s = Schedule(a30, [st_("a", I(0, 2), 0, 2), st_("b", I(1, 2), 0, 2)], [], zero_reconfig=True)
    assert 2 in constraints(s)


def test_missing_creation(a30):
    s = Schedule(a30, [st_("a", I(0, 4), 0, 1)], [])
    assert constraints(s) == {3}


def test_wrong_cost_and_overlapping_events(a30):
    ev = [ReconfigEvent(CREATE, I(0, 2), 0, 0.5), ReconfigEvent(CREATE, I(2, 2), 0.1, 0.12)]
    s = Schedule(a30, [st_("a", I(0, 2), 0.5, 1), st_("b", I(2, 2), 0.22, 1)], ev)
    details = [v.detail for v in validate(s).violations]
    assert any("expected" in d for d in details)
    assert any("overlaps" in d for d in details)


def test_task_before_creation_finishes(a30):
    ev = [ReconfigEvent(CREATE, I(0, 4), 0, a30.t_create[4])]
    s = Schedule(a30, [st_("a", I(0, 4), 0, 1)], ev)
    assert 3 in constraints(s)


def test_instance_created_over_live_one(a30):
    ev = [ReconfigEvent(CREATE, I(0, 4), 0, a30.t_create[4]),
          ReconfigEvent(CREATE, I(0, 2), 2, a30.t_create[2])]
    s = Schedule(a30, [st_("a", I(0, 4), 0.13, 1), st_("b", I(0, 2), 2.12, 1)], ev)
    assert 3 in constraints(s)


def test_destroy_then_create_ok(a30):
    ev = [ReconfigEvent(CREATE, I(0, 4), 0, 0.13), ReconfigEvent(DESTROY, I(0, 4), 1.13, 0.10),
          ReconfigEvent(CREATE, I(0, 2), 1.23, 0.12)]
    s = Schedule(a30, [st_("a", I(0, 4), 0.13, 1), st_("b", I(0, 2), 1.35, 1)], ev)
    assert validate(s).ok


def test_report_dict(a30):
    s = Schedule(a30, [st_("a", I(0, 1), 0, 2), st_("b", I(0, 1), 1, 2)], [], zero_reconfig=True)
    d = validate(s).to_dict()
    assert d["ok"] is False and {"constraint", "time", "detail"} <= set(d["violations"][0])


@pytest.mark.parametrize("name", ["A30", "A100"])
def test_all_producers_validate(name):
    model = builtin_model(name)
    for seed in range(15):
        tasks = synthetic(model, 4 + seed % 12, seed)
        far = far_schedule(tasks, model).schedule
        produced = [far, far_schedule(tasks, model, zero_reconfig=True).schedule,
                    miso_schedule(tasks, model), reverse_schedule(far)]
        produced += [fixpart_schedule(tasks, model, p) for p in enumerate_partitions(model)]
        if len(tasks) <= 5:
            produced.append(brute_force_optimal(tasks, model)[1])
        produced.append(concat(far, reverse_schedule(far_schedule(synthetic(model, 6, seed + 99), model).schedule))[1])
        for s in produced:
            assert validate(s).ok, validate(s).violations
    plan, _ = run_stream([synthetic(model, 8, k) for k in range(6)], model)
    assert validate(plan.combined).ok
