import math

import pytest

from migsched import metrics as M


def test_formulas():
    assert M.rho(12.2, 10) == pytest.approx(1.22)
    assert M.sigma(21, 10) == pytest.approx(2.10)
    assert M.p_ref(11.4, 10) == pytest.approx(14.0)
    assert M.p_rev(105, 100) == pytest.approx(5.0)
    assert M.p_move_swap(115, 100) == pytest.approx(15.0)
    assert M.p_multibatch(190, 100) == pytest.approx(90.0)


@pytest.mark.parametrize("fn", [M.rho, M.sigma, M.p_ref, M.p_rev, M.p_move_swap, M.p_multibatch])
def test_zero_denominator(fn):
    with pytest.raises(ZeroDivisionError):
        fn(1.0, 0)


def test_aggregate():
    row = M.aggregate("rho", "MixedScaling/WideTimes", 15, [1.0, 1.2, 1.4])
    assert row.trials == 3 and row.mean == pytest.approx(1.2)
    assert row.stddev == pytest.approx(math.sqrt(((0.2) ** 2 * 2) / 3))
    with pytest.raises(ValueError):
        M.aggregate("rho", "x", 1, [])
    with pytest.raises(ValueError):
        M.MetricRow("rho", "x", 1, 0, 1.0, 0.0)
    with pytest.raises(ValueError):
        M.MetricRow("rho", "x", 1, 1, float("nan"), 0.0)
