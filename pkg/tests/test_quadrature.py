import math

import numpy as np
import pytest

from mtppquery.quadrature import (Grid, NonFiniteIntegrand, NonMonotonicTime, OnlineAccumulator,
                                  accumulate_exp_integral, trapezoid, trapezoid_values,
                                  union_grid)


def test_linear_is_exact():
    assert trapezoid(lambda x: 3 * x + 1, 0.0, 2.0, 5) == pytest.approx(8.0, abs=1e-14)


def test_second_order_convergence():
    errs = [abs(trapezoid(math.exp, 0.0, 1.0, n) - (math.e - 1)) for n in (11, 21, 41)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_vectorized_matches_scalar():
    a = trapezoid(np.sin, 0.0, 3.0, 101, vectorized=True)
    b = trapezoid(math.sin, 0.0, 3.0, 101)
    assert a == pytest.approx(b, abs=1e-15)


def test_degenerate_and_invalid():
    assert trapezoid(math.exp, 1.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        trapezoid(math.exp, 2.0, 1.0)
    with pytest.raises(NonFiniteIntegrand):
        trapezoid(lambda x: math.inf, 0.0, 1.0, 3)


def test_grids():
    g = Grid.uniform(0.0, 1.0, 11)
    assert g.count == 11 and g.points[-1] == 1.0
    pts = union_grid(0.0, 1.0, 3, extra=[0.25, 2.0])
    assert pts.tolist() == [0.0, 0.25, 0.5, 1.0]
    assert trapezoid_values([0, 1, 3], [1, 1, 1]) == 3.0


def test_online_accumulator():
    acc = OnlineAccumulator(0.0, 1.0)
    acc = accumulate_exp_integral(acc, 2.0, 3.0)
    assert acc.integral == 4.0 and acc.exp_factor == pytest.approx(math.exp(-4))
    acc = accumulate_exp_integral(acc, 2.5, 0.0, increment=0.25)
    assert acc.integral == 4.25
    with pytest.raises(NonMonotonicTime):
        accumulate_exp_integral(acc, 1.0, 0.0)
