import math

import numpy as np
import pytest
from scipy import stats

from mtppquery.core import EventSequence, IntensityModel, RestrictionSchedule, validate_sequence
from mtppquery.hawkes import PoissonModel
from mtppquery.sampling import (BudgetExceeded, DominationViolation, MaskedModel, RngStream,
                                TrajectoryBudget, ZeroIntensityEvent, log_likelihood,
                                path_compensator, resolve_origin, sample_restricted,
                                sample_thinning, sample_until_nth_event)


def test_thinning_output_is_valid(hawkes4):
    for i in range(20):
        s = sample_thinning(hawkes4, 0.0, 5.0, rng=RngStream(1, i))
        validate_sequence(s, 4)
        assert s.window_end == 5.0
        assert len(s) == 0 or s.times[0] > 0.0


def test_thinning_deterministic(hawkes4):
    a = sample_thinning(hawkes4, 0.0, 5.0, rng=RngStream(8, 3))
    b = sample_thinning(hawkes4, 0.0, 5.0, rng=RngStream(8, 3))
    assert a == b


def test_poisson_counts():
    m = PoissonModel.from_rates([2.0])
    counts = [len(sample_thinning(m, 0.0, 3.0, rng=RngStream(0, i))) for i in range(3000)]
    assert abs(np.mean(counts) - 6.0) < 4 * math.sqrt(6.0 / 3000)


def test_conditioning_history_shifts_origin(hawkes4):
    h = EventSequence.from_events([(1.0, 0), (2.0, 1)])
    s = sample_thinning(hawkes4, None, 6.0, history=h, rng=RngStream(2))
    assert len(s) == 0 or s.times[0] > 2.0
    with pytest.raises(Exception):
        resolve_origin(h, 1.5)


def test_restricted_sampler_never_emits_masked(hawkes4):
    sched = RestrictionSchedule([1.0, 3.0], [[0, 1], [2]])
    for i in range(200):
        s = sample_restricted(hawkes4, sched, 0.0, 4.0, rng=RngStream(4, i))
        for t, k in s:
            assert not (t <= 1.0 and k in (0, 1))
            assert not (1.0 < t <= 3.0 and k == 2)


def test_until_nth_event(hawkes4):
    s = sample_until_nth_event(hawkes4, 0.0, 7, rng=RngStream(1))
    assert len(s) == 7
    s = sample_until_nth_event(hawkes4, 0.0, 5, rng=RngStream(1), masked=[0, 1])
    assert set(s.marks.tolist()) <= {2, 3}


def test_budget_exceeded_carries_partial(hawkes4):
    with pytest.raises(BudgetExceeded) as info:
        sample_thinning(hawkes4, 0.0, 100.0, rng=RngStream(1),
                        budget=TrajectoryBudget(max_events=5))
    assert len(info.value.partial) == 6
    with pytest.raises(BudgetExceeded):
        sample_thinning(hawkes4, 0.0, 100.0, rng=RngStream(1),
                        budget=TrajectoryBudget(max_events=math.inf, max_time=3.0))


def test_domination_violation():
    class Liar(IntensityModel):
        mark_count = 1

        def intensity(self, t, history):
            return np.array([5.0])

        def thinning_bound(self, t, history):
            return 1.0, math.inf

    with pytest.raises(DominationViolation):
        sample_thinning(Liar(), 0.0, 10.0, rng=RngStream(0))


def test_zero_rate_model_gives_empty():
    s = sample_thinning(PoissonModel.from_rates([0.0, 0.0]), 0.0, 10.0, rng=RngStream(0))
    assert len(s) == 0


def test_masked_model_compensator(hawkes4):
    sched = RestrictionSchedule([1.0], [[0]])
    mm = MaskedModel(hawkes4, sched)
    h = EventSequence.empty()
    whole = hawkes4.compensator(0.0, 2.0, h)
    masked_part = hawkes4.compensator(0.0, 1.0, h, [0])
    assert mm.compensator(0.0, 2.0, h) == pytest.approx(whole - masked_part, rel=1e-12)
    assert mm.intensity(0.5, h)[0] == 0.0 and mm.intensity(1.5, h)[0] > 0


def test_poisson_log_likelihood():
    m = PoissonModel.from_rates([1.0, 2.0])
    s = EventSequence.from_events([(0.5, 0), (1.0, 1), (2.0, 1)])
    assert log_likelihood(m, s, 0.0, 3.0) == pytest.approx(2 * math.log(2.0) - 9.0)
    with pytest.raises(ZeroIntensityEvent):
        log_likelihood(PoissonModel.from_rates([0.0, 1.0]), s, 0.0, 3.0)


def test_path_compensator_splits_at_events(hawkes2):
    s = EventSequence.from_events([(0.5, 0), (1.2, 1)])
    total = path_compensator(hawkes2, EventSequence.empty(), s, 0.0, 2.0)
    parts = (hawkes2.compensator(0.0, 0.5, EventSequence.empty())
             + hawkes2.compensator(0.5, 1.2, s.slice(0, 0.5))
             + hawkes2.compensator(1.2, 2.0, s))
    assert total == pytest.approx(parts, rel=1e-13)


def test_time_rescaling_small(hawkes2):
    s = sample_thinning(hawkes2, 0.0, 400.0, rng=RngStream(11))
    edges = [0.0] + s.times.tolist()
    gaps = [path_compensator(hawkes2, EventSequence.empty(), s, a, b)
            for a, b in zip(edges, edges[1:])]
    assert stats.kstest(gaps, "expon").pvalue > 0.01
