import numpy as np
import pytest

from mtppquery import _accel
from mtppquery.sampling import RngStream


def test_python_and_compiled_streams_agree():
    if not _accel.JIT_ENABLED:
        pytest.skip("compiled backend disabled")
    for seed, index in [(0, 0), (12345, 7), (2**63 + 5, 10**9)]:
        key_py = _accel.stream_key_py(seed & _accel.MASK64, index)
        key_nb = _accel.stream_key(_accel.seed_arg(seed), index)
        assert int(key_nb) == key_py
        for c in range(5):
            assert _accel.uniform(np.uint64(key_py), c) == _accel.uniform_py(key_py, c)


def test_stream_reproducible_and_distinct():
    a = [RngStream(3, 1).uniform() for _ in range(1)]
    s1, s2 = RngStream(3, 1), RngStream(3, 1)
    assert [s1.uniform() for _ in range(10)] == [s2.uniform() for _ in range(10)]
    assert RngStream(3, 2).uniform() != a[0]
    assert RngStream(4, 1).uniform() != a[0]


def test_uniformity():
    s = RngStream(99)
    u = np.array([s.uniform() for _ in range(20000)])
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.01
    counts, _ = np.histogram(u, bins=10, range=(0, 1))
    assert counts.min() > 1800


def test_exponential_mean():
    s = RngStream(5)
    x = np.array([s.exponential() for _ in range(20000)])
    assert abs(x.mean() - 1.0) < 0.03
