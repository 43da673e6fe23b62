import math

import numpy as np
import pytest

from mtppquery.core import (BadMark, EventSequence, HorizonViolation, InvalidInterval,
                            InvalidSchedule, MarkSet, OrderingViolation, RestrictionSchedule,
                            in_query_space, read_sequences, slice_sequence, validate_sequence,
                            write_sequences)


def seq(*events, T=math.inf):
    return EventSequence.from_events(events, T)


def test_arrays_are_read_only():
    s = seq((0.5, 0), (1.0, 1))
    with pytest.raises(ValueError):
        s.times[0] = 2.0


def test_validate_rejects_ties_and_disorder():
    with pytest.raises(OrderingViolation):
        validate_sequence(seq((1.0, 0), (1.0, 1)))
    with pytest.raises(OrderingViolation):
        validate_sequence(seq((2.0, 0), (1.0, 1)))


def test_validate_horizon_and_marks():
    with pytest.raises(HorizonViolation):
        validate_sequence(seq((3.0, 0), T=2.0))
    with pytest.raises(HorizonViolation):
        validate_sequence(seq((-1.0, 0)))
    with pytest.raises(BadMark):
        validate_sequence(seq((1.0, 3)), mark_count=3)
    validate_sequence(seq((1.0, 2), T=1.0), mark_count=3)


def test_slice_is_left_open_right_closed():
    s = seq((1.0, 0), (2.0, 1), (3.0, 0))
    assert slice_sequence(s, 1.0, 3.0).times.tolist() == [2.0, 3.0]
    assert s.slice(1.0, 3.0, closed_left=True, closed_right=False).times.tolist() == [1.0, 2.0]
    assert len(slice_sequence(s, 2.0, 2.0)) == 0
    with pytest.raises(InvalidInterval):
        slice_sequence(s, 3.0, 1.0)


def test_json_round_trip(tmp_path):
    seqs = [seq((0.1, 0), (0.7, 2), T=5.0), EventSequence.empty()]
    path = tmp_path / "s.jsonl"
    write_sequences(path, seqs)
    assert read_sequences(path) == seqs
    assert seqs[1].to_json() == {"events": [], "T": None}


def test_markset_ops():
    a = MarkSet([0, 2])
    assert 2 in a and 1 not in a
    assert a.mask(4).tolist() == [True, False, True, False]
    assert list(a.complement(4)) == [1, 3]
    assert list(a | [1]) == [0, 1, 2] and list(a & [2, 3]) == [2]
    with pytest.raises(BadMark):
        a.mask(2)


def test_schedule_validation():
    with pytest.raises(InvalidSchedule):
        RestrictionSchedule([1.0, 1.0], [[0], [1]])
    with pytest.raises(InvalidSchedule):
        RestrictionSchedule([1.0, math.inf], [[0], [1]])
    with pytest.raises(InvalidSchedule):
        RestrictionSchedule([1.0], [[0], [1]])
    s = RestrictionSchedule([1.0, 2.0], [[0], [1]])
    with pytest.raises(InvalidSchedule):
        s.check_origin(1.0)
    assert s.span_index(0.5) == 0 and s.span_index(1.0) == 0 and s.span_index(1.5) == 1
    assert s.span_index(2.5) is None
    assert [(lo, hi) for lo, hi, _ in s.spans(0.0)] == [(0.0, 1.0), (1.0, 2.0)]


def test_in_query_space():
    s = RestrictionSchedule([1.0, 2.0], [[0], [1]])
    assert in_query_space(seq((0.5, 1), (1.5, 0)), s, 0.0)
    assert not in_query_space(seq((1.0, 0)), s, 0.0)
    assert not in_query_space(seq((2.0, 1)), s, 0.0)
    assert in_query_space(seq((2.5, 1)), s, 0.0)
