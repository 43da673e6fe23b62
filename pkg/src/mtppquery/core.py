"""Event sequences, mark sets, restriction schedules and the intensity-model contract."""
from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class OrderingViolation(ValueError):
    pass


class HorizonViolation(ValueError):
    pass


class BadMark(ValueError):
    pass


class InvalidInterval(ValueError):
    pass


class InvalidSchedule(ValueError):
    pass


class MarkedEvent(NamedTuple):
    time: float
    mark: int


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype).reshape(-1)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class EventSequence:
    """Time-ordered marked events observed up to ``window_end``.

    Times and marks are stored as read-only numpy arrays.  Construction does
    not validate; call :func:`validate_sequence` on untrusted input.
    """

    times: np.ndarray
    marks: np.ndarray
    window_end: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times, np.float64))
        object.__setattr__(self, "marks", _frozen(self.marks, np.int64))
        object.__setattr__(self, "window_end", float(self.window_end))
        if self.times.shape != self.marks.shape:
            raise ValueError("times and marks must have the same length")

    @classmethod
    def empty(cls, window_end: float = math.inf) -> "EventSequence":
        return cls(np.empty(0), np.empty(0, dtype=np.int64), window_end)

    @classmethod
    def from_events(cls, events: Iterable, window_end: float = math.inf) -> "EventSequence":
        pairs = [(float(t), int(k)) for t, k in events]
        if not pairs:
            return cls.empty(window_end)
        times, marks = zip(*pairs)
        return cls(np.array(times), np.array(marks), window_end)

    def __len__(self):
        return self.times.shape[0]

    def __iter__(self):
        for t, k in zip(self.times.tolist(), self.marks.tolist()):
            yield MarkedEvent(t, k)

    def __eq__(self, other):
        if not isinstance(other, EventSequence):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.marks, other.marks)
            and self.window_end == other.window_end
        )

    @property
    def events(self) -> list[MarkedEvent]:
        return list(self)

    @property
    def last_time(self) -> float | None:
        return float(self.times[-1]) if len(self) else None

    def slice(self, a, b, closed_left=False, closed_right=True) -> "EventSequence":
        return slice_sequence(self, a, b, closed_left, closed_right)

    def to_json(self) -> dict:
        window = self.window_end if math.isfinite(self.window_end) else None
        return {
            "events": [{"t": t, "k": k} for t, k in self],
            "T": window,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EventSequence":
        events = [(e["t"], e["k"]) for e in obj.get("events", [])]
        window = obj.get("T")
        return cls.from_events(events, math.inf if window is None else window)


def validate_sequence(seq: EventSequence, mark_count: int | None = None) -> None:
    times = seq.times
    if times.size and (not np.all(np.isfinite(times)) or times.min() < 0):
        raise HorizonViolation("event times must be finite and non-negative")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise OrderingViolation("event times must be strictly increasing")
    if times.size and times[-1] > seq.window_end:
        raise HorizonViolation(
            f"event at t={times[-1]:g} lies beyond window_end={seq.window_end:g}"
        )
    if seq.marks.size and seq.marks.min() < 0:
        raise BadMark("marks must be non-negative")
    if mark_count is not None and seq.marks.size and seq.marks.max() >= mark_count:
        raise BadMark(f"mark {seq.marks.max()} outside [0, {mark_count})")


def slice_sequence(seq: EventSequence, a: float, b: float,
                   closed_left: bool = False, closed_right: bool = True) -> EventSequence:
    if a > b:
        raise InvalidInterval(f"empty interval: a={a} > b={b}")
    t = seq.times
    lo = t >= a if closed_left else t > a
    hi = t <= b if closed_right else t < b
    keep = lo & hi
    return EventSequence(t[keep], seq.marks[keep], seq.window_end)


@dataclass(frozen=True)
class MarkSet:
    members: frozenset

    def __init__(self, members: Iterable[int] = ()):
        object.__setattr__(self, "members", frozenset(int(m) for m in members))

    def __contains__(self, mark):
        return int(mark) in self.members

    def __iter__(self):
        return iter(sorted(self.members))

    def __len__(self):
        return len(self.members)

    def validate(self, mark_count: int) -> None:
        bad = [m for m in self.members if not 0 <= m < mark_count]
        if bad:
            raise BadMark(f"marks {sorted(bad)} outside [0, {mark_count})")

    def mask(self, mark_count: int) -> np.ndarray:
        self.validate(mark_count)
        out = np.zeros(mark_count, dtype=np.bool_)
        out[list(self.members)] = True
        return out

    def complement(self, mark_count: int) -> "MarkSet":
        return MarkSet(set(range(mark_count)) - self.members)

    def __or__(self, other):
        return MarkSet(self.members | as_markset(other).members)

    def __and__(self, other):
        return MarkSet(self.members & as_markset(other).members)


def as_markset(marks) -> MarkSet:
    if isinstance(marks, MarkSet):
        return marks
    if isinstance(marks, (int, np.integer)):
        return MarkSet([marks])
    return MarkSet(marks)


@dataclass(frozen=True)
class RestrictionSchedule:
    """Boundaries ``a_1 < ... < a_n`` with a restricted mark set per span.

    Span ``i`` covers ``(a_{i-1}, a_i]`` with ``a_0`` the query origin.
    """

    boundaries: tuple
    restricted: tuple

    def __init__(self, boundaries: Sequence[float], restricted: Sequence):
        b = tuple(float(x) for x in boundaries)
        r = tuple(as_markset(m) for m in restricted)
        if len(b) != len(r):
            raise InvalidSchedule("boundaries and restricted sets differ in length")
        if not b:
            raise InvalidSchedule("schedule needs at least one span")
        if any(not math.isfinite(x) for x in b):
            raise InvalidSchedule("boundaries must be finite")
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise InvalidSchedule("boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "restricted", r)

    @classmethod
    def single(cls, end: float, marks) -> "RestrictionSchedule":
        return cls([end], [marks])

    @property
    def end(self) -> float:
        return self.boundaries[-1]

    def __len__(self):
        return len(self.boundaries)

    def check_origin(self, origin: float) -> None:
        if not self.boundaries[0] > origin:
            raise InvalidSchedule(
                f"first boundary {self.boundaries[0]} must exceed origin {origin}"
            )

    def span_index(self, t: float) -> int | None:
        """Index of the span containing ``t``, or None past the last boundary."""
        for i, b in enumerate(self.boundaries):
            if t <= b:
                return i
        return None

    def masks(self, mark_count: int) -> np.ndarray:
        return np.stack([m.mask(mark_count) for m in self.restricted])

    def spans(self, origin: float):
        lo = origin
        for b, m in zip(self.boundaries, self.restricted):
            yield lo, b, m
            lo = b


def in_query_space(seq: EventSequence, schedule: RestrictionSchedule, origin: float) -> bool:
    schedule.check_origin(origin)
    for lo, hi, marks in schedule.spans(origin):
        if not marks.members:
            continue
        window = slice_sequence(seq, lo, hi)
        if any(int(k) in marks.members for k in window.marks):
            return False
    return True


class IntensityModel(ABC):
    """Contract every model handed to the samplers and estimators satisfies.

    Implementations are pure functions of ``(t, history)``.  ``history`` holds
    every event strictly before the evaluation point (events at exactly ``t``
    do not excite ``t`` itself).
    """

    mark_count: int
    quad_points: int = 1000

    @abstractmethod
    def intensity(self, t: float, history: EventSequence) -> np.ndarray:
        ...

    @abstractmethod
    def thinning_bound(self, t: float, history: EventSequence) -> tuple[float, float]:
        """``(bound, horizon)`` with ``bound >= total intensity`` on ``[t, t + horizon]``."""

    def compensator(self, a: float, b: float, history: EventSequence, markset=None) -> float:
        """Integral of the summed intensity of ``markset`` over ``[a, b]``.

        ``history`` must contain every event before ``a`` and none in ``(a, b)``.
        The default uses the trapezoidal rule on ``quad_points`` points.
        """
        from .quadrature import trapezoid

        if a > b:
            raise InvalidInterval(f"a={a} > b={b}")
        if a == b:
            return 0.0
        sel = self._selector(markset)
        return trapezoid(lambda s: float(self.intensity(s, history)[sel].sum()),
                         a, b, self.quad_points)

    def intensity_after(self, t: float, history: EventSequence) -> np.ndarray:
        """Right limit of the intensity at ``t``, counting history events at exactly ``t``.

        Equal to :meth:`intensity` for models without jumps.
        """
        return self.intensity(t, history)

    def total_intensity(self, t: float, history: EventSequence) -> float:
        return float(self.intensity(t, history).sum())

    def _selector(self, markset) -> np.ndarray:
        if markset is None:
            return np.ones(self.mark_count, dtype=np.bool_)
        return as_markset(markset).mask(self.mark_count)


def read_sequences(path) -> list[EventSequence]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(EventSequence.from_json(json.loads(line)))
    return out


def write_sequences(path, seqs: Iterable[EventSequence]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in seqs:
            fh.write(json.dumps(seq.to_json()) + "\n")
