"""Thinning simulation, restricted-mark proposals and sequence likelihoods.

These routines work for any :class:`~mtppquery.core.IntensityModel`.  The
compiled Hawkes kernels in :mod:`mtppquery.kernels` consume random numbers in
exactly the same order, so both produce the same trajectory for a given
``(seed, index)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .core import (EventSequence, IntensityModel, RestrictionSchedule, as_markset,
                   InvalidInterval)

DEFAULT_MAX_EVENTS = 10_000


class BudgetExceeded(RuntimeError):
    """Raised when a trajectory hits its budget; ``partial`` holds what was sampled."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DominationViolation(RuntimeError):
    pass


class ZeroIntensityEvent(ValueError):
    pass


class RngStream:
    """Counter-based uniform stream ``(seed, index) -> u_0, u_1, ...``.

    Streams for different indices are independent, so trajectory ``i`` draws
    the same numbers regardless of how work is split across workers.
    """

    def __init__(self, seed: int, index: int = 0):
        self.seed = int(seed) & _accel.MASK64
        self.index = int(index)
        self.key = _accel.stream_key_py(self.seed, self.index)
        self.counter = 0

    def uniform(self) -> float:
        u = _accel.uniform_py(self.key, self.counter)
        self.counter += 1
        return u

    def exponential(self) -> float:
        return -math.log(1.0 - self.uniform())

    def spawn(self, index: int) -> "RngStream":
        return RngStream(self.seed, index)


@dataclass(frozen=True)
class TrajectoryBudget:
    max_events: float = DEFAULT_MAX_EVENTS
    max_time: float = math.inf

    def __post_init__(self):
        if math.isinf(self.max_events) and math.isinf(self.max_time):
            raise ValueError("at least one budget bound must be finite")


DEFAULT_BUDGET = TrajectoryBudget()


class MaskedModel(IntensityModel):
    """Zeroes the intensity of restricted marks span by span.

    Past the last boundary nothing is masked.  The thinning bound is the
    unmasked model's bound, which still dominates.
    """

    def __init__(self, model: IntensityModel, schedule: RestrictionSchedule):
        self.base = model
        self.schedule = schedule
        self.mark_count = model.mark_count
        self._masks = schedule.masks(model.mark_count)
        self.quad_points = model.quad_points

    def _allowed(self, t):
        i = self.schedule.span_index(t)
        if i is None:
            return np.ones(self.mark_count, dtype=np.bool_)
        return ~self._masks[i]

    def intensity(self, t, history):
        lam = self.base.intensity(t, history)
        return np.where(self._allowed(t), lam, 0.0)

    def thinning_bound(self, t, history):
        return self.base.thinning_bound(t, history)

    def compensator(self, a, b, history, markset=None):
        if a > b:
            raise InvalidInterval(f"a={a} > b={b}")
        sel = self._selector(markset)
        total = 0.0
        lo = a
        for bnd, mask in zip(self.schedule.boundaries + (math.inf,),
                             list(self._masks) + [np.zeros(self.mark_count, dtype=np.bool_)]):
            if lo >= b:
                break
            hi = min(b, bnd)
            if hi > lo:
                keep = sel & ~mask
                if keep.any():
                    total += self.base.compensator(lo, hi, history, np.flatnonzero(keep))
                lo = hi
        return total


def _history_with(history: EventSequence, times: list, marks: list) -> EventSequence:
    if not times:
        return history
    return EventSequence(np.concatenate([history.times, times]),
                         np.concatenate([history.marks, marks]), history.window_end)


def resolve_origin(history: EventSequence | None, origin: float | None):
    if history is None:
        history = EventSequence.empty()
    if origin is None:
        origin = history.last_time if len(history) else 0.0
    elif len(history) and origin < history.times[-1]:
        raise InvalidInterval(f"origin {origin} precedes last history event {history.times[-1]}")
    return history, float(origin)


class Walker:
    """Step-by-step thinning of one trajectory from ``origin``.

    ``next_candidate`` proposes the next candidate time; ``accept`` then
    decides it.  Masking is applied through ``allowed`` (a boolean mark mask)
    at acceptance time.  Callers integrate whatever they need over the
    event-free stretch between steps.
    """

    def __init__(self, model: IntensityModel, history: EventSequence, origin: float,
                 rng: RngStream, budget: TrajectoryBudget = DEFAULT_BUDGET):
        self.model = model
        self.base_history = history
        self.t = origin
        self.rng = rng
        self.budget = budget
        self.times: list = []
        self.marks: list = []
        self._bound = None

    @property
    def history(self) -> EventSequence:
        return _history_with(self.base_history, self.times, self.marks)

    @property
    def sampled(self) -> EventSequence:
        return EventSequence(self.times, self.marks)

    def next_candidate(self) -> float:
        """Candidate time of the next potential event (``inf`` if none can occur).

        Validity-horizon expiries are handled internally: the bound is
        refreshed and a new gap drawn.
        """
        while True:
            bound, horizon = self.model.thinning_bound(self.t, self.history)
            self._bound = bound
            if bound <= 0.0:
                if math.isinf(horizon):
                    return math.inf
                self.t += horizon
                continue
            t_cand = self.t + self.rng.exponential() / bound
            if t_cand > self.t + horizon:
                self.t += horizon
                continue
            return t_cand

    def accept(self, t_cand: float, allowed=None) -> int | None:
        """Move to ``t_cand`` and run the acceptance test; return the mark or None."""
        hist = self.history
        lam = np.asarray(self.model.intensity(t_cand, hist), dtype=np.float64)
        if lam.sum() > self._bound * (1.0 + 1e-9):
            raise DominationViolation(
                f"intensity {lam.sum()} exceeds thinning bound {self._bound} at t={t_cand}")
        if allowed is not None:
            lam = np.where(allowed, lam, 0.0)
        cum = np.cumsum(lam)
        x = self.rng.uniform() * self._bound
        self.t = t_cand
        if not x < cum[-1]:
            return None
        mark = int(np.searchsorted(cum, x, side="right"))
        self.times.append(t_cand)
        self.marks.append(mark)
        if len(self.times) > self.budget.max_events:
            raise BudgetExceeded(f"trajectory reached {len(self.times)} events",
                                 self.sampled)
        return mark

    def check_time(self, t: float) -> None:
        if t > self.budget.max_time:
            raise BudgetExceeded(f"trajectory passed max_time={self.budget.max_time}",
                                 self.sampled)


def sample_thinning(model: IntensityModel, origin: float, horizon: float,
                    history: EventSequence | None = None, rng: RngStream | None = None,
                    budget: TrajectoryBudget = DEFAULT_BUDGET) -> EventSequence:
    """Sample events on ``(origin, horizon]`` by Ogata thinning, conditioned on ``history``."""
    history, origin = resolve_origin(history, origin)
    if horizon < origin:
        raise InvalidInterval(f"horizon {horizon} precedes origin {origin}")
    rng = rng if rng is not None else RngStream(0)
    w = Walker(model, history, origin, rng, budget)
    while True:
        t_cand = w.next_candidate()
        if t_cand > horizon:
            break
        w.check_time(t_cand)
        w.accept(t_cand)
    return EventSequence(w.times, w.marks, horizon)


def sample_restricted(model: IntensityModel, schedule: RestrictionSchedule, origin: float,
                      horizon: float, history: EventSequence | None = None,
                      rng: RngStream | None = None,
                      budget: TrajectoryBudget = DEFAULT_BUDGET) -> EventSequence:
    """Sample from the proposal that forbids each span's restricted marks."""
    history, origin = resolve_origin(history, origin)
    schedule.check_origin(origin)
    return sample_thinning(MaskedModel(model, schedule), origin, horizon, history, rng, budget)


def sample_until_nth_event(model: IntensityModel, origin: float, n: int,
                           history: EventSequence | None = None, rng: RngStream | None = None,
                           budget: TrajectoryBudget = DEFAULT_BUDGET,
                           masked=None) -> EventSequence:
    """Sample exactly ``n`` events past ``origin``; ``masked`` marks are never produced."""
    if n < 1:
        raise ValueError("n must be at least 1")
    history, origin = resolve_origin(history, origin)
    rng = rng if rng is not None else RngStream(0)
    allowed = None
    if masked is not None:
        allowed = ~as_markset(masked).mask(model.mark_count)
    w = Walker(model, history, origin, rng, budget)
    while len(w.times) < n:
        t_cand = w.next_candidate()
        if math.isinf(t_cand):
            raise BudgetExceeded("intensity vanished before the n-th event", w.sampled)
        w.check_time(t_cand)
        w.accept(t_cand, allowed)
    return EventSequence(w.times, w.marks)


def path_compensator(model: IntensityModel, history: EventSequence, seq: EventSequence,
                     a: float, b: float, markset=None) -> float:
    """Integral of ``markset`` intensity over ``[a, b]`` along ``history`` + ``seq``.

    The interval is split at sampled event times so each piece is event-free.
    """
    if a > b:
        raise InvalidInterval(f"a={a} > b={b}")
    cuts = [float(x) for x in seq.times if a < x < b]
    points = [a] + cuts + [b]
    total = 0.0
    for lo, hi in zip(points, points[1:]):
        hist = _history_with(history, [x for x in seq.times.tolist() if x <= lo],
                             [k for x, k in zip(seq.times.tolist(), seq.marks.tolist()) if x <= lo])
        total += model.compensator(lo, hi, hist, markset)
    return total


def log_likelihood(model: IntensityModel, seq: EventSequence, origin: float, horizon: float,
                   history: EventSequence | None = None) -> float:
    """Log density of ``seq`` on ``(origin, horizon]`` given ``history``."""
    history, origin = resolve_origin(history, origin)
    if len(seq) and (seq.times[0] <= origin or seq.times[-1] > horizon):
        raise InvalidInterval("sequence must lie within (origin, horizon]")
    total = 0.0
    times, marks = seq.times.tolist(), seq.marks.tolist()
    for i, (t, k) in enumerate(zip(times, marks)):
        hist = _history_with(history, times[:i], marks[:i])
        lam = float(model.intensity(t, hist)[k])
        if lam <= 0.0:
            raise ZeroIntensityEvent(f"event {i} (t={t}, mark={k}) has zero intensity")
        total += math.log(lam)
    return total - path_compensator(model, history, seq, origin, horizon)
