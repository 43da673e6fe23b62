"""Query types and estimators: closed-form next-event queries, naive Monte Carlo,
and restricted-mark importance sampling.

Query times are absolute.  The conditioning origin defaults to the time of the
last history event (or 0 without history), and windows are open on the left.

Hawkes and Poisson models run on the compiled kernels; any other
:class:`~mtppquery.core.IntensityModel` runs on the pure-Python reference
loops, which draw the same random numbers in the same order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, reference
from .core import (EventSequence, IntensityModel, MarkSet, RestrictionSchedule, as_markset,
                   InvalidInterval)
from .kernels import EVENT_BUDGET, OK, TIME_BUDGET
from .sampling import DEFAULT_BUDGET, TrajectoryBudget, resolve_origin

SURVIVAL_TOL = 1e-6
GRID_STEP = 0.01
DEFAULT_PRECISION = 0.01
NTH_CUTOFF = -math.log(SURVIVAL_TOL)


class InvalidQuery(ValueError):
    pass


class OverlappingMarkSets(InvalidQuery):
    pass


class WeightOutOfRange(RuntimeError):
    pass


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


@dataclass(frozen=True)
class EstimateResult:
    """A Monte Carlo (or deterministic) probability estimate.

    ``variance`` is the per-sample population variance; ``std_error`` is
    ``sqrt(variance / n_samples)``.  ``samples`` holds per-trajectory values
    when the estimator was asked to keep them.
    """

    value: float
    std_error: float
    n_samples: int
    variance: float
    method: str
    lower_bound: float | None = None
    upper_bound: float | None = None
    truncation_horizon: float | None = None
    max_residual_gap: float | None = None
    n_censored: int = 0
    budget_limited: bool = False
    form: str | None = None
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)
    extras: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        out = {
            "value": self.value,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "variance": self.variance,
            "method": self.method,
        }
        for key in ("lower_bound", "upper_bound", "truncation_horizon", "max_residual_gap",
                    "form"):
            val = getattr(self, key)
            if val is not None:
                out[key] = _jsonable(val)
        out["n_censored"] = self.n_censored
        out["budget_limited"] = self.budget_limited
        return out


# ---------------------------------------------------------------- query specs

def _nonempty(marks, name):
    ms = as_markset(marks)
    if not len(ms):
        raise InvalidQuery(f"mark set {name} must be non-empty")
    return ms


@dataclass(frozen=True)
class HittingTimeCdf:
    A: MarkSet
    t: float

    def __post_init__(self):
        object.__setattr__(self, "A", _nonempty(self.A, "A"))
        object.__setattr__(self, "t", float(self.t))

    def validate(self, mark_count):
        self.A.validate(mark_count)


@dataclass(frozen=True)
class NthMark:
    n: int
    A: MarkSet

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidQuery("n must be at least 1")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "A", _nonempty(self.A, "A"))

    def validate(self, mark_count):
        self.A.validate(mark_count)


@dataclass(frozen=True)
class ABeforeB:
    A: MarkSet
    B: MarkSet
    precision: float = DEFAULT_PRECISION

    def __post_init__(self):
        A, B = _nonempty(self.A, "A"), _nonempty(self.B, "B")
        if len(A & B):
            raise OverlappingMarkSets(f"A and B share marks {sorted((A & B).members)}")
        if not self.precision > 0:
            raise InvalidQuery("precision must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "precision", float(self.precision))

    def validate(self, mark_count):
        self.A.validate(mark_count)
        self.B.validate(mark_count)


@dataclass(frozen=True)
class RestrictedMark:
    schedule: RestrictionSchedule

    def validate(self, mark_count):
        for m in self.schedule.restricted:
            m.validate(mark_count)


@dataclass(frozen=True)
class NextTimeCdf:
    t: float

    def validate(self, mark_count):
        pass


@dataclass(frozen=True)
class NextMark:
    A: MarkSet
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "A", _nonempty(self.A, "A"))

    def validate(self, mark_count):
        self.A.validate(mark_count)


QuerySpec = HittingTimeCdf | NthMark | ABeforeB | RestrictedMark | NextTimeCdf | NextMark


def query_from_json(obj: dict):
    """Parse a query object; returns ``(spec, condition)`` where condition may be None."""
    try:
        kind = obj["type"]
        if kind == "hitting_time":
            spec = HittingTimeCdf(obj["A"], obj["t"])
        elif kind == "nth_mark":
            spec = NthMark(obj["n"], obj["A"])
        elif kind == "a_before_b":
            spec = ABeforeB(obj["A"], obj["B"], obj.get("precision", DEFAULT_PRECISION))
        elif kind == "restricted":
            spec = RestrictedMark(RestrictionSchedule(obj["boundaries"], obj["restricted"]))
        elif kind == "next_time":
            spec = NextTimeCdf(float(obj["t"]))
        elif kind == "next_mark":
            spec = NextMark(obj["A"], obj.get("a"), obj.get("b"))
        else:
            raise InvalidQuery(f"unknown query type {kind!r}")
    except OverlappingMarkSets:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidQuery):
            raise
        raise InvalidQuery(f"bad query: {exc}") from exc
    cond = obj.get("condition")
    condition = EventSequence.from_json(cond) if cond is not None else None
    return spec, condition


def query_to_json(spec) -> dict:
    if isinstance(spec, HittingTimeCdf):
        return {"type": "hitting_time", "A": list(spec.A), "t": spec.t}
    if isinstance(spec, NthMark):
        return {"type": "nth_mark", "n": spec.n, "A": list(spec.A)}
    if isinstance(spec, ABeforeB):
        return {"type": "a_before_b", "A": list(spec.A), "B": list(spec.B),
                "precision": spec.precision}
    if isinstance(spec, RestrictedMark):
        s = spec.schedule
        return {"type": "restricted", "boundaries": list(s.boundaries),
                "restricted": [list(m) for m in s.restricted]}
    if isinstance(spec, NextTimeCdf):
        return {"type": "next_time", "t": spec.t}
    if isinstance(spec, NextMark):
        return {"type": "next_mark", "A": list(spec.A), "a": spec.a, "b": spec.b}
    raise InvalidQuery(f"not a query spec: {spec!r}")


# ---------------------------------------------------------------- backends

def _fast(model, engine):
    has = hasattr(model, "kernel_arrays")
    if engine == "reference":
        return False
    if engine == "kernel" and not has:
        raise ValueError(f"{type(model).__name__} has no compiled kernel")
    return has


def _restricted_run(model, history, origin, bounds, masks, importance, n, seed, budget,
                    workers, engine, stop_on_violation=True):
    if _fast(model, engine):
        arr = kernels.HawkesArrays(model, history, origin)
        return kernels.restricted_values(arr, bounds, masks, importance, n, seed, budget,
                                         workers, stop_on_violation)
    return reference.restricted_values(model, history, origin, bounds, masks, importance, n,
                                       seed, budget, stop_on_violation)


def _nth_run(model, history, origin, n_target, inA, importance, n, seed, budget, workers,
             engine, window=(-math.inf, math.inf)):
    if _fast(model, engine):
        arr = kernels.HawkesArrays(model, history, origin)
        return kernels.nth_values(arr, n_target, inA, importance, n, seed, budget, workers,
                                  NTH_CUTOFF, window)
    return reference.nth_values(model, history, origin, n_target, inA, importance, n, seed,
                                budget, NTH_CUTOFF, window)


def _first_hit_run(model, history, origin, inA, inB, n, seed, budget, workers, engine):
    if _fast(model, engine):
        arr = kernels.HawkesArrays(model, history, origin)
        return kernels.first_hit_values(arr, inA, inB, n, seed, budget, workers)
    return reference.first_hit_values(model, history, origin, inA, inB, n, seed, budget)


def _ab_run(model, history, origin, inA, inB, n, seed, budget, workers, engine, **kw):
    if _fast(model, engine):
        arr = kernels.HawkesArrays(model, history, origin)
        return kernels.ab_values(arr, inA, inB, n, seed, budget, workers, **kw)
    return reference.ab_values(model, history, origin, inA, inB, n, seed, budget, **kw)


def _check_n(n_samples):
    if int(n_samples) < 1:
        raise InvalidQuery("n_samples must be at least 1")
    return int(n_samples)


def _check_weights(values):
    if values.size and (values.min() < 0.0 or values.max() > 1.0 or np.isnan(values).any()):
        raise WeightOutOfRange("per-sample estimate outside [0, 1]")


def _summary(values, method, status=None, keep=False, **kw) -> EstimateResult:
    mean, var = kernels.summarize(values)
    n = values.size
    censored = 0
    if status is not None:
        censored = int(np.count_nonzero((status == EVENT_BUDGET) | (status == TIME_BUDGET)))
    return EstimateResult(
        value=min(max(mean, 0.0), 1.0), std_error=math.sqrt(var / n), n_samples=n,
        variance=var, method=method, n_censored=censored,
        budget_limited=kw.pop("budget_limited", censored > 0),
        samples=values if keep else None, **kw)


def _deterministic(value, method, n_samples=1, **kw) -> EstimateResult:
    return EstimateResult(value=float(value), std_error=0.0, n_samples=n_samples, variance=0.0,
                          method=method, **kw)


def _prepare(model, history, origin):
    history, origin = resolve_origin(history, origin)
    return history, origin


# ---------------------------------------------------------------- direct queries

def next_time_cdf(model: IntensityModel, history=None, origin=None, t=None) -> float:
    """Probability that the next event occurs by absolute time ``t``."""
    history, origin = _prepare(model, history, origin)
    if t is None or t < origin:
        raise InvalidInterval(f"t={t} must be at least origin={origin}")
    return -math.expm1(-model.compensator(origin, t, history))


def next_mark_prob(model: IntensityModel, history=None, origin=None, A=None, a=None, b=None, *,
                   n_points: int = 1000, grid_step: float = GRID_STEP, tol: float = SURVIVAL_TOL,
                   engine: str = "auto") -> float:
    """Probability that the next event has a mark in ``A`` and time in ``[a, b]``.

    ``a`` defaults to the origin and ``b`` to infinity.  A finite window uses
    ``n_points`` trapezoid nodes (plus any needed event-free breakpoints); an
    infinite one steps by ``grid_step`` until the survival factor drops to
    ``tol``.
    """
    history, origin = _prepare(model, history, origin)
    K = model.mark_count
    inA = _nonempty(A, "A").mask(K)
    a = origin if a is None else float(a)
    b = math.inf if b is None else float(b)
    if not origin <= a <= b:
        raise InvalidInterval(f"need origin <= a <= b, got {origin}, {a}, {b}")
    if a == b:
        return 0.0
    if math.isinf(b):
        step, stop = grid_step, tol
    else:
        if n_points < 2:
            raise ValueError("n_points must be at least 2")
        step, stop = (b - a) / (n_points - 1), 0.0
    allmask = np.ones(K, dtype=np.bool_)
    ia, _, _, _, _ = _ab_run(model, history, origin, inA, ~inA, 1, 0, DEFAULT_BUDGET, 1, engine,
                             stop_gap=stop, step=step, a=a, b=b, qmask=allmask)
    return float(min(max(ia[0], 0.0), 1.0))


def joint_next_event_prob(model, history=None, origin=None, A=None, a=None, b=None,
                          **kw) -> float:
    """``P(first event in [a, b] with a mark in A)``."""
    return next_mark_prob(model, history, origin, A, a, b, **kw)


# ---------------------------------------------------------------- importance estimators

def restricted_mark_estimate(model: IntensityModel, history=None, origin=None,
                             schedule: RestrictionSchedule = None, n_samples: int = 1000,
                             seed: int = 0, budget: TrajectoryBudget = DEFAULT_BUDGET,
                             workers: int = 1, keep_samples: bool = False,
                             engine: str = "auto") -> EstimateResult:
    """Probability that no span of ``schedule`` sees one of its restricted marks."""
    history, origin = _prepare(model, history, origin)
    n = _check_n(n_samples)
    schedule.check_origin(origin)
    masks = schedule.masks(model.mark_count)
    if not masks.any():
        return _deterministic(1.0, "importance", n,
                              samples=np.ones(n) if keep_samples else None)
    integral, _, status = _restricted_run(model, history, origin, schedule.boundaries, masks,
                                          True, n, seed, budget, workers, engine)
    weights = np.exp(-integral)
    _check_weights(weights)
    return _summary(weights, "importance", status, keep_samples,
                    truncation_horizon=schedule.end)


def hitting_time_cdf_estimate(model: IntensityModel, history=None, origin=None, A=None,
                              t: float = None, n_samples: int = 1000, seed: int = 0,
                              budget: TrajectoryBudget = DEFAULT_BUDGET, workers: int = 1,
                              keep_samples: bool = False, engine: str = "auto") -> EstimateResult:
    """``P(first A-mark event at or before t)``, the complement of one restricted span."""
    history, origin = _prepare(model, history, origin)
    n = _check_n(n_samples)
    A = _nonempty(A, "A")
    A.validate(model.mark_count)
    if t is None or t < origin:
        raise InvalidInterval(f"t={t} must be at least origin={origin}")
    if t == origin:
        return _deterministic(0.0, "importance", n,
                              samples=np.zeros(n) if keep_samples else None)
    res = restricted_mark_estimate(model, history, origin, RestrictionSchedule.single(t, A), n,
                                   seed, budget, workers, keep_samples, engine)
    samples = 1.0 - res.samples if res.samples is not None else None
    return EstimateResult(value=1.0 - res.value, std_error=res.std_error, n_samples=n,
                          variance=res.variance, method="importance", truncation_horizon=t,
                          n_censored=res.n_censored, budget_limited=res.budget_limited,
                          samples=samples)


def nth_mark_estimate(model: IntensityModel, history=None, origin=None, n: int = 1, A=None,
                      n_samples: int = 1000, seed: int = 0,
                      budget: TrajectoryBudget = DEFAULT_BUDGET, workers: int = 1,
                      form: str = "auto", keep_samples: bool = False,
                      engine: str = "auto") -> EstimateResult:
    """``P(mark of the n-th event after origin lies in A)``.

    Events 1..n-1 come from the model.  From that state two continuations
    run to the n-th event: one forbids marks outside A (``direct`` form), the
    other forbids A (``complement`` form).  ``form="auto"`` reports the one
    with the smaller empirical variance; both appear in ``extras``.
    """
    if form not in ("auto", "direct", "complement"):
        raise InvalidQuery(f"unknown form {form!r}")
    history, origin = _prepare(model, history, origin)
    N = _check_n(n_samples)
    if int(n) < 1:
        raise InvalidQuery("n must be at least 1")
    inA = _nonempty(A, "A").mask(model.mark_count)
    direct, complement, _, status = _nth_run(model, history, origin, int(n), inA, True, N, seed,
                                             budget, workers, engine)
    _check_weights(direct)
    _check_weights(complement)
    d = _summary(direct, "importance", status, keep_samples, form="direct")
    c = _summary(complement, "importance", status, keep_samples, form="complement")
    if form == "auto":
        form = "direct" if d.variance <= c.variance else "complement"
    chosen = d if form == "direct" else c
    chosen.extras.update(direct=d, complement=c)
    return chosen


def _ab_arrays(model, history, origin, A, B, n, precision, seed, budget, workers, engine,
               grid_step):
    K = model.mark_count
    inA, inB = A.mask(K), B.mask(K)
    ia, ib, T, _, status = _ab_run(model, history, origin, inA, inB, n, seed, budget, workers,
                                   engine, stop_gap=precision, step=grid_step)
    gap = np.maximum(1.0 - (ia + ib), 0.0)
    return ia, ib, gap, T, status


def _ab_result(lower, gap, T, status, precision, keep):
    point = lower + 0.5 * gap
    _check_weights(point)
    m_lower, _ = kernels.summarize(lower)
    m_gap, _ = kernels.summarize(gap)
    _, var = kernels.summarize(point)
    n = lower.size
    flagged = gap > precision
    censored = int(np.count_nonzero((status == EVENT_BUDGET) | (status == TIME_BUDGET)))
    value = min(max(m_lower + 0.5 * m_gap, 0.0), 1.0)
    return EstimateResult(
        value=value, std_error=math.sqrt(var / n), n_samples=n, variance=var,
        method="importance", lower_bound=max(m_lower, 0.0), upper_bound=min(m_lower + m_gap, 1.0),
        truncation_horizon=float(T.max()), max_residual_gap=float(gap.max()),
        n_censored=censored, budget_limited=bool(flagged.any()),
        samples=point if keep else None,
        extras={"lower": lower, "upper": lower + gap, "horizon": T} if keep else {})


def a_before_b_estimate(model: IntensityModel, history=None, origin=None, A=None, B=None,
                        n_samples: int = 1000, precision: float = DEFAULT_PRECISION,
                        seed: int = 0, budget: TrajectoryBudget = DEFAULT_BUDGET,
                        workers: int = 1, grid_step: float = GRID_STEP,
                        keep_samples: bool = False, engine: str = "auto") -> EstimateResult:
    """``P(first event with a mark in A ∪ B has its mark in A)``.

    Trajectories come from the model with A and B forbidden.  Each one is
    followed until the probability that neither set has fired yet is at most
    ``precision``; that residual is split evenly between the two outcomes, and
    ``lower_bound``/``upper_bound`` give it entirely to B or to A.
    """
    spec = ABeforeB(A, B, precision)
    history, origin = _prepare(model, history, origin)
    n = _check_n(n_samples)
    ia, _, gap, T, status = _ab_arrays(model, history, origin, spec.A, spec.B, n, precision,
                                       seed, budget, workers, engine, grid_step)
    return _ab_result(ia, gap, T, status, precision, keep_samples)


def a_before_b_pair(model, history=None, origin=None, A=None, B=None, n_samples=1000,
                    precision=DEFAULT_PRECISION, seed=0, budget=DEFAULT_BUDGET, workers=1,
                    grid_step=GRID_STEP, keep_samples=False, engine="auto"):
    """Estimates of ``P(A before B)`` and ``P(B before A)`` from one trajectory set."""
    spec = ABeforeB(A, B, precision)
    history, origin = _prepare(model, history, origin)
    n = _check_n(n_samples)
    ia, ib, gap, T, status = _ab_arrays(model, history, origin, spec.A, spec.B, n, precision,
                                        seed, budget, workers, engine, grid_step)
    ab = _ab_result(ia, gap, T, status, precision, keep_samples)
    lower_b = 1.0 - (ia + gap)
    samples = 1.0 - ab.samples if ab.samples is not None else None
    ba = EstimateResult(
        value=1.0 - ab.value, std_error=ab.std_error, n_samples=n, variance=ab.variance,
        method="importance", lower_bound=1.0 - ab.upper_bound, upper_bound=1.0 - ab.lower_bound,
        truncation_horizon=ab.truncation_horizon, max_residual_gap=ab.max_residual_gap,
        n_censored=ab.n_censored, budget_limited=ab.budget_limited, samples=samples,
        extras={"lower": lower_b, "upper": lower_b + gap, "horizon": T} if keep_samples else {})
    return ab, ba


# ---------------------------------------------------------------- dispatch

def _validate(model, spec):
    spec.validate(model.mark_count)


def importance_estimate(model: IntensityModel, spec, history=None, origin=None,
                        n_samples: int = 1000, seed: int = 0,
                        budget: TrajectoryBudget = DEFAULT_BUDGET, workers: int = 1,
                        n_points: int = 1000, keep_samples: bool = False,
                        engine: str = "auto") -> EstimateResult:
    _validate(model, spec)
    common = dict(n_samples=n_samples, seed=seed, budget=budget, workers=workers,
                  keep_samples=keep_samples, engine=engine)
    if isinstance(spec, HittingTimeCdf):
        return hitting_time_cdf_estimate(model, history, origin, spec.A, spec.t, **common)
    if isinstance(spec, RestrictedMark):
        return restricted_mark_estimate(model, history, origin, spec.schedule, **common)
    if isinstance(spec, NthMark):
        return nth_mark_estimate(model, history, origin, spec.n, spec.A, **common)
    if isinstance(spec, ABeforeB):
        return a_before_b_estimate(model, history, origin, spec.A, spec.B,
                                   precision=spec.precision, **common)
    if isinstance(spec, NextTimeCdf):
        return _deterministic(next_time_cdf(model, history, origin, spec.t), "exact")
    if isinstance(spec, NextMark):
        return _deterministic(next_mark_prob(model, history, origin, spec.A, spec.a, spec.b,
                                             n_points=n_points, engine=engine), "exact")
    raise InvalidQuery(f"not a query spec: {spec!r}")


def naive_estimate(model: IntensityModel, spec, history=None, origin=None, horizon=None,
                   n_samples: int = 1000, seed: int = 0,
                   budget: TrajectoryBudget = DEFAULT_BUDGET, workers: int = 1,
                   full_window: bool = False, keep_samples: bool = False,
                   engine: str = "auto") -> EstimateResult:
    """Fraction of unconstrained model trajectories that satisfy ``spec``.

    ``horizon`` caps simulation time for open-ended queries; trajectories cut
    off by it or by the event budget count as failures and are tallied in
    ``n_censored``.  ``full_window`` keeps simulating fixed-window queries
    after the outcome is known (for timing comparisons).
    """
    _validate(model, spec)
    history, origin = _prepare(model, history, origin)
    n = _check_n(n_samples)
    if horizon is not None:
        if horizon < origin:
            raise InvalidInterval(f"horizon {horizon} precedes origin {origin}")
        budget = TrajectoryBudget(budget.max_events, min(budget.max_time, float(horizon)))
    K = model.mark_count
    if isinstance(spec, NextTimeCdf):
        spec = HittingTimeCdf(range(K), spec.t)
    if isinstance(spec, (HittingTimeCdf, RestrictedMark)):
        if isinstance(spec, HittingTimeCdf):
            if spec.t < origin:
                raise InvalidInterval(f"t={spec.t} must be at least origin={origin}")
            if spec.t == origin:
                return _deterministic(0.0, "naive", n)
            schedule = RestrictionSchedule.single(spec.t, spec.A)
        else:
            schedule = spec.schedule
            schedule.check_origin(origin)
        if schedule.end > budget.max_time:
            raise InvalidQuery(f"query window ends at {schedule.end}, past horizon {horizon}")
        violated, _, status = _restricted_run(
            model, history, origin, schedule.boundaries, schedule.masks(K), False, n, seed,
            budget, workers, engine, stop_on_violation=not full_window)
        hit = violated if isinstance(spec, HittingTimeCdf) else 1.0 - violated
        values = np.where(status == OK, hit, 0.0)
    elif isinstance(spec, (NthMark, NextMark)):
        if isinstance(spec, NthMark):
            target, window = spec.n, (-math.inf, math.inf)
        else:
            lo = origin if spec.a is None else float(spec.a)
            hi = math.inf if spec.b is None else float(spec.b)
            target, window = 1, (lo, hi)
        values, _, _, status = _nth_run(model, history, origin, target, spec.A.mask(K), False, n,
                                        seed, budget, workers, engine, window)
    elif isinstance(spec, ABeforeB):
        values, _, status = _first_hit_run(model, history, origin, spec.A.mask(K),
                                           spec.B.mask(K), n, seed, budget, workers, engine)
    else:
        raise InvalidQuery(f"not a query spec: {spec!r}")
    return _summary(np.ascontiguousarray(values, dtype=np.float64), "naive", status, keep_samples)


def estimate(model: IntensityModel, spec, method: str = "importance", **kw) -> EstimateResult:
    if method == "importance":
        kw.pop("horizon", None)
        kw.pop("full_window", None)
        return importance_estimate(model, spec, **kw)
    if method == "naive":
        kw.pop("n_points", None)
        return naive_estimate(model, spec, **kw)
    raise InvalidQuery(f"unknown method {method!r}")
