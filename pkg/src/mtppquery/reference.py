"""Pure-Python trajectory loops for any :class:`~mtppquery.core.IntensityModel`.

Each function returns the same per-trajectory arrays as its counterpart in
:mod:`mtppquery.kernels` and consumes random numbers in the same order, so
for Hawkes models the two agree up to floating-point rounding.
"""
from __future__ import annotations

import math

import numpy as np

from .kernels import EVENT_BUDGET, EXHAUSTED, OK, TIME_BUDGET
from .sampling import BudgetExceeded, RngStream, Walker, path_compensator


def _arrays(n):
    return np.empty(n), np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64)


def _span_of(bounds, t):
    for i, b in enumerate(bounds):
        if t <= b:
            return i
    return len(bounds) - 1


def restricted_values(model, history, origin, bounds, masks, importance, n, seed, budget,
                      stop_on_violation=True):
    bounds = [float(b) for b in bounds]
    masks = np.asarray(masks, dtype=np.bool_)
    end = bounds[-1]
    value, events, status = _arrays(n)
    for i in range(n):
        w = Walker(model, history, origin, RngStream(seed, i), budget)
        violated = False
        st = OK
        try:
            while True:
                if importance:
                    # nothing can be accepted in a fully masked span
                    while w.t < end and masks[_span_of(bounds, w.t)].all():
                        w.t = bounds[_span_of(bounds, w.t)]
                    if w.t >= end:
                        break
                t_cand = w.next_candidate()
                if t_cand > end:
                    break
                span = _span_of(bounds, t_cand)
                mark = w.accept(t_cand, ~masks[span] if importance else None)
                if mark is not None and masks[span, mark]:
                    violated = True
                    if stop_on_violation:
                        break
        except BudgetExceeded:
            st = EVENT_BUDGET
        if importance:
            limit = end if st == OK else w.t
            total = 0.0
            lo = origin
            for hi, m in zip(bounds, masks):
                hi = min(hi, limit)
                if hi > lo and m.any():
                    total += path_compensator(model, history, w.sampled, lo, hi,
                                              np.flatnonzero(m))
                lo = max(lo, hi)
            value[i] = total
        else:
            value[i] = 1.0 if violated else 0.0
        events[i] = len(w.times)
        status[i] = st
    return value, events, status


def _last_gap(model, history, t, masked, cutoff, rng, budget):
    sel = np.flatnonzero(masked)
    w = Walker(model, history, t, rng, budget)
    integral = 0.0
    while True:
        t_cand = w.next_candidate()
        if math.isinf(t_cand):
            return integral, EXHAUSTED
        if t_cand > budget.max_time:
            integral += model.compensator(w.t, budget.max_time, w.history, sel)
            return integral, TIME_BUDGET
        integral += model.compensator(w.t, t_cand, w.history, sel)
        if integral >= cutoff:
            return integral, OK
        if w.accept(t_cand, ~masked) is not None:
            return integral, OK


def nth_values(model, history, origin, n_target, inA, importance, n, seed, budget,
               cutoff=-math.log(1e-6), window=(-math.inf, math.inf)):
    inA = np.asarray(inA, dtype=np.bool_)
    direct, events, status = _arrays(n)
    complement = np.empty(n)
    prefix = n_target - 1 if importance else n_target
    for i in range(n):
        rng = RngStream(seed, i)
        w = Walker(model, history, origin, rng, budget)
        st = OK
        try:
            while len(w.times) < prefix:
                t_cand = w.next_candidate()
                if math.isinf(t_cand):
                    st = EXHAUSTED
                    break
                if t_cand > budget.max_time:
                    st = TIME_BUDGET
                    break
                w.accept(t_cand)
        except BudgetExceeded:
            st = EVENT_BUDGET
        events[i] = len(w.times)
        if not importance:
            hit = (st == OK and bool(inA[w.marks[-1]])
                   and window[0] <= w.t <= window[1])
            direct[i] = complement[i] = 1.0 if hit else 0.0
            status[i] = st
            continue
        if st != OK:
            direct[i] = complement[i] = 0.0
            status[i] = st
            continue
        hist = w.history
        i1, s1 = _last_gap(model, hist, w.t, ~inA, cutoff, rng, budget)
        i2, s2 = _last_gap(model, hist, w.t, inA, cutoff, rng, budget)
        direct[i] = math.exp(-i1)
        complement[i] = -math.expm1(-i2)
        status[i] = s1 if s1 != OK else s2
    return direct, complement, events, status


def first_hit_values(model, history, origin, inA, inB, n, seed, budget):
    inA = np.asarray(inA, dtype=np.bool_)
    inB = np.asarray(inB, dtype=np.bool_)
    value, events, status = _arrays(n)
    for i in range(n):
        w = Walker(model, history, origin, RngStream(seed, i), budget)
        st = OK
        v = 0.0
        while True:
            t_cand = w.next_candidate()
            if math.isinf(t_cand):
                st = EXHAUSTED
                break
            if t_cand > budget.max_time:
                st = TIME_BUDGET
                break
            over = False
            try:
                mark = w.accept(t_cand)
            except BudgetExceeded as exc:
                mark = int(exc.partial.marks[-1])
                over = True
            if mark is None:
                continue
            if inA[mark]:
                v = 1.0
                break
            if inB[mark]:
                break
            if over:
                st = EVENT_BUDGET
                break
        value[i] = v
        events[i] = len(w.times)
        status[i] = st
    return value, events, status


def ab_values(model, history, origin, inA, inB, n, seed, budget, stop_gap=0.01, step=0.01,
              a=None, b=math.inf, qmask=None):
    inA = np.asarray(inA, dtype=np.bool_)
    inB = np.asarray(inB, dtype=np.bool_)
    inAB = inA | inB
    qmask = inAB if qmask is None else np.asarray(qmask, dtype=np.bool_)
    all_masked = bool(qmask.all())
    selAB = np.flatnonzero(inAB)
    a = origin if a is None else float(a)
    max_time = budget.max_time
    ia_out, events, status = _arrays(n)
    ib_out = np.empty(n)
    T = np.empty(n)
    for i in range(n):
        w = Walker(model, history, origin, RngStream(seed, i), budget)
        S, ia, ib, t, st = 1.0, 0.0, 0.0, origin, OK
        if a > origin:
            S = math.exp(-model.compensator(origin, a, history, selAB))
            t = w.t = a
        j = 1
        done = S <= stop_gap
        try:
            while not done:
                t_cand = math.inf if all_masked else w.next_candidate()
                while True:
                    g = a + j * step
                    seg_end = min(g, t_cand, b, max_time)
                    h = seg_end - t
                    if h > 0.0:
                        hist = w.history
                        lam0 = model.intensity_after(t, hist)
                        S1 = S * math.exp(-model.compensator(t, seg_end, hist, selAB))
                        lam1 = model.intensity(seg_end, hist)
                        drop = S - S1
                        ga = lam0[inA].sum() * S + lam1[inA].sum() * S1
                        gb = lam0[inB].sum() * S + lam1[inB].sum() * S1
                        if ga + gb > 0.0:
                            share = drop * (ga / (ga + gb))
                            ia += share
                            ib += drop - share
                        S = S1
                    t = seg_end
                    if seg_end == g:
                        j += 1
                    if S <= stop_gap or t >= b:
                        done = True
                        break
                    if t >= max_time:
                        st = TIME_BUDGET
                        done = True
                        break
                    if t == t_cand:
                        break
                    if math.isinf(t_cand):
                        rest = model.intensity_after(t, w.history)[inAB].sum()
                        if rest < 1e-15:
                            st = EXHAUSTED
                            done = True
                            break
                if done:
                    break
                w.accept(t_cand, ~qmask)
        except BudgetExceeded:
            st = EVENT_BUDGET
        ia_out[i], ib_out[i], T[i] = ia, ib, t
        events[i] = len(w.times)
        status[i] = st
    return ia_out, ib_out, T, events, status
