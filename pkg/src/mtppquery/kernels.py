"""Compiled per-trajectory kernels for exponential Hawkes (and Poisson) models.

Each batch kernel simulates trajectories ``lo..hi-1`` and writes one row of
output per trajectory.  Trajectory ``i`` draws from ``stream_key(seed, i)``,
so results do not depend on how indices are split across threads.

Status codes: 0 finished, 1 event budget exceeded, 2 time budget exceeded,
3 intensity exhausted (no further events possible).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._accel import JIT_ENABLED, njit, seed_arg, stream_key, uniform

OK, EVENT_BUDGET, TIME_BUDGET, EXHAUSTED = 0, 1, 2, 3
CHUNK = 256


@njit
def _intensity(mu, E, K, lam):
    total = 0.0
    for k in range(K):
        s = mu[k]
        for j in range(K):
            s += E[k, j]
        lam[k] = s
        total += s
    return total


@njit
def _masked_cumulative(mu, E, K, masked, lam):
    """Cumulative masked intensities into ``lam``; returns their total."""
    acc = 0.0
    for k in range(K):
        if not masked[k]:
            s = mu[k]
            for j in range(K):
                s += E[k, j]
            acc += s
        lam[k] = acc
    return acc


@njit
def _pick(lam, K, x):
    for k in range(K):
        if x < lam[k]:
            return k
    return K - 1


@njit
def _jump(E, alpha, K, mark):
    for k in range(K):
        E[k, mark] += alpha[k, mark]


@njit
def _advance(E, beta, K, h):
    if h <= 0.0:
        return
    for k in range(K):
        for j in range(K):
            E[k, j] *= math.exp(-beta[k, j] * h)


@njit
def _advance_integrate(mu, E, beta, K, h, sel):
    """Integral of the ``sel`` intensities over the next ``h`` time units; decays ``E``."""
    if h <= 0.0:
        return 0.0
    total = 0.0
    for k in range(K):
        if sel[k]:
            acc = mu[k] * h
            for j in range(K):
                x = beta[k, j] * h
                acc += E[k, j] * (-math.expm1(-x)) / beta[k, j]
                E[k, j] *= math.exp(-x)
            total += acc
        else:
            for j in range(K):
                E[k, j] *= math.exp(-beta[k, j] * h)
    return total


@njit
def _partial_rates(mu, E, K, inA, inB):
    la = 0.0
    lb = 0.0
    for k in range(K):
        if inA[k] or inB[k]:
            s = mu[k]
            for j in range(K):
                s += E[k, j]
            if inA[k]:
                la += s
            else:
                lb += s
    return la, lb


@njit
def _copy(dst, src, K):
    for k in range(K):
        for j in range(K):
            dst[k, j] = src[k, j]


@njit
def restricted_batch(mu, alpha, beta, E0, origin, bounds, masks, importance, stop_on_violation,
                     seed, lo, hi, max_events, out_value, out_events, out_status):
    """Restricted-mark trajectories over ``(origin, bounds[-1]]``.

    importance: sample the proposal that masks ``masks[i]`` on span i and
    write the masked compensator (minus log weight).  Otherwise sample the
    model itself and write 1.0 if a restricted mark occurred, else 0.0.

    The baseline part of the compensator is path independent and is added
    once; spans with every mark masked are crossed without thinning draws.
    Both keep deterministic weights bit-identical across trajectories.
    """
    K = mu.shape[0]
    nsp = bounds.shape[0]
    end = bounds[nsp - 1]
    E = np.empty((K, K))
    lam = np.empty(K)
    none = np.zeros(K, dtype=np.bool_)
    zero = np.zeros(K)
    full = np.empty(nsp, dtype=np.bool_)
    base = 0.0
    prev = origin
    for s in range(nsp):
        full[s] = True
        for k in range(K):
            if masks[s, k]:
                base += mu[k] * (bounds[s] - prev)
            else:
                full[s] = False
        prev = bounds[s]
    for i in range(lo, hi):
        key = stream_key(seed, i)
        c = 0
        _copy(E, E0, K)
        t = origin
        span = 0
        excited = 0.0
        violated = False
        n = 0
        status = OK
        while True:
            if importance:
                while span < nsp and full[span]:
                    excited += _advance_integrate(zero, E, beta, K, bounds[span] - t, masks[span])
                    t = bounds[span]
                    span += 1
                if span == nsp:
                    break
            bound = _intensity(mu, E, K, lam)
            if bound > 0.0:
                u = uniform(key, c)
                c += 1
                t_cand = t + (-math.log(1.0 - u)) / bound
            else:
                t_cand = math.inf
            target = t_cand if t_cand < end else end
            while span < nsp - 1 and target > bounds[span]:
                if importance:
                    excited += _advance_integrate(zero, E, beta, K, bounds[span] - t, masks[span])
                else:
                    _advance(E, beta, K, bounds[span] - t)
                t = bounds[span]
                span += 1
            if importance:
                excited += _advance_integrate(zero, E, beta, K, target - t, masks[span])
            else:
                _advance(E, beta, K, target - t)
            t = target
            if t_cand > end:
                break
            if importance:
                total = _masked_cumulative(mu, E, K, masks[span], lam)
            else:
                total = _masked_cumulative(mu, E, K, none, lam)
            x = uniform(key, c) * bound
            c += 1
            if x < total:
                mark = _pick(lam, K, x)
                _jump(E, alpha, K, mark)
                n += 1
                if n > max_events:
                    status = EVENT_BUDGET
                    break
                if masks[span, mark]:
                    violated = True
                    if stop_on_violation:
                        break
        if importance:
            out_value[i] = base + excited
        else:
            out_value[i] = 1.0 if violated else 0.0
        out_events[i] = n
        out_status[i] = status


@njit
def _last_gap(mu, alpha, beta, E, K, t, masked, cutoff, key, c, max_time, lam):
    """Run the proposal that masks ``masked`` until its first event.

    Returns (masked integral, counter, status).  Stops early once the
    integral reaches ``cutoff``.
    """
    integral = 0.0
    while True:
        bound = _intensity(mu, E, K, lam)
        if bound <= 0.0:
            return integral, c, EXHAUSTED
        u = uniform(key, c)
        c += 1
        t_cand = t + (-math.log(1.0 - u)) / bound
        if t_cand > max_time:
            integral += _advance_integrate(mu, E, beta, K, max_time - t, masked)
            return integral, c, TIME_BUDGET
        integral += _advance_integrate(mu, E, beta, K, t_cand - t, masked)
        t = t_cand
        if integral >= cutoff:
            return integral, c, OK
        total = _masked_cumulative(mu, E, K, masked, lam)
        x = uniform(key, c) * bound
        c += 1
        if x < total:
            return integral, c, OK


@njit
def nth_batch(mu, alpha, beta, E0, origin, n_target, inA, importance, cutoff, win_lo, win_hi,
              seed, lo, hi, max_events, max_time, out_direct, out_complement, out_events,
              out_status):
    """n-th mark trajectories.

    importance: events 1..n-1 from the model, then two continuations from the
    same state: one masking marks outside A (direct weight), one masking A
    (complement weight).  Otherwise: indicator that the n-th event has a mark
    in A and a time in ``[win_lo, win_hi]``.
    """
    K = mu.shape[0]
    E = np.empty((K, K))
    Es = np.empty((K, K))
    lam = np.empty(K)
    notA = ~inA
    none = inA & notA
    for i in range(lo, hi):
        key = stream_key(seed, i)
        c = 0
        _copy(E, E0, K)
        t = origin
        count = 0
        status = OK
        last_mark = -1
        prefix = n_target - 1 if importance else n_target
        while count < prefix:
            bound = _intensity(mu, E, K, lam)
            if bound <= 0.0:
                status = EXHAUSTED
                break
            u = uniform(key, c)
            c += 1
            t_cand = t + (-math.log(1.0 - u)) / bound
            if t_cand > max_time:
                status = TIME_BUDGET
                break
            _advance(E, beta, K, t_cand - t)
            t = t_cand
            total = _masked_cumulative(mu, E, K, none, lam)
            x = uniform(key, c) * bound
            c += 1
            if x < total:
                last_mark = _pick(lam, K, x)
                _jump(E, alpha, K, last_mark)
                count += 1
                if count > max_events:
                    status = EVENT_BUDGET
                    break
        out_events[i] = count
        if not importance:
            hit = status == OK and inA[last_mark] and win_lo <= t <= win_hi
            out_direct[i] = 1.0 if hit else 0.0
            out_complement[i] = out_direct[i]
            out_status[i] = status
            continue
        if status != OK:
            out_direct[i] = 0.0
            out_complement[i] = 0.0
            out_status[i] = status
            continue
        _copy(Es, E, K)
        i1, c, s1 = _last_gap(mu, alpha, beta, E, K, t, notA, cutoff, key, c, max_time, lam)
        _copy(E, Es, K)
        i2, c, s2 = _last_gap(mu, alpha, beta, E, K, t, inA, cutoff, key, c, max_time, lam)
        out_direct[i] = math.exp(-i1)
        out_complement[i] = -math.expm1(-i2)
        out_status[i] = s1 if s1 != OK else s2


@njit
def first_hit_batch(mu, alpha, beta, E0, origin, inA, inB, seed, lo, hi, max_events, max_time,
                    out_value, out_events, out_status):
    """Model trajectories run until the first A or B event; 1.0 if it was in A."""
    K = mu.shape[0]
    E = np.empty((K, K))
    lam = np.empty(K)
    none = inA & ~inA
    for i in range(lo, hi):
        key = stream_key(seed, i)
        c = 0
        _copy(E, E0, K)
        t = origin
        n = 0
        status = OK
        value = 0.0
        while True:
            bound = _intensity(mu, E, K, lam)
            if bound <= 0.0:
                status = EXHAUSTED
                break
            u = uniform(key, c)
            c += 1
            t_cand = t + (-math.log(1.0 - u)) / bound
            if t_cand > max_time:
                status = TIME_BUDGET
                break
            _advance(E, beta, K, t_cand - t)
            t = t_cand
            total = _masked_cumulative(mu, E, K, none, lam)
            x = uniform(key, c) * bound
            c += 1
            if x < total:
                mark = _pick(lam, K, x)
                n += 1
                if inA[mark]:
                    value = 1.0
                    break
                if inB[mark]:
                    break
                _jump(E, alpha, K, mark)
                if n > max_events:
                    status = EVENT_BUDGET
                    break
        out_value[i] = value
        out_events[i] = n
        out_status[i] = status


@njit
def ab_batch(mu, alpha, beta, E0, origin, inA, inB, qmask, all_masked, a, b, step, stop_gap,
             seed, lo, hi, max_events, max_time, out_ia, out_ib, out_T, out_events, out_status):
    """Online A-before-B integrals along proposal trajectories.

    The proposal masks ``qmask``.  On every event-free step between grid
    points (spacing ``step`` from ``a``) and event times, the exact drop of
    the A-or-B survival factor is split between A and B in proportion to the
    trapezoid areas of ``lambda_A * S`` and ``lambda_B * S``.  Stops once the
    survival factor is at most ``stop_gap`` or ``b`` is reached.
    """
    K = mu.shape[0]
    E = np.empty((K, K))
    lam = np.empty(K)
    inAB = inA | inB
    mu_ab = 0.0
    for k in range(K):
        if inAB[k]:
            mu_ab += mu[k]
    for i in range(lo, hi):
        key = stream_key(seed, i)
        c = 0
        _copy(E, E0, K)
        t = origin
        S = 1.0
        ia = 0.0
        ib = 0.0
        n = 0
        status = OK
        if a > origin:
            S = math.exp(-_advance_integrate(mu, E, beta, K, a - origin, inAB))
            t = a
        j = 1
        done = S <= stop_gap
        while not done:
            bound = 0.0
            if all_masked:
                t_cand = math.inf
            else:
                bound = _intensity(mu, E, K, lam)
                if bound > 0.0:
                    u = uniform(key, c)
                    c += 1
                    t_cand = t + (-math.log(1.0 - u)) / bound
                else:
                    t_cand = math.inf
            while True:
                g = a + j * step
                seg_end = g
                if t_cand < seg_end:
                    seg_end = t_cand
                if b < seg_end:
                    seg_end = b
                if max_time < seg_end:
                    seg_end = max_time
                h = seg_end - t
                if h > 0.0:
                    la0, lb0 = _partial_rates(mu, E, K, inA, inB)
                    S1 = S * math.exp(-_advance_integrate(mu, E, beta, K, h, inAB))
                    la1, lb1 = _partial_rates(mu, E, K, inA, inB)
                    drop = S - S1
                    ga = la0 * S + la1 * S1
                    gb = lb0 * S + lb1 * S1
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
                    status = TIME_BUDGET
                    done = True
                    break
                if t == t_cand:
                    break
                if math.isinf(t_cand) and mu_ab == 0.0:
                    rest = 0.0
                    for k in range(K):
                        if inAB[k]:
                            for jj in range(K):
                                rest += E[k, jj] / beta[k, jj]
                    if rest < 1e-15:
                        status = EXHAUSTED
                        done = True
                        break
            if done:
                break
            total = _masked_cumulative(mu, E, K, qmask, lam)
            x = uniform(key, c) * bound
            c += 1
            if x < total:
                mark = _pick(lam, K, x)
                _jump(E, alpha, K, mark)
                n += 1
                if n > max_events:
                    status = EVENT_BUDGET
                    break
        out_ia[i] = ia
        out_ib[i] = ib
        out_T[i] = t
        out_events[i] = n
        out_status[i] = status


@njit
def welford(values):
    """One-pass mean and population variance, in index order."""
    mean = 0.0
    m2 = 0.0
    n = 0
    for v in values:
        n += 1
        d = v - mean
        mean += d / n
        m2 += d * (v - mean)
    if n == 0:
        return math.nan, math.nan
    return mean, m2 / n


def run_chunks(fn, n, workers=1, chunk=CHUNK):
    """Call ``fn(lo, hi)`` over ``[0, n)`` in fixed-size chunks, optionally threaded."""
    ranges = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    if workers <= 1 or len(ranges) <= 1:
        for lo, hi in ranges:
            fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for _ in pool.map(lambda r: fn(*r), ranges):
            pass


def _budget_args(budget):
    max_events = budget.max_events
    max_events = np.int64(max_events) if math.isfinite(max_events) else np.int64(2**62)
    return max_events, float(budget.max_time)


class HawkesArrays:
    """Model arrays plus the excitation state at the query origin."""

    def __init__(self, model, history, origin):
        mu, alpha, beta = model.kernel_arrays()
        self.mu = np.ascontiguousarray(mu, dtype=np.float64)
        self.alpha = np.ascontiguousarray(alpha, dtype=np.float64)
        self.beta = np.ascontiguousarray(beta, dtype=np.float64)
        self.E0 = np.ascontiguousarray(model.initial_excitation(history, origin), dtype=np.float64)
        self.origin = float(origin)
        self.K = self.mu.size


def restricted_values(arr: HawkesArrays, bounds, masks, importance, n, seed, budget,
                      workers=1, stop_on_violation=True):
    bounds = np.ascontiguousarray(bounds, dtype=np.float64)
    masks = np.ascontiguousarray(masks, dtype=np.bool_)
    value = np.empty(n)
    events = np.empty(n, dtype=np.int64)
    status = np.empty(n, dtype=np.int64)
    max_events, _ = _budget_args(budget)
    s = seed_arg(seed)

    def job(lo, hi):
        restricted_batch(arr.mu, arr.alpha, arr.beta, arr.E0, arr.origin, bounds, masks,
                         bool(importance), bool(stop_on_violation), s, lo, hi, max_events,
                         value, events, status)

    run_chunks(job, n, workers)
    return value, events, status


def nth_values(arr: HawkesArrays, n_target, inA, importance, n, seed, budget, workers=1,
               cutoff=-math.log(1e-6), window=(-math.inf, math.inf)):
    inA = np.ascontiguousarray(inA, dtype=np.bool_)
    direct = np.empty(n)
    complement = np.empty(n)
    events = np.empty(n, dtype=np.int64)
    status = np.empty(n, dtype=np.int64)
    max_events, max_time = _budget_args(budget)
    s = seed_arg(seed)

    def job(lo, hi):
        nth_batch(arr.mu, arr.alpha, arr.beta, arr.E0, arr.origin, np.int64(n_target), inA,
                  bool(importance), float(cutoff), float(window[0]), float(window[1]), s, lo, hi,
                  max_events, max_time, direct, complement, events, status)

    run_chunks(job, n, workers)
    return direct, complement, events, status


def first_hit_values(arr: HawkesArrays, inA, inB, n, seed, budget, workers=1):
    inA = np.ascontiguousarray(inA, dtype=np.bool_)
    inB = np.ascontiguousarray(inB, dtype=np.bool_)
    value = np.empty(n)
    events = np.empty(n, dtype=np.int64)
    status = np.empty(n, dtype=np.int64)
    max_events, max_time = _budget_args(budget)
    s = seed_arg(seed)

    def job(lo, hi):
        first_hit_batch(arr.mu, arr.alpha, arr.beta, arr.E0, arr.origin, inA, inB, s, lo, hi,
                        max_events, max_time, value, events, status)

    run_chunks(job, n, workers)
    return value, events, status


def ab_values(arr: HawkesArrays, inA, inB, n, seed, budget, workers=1, stop_gap=0.01,
              step=0.01, a=None, b=math.inf, qmask=None):
    inA = np.ascontiguousarray(inA, dtype=np.bool_)
    inB = np.ascontiguousarray(inB, dtype=np.bool_)
    if qmask is None:
        qmask = inA | inB
    qmask = np.ascontiguousarray(qmask, dtype=np.bool_)
    all_masked = bool(qmask.all())
    a = arr.origin if a is None else float(a)
    ia = np.empty(n)
    ib = np.empty(n)
    T = np.empty(n)
    events = np.empty(n, dtype=np.int64)
    status = np.empty(n, dtype=np.int64)
    max_events, max_time = _budget_args(budget)
    s = seed_arg(seed)

    def job(lo, hi):
        ab_batch(arr.mu, arr.alpha, arr.beta, arr.E0, arr.origin, inA, inB, qmask, all_masked,
                 a, float(b), float(step), float(stop_gap), s, lo, hi, max_events, max_time,
                 ia, ib, T, events, status)

    run_chunks(job, n, workers)
    return ia, ib, T, events, status


def summarize(values) -> tuple[float, float]:
    mean, var = welford(np.ascontiguousarray(values, dtype=np.float64))
    return float(mean), float(var)


__all__ = ["JIT_ENABLED", "HawkesArrays", "restricted_values", "nth_values",
           "first_hit_values", "ab_values", "summarize", "run_chunks"]
