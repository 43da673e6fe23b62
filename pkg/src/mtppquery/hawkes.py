"""Multivariate exponential-kernel Hawkes and homogeneous Poisson models."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import EventSequence, IntensityModel, InvalidInterval

STABILITY_CAP = 0.95


class TimeBeforeHistory(ValueError):
    pass


class BadArgument(ValueError):
    pass


class ModelConfigError(ValueError):
    pass


def _readonly(x, shape=None):
    arr = np.array(x, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise BadArgument(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def branching_radius(alpha, beta) -> float:
    """Spectral radius of the mean-offspring matrix ``alpha / beta``."""
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(alpha) / np.asarray(beta)))))


@dataclass(frozen=True, eq=False)
class HawkesParams:
    """``alpha[k, j]`` is the jump in mark ``k``'s intensity caused by a mark-``j`` event."""

    mu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        mu = _readonly(self.mu)
        if mu.ndim != 1 or mu.size < 1:
            raise BadArgument("mu must be a non-empty vector")
        K = mu.size
        alpha = _readonly(self.alpha, (K, K))
        beta = _readonly(self.beta, (K, K))
        if np.any(mu < 0) or not np.all(np.isfinite(mu)):
            raise BadArgument("mu must be finite and non-negative")
        if np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
            raise BadArgument("alpha must be finite and non-negative")
        if np.any(beta <= 0) or not np.all(np.isfinite(beta)):
            raise BadArgument("beta must be finite and positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def mark_count(self) -> int:
        return self.mu.size

    @property
    def radius(self) -> float:
        return branching_radius(self.alpha, self.beta)

    @property
    def stable(self) -> bool:
        return self.radius < 1.0


@dataclass(frozen=True, eq=False)
class PoissonParams:
    rates: np.ndarray

    def __post_init__(self):
        rates = _readonly(self.rates)
        if rates.ndim != 1 or rates.size < 1:
            raise BadArgument("rates must be a non-empty vector")
        if np.any(rates < 0) or not np.all(np.isfinite(rates)):
            raise BadArgument("rates must be finite and non-negative")
        object.__setattr__(self, "rates", rates)

    @property
    def mark_count(self) -> int:
        return self.rates.size


class ExcitationState:
    """Per-(k, j) excitation ``sum alpha e^{-beta (t - tau)}`` carried forward in time.

    ``values`` at ``time`` includes every event added at or before ``time``.
    One instance belongs to a single trajectory.
    """

    def __init__(self, params: HawkesParams, time: float = 0.0):
        self.params = params
        self.time = float(time)
        self.values = np.zeros_like(params.alpha)

    @classmethod
    def from_history(cls, params: HawkesParams, history: EventSequence, time: float):
        state = cls(params, time)
        state.values = excitation_at(params, history, time)
        return state

    def advance(self, t: float) -> None:
        if t < self.time:
            raise TimeBeforeHistory(f"cannot move state back from {self.time} to {t}")
        self.values = self.values * np.exp(-self.params.beta * (t - self.time))
        self.time = float(t)

    def add_event(self, t: float, mark: int) -> None:
        self.advance(t)
        self.values[:, mark] += self.params.alpha[:, mark]

    def intensity(self) -> np.ndarray:
        return self.params.mu + self.values.sum(axis=1)


def excitation_at(params: HawkesParams, history: EventSequence, t: float,
                  inclusive: bool = True) -> np.ndarray:
    """Excitation matrix at ``t`` from history events at ``<= t`` (``< t`` if not inclusive)."""
    times, marks = history.times, history.marks
    keep = times <= t if inclusive else times < t
    times, marks = times[keep], marks[keep]
    K = params.mark_count
    out = np.zeros((K, K))
    if times.size == 0:
        return out
    a = params.alpha[:, marks]
    b = params.beta[:, marks]
    contrib = a * np.exp(-b * (t - times))
    np.add.at(out.T, marks, contrib.T)
    return out


def _check_time(t, history):
    if len(history) and t < history.times[-1]:
        raise TimeBeforeHistory(f"t={t} precedes last history event {history.times[-1]}")


def hawkes_intensity(params: HawkesParams, t: float, history: EventSequence) -> np.ndarray:
    _check_time(t, history)
    return params.mu + excitation_at(params, history, t, inclusive=False).sum(axis=1)


def hawkes_compensator(params: HawkesParams, a: float, b: float,
                       history: EventSequence, markset=None) -> float:
    if a > b:
        raise InvalidInterval(f"a={a} > b={b}")
    if a == b:
        return 0.0
    sel = _selector(params.mark_count, markset)
    E = excitation_at(params, history, a)
    beta = params.beta[sel]
    decayed = -np.expm1(-beta * (b - a))
    total = params.mu[sel].sum() * (b - a) + float(np.sum(E[sel] / beta * decayed))
    return max(total, 0.0)


def hawkes_thinning_bound(params: HawkesParams, t: float, history: EventSequence):
    # Exponential kernels only decay between events, so the current total
    # intensity (including any event at exactly t) bounds the future until
    # the next accepted event.
    _check_time(t, history)
    lam = params.mu + excitation_at(params, history, t, inclusive=True).sum(axis=1)
    return float(lam.sum()), math.inf


def _selector(K, markset):
    if markset is None:
        return np.ones(K, dtype=np.bool_)
    from .core import as_markset
    return as_markset(markset).mask(K)


class HawkesModel(IntensityModel):
    def __init__(self, params: HawkesParams):
        self.params = params
        self.mark_count = params.mark_count

    @classmethod
    def from_arrays(cls, mu, alpha, beta) -> "HawkesModel":
        return cls(HawkesParams(mu, alpha, beta))

    def intensity(self, t, history):
        return hawkes_intensity(self.params, t, history)

    def intensity_after(self, t, history):
        _check_time(t, history)
        return self.params.mu + excitation_at(self.params, history, t).sum(axis=1)

    def compensator(self, a, b, history, markset=None):
        return hawkes_compensator(self.params, a, b, history, markset)

    def thinning_bound(self, t, history):
        return hawkes_thinning_bound(self.params, t, history)

    def kernel_arrays(self):
        p = self.params
        return p.mu, p.alpha, p.beta

    def initial_excitation(self, history: EventSequence, origin: float) -> np.ndarray:
        return excitation_at(self.params, history, origin)

    def to_json(self) -> dict:
        p = self.params
        return {"type": "hawkes", "mu": p.mu.tolist(), "alpha": p.alpha.tolist(),
                "beta": p.beta.tolist()}

    def __repr__(self):
        return f"HawkesModel(K={self.mark_count}, radius={self.params.radius:.3f})"


class PoissonModel(IntensityModel):
    def __init__(self, params: PoissonParams):
        self.params = params
        self.mark_count = params.mark_count

    @classmethod
    def from_rates(cls, rates) -> "PoissonModel":
        return cls(PoissonParams(rates))

    def intensity(self, t, history):
        return self.params.rates.copy()

    def compensator(self, a, b, history, markset=None):
        if a > b:
            raise InvalidInterval(f"a={a} > b={b}")
        sel = _selector(self.mark_count, markset)
        return float(self.params.rates[sel].sum()) * (b - a)

    def thinning_bound(self, t, history):
        return float(self.params.rates.sum()), math.inf

    def kernel_arrays(self):
        K = self.mark_count
        return self.params.rates, np.zeros((K, K)), np.ones((K, K))

    def initial_excitation(self, history, origin):
        return np.zeros((self.mark_count, self.mark_count))

    def to_json(self) -> dict:
        return {"type": "poisson", "rates": self.params.rates.tolist()}

    def __repr__(self):
        return f"PoissonModel(rates={self.params.rates.tolist()})"


def random_hawkes(K: int, interaction_strength: float, seed: int,
                  mu_range=(0.1, 1.0), beta_range=(1.0, 3.0),
                  cap: float = STABILITY_CAP) -> HawkesParams:
    """Random stable Hawkes parameters, deterministic in ``seed``.

    ``alpha`` entries are ``interaction_strength * U(0, 1)``; if the branching
    radius reaches ``cap`` the whole matrix is scaled down to exactly ``cap``.
    """
    if K < 1:
        raise BadArgument("K must be at least 1")
    if interaction_strength < 0:
        raise BadArgument("interaction_strength must be non-negative")
    rng = np.random.default_rng(seed)
    mu = rng.uniform(*mu_range, size=K)
    beta = rng.uniform(*beta_range, size=(K, K))
    alpha = interaction_strength * rng.uniform(0.0, 1.0, size=(K, K))
    if interaction_strength > 0:
        radius = branching_radius(alpha, beta)
        if radius >= cap:
            alpha = alpha * (cap / radius)
    return HawkesParams(mu, alpha, beta)


def model_from_json(obj: dict) -> IntensityModel:
    try:
        kind = obj["type"]
        if kind == "hawkes":
            return HawkesModel(HawkesParams(obj["mu"], obj["alpha"], obj["beta"]))
        if kind == "poisson":
            return PoissonModel(PoissonParams(obj["rates"]))
    except (KeyError, TypeError, BadArgument) as exc:
        raise ModelConfigError(f"bad model config: {exc}") from exc
    raise ModelConfigError(f"unknown model type {obj.get('type')!r}")


def load_model(path) -> IntensityModel:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelConfigError(f"{path}: {exc}") from exc
    return model_from_json(obj)


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh)
