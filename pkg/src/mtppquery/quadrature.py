"""Trapezoidal rule on fixed grids and an online accumulator for survival factors."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_POINTS = 1000


class NonFiniteIntegrand(ValueError):
    pass


class NonMonotonicTime(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a grid needs at least two points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, a: float, b: float, n: int) -> "Grid":
        if n < 2:
            raise ValueError("n must be at least 2")
        if not a < b:
            raise ValueError("uniform grid needs a < b")
        pts = np.linspace(a, b, n)
        pts[0], pts[-1] = a, b
        return cls(pts)

    @property
    def count(self) -> int:
        return self.points.size


def union_grid(a: float, b: float, n: int, extra=()) -> np.ndarray:
    """Regular ``n``-point grid on ``[a, b]`` merged with ``extra`` points inside it."""
    pts = np.linspace(a, b, n)
    extra = np.asarray(list(extra), dtype=np.float64)
    if extra.size:
        extra = extra[(extra > a) & (extra < b)]
        pts = np.union1d(pts, extra)
    return pts


def trapezoid_values(xs, ys) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if not np.all(np.isfinite(ys)):
        raise NonFiniteIntegrand("integrand is not finite on the grid")
    total = 0.0
    for i in range(1, xs.size):
        total += (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]) / 2.0
    return total


def trapezoid(f, a: float, b: float, n: int = DEFAULT_POINTS, vectorized: bool = False) -> float:
    """Composite trapezoidal rule for ``f`` on ``n`` equally spaced points of ``[a, b]``."""
    if a > b:
        raise ValueError(f"a={a} > b={b}")
    if n < 2:
        raise ValueError("n must be at least 2")
    if a == b:
        return 0.0
    xs = np.linspace(a, b, n)
    xs[0], xs[-1] = a, b
    if vectorized:
        ys = np.asarray(f(xs), dtype=np.float64)
    else:
        ys = np.array([f(x) for x in xs.tolist()], dtype=np.float64)
    return trapezoid_values(xs, ys)


@dataclass(frozen=True)
class OnlineAccumulator:
    """Running integral of a sampled integrand and its survival factor ``exp(-integral)``."""

    t: float
    f: float
    integral: float = 0.0

    @property
    def exp_factor(self) -> float:
        return math.exp(-self.integral)


def accumulate_exp_integral(acc: OnlineAccumulator, t_next: float, f_next: float,
                            increment: float | None = None) -> OnlineAccumulator:
    """Advance ``acc`` to ``t_next``.

    The step adds the trapezoid area between the last and next samples, or
    ``increment`` when the caller knows the exact integral over the step.
    """
    if t_next < acc.t:
        raise NonMonotonicTime(f"t_next={t_next} precedes t={acc.t}")
    if not math.isfinite(f_next):
        raise NonFiniteIntegrand(f"integrand value {f_next} at t={t_next}")
    if increment is None:
        increment = (acc.f + f_next) * (t_next - acc.t) / 2.0
    return OnlineAccumulator(t_next, f_next, acc.integral + increment)
