"""Experiment harness: ground truth, error curves, relative efficiency and timing sweeps."""
from __future__ import annotations

import csv
import json
import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import kernels
from .core import EventSequence, RestrictionSchedule
from .hawkes import HawkesModel, ModelConfigError, load_model, model_from_json, random_hawkes
from .queries import (ABeforeB, HittingTimeCdf, InvalidQuery, NthMark, RestrictedMark,
                      estimate, importance_estimate, naive_estimate, query_from_json)
from .sampling import DEFAULT_BUDGET, RngStream, sample_until_nth_event

DEFAULT_LADDER = (2, 4, 10, 25, 50, 250, 1000)
CSV_FIELDS = ["query_id", "estimator", "n_samples", "estimate", "truth", "variance",
              "efficiency", "wall_ns", "seed"]


class DegenerateTruth(ValueError):
    pass


class ConfigError(ValueError):
    pass


def derive_seed(*parts: int) -> int:
    """Deterministic 63-bit seed from a master seed and integer coordinates."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass
class ExperimentConfig:
    """JSON-serializable experiment description.

    ``model`` is either ``{"file": path}``, an inline model object
    (``{"type": "hawkes", ...}``), or ``{"random_hawkes": {"K": .., "strength": ..,
    "count": ..}}``.  ``queries`` describes how queries are drawn per model.
    """

    model: dict
    queries: dict
    ladder: list = field(default_factory=lambda: list(DEFAULT_LADDER))
    truth_samples: int = 5000
    repetitions: int = 1
    seed: int = 0
    workers: int = 1
    timing: bool = False
    condition_events: int = 0

    def __post_init__(self):
        self.ladder = [int(n) for n in self.ladder]
        if not self.ladder or min(self.ladder) < 1:
            raise ConfigError("ladder needs positive sample counts")
        if max(self.ladder) >= self.truth_samples:
            raise ConfigError("ladder entries must be below truth_samples")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")

    @classmethod
    def from_json(cls, obj: dict, base_dir=None) -> "ExperimentConfig":
        try:
            cfg = cls(**obj)
        except TypeError as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc
        if base_dir is not None and "file" in cfg.model:
            path = Path(cfg.model["file"])
            if not path.is_absolute():
                cfg.model = {**cfg.model, "file": str(Path(base_dir) / path)}
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_json(obj, Path(path).parent)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BenchRecord:
    query_id: str
    estimator: str
    n_samples: int
    estimate: float
    truth: float
    variance: float
    efficiency: float | None = None
    wall_ns: int | None = None
    seed: int = 0

    def row(self) -> dict:
        out = asdict(self)
        for key in ("efficiency", "wall_ns"):
            if out[key] is None or (isinstance(out[key], float) and not math.isfinite(out[key])):
                out[key] = ""
        out["estimate"] = repr(float(self.estimate))
        out["truth"] = repr(float(self.truth))
        out["variance"] = repr(float(self.variance))
        if out["efficiency"] != "":
            out["efficiency"] = repr(float(out["efficiency"]))
        return out


# ---------------------------------------------------------------- metrics

def relative_efficiency(truth: float, imp_variance: float) -> float:
    """Naive per-sample variance ``truth * (1 - truth)`` over the importance variance.

    A zero importance variance gives ``inf``.
    """
    if not 0.0 < truth < 1.0:
        raise DegenerateTruth(f"truth {truth} has no Bernoulli variance")
    if imp_variance < 0:
        raise ValueError("variance must be non-negative")
    if imp_variance == 0:
        return math.inf
    return truth * (1.0 - truth) / imp_variance


def mean_rae(records) -> tuple[dict, int]:
    """Mean ``|truth - estimate| / truth`` per ``(estimator, n_samples)``.

    Rows with zero truth (and truth rows themselves) are skipped; the number
    of skipped zero-truth rows is returned alongside the table.
    """
    sums: dict = {}
    excluded = 0
    for r in records:
        if r.estimator == "truth":
            continue
        if r.truth <= 0:
            excluded += 1
            continue
        key = (r.estimator, r.n_samples)
        s, c = sums.get(key, (0.0, 0))
        sums[key] = (s + abs(r.truth - r.estimate) / r.truth, c + 1)
    return {k: s / c for k, (s, c) in sorted(sums.items())}, excluded


# ---------------------------------------------------------------- ground truth

def ground_truth(model, spec, history=None, origin=None, n_samples: int = 5000, seed: int = 0,
                 workers: int = 1):
    """High-sample unbiased estimate: importance sampling, or naive for A-before-B."""
    if isinstance(spec, ABeforeB):
        return naive_estimate(model, spec, history, origin, n_samples=n_samples, seed=seed,
                              workers=workers)
    return importance_estimate(model, spec, history, origin, n_samples=n_samples, seed=seed,
                               workers=workers)


# ---------------------------------------------------------------- experiment driver

def _models(cfg: ExperimentConfig):
    spec = cfg.model
    if "random_hawkes" in spec:
        r = spec["random_hawkes"]
        try:
            K, strength = int(r["K"]), float(r["strength"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"random_hawkes needs K and strength: {exc}") from exc
        kw = {k: tuple(r[k]) for k in ("mu_range", "beta_range") if k in r}
        return [HawkesModel(random_hawkes(K, strength, derive_seed(cfg.seed, 1, i), **kw))
                for i in range(int(r.get("count", 1)))]
    try:
        if "file" in spec:
            return [load_model(spec["file"])]
        return [model_from_json(spec)]
    except (OSError, ModelConfigError) as exc:
        raise ConfigError(str(exc)) from exc


def _condition(model, cfg, mi):
    if cfg.condition_events <= 0:
        return EventSequence.empty(), 0.0
    rng = RngStream(derive_seed(cfg.seed, 2, mi))
    prefix = sample_until_nth_event(model, 0.0, cfg.condition_events, rng=rng)
    return prefix, float(prefix.times[-1])


def draw_queries(model, origin: float, qspec: dict, seed: int):
    """Random queries for one model according to ``qspec``.

    ``qspec`` keys: ``type`` (hitting_time, nth_mark, a_before_b, restricted,
    or ``fixed`` with a ``query`` object), ``count``, ``set_size``,
    ``t_range`` (offsets from origin), ``n_range`` and ``precision``.
    """
    K = model.mark_count
    rng = np.random.default_rng(seed)
    kind = qspec.get("type", "hitting_time")
    count = int(qspec.get("count", 1))
    size = int(qspec.get("set_size", 1))
    lo, hi = qspec.get("t_range", [1.0, 5.0])
    out = []
    for _ in range(count):
        if kind == "fixed":
            out.append(query_from_json(qspec["query"])[0])
        elif kind == "hitting_time":
            A = rng.choice(K, size=min(size, K), replace=False)
            out.append(HittingTimeCdf(A.tolist(), origin + float(rng.uniform(lo, hi))))
        elif kind == "nth_mark":
            n_lo, n_hi = qspec.get("n_range", [1, 5])
            n = int(rng.integers(n_lo, n_hi + 1))
            A = rng.choice(K, size=min(size, K), replace=False)
            out.append(NthMark(n, A.tolist()))
        elif kind == "a_before_b":
            if K < 2:
                raise ConfigError("a_before_b queries need at least two marks")
            size = min(size, K // 2)
            perm = rng.permutation(K)
            out.append(ABeforeB(perm[:size].tolist(), perm[size:2 * size].tolist(),
                                qspec.get("precision", 0.01)))
        elif kind == "restricted":
            spans = int(qspec.get("spans", 2))
            cuts = np.sort(rng.uniform(lo, hi, size=spans))
            sets = [rng.choice(K, size=min(size, K), replace=False).tolist()
                    for _ in range(spans)]
            out.append(RestrictedMark(RestrictionSchedule((origin + cuts).tolist(), sets)))
        else:
            raise ConfigError(f"unknown query type {kind!r}")
    return out


def _timed(fn):
    t0 = time.perf_counter_ns()
    res = fn()
    return res, time.perf_counter_ns() - t0


def run_experiment(cfg: ExperimentConfig):
    """Run ``cfg`` and return ``(records, summary)``."""
    records: list[BenchRecord] = []
    efficiencies = []
    for mi, model in enumerate(_models(cfg)):
        history, origin = _condition(model, cfg, mi)
        queries = draw_queries(model, origin, cfg.queries, derive_seed(cfg.seed, 3, mi))
        for qi, spec in enumerate(queries):
            qid = f"m{mi}-q{qi}"
            tseed = derive_seed(cfg.seed, 4, mi, qi)
            truth_res, _ = _timed(lambda: ground_truth(model, spec, history, origin,
                                                       cfg.truth_samples, tseed, cfg.workers))
            truth = truth_res.value
            records.append(BenchRecord(qid, "truth", cfg.truth_samples, truth, truth,
                                       truth_res.variance, None, None, tseed))
            top = None
            for rep in range(cfg.repetitions):
                for n in cfg.ladder:
                    seed = derive_seed(cfg.seed, 5, mi, qi, rep, n)
                    for method in ("naive", "importance"):
                        res, ns = _timed(lambda: estimate(model, spec, method, history=history,
                                                          origin=origin, n_samples=n, seed=seed,
                                                          workers=cfg.workers))
                        eff = None
                        if method == "importance" and 0.0 < truth < 1.0:
                            eff = relative_efficiency(truth, res.variance)
                            if rep == 0 and n == max(cfg.ladder):
                                top = eff
                        records.append(BenchRecord(qid, method, n, res.value, truth,
                                                   res.variance, eff,
                                                   ns if cfg.timing else None, seed))
            if top is not None:
                efficiencies.append(top)
    return records, summarize_records(records, efficiencies, cfg)


def summarize_records(records, efficiencies, cfg: ExperimentConfig | None = None) -> dict:
    rae, excluded = mean_rae(records)
    table: dict = {}
    for (est, n), v in rae.items():
        table.setdefault(est, {})[str(n)] = v
    finite = [e for e in efficiencies if math.isfinite(e)]
    inf_count = len(efficiencies) - len(finite)
    if efficiencies:
        ordered = sorted(efficiencies)
        median = ordered[len(ordered) // 2] if len(ordered) % 2 else (
            0.5 * (ordered[len(ordered) // 2 - 1] + ordered[len(ordered) // 2]))
    else:
        median = None
    return {
        "queries": len({r.query_id for r in records}),
        "mean_rae": table,
        "zero_truth_rows": excluded,
        "median_efficiency": median if median is None or math.isfinite(median) else "inf",
        "efficiency_above_one": sum(e > 1 for e in efficiencies),
        "infinite_efficiency": inf_count,
        "config": cfg.to_json() if cfg else None,
    }


def write_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow(r.row())


def read_csv(path) -> list[BenchRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(BenchRecord(
                row["query_id"], row["estimator"], int(row["n_samples"]), float(row["estimate"]),
                float(row["truth"]), float(row["variance"]),
                float(row["efficiency"]) if row["efficiency"] else None,
                int(row["wall_ns"]) if row["wall_ns"] else None, int(row["seed"])))
    return out


def write_outputs(records, summary, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / "results.csv", out / "summary.json"
    write_csv(records, csv_path)
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


# ---------------------------------------------------------------- timing sweep

@dataclass(frozen=True)
class SweepRow:
    strength: float
    model_index: int
    naive_ns: float
    restricted_ns: float
    naive_events: float
    restricted_events: float

    @property
    def ratio(self) -> float:
        return self.naive_ns / self.restricted_ns


@dataclass
class SweepResult:
    rows: list
    spearman_rho: float
    p_value: float

    def table(self) -> list[dict]:
        """Per-strength means and medians of per-sample times (nanoseconds)."""
        out = []
        for s in sorted({r.strength for r in self.rows}):
            rs = [r for r in self.rows if r.strength == s]
            out.append({
                "strength": s,
                "naive_mean_ns": statistics.fmean(r.naive_ns for r in rs),
                "naive_median_ns": statistics.median(r.naive_ns for r in rs),
                "restricted_mean_ns": statistics.fmean(r.restricted_ns for r in rs),
                "restricted_median_ns": statistics.median(r.restricted_ns for r in rs),
                "ratio_median": statistics.median(r.ratio for r in rs),
            })
        return out


def interaction_sweep(K: int, strengths, models_per_point: int, query=None, seed: int = 0,
                      samples_per_model: int = 200, window: float = 5.0) -> SweepResult:
    """Per-sample wall time of naive vs restricted sampling across interaction strengths.

    ``query`` is a :class:`HittingTimeCdf` or :class:`RestrictedMark` relative to
    origin 0 (default: hitting time of mark 0 at ``window``).  Naive runs
    simulate the whole window; restricted runs sample the masked proposal.
    Timing is single-threaded.  The rank correlation between strength and the
    naive/restricted ratio is returned with its one-sided p-value.
    """
    if any(s < 0 for s in strengths):
        raise ValueError("strengths must be non-negative")
    if query is None:
        query = HittingTimeCdf([0], window)
    if isinstance(query, HittingTimeCdf):
        schedule = RestrictionSchedule.single(query.t, query.A)
    elif isinstance(query, RestrictedMark):
        schedule = query.schedule
    else:
        raise InvalidQuery("timing sweep supports hitting-time and restricted queries")
    rows = []
    warm = None
    for si, s in enumerate(strengths):
        for m in range(models_per_point):
            model = HawkesModel(random_hawkes(K, s, derive_seed(seed, 6, si, m)))
            arr = kernels.HawkesArrays(model, EventSequence.empty(), 0.0)
            masks = schedule.masks(K)
            if warm is None:
                for imp in (False, True):
                    kernels.restricted_values(arr, schedule.boundaries, masks, imp, 2, 0,
                                              DEFAULT_BUDGET, 1, False)
                warm = True
            sd = derive_seed(seed, 7, si, m)
            (_, ev_n, _), t_naive = _timed(lambda: kernels.restricted_values(
                arr, schedule.boundaries, masks, False, samples_per_model, sd, DEFAULT_BUDGET,
                1, False))
            (_, ev_r, _), t_imp = _timed(lambda: kernels.restricted_values(
                arr, schedule.boundaries, masks, True, samples_per_model, sd, DEFAULT_BUDGET,
                1, False))
            rows.append(SweepRow(float(s), m, t_naive / samples_per_model,
                                 t_imp / samples_per_model, float(ev_n.mean()),
                                 float(ev_r.mean())))
    res = stats.spearmanr([r.strength for r in rows], [r.ratio for r in rows])
    rho = float(res.statistic)
    p_two = float(res.pvalue)
    p_one = p_two / 2 if rho > 0 else 1 - p_two / 2
    return SweepResult(rows, rho, p_one)


__all__ = ["ExperimentConfig", "BenchRecord", "DegenerateTruth", "ConfigError",
           "relative_efficiency", "mean_rae", "ground_truth", "run_experiment",
           "interaction_sweep", "write_outputs", "write_csv", "read_csv", "draw_queries",
           "derive_seed", "SweepResult"]
