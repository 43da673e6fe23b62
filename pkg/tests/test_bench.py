import math

import pytest

from mtppquery import HawkesModel, PoissonModel, random_hawkes
from mtppquery.bench import (BenchRecord, ConfigError, DegenerateTruth, ExperimentConfig,
                             ground_truth, interaction_sweep, mean_rae, read_csv,
                             relative_efficiency, run_experiment, write_outputs)
from mtppquery.queries import HittingTimeCdf


def test_relative_efficiency_examples():
    assert relative_efficiency(0.5, 0.25) == pytest.approx(1.0)
    assert relative_efficiency(0.5, 0.025) == pytest.approx(10.0)
    assert relative_efficiency(0.3, 0.0) == math.inf


@pytest.mark.parametrize("truth", [0.0, 1.0])
def test_relative_efficiency_degenerate(truth):
    with pytest.raises(DegenerateTruth):
        relative_efficiency(truth, 0.1)


def test_mean_rae_skips_zero_truth():
    recs = [
        BenchRecord("a", "naive", 2, 0.5, 0.25, 0.0),
        BenchRecord("b", "naive", 2, 0.1, 0.2, 0.0),
        BenchRecord("c", "naive", 2, 0.3, 0.0, 0.0),
        BenchRecord("a", "truth", 10, 0.25, 0.25, 0.0),
    ]
    table, excluded = mean_rae(recs)
    assert table == {("naive", 2): pytest.approx(0.75)}
    assert excluded == 1


def test_ground_truth_poisson():
    model = PoissonModel.from_rates([0.5, 1.5])
    res = ground_truth(model, HittingTimeCdf([0], 2.0), n_samples=100)
    assert res.value == pytest.approx(1 - math.exp(-1.0), rel=1e-14)


def _tiny(tmp_path, **kw):
    cfg = dict(model={"random_hawkes": {"K": 3, "strength": 0.8, "count": 1}},
               queries={"type": "hitting_time", "count": 2, "t_range": [0.5, 2.0]},
               ladder=[2, 4], truth_samples=200, seed=3)
    cfg.update(kw)
    return ExperimentConfig.from_json(cfg)


def test_tiny_config_row_accounting(tmp_path):
    records, summary = run_experiment(_tiny(tmp_path))
    est = [r for r in records if r.estimator != "truth"]
    truth = [r for r in records if r.estimator == "truth"]
    assert len(est) == 2 * 2 * 2
    assert len(truth) == 2
    assert set(summary["mean_rae"]) == {"naive", "importance"}
    assert all(r.wall_ns is None for r in records)


def test_rerun_gives_identical_csv(tmp_path):
    paths = []
    for sub in ("a", "b"):
        records, summary = run_experiment(_tiny(tmp_path))
        paths.append(write_outputs(records, summary, tmp_path / sub)[0])
    assert paths[0].read_bytes() == paths[1].read_bytes()
    back = read_csv(paths[0])
    assert back[0].query_id == "m0-q0"


def test_workers_do_not_change_results(tmp_path):
    r1, _ = run_experiment(_tiny(tmp_path, workers=1))
    r4, _ = run_experiment(_tiny(tmp_path, workers=4))
    assert [r.row() for r in r1] == [r.row() for r in r4]


def test_timing_fills_wall_ns(tmp_path):
    records, _ = run_experiment(_tiny(tmp_path, timing=True))
    assert all(r.wall_ns > 0 for r in records if r.estimator != "truth")


def test_config_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json({"model": {}, "queries": {}, "ladder": [0]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json({"model": {}, "queries": {}, "bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json({"model": {}, "queries": {}, "ladder": [10],
                                    "truth_samples": 10})


def test_hitting_batch_median_efficiency_above_one():
    cfg = ExperimentConfig.from_json(dict(
        model={"random_hawkes": {"K": 4, "strength": 1.0, "count": 3}},
        queries={"type": "hitting_time", "count": 3, "t_range": [0.5, 3.0]},
        ladder=[50, 200], truth_samples=2000, seed=11))
    _, summary = run_experiment(cfg)
    assert summary["median_efficiency"] == "inf" or summary["median_efficiency"] > 1


def test_sweep_shapes():
    res = interaction_sweep(3, [0.0, 0.5], 2, samples_per_model=20)
    assert len(res.rows) == 4
    assert [row["strength"] for row in res.table()] == [0.0, 0.5]
    assert all(r.naive_ns > 0 and r.restricted_ns > 0 for r in res.rows)
    assert -1.0 <= res.spearman_rho <= 1.0


def test_sweep_rejects_negative_strength():
    with pytest.raises(ValueError):
        interaction_sweep(3, [-0.1], 1)


def test_random_models_in_config_are_stable():
    for i in range(5):
        assert HawkesModel(random_hawkes(6, 3.0, i)).params.radius < 1
