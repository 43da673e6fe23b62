import json
import math

import pytest

from mtppquery.cli import main


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def poisson_file(tmp_path):
    return _write(tmp_path / "poisson.json", {"type": "poisson", "rates": [0.5, 2.0]})


@pytest.fixture
def hawkes_file(tmp_path):
    return _write(tmp_path / "hawkes.json", {"type": "hawkes", "mu": [0.4, 0.3],
                                             "alpha": [[0.5, 0.2], [0.3, 0.4]],
                                             "beta": [[2.0, 2.0], [2.0, 2.0]]})


def test_simulate_poisson_lines(tmp_path, poisson_file):
    out = tmp_path / "s.jsonl"
    assert main(["simulate", "--model", poisson_file, "--horizon", "10", "-n", "100",
                 "--seed", "4", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 100
    for line in lines:
        seq = json.loads(line)
        times = [e["t"] for e in seq["events"]]
        assert times == sorted(times) and all(0 <= t <= 10 for t in times)


def test_simulate_is_byte_identical(tmp_path, hawkes_file):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.jsonl"
        main(["simulate", "--model", hawkes_file, "--horizon", "5", "-n", "20", "--seed", "9",
              "--out", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_simulate_zero_rate(tmp_path):
    model = _write(tmp_path / "z.json", {"type": "poisson", "rates": [0.0, 0.0]})
    out = tmp_path / "z.jsonl"
    assert main(["simulate", "--model", model, "--horizon", "10", "-n", "100",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 100
    assert all(json.loads(line)["events"] == [] for line in lines)


def test_simulate_budget_exit(tmp_path, poisson_file, capsys):
    out = tmp_path / "b.jsonl"
    code = main(["simulate", "--model", poisson_file, "--horizon", "100", "-n", "2",
                 "--max-events", "5", "--out", str(out)])
    assert code == 3
    assert all(json.loads(line)["partial"] for line in out.read_text().splitlines())
    assert "trajectory" in capsys.readouterr().err


def test_simulate_bad_horizon(poisson_file):
    assert main(["simulate", "--model", poisson_file, "--horizon", "0"]) == 2


def test_query_poisson_hitting(tmp_path, poisson_file, capsys):
    q = _write(tmp_path / "q.json", {"type": "hitting_time", "A": [1], "t": 0.7})
    assert main(["query", "--model", poisson_file, "--query", q]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["value"] == pytest.approx(1 - math.exp(-2.0 * 0.7), rel=1e-14)
    assert res["std_error"] == 0.0
    assert res["method"] == "importance"
    assert res["n_samples"] == 1000


def test_query_methods_agree(tmp_path, hawkes_file, capsys):
    q = _write(tmp_path / "q.json", {"type": "hitting_time", "A": [0], "t": 1.5})
    out = {}
    for method in ("importance", "naive"):
        assert main(["query", "--model", hawkes_file, "--query", q, "--method", method,
                     "--samples", "20000", "--seed", "2"]) == 0
        out[method] = json.loads(capsys.readouterr().out)
    se = math.hypot(out["importance"]["std_error"], out["naive"]["std_error"])
    assert abs(out["importance"]["value"] - out["naive"]["value"]) < 4 * se


def test_query_a_before_b_fields(tmp_path, hawkes_file, capsys):
    q = _write(tmp_path / "q.json", {"type": "a_before_b", "A": [0], "B": [1]})
    assert main(["query", "--model", hawkes_file, "--query", q, "--samples", "200",
                 "--precision", "0.005"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["lower_bound"] <= res["value"] <= res["upper_bound"]
    assert res["max_residual_gap"] <= 0.005


def test_query_with_condition(tmp_path, hawkes_file, capsys):
    q = _write(tmp_path / "q.json", {"type": "hitting_time", "A": [1], "t": 2.0})
    c = _write(tmp_path / "c.json", {"events": [{"t": 0.5, "k": 0}, {"t": 1.0, "k": 0}]})
    assert main(["query", "--model", hawkes_file, "--query", q, "--condition", c,
                 "--samples", "100"]) == 0
    assert 0 < json.loads(capsys.readouterr().out)["value"] < 1


def test_query_overlap_exit(tmp_path, poisson_file, capsys):
    q = _write(tmp_path / "q.json", {"type": "a_before_b", "A": [0, 1], "B": [1]})
    assert main(["query", "--model", poisson_file, "--query", q]) == 4
    captured = capsys.readouterr()
    assert captured.out == "" and "error" in captured.err


@pytest.mark.parametrize("query", [
    {"type": "hitting_time", "A": [5], "t": 1.0},
    {"type": "nth_mark", "n": 0, "A": [0]},
    {"type": "mystery"},
    {"A": [0]},
])
def test_query_invalid_exit(tmp_path, poisson_file, query):
    q = _write(tmp_path / "q.json", query)
    assert main(["query", "--model", poisson_file, "--query", q]) == 2


def test_missing_model_exit(tmp_path):
    q = _write(tmp_path / "q.json", {"type": "hitting_time", "A": [0], "t": 1.0})
    assert main(["query", "--model", str(tmp_path / "nope.json"), "--query", q]) == 2


def test_bench_writes_outputs(tmp_path, capsys):
    cfg = _write(tmp_path / "cfg.json", {
        "model": {"random_hawkes": {"K": 3, "strength": 0.5, "count": 1}},
        "queries": {"type": "hitting_time", "count": 2},
        "ladder": [2, 4], "truth_samples": 100, "seed": 1})
    out = tmp_path / "out"
    assert main(["bench", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "results.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 2 * 2 + 2
    summary = json.loads((out / "summary.json").read_text())
    assert "mean_rae" in summary
    echoed = json.loads(capsys.readouterr().out)
    assert set(echoed) == {"mean_rae", "median_efficiency"}


def test_bench_bad_config(tmp_path):
    cfg = _write(tmp_path / "cfg.json", {"model": {}, "queries": {}, "ladder": []})
    assert main(["bench", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
