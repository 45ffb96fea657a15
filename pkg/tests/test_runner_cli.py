import csv
import json

import numpy as np
import pytest

from ucbd3.cli import main
from ucbd3.runner import (ConfigError, derive_seed, execute, parse_config, resolve_checkpoints,
                          run_experiment)


def _cfg(**over):
    doc = {
        "instance": {"generator": "osb", "n_agents": 3, "n_arms": 3, "seed": 1},
        "algorithms": ["ucb_d3", {"name": "etc", "H": 20}, "centralized_ucb", "naive_ucb"],
        "horizon": 2000,
        "num_runs": 3,
        "master_seed": 5,
        "checkpoints": 10,
    }
    doc.update(over)
    return doc


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_derive_seed_stable_and_distinct():
    assert derive_seed(0, "ucb_d3(alpha=2)", 1) == derive_seed(0, "ucb_d3(alpha=2)", 1)
    seeds = {derive_seed(0, a, r) for a in ("x", "y") for r in range(50)}
    assert len(seeds) == 100
    assert 0 <= derive_seed(3, "x", 1) < 2 ** 64


def test_checkpoints():
    assert resolve_checkpoints(1, 500, 2, 2).tolist() == [500]
    assert resolve_checkpoints([5, 3, 5], 10, 2, 2).tolist() == [3, 5]
    default = resolve_checkpoints(None, 100_000, 5, 5)
    assert default[-1] == 100_000 and 26 - 1 in default.tolist()


@pytest.mark.parametrize("over", [
    {"horizon": 1},
    {"num_runs": 0},
    {"algorithms": ["bogus"]},
    {"algorithms": [{"name": "ucb_d3", "alpha": 1.0}]},
    {"instance": {"generator": "osb", "n_agents": 3}},
    {"instance": {"means": [[0.5, 0.5]]}},
    {"checkpoints": [0, 5]},
    {"deviation": {"agent": 9, "strategy": "greedy"}},
])
def test_config_validation(over):
    with pytest.raises(ValueError):
        parse_config(_cfg(**over))


def test_row_counts_and_schema(tmp_path):
    cfg = parse_config(_cfg())
    run_experiment(cfg, tmp_path)
    rows = _rows(tmp_path / "regret.csv")
    assert list(rows[0]) == ["algorithm", "run", "checkpoint_t", "agent", "cum_regret",
                             "cum_collision_regret", "blocked_count"]
    n_cp = len(resolve_checkpoints(10, 2000, 3, 3))
    for algo in {r["algorithm"] for r in rows}:
        assert sum(r["algorithm"] == algo for r in rows) == 3 * n_cp * 3
    assert (tmp_path / "bounds.json").exists()
    assert list((tmp_path).glob("heatmap_ucb_d3*.csv"))


def test_minimal_run(tmp_path):
    cfg = parse_config(_cfg(horizon=3, num_runs=1, checkpoints=None,
                            algorithms=["ucb_d3", "centralized_ucb"]))
    run_experiment(cfg, tmp_path)
    lines = (tmp_path / "regret.csv").read_text().splitlines()
    # header + one row per agent per algorithm; default checkpoints collapse onto T for T=N
    assert len(lines) == 1 + 2 * 3 * len(resolve_checkpoints(None, 3, 3, 3))
    cfg = parse_config(_cfg(horizon=3, num_runs=1, checkpoints=1, algorithms=["ucb_d3"]))
    run_experiment(cfg, tmp_path / "b")
    assert len((tmp_path / "b" / "regret.csv").read_text().splitlines()) == 1 + 3


def test_same_config_byte_identical(tmp_path):
    cfg = parse_config(_cfg())
    run_experiment(cfg, tmp_path / "a", jobs=1)
    run_experiment(cfg, tmp_path / "b", jobs=2)
    for name in ("regret.csv", "communicated.csv", "summary.json", "bounds.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_deviation_shares_base_streams():
    cfg = parse_config(_cfg(algorithms=["ucb_d3"], deviation={"agent": 3, "strategy": "greedy"}))
    res = execute(cfg)
    base = [r for r in res if r.algorithm == cfg.algorithms[0].id]
    dev = [r for r in res if r.algorithm == cfg.algorithms[1].id]
    for b, d in zip(base, dev):
        # agents ranked above the deviant are unaffected under common random numbers
        assert np.array_equal(b.series.cum_regret[:, :2], d.series.cum_regret[:, :2])


def test_json_format(tmp_path):
    cfg = parse_config(_cfg(num_runs=2))
    run_experiment(cfg, tmp_path, fmt="json")
    recs = json.loads((tmp_path / "regret.json").read_text())
    assert {"algorithm", "cum_regret"} <= set(recs[0])


def test_cli_gen_bounds_pipeline(tmp_path, capsys):
    inst = tmp_path / "i.json"
    assert main(["gen", "osb", "--agents", "5", "--arms", "5", "--seed", "7", "-o", str(inst)]) == 0
    assert main(["bounds", str(inst), "--agent", "2", "--horizon", "100000",
                 "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["upper_bound"] > 0 and doc["lower_bound"] > 0
    assert np.isfinite(doc["upper_bound"]) and np.isfinite(doc["lower_bound"])
    assert main(["bounds", str(inst), "--agent", "2", "--horizon", "100000"]) == 0
    assert "i_star" in capsys.readouterr().out


def test_cli_bounds_not_osb(tmp_path, capsys):
    path = tmp_path / "n.json"
    path.write_text(json.dumps({"n_agents": 2, "n_arms": 2, "means": [[0.9, 0.5], [0.8, 0.05]]}))
    assert main(["bounds", str(path), "--agent", "2", "--horizon", "1e5"]) == 0
    out = capsys.readouterr().out
    assert "NotOSB" in out and "upper_bound" in out


def test_cli_gen_hard_lb(tmp_path):
    out = tmp_path / "h.json"
    assert main(["gen", "hard-lb", "--agents", "3", "--arms", "3", "--target", "3",
                 "--delta", "0.1", "-o", str(out)]) == 0
    assert json.loads(out.read_text())["n_agents"] == 3
    assert main(["gen", "hard-lb", "--agents", "3", "--arms", "3", "-o", str(out)]) == 1


def test_cli_run_and_heatmap(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(_cfg(algorithms=["ucb_d3"], num_runs=2)))
    assert main(["run", str(cfg), "-o", str(tmp_path / "out"), "--jobs", "1"]) == 0
    capsys.readouterr()
    assert main(["heatmap", str(tmp_path / "out")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "phase,agent,arm,count"
    total = sum(int(line.split(",")[3]) for line in lines[1:])
    n_phases = max(int(line.split(",")[0]) for line in lines[1:])
    assert total == 2 * 3 * n_phases


def test_cli_exit_codes(tmp_path):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["run", str(tmp_path / "missing.json")]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(_cfg(horizon=1)))
    assert main(["run", str(bad)]) == 2
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 2
    inst = tmp_path / "i.json"
    inst.write_text(json.dumps({"n_agents": 1, "n_arms": 2, "means": [[0.5, 0.5]]}))
    assert main(["bounds", str(inst), "--agent", "1", "--horizon", "100"]) == 2
    assert main(["heatmap", str(tmp_path / "nowhere")]) == 3


def test_config_error_is_value_error():
    assert issubclass(ConfigError, ValueError)
