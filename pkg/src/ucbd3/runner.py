"""Config-driven Monte-Carlo experiments with position-derived seeds.

A run's seed depends only on ``(master_seed, algorithm id, run index)``, so the
outputs are identical whatever the number of worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis
from .market import (Instance, gen_hard_lb, gen_osb, gen_spaced, load_instance,
                     stable_match, validate_instance)
from .protocol import last_slot_of_phase
from .simulate import AgentSpec, run_centralized, run_profile

log = logging.getLogger(__name__)

ALGORITHMS = ("ucb_d3", "centralized_ucb", "etc", "naive_ucb")
DEVIANT_STRATEGIES = ("greedy", "naive_ucb", "etc")
REGRET_COLUMNS = ["algorithm", "run", "checkpoint_t", "agent", "cum_regret",
                  "cum_collision_regret", "blocked_count"]
HEATMAP_COLUMNS = ["phase", "agent", "arm", "count"]

# H used by the ETC baseline for the systems reported with the method
DEFAULT_ETC_H = {(5, 7): 801, (10, 10): 1117, (10, 15): 805, (5, 5): 801}


class ConfigError(ValueError):
    pass


def derive_seed(master_seed: int, algorithm_id: str, run: int) -> int:
    """Stable 64-bit seed: first 8 bytes of BLAKE2b over ``"{master}/{algorithm}/{run}"``."""
    digest = hashlib.blake2b(f"{master_seed}/{algorithm_id}/{run}".encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "little")


@dataclass(frozen=True)
class AlgorithmConfig:
    """One simulated profile. ``deviant`` optionally swaps one agent's rule."""

    name: str
    alpha: float = 2.0
    etc_h: int | None = None
    comm_stats: bool = True
    deviant_agent: int | None = None
    deviant_strategy: str | None = None
    label: str | None = None

    @property
    def seed_id(self) -> str:
        """Identifier feeding the seed; deviations reuse their base profile's streams."""
        if self.name in ("ucb_d3", "naive_ucb", "centralized_ucb"):
            return f"{self.name}(alpha={self.alpha:g})"
        return f"{self.name}(H={self.etc_h})"

    @property
    def id(self) -> str:
        if self.label:
            return self.label
        base = self.seed_id
        if self.deviant_agent is not None:
            base += f"+{self.deviant_strategy}@{self.deviant_agent}"
        return base


@dataclass
class ExperimentConfig:
    instance: Instance | np.ndarray
    algorithms: list[AlgorithmConfig]
    horizon: int
    num_runs: int = 30
    master_seed: int = 0
    checkpoints: int | list[int] | None = None
    output_dir: Path | None = None

    @property
    def means(self) -> np.ndarray:
        return np.asarray(getattr(self.instance, "means", self.instance), dtype=float)


# ---------------------------------------------------------------------------
# config parsing


def build_instance(spec: dict, base_dir: Path | None = None) -> Instance | np.ndarray:
    if "means" in spec:
        if spec.get("strict", True):
            return validate_instance(spec["means"], spec.get("n_agents"), spec.get("n_arms"))
        return np.asarray(spec["means"], dtype=float)
    if "file" in spec:
        path = Path(spec["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_instance(path)
    gen = spec.get("generator")
    try:
        if gen == "osb":
            return gen_osb(spec["n_agents"], spec["n_arms"], spec.get("seed", 0),
                           spec.get("opt_mean", 0.9), tuple(spec.get("sub_range", (0.0, 0.8))))
        if gen == "spaced":
            return gen_spaced(spec["n_agents"], spec["n_arms"], spec.get("seed", 0))
        if gen in ("hard_lb", "hard-lb"):
            return gen_hard_lb(spec["j_target"], spec["n_agents"], spec["n_arms"], spec["delta"],
                               spec.get("seed", 0))
    except KeyError as exc:
        raise ConfigError(f"generator {gen!r} is missing parameter {exc}") from None
    raise ConfigError("instance needs 'means', 'file' or a known 'generator'")


def _algorithm(doc: dict, n: int, k: int) -> AlgorithmConfig:
    name = doc.get("name")
    if name not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
    alpha = float(doc.get("alpha", 2.0))
    if name == "ucb_d3" and alpha < 2:
        raise ConfigError("ucb_d3 needs alpha >= 2")
    etc_h = None
    if name == "etc":
        etc_h = int(doc.get("H", DEFAULT_ETC_H.get((n, k), 801)))
        if etc_h < 1:
            raise ConfigError("etc needs H >= 1")
    return AlgorithmConfig(name, alpha, etc_h, bool(doc.get("comm_stats", True)),
                           label=doc.get("label"))


def parse_config(doc: dict, base_dir: Path | None = None) -> ExperimentConfig:
    try:
        inst = build_instance(doc["instance"], base_dir)
        horizon = int(doc["horizon"])
        raw_algos = doc["algorithms"]
    except KeyError as exc:
        raise ConfigError(f"config is missing {exc}") from None
    means = np.asarray(getattr(inst, "means", inst))
    n, k = means.shape
    algos = [_algorithm(a if isinstance(a, dict) else {"name": a}, n, k) for a in raw_algos]
    if not algos:
        raise ConfigError("at least one algorithm is required")
    dev = doc.get("deviation")
    if dev:
        j = int(dev["agent"])
        strategy = dev.get("strategy", "greedy")
        if not 1 <= j <= n:
            raise ConfigError(f"deviant agent must be in [1, {n}]")
        if strategy not in DEVIANT_STRATEGIES:
            raise ConfigError(f"deviant strategy must be one of {DEVIANT_STRATEGIES}")
        base = next((a for a in algos if a.name == "ucb_d3"), None)
        if base is None:
            raise ConfigError("a deviation needs a ucb_d3 profile to deviate from")
        algos.append(AlgorithmConfig("ucb_d3", base.alpha, int(dev.get("H", 801)),
                                     base.comm_stats, j, strategy))
    ids = [a.id for a in algos]
    if len(set(ids)) != len(ids):
        raise ConfigError("algorithm ids must be unique (use 'label')")
    cfg = ExperimentConfig(inst, algos, horizon, int(doc.get("num_runs", 30)),
                           int(doc.get("master_seed", 0)), doc.get("checkpoints"),
                           Path(doc["output_dir"]) if doc.get("output_dir") else None)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    n = cfg.means.shape[0]
    if cfg.horizon < n:
        raise ConfigError(f"horizon must be at least N={n}")
    if cfg.num_runs < 1:
        raise ConfigError("num_runs must be positive")
    cp = cfg.checkpoints
    if isinstance(cp, int) and cp < 1:
        raise ConfigError("checkpoint count must be positive")
    if isinstance(cp, list) and (not cp or min(cp) < 1 or max(cp) > cfg.horizon):
        raise ConfigError("explicit checkpoints must lie in [1, horizon]")


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return parse_config(doc, path.parent)


def resolve_checkpoints(spec, horizon: int, n_agents: int, n_arms: int) -> np.ndarray:
    """Explicit list, ``count`` log-spaced points, or (default) 100 log-spaced points plus phase ends."""
    if isinstance(spec, list):
        return np.unique(np.asarray(spec, dtype=np.int64))
    count = 100 if spec is None else int(spec)
    if count == 1:
        return np.array([horizon], dtype=np.int64)
    pts = np.rint(np.geomspace(1, horizon, count)).astype(np.int64)
    if spec is None:
        i, ends = 1, []
        while (end := last_slot_of_phase(i, n_agents, n_arms)) <= horizon:
            ends.append(end)
            i += 1
        pts = np.concatenate([pts, np.asarray(ends, dtype=np.int64)])
    return np.unique(np.append(pts, horizon))


# ---------------------------------------------------------------------------
# execution


@dataclass
class RunResult:
    algorithm: str
    run: int
    series: analysis.MetricSeries


def simulate_one(means: np.ndarray, algo: AlgorithmConfig, horizon: int, seed: int):
    n = means.shape[0]
    if algo.name == "centralized_ucb":
        return run_centralized(means, horizon, seed, algo.alpha)
    if algo.name == "etc":
        return run_profile(means, AgentSpec("etc", etc_h=algo.etc_h), horizon, seed)
    specs = [AgentSpec(algo.name, algo.alpha, comm_stats=algo.comm_stats)] * n
    if algo.deviant_agent is not None:
        specs = list(specs)
        specs[algo.deviant_agent - 1] = AgentSpec(algo.deviant_strategy, algo.alpha,
                                                  etc_h=algo.etc_h or 801)
    return run_profile(means, specs, horizon, seed)


def _task(args) -> RunResult:
    means, algo, horizon, master_seed, run, checkpoints = args
    trace = simulate_one(means, algo, horizon, derive_seed(master_seed, algo.seed_id, run))
    return RunResult(algo.id, run, analysis.regret_series(trace, means, checkpoints=checkpoints))


def execute(cfg: ExperimentConfig, jobs: int = 1) -> list[RunResult]:
    """All runs of every algorithm, ordered by (algorithm position, run index)."""
    means = cfg.means
    n, k = means.shape
    cps = resolve_checkpoints(cfg.checkpoints, cfg.horizon, n, k)
    tasks = [(means, algo, cfg.horizon, cfg.master_seed, r, cps)
             for algo in cfg.algorithms for r in range(1, cfg.num_runs + 1)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_task(t) for t in tasks]
    order = {a.id: i for i, a in enumerate(cfg.algorithms)}
    results.sort(key=lambda res: (order[res.algorithm], res.run))
    return results


# ---------------------------------------------------------------------------
# output


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def regret_rows(results: list[RunResult]):
    for res in results:
        s = res.series
        for c, t in enumerate(s.checkpoints):
            for j in range(s.cum_regret.shape[1]):
                yield [res.algorithm, res.run, int(t), j + 1, s.cum_regret[c, j],
                       s.cum_collision_regret[c, j], int(s.blocked_count[c, j])]


def communicated_rows(results: list[RunResult]):
    for res in results:
        comm = res.series.communicated
        for i in range(comm.shape[0]):
            for j in range(comm.shape[1]):
                if comm[i, j] >= 0:
                    yield [res.algorithm, res.run, i + 1, j + 1, int(comm[i, j]) + 1]


def heatmap_rows(counts: np.ndarray):
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            for k in range(counts.shape[2]):
                yield [i + 1, j + 1, k + 1, int(counts[i, j, k])]


def write_table(path: Path, columns: list[str], rows, fmt: str = "csv") -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_table(columns, rows, fmt))


def format_table(columns: list[str], rows, fmt: str = "csv") -> str:
    if fmt == "json":
        records = [dict(zip(columns, (r if isinstance(r, str) else _json_value(r) for r in row)))
                   for row in rows]
        return json.dumps(records, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _num(v) for v in row])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=+@-]+", "_", name)


def summarize(cfg: ExperimentConfig, results: list[RunResult]) -> dict:
    out = {}
    for algo in cfg.algorithms:
        final = np.array([r.series.cum_regret[-1] for r in results if r.algorithm == algo.id])
        mean = final.mean(axis=0)
        entry = {"final_checkpoint": int(results[0].series.checkpoints[-1]),
                 "mean_final_regret": mean.tolist(),
                 "mean_total_regret": float(final.sum(axis=1).mean())}
        if len(final) >= 2:
            entry["ci_halfwidth"] = analysis.aggregate_ci(final)[1].tolist()
        out[algo.id] = entry
    return out


def run_experiment(cfg: ExperimentConfig, output_dir: str | Path | None = None, jobs: int = 1,
                   fmt: str = "csv") -> dict:
    """Simulate everything and write ``regret``, ``communicated``, heatmaps, bounds and a summary."""
    out = Path(output_dir or cfg.output_dir or "results")
    out.mkdir(parents=True, exist_ok=True)
    results = execute(cfg, jobs)
    ext = "json" if fmt == "json" else "csv"
    write_table(out / f"regret.{ext}", REGRET_COLUMNS, regret_rows(results), fmt)
    write_table(out / f"communicated.{ext}", ["algorithm", "run", "phase", "agent", "arm"],
                communicated_rows(results), fmt)
    k = cfg.means.shape[1]
    for algo in cfg.algorithms:
        comms = [r.series.communicated for r in results if r.algorithm == algo.id]
        if any(c.size for c in comms):
            counts = analysis.heatmap_aggregate(comms, k)
            write_table(out / f"heatmap_{_safe(algo.id)}.{ext}", HEATMAP_COLUMNS,
                        heatmap_rows(counts), fmt)
    report = analysis.bound_report(cfg.means, max(cfg.horizon, 2),
                                   next((a.alpha for a in cfg.algorithms if a.name == "ucb_d3"), 2.0))
    bounds = {
        "horizon": cfg.horizon,
        "alpha": report.alpha,
        "delta": report.delta,
        "i_star": report.i_star,
        "remainder_scale": report.remainder_scale,
        "osb": report.lower_thm2 is not None,
        "stable_partner": (stable_match(cfg.means) + 1).tolist(),
        "agents": report.rows(),
    }
    summary = summarize(cfg, results)
    with open(out / "bounds.json", "w") as fh:
        json.dump(bounds, fh, indent=2)
        fh.write("\n")
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    with open(out / "instance.json", "w") as fh:
        json.dump({"n_agents": int(cfg.means.shape[0]), "n_arms": int(k),
                   "means": cfg.means.tolist()}, fh, indent=2)
        fh.write("\n")
    log.info("wrote %d runs to %s", len(results), out)
    return {"output_dir": out, "results": results, "summary": summary, "bounds": bounds}


def read_communicated(run_dir: str | Path, algorithm: str | None = None):
    """Per-run broadcast matrices for one algorithm from a run directory (0-based arms)."""
    run_dir = Path(run_dir)
    path = run_dir / "communicated.csv"
    if path.exists():
        with open(path, newline="") as fh:
            records = list(csv.DictReader(fh))
    else:
        with open(run_dir / "communicated.json") as fh:
            records = json.load(fh)
    with open(run_dir / "instance.json") as fh:
        n_arms = json.load(fh)["n_arms"]
    if algorithm is None and records:
        algorithm = str(records[0]["algorithm"])
    by_run: dict[int, list] = {}
    for rec in records:
        if str(rec["algorithm"]) != algorithm:
            continue
        by_run.setdefault(int(rec["run"]), []).append(
            (int(rec["phase"]), int(rec["agent"]), int(rec["arm"])))
    runs = []
    for run in sorted(by_run):
        entries = by_run[run]
        n_phases = max(e[0] for e in entries)
        n_agents = max(e[1] for e in entries)
        comm = np.full((n_phases, n_agents), -1, dtype=np.int64)
        for i, j, k in entries:
            comm[i - 1, j - 1] = k - 1
        runs.append(comm)
    return algorithm, runs, n_arms
