"""Seeded experiment runners and their CSV outputs.

Output layout under ``out_dir``::

    convergence/runs/<agent>_seed<k>.csv   per-iteration log of one training run
    convergence/summary.csv                median and mean running average across seeds
    convergence/finals.csv                 final running average per seed: agents and scripted baselines
    sweep/runs.csv                         final running average per (alpha, agent, seed)
    sweep/summary.csv                      median / min / max across seeds per (alpha, agent)

Every file starts with ``#`` comment lines holding the package version and
the full configuration, enough to re-run it. Floats are written with
``repr`` so values round-trip exactly and reruns are byte-identical.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .train import BASELINES, AgentKind, MetricsLog, moving_average, run_baseline, train_run

__all__ = [
    "ConvergenceResult",
    "SweepResult",
    "iterations_to_fraction",
    "moving_average",
    "read_csv",
    "run_alpha_sweep",
    "run_convergence",
]

AGENTS = (AgentKind.VQC.value, AgentKind.MLP.value)
RUN_COLUMNS = ("iteration", "instantaneous_reward_bps", "running_avg_throughput_bps", "epsilon", "loss")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _header(config: ExperimentConfig, **fields) -> list[str]:
    lines = [f"qrl-dsa {__version__}"]
    lines += [f"{k}: {v}" for k, v in fields.items()]
    lines.append(f"running_avg_window: {config.train.avg_window}")
    reward_scale = config.train.reward_scale_bps
    lines.append(
        "reward_normalization: "
        + (f"{reward_scale!r} bps" if reward_scale else "per-episode interference-free rate (loss only; CSV values are raw bps)")
    )
    # out_dir and workers do not affect results, so they stay out of the header
    data = config.model_dump(mode="json", exclude={"out_dir", "workers"})
    lines.append("config: " + json.dumps(data, sort_keys=True, separators=(",", ":")))
    return ["# " + l for l in lines]


def _write_csv(path: Path, header: list[str], columns, rows) -> None:
    buf = io.StringIO()
    buf.write("\n".join(header) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_text(buf.getvalue())
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err


def read_csv(path) -> tuple[list[str], dict[str, list[str]]]:
    """(comment lines, column name -> raw string values)."""
    comments, body = [], []
    for line in Path(path).read_text().splitlines():
        (comments if line.startswith("#") else body).append(line)
    rows = list(csv.reader(body))
    cols = {name: [r[i] for r in rows[1:]] for i, name in enumerate(rows[0])}
    return comments, cols


def iterations_to_fraction(curve, fraction: float = 0.9) -> int:
    """First 1-based iteration at which ``curve`` reaches ``fraction`` of its last value."""
    curve = np.asarray(curve, dtype=float)
    hit = np.nonzero(curve >= fraction * curve[-1])[0]
    return int(hit[0]) + 1


def _train_task(args) -> MetricsLog:
    network, agent, config, seed = args
    return train_run(network, agent, config.train, seed, vqc_config=config.vqc, mlp_layers=config.mlp_layers)


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


@dataclass
class ConvergenceResult:
    logs: dict[tuple[str, int], MetricsLog]
    baselines: dict[tuple[str, int], MetricsLog]
    median: dict[str, np.ndarray]
    mean: dict[str, np.ndarray]
    paths: list[Path] = field(default_factory=list)

    def final(self, name: str, seed: int) -> float:
        table = self.logs if name in AGENTS else self.baselines
        return table[(name, seed)].final_throughput


def run_convergence(config: ExperimentConfig) -> ConvergenceResult:
    out = Path(config.out_dir) / "convergence"
    seeds = list(config.seeds)
    tasks = [(config.network, agent, config, seed) for seed in seeds for agent in AGENTS]
    logs = {(t[1], t[3]): log for t, log in zip(tasks, _map(_train_task, tasks, config.workers))}
    baselines = {(p, s): run_baseline(config.network, p, config.train, s) for s in seeds for p in BASELINES}

    paths = []
    for (agent, seed), log in logs.items():
        path = out / "runs" / f"{agent.lower()}_seed{seed}.csv"
        rows = zip(log.iterations, log.reward_bps, log.running_avg_bps, log.epsilon, log.loss)
        _write_csv(path, _header(config, kind="convergence run", agent=agent, seed=seed), RUN_COLUMNS, rows)
        paths.append(path)

    median, mean = {}, {}
    for agent in AGENTS:
        stack = np.stack([logs[(agent, s)].running_avg_bps for s in seeds])
        median[agent] = np.median(stack, axis=0)
        mean[agent] = stack.mean(axis=0)
    columns = ["iteration"] + [f"{a.lower()}_{stat}_bps" for a in AGENTS for stat in ("median", "mean")]
    n = config.train.iterations
    rows = ([i + 1] + [v[a][i] for a in AGENTS for v in (median, mean)] for i in range(n))
    path = out / "summary.csv"
    _write_csv(path, _header(config, kind="convergence summary across seeds", seeds=seeds), columns, rows)
    paths.append(path)

    rows = []
    for s in seeds:
        rows += [(s, a, logs[(a, s)].final_throughput) for a in AGENTS]
        rows += [(s, p, baselines[(p, s)].final_throughput) for p in BASELINES]
    path = out / "finals.csv"
    _write_csv(path, _header(config, kind="final running average per seed"), ("seed", "policy", "final_running_avg_bps"), rows)
    paths.append(path)
    return ConvergenceResult(logs, baselines, median, mean, paths)


@dataclass
class SweepResult:
    finals: dict[tuple[float, str, int], float]
    summary: list[tuple[float, str, float, float, float]]
    paths: list[Path] = field(default_factory=list)

    def median(self, alpha: float, agent: str) -> float:
        return next(r[2] for r in self.summary if r[0] == alpha and r[1] == agent)

    def violations(self) -> list[dict]:
        """Alphas where the VQC median falls below the MLP median, with per-seed values."""
        out = []
        for alpha in sorted({r[0] for r in self.summary}):
            q, d = self.median(alpha, "VQC"), self.median(alpha, "MLP")
            if q < d:
                per_seed = {k[2]: (self.finals[(alpha, "VQC", k[2])], v) for k, v in self.finals.items() if k[0] == alpha and k[1] == "MLP"}
                out.append({"alpha": alpha, "vqc_median": q, "mlp_median": d, "per_seed_vqc_mlp": per_seed})
        return out


def run_alpha_sweep(config: ExperimentConfig) -> SweepResult:
    if not config.alpha_sweep:
        raise ValueError("alpha_sweep is empty")
    out = Path(config.out_dir) / "sweep"
    tasks = [
        (config.network.model_copy(update={"alpha": alpha}), agent, config, seed)
        for alpha in config.alpha_sweep
        for agent in AGENTS
        for seed in config.seeds
    ]
    logs = _map(_train_task, tasks, config.workers)
    finals = {(t[0].alpha, t[1], t[3]): log.final_throughput for t, log in zip(tasks, logs)}

    header = _header(config, kind="alpha sweep", seeds=list(config.seeds), iterations=config.train.iterations)
    path_runs = out / "runs.csv"
    _write_csv(path_runs, header, ("alpha", "agent", "seed", "final_running_avg_bps"), ((a, g, s, v) for (a, g, s), v in finals.items()))

    summary = []
    for alpha in config.alpha_sweep:
        for agent in AGENTS:
            vals = np.array([finals[(alpha, agent, s)] for s in config.seeds])
            summary.append((alpha, agent, float(np.median(vals)), float(vals.min()), float(vals.max())))
    path_summary = out / "summary.csv"
    _write_csv(path_summary, header, ("alpha", "agent", "median_bps", "min_bps", "max_bps"), summary)
    return SweepResult(finals, summary, [path_runs, path_summary])
