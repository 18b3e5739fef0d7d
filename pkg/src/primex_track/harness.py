"""Monte Carlo driver: truth and measurement sampling, metrics and result files.

Random streams come from one master seed. Each stream is
``SeedSequence(seed, spawn_key=(purpose, run))`` with purposes
``topology=0``, ``truth=1`` and ``measurements=2``; the topology uses
run 0 and is shared by every run. Every algorithm and every round count sees
the same truth and measurement realizations for a given run, so comparisons
are paired.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .belief import MotionModel
from .config import ScenarioConfig
from .engine import Engine
from .network import NetworkGraph, generate_topology, graph_to_dict, load_topology
from .protocols import ProtocolConfig, RoundLog

TOPOLOGY, TRUTH, MEASUREMENTS = 0, 1, 2


def stream(seed: int, purpose: int, run: int = 0) -> np.random.Generator:
    """Independent generator for one (purpose, run) pair under a master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(purpose, run)))


def _sqrt_psd(cov: np.ndarray) -> np.ndarray:
    """Factor ``L`` with ``L @ L.T == cov`` that tolerates singular covariances."""
    vals, vecs = np.linalg.eigh(np.asarray(cov, dtype=float))
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_truth(config: ScenarioConfig, seed, motion: MotionModel | None = None) -> np.ndarray:
    """Target trajectory ``(K, n)`` starting at the prior mean.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    motion = motion or config.motion_model()
    rng = np.random.default_rng(seed)
    factor = _sqrt_psd(motion.Q)
    noise = rng.standard_normal((config.K - 1, motion.dim)) @ factor.T
    x = np.empty((config.K, motion.dim))
    x[0] = config.prior_mean
    for k in range(1, config.K):
        x[k] = motion.F @ x[k - 1] + noise[k - 1]
    return x


def sample_measurements(truth: np.ndarray, sensors: Sequence, seed) -> np.ndarray:
    """Measurements ``(K, S, n_z)`` with ``z = H x + r``, ``r ~ N(0, R)``.

    Each entry of ``sensors`` is a :class:`SensorModel` or an ``(H, R)`` pair;
    ``R`` may be singular.
    """
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    rng = np.random.default_rng(seed)
    models = [(s.H, s.R) if hasattr(s, "H") else (np.asarray(s[0]), np.asarray(s[1])) for s in sensors]
    if not models:
        return np.zeros((truth.shape[0], 0, 0))
    nz = models[0][0].shape[0]
    out = np.empty((truth.shape[0], len(models), nz))
    white = rng.standard_normal(out.shape)
    for s, (H, R) in enumerate(models):
        out[:, s] = truth @ H.T + white[:, s] @ _sqrt_psd(R).T
    return out


def rmse_at(estimates: np.ndarray, truth: np.ndarray, H: np.ndarray) -> float:
    """Network position RMSE: ``sqrt(mean_i ||H x_i - H x||**2)`` over nodes."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    err = est @ H.T - np.asarray(truth, dtype=float) @ H.T
    return float(np.sqrt(np.mean(np.sum(err * err, axis=1))))


def transmission_rate(logs: Iterable[RoundLog], N: int, L: int, K: int) -> float:
    """Transmissions per node, per round, per time step."""
    if N < 1 or L < 1 or K < 1:
        raise ValueError("transmission rate needs N, L and K of at least 1")
    total = sum(len(log.transmitters) for log in logs)
    return total / (N * L * K)


@dataclass
class MetricsReport:
    """Aggregated results keyed by ``(algorithm, L)``.

    ``rmse_runs`` holds the per-run, per-step RMSE ``(runs, K)``;
    ``rmse_over_time`` its mean over runs and ``rmse`` the scenario average.
    ``runtime`` is wall-clock seconds per time step per run. Always-on
    algorithms report a transmission rate of exactly 1.0; ``cf`` has none.
    """

    config: ScenarioConfig
    graph: NetworkGraph
    rmse_runs: dict[tuple[str, int], np.ndarray] = field(default_factory=dict)
    runtime: dict[tuple[str, int], float] = field(default_factory=dict)
    transmission: dict[tuple[str, int], float] = field(default_factory=dict)

    @property
    def rmse_over_time(self) -> dict[tuple[str, int], np.ndarray]:
        return {key: v.mean(axis=0) for key, v in self.rmse_runs.items()}

    @property
    def rmse(self) -> dict[tuple[str, int], float]:
        return {key: float(v.mean()) for key, v in self.rmse_runs.items()}

    def keys(self) -> list[tuple[str, int]]:
        order = {a: i for i, a in enumerate(self.config.algorithms)}
        return sorted(self.rmse_runs, key=lambda key: (order[key[0]], key[1]))


def resolve_topology(config: ScenarioConfig) -> NetworkGraph:
    if config.topology_file:
        return load_topology(config.topology_file)
    seed = np.random.SeedSequence(config.seed, spawn_key=(TOPOLOGY, 0))
    return generate_topology(seed, config.num_nodes, config.num_sensors, config.avg_degree)


def _scenario_data(config: ScenarioConfig, graph: NetworkGraph, runs: Sequence[int]):
    sensor = config.sensor_model()
    motion = config.motion_model()
    truth = np.stack([sample_truth(config, stream(config.seed, TRUTH, r), motion) for r in runs])
    models = [sensor] * len(graph.sensor_ids)
    meas = np.stack(
        [sample_measurements(truth[i], models, stream(config.seed, MEASUREMENTS, r)) for i, r in enumerate(runs)]
    )
    return truth, meas


def _run_batch(config: ScenarioConfig, graph: NetworkGraph, algorithm: str, rounds: int, runs: Sequence[int]):
    """Per-run RMSE ``(len(runs), K)``, transmissions ``(len(runs),)`` and seconds spent stepping."""
    truth, meas = _scenario_data(config, graph, runs)
    sensor = config.sensor_model()
    protocol = ProtocolConfig(rounds, config.gate_first_round, config.exact_product_when_disjoint)
    engine = Engine(
        graph, algorithm, config.prior(), config.motion_model(), sensor, protocol, config.window_length, len(runs)
    )
    rmse = np.empty((len(runs), config.K))
    sent = np.zeros(len(runs), dtype=np.int64)
    pos_truth = truth @ sensor.H.T
    elapsed = 0.0
    for k in range(1, config.K + 1):
        start = time.perf_counter()
        logs = engine.step(k, meas[:, k - 1])
        elapsed += time.perf_counter() - start
        for log in logs:
            sent += log.transmit.sum(axis=1)
        err = engine.means() @ sensor.H.T - pos_truth[:, k - 1, None, :]
        rmse[:, k - 1] = np.sqrt(np.mean(np.sum(err * err, axis=2), axis=1))
    return rmse, sent, elapsed


def _batches(config: ScenarioConfig) -> list[range]:
    size = config.batch_runs or config.mc_runs
    return [range(s, min(s + size, config.mc_runs)) for s in range(0, config.mc_runs, size)]


def run_experiment(config: ScenarioConfig, out_dir: str | Path | None = None) -> MetricsReport:
    """Run every (algorithm, L) pair over ``mc_runs`` runs; optionally write result files.

    ``cf`` does not communicate, so it is simulated once and reported under
    every requested L.
    """
    graph = resolve_topology(config)
    tasks = []
    for alg in config.algorithms:
        for rounds in config.rounds if alg != "cf" else (0,):
            for runs in _batches(config):
                tasks.append((alg, rounds, runs))

    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            futures = [pool.submit(_run_batch, config, graph, a, l, r) for a, l, r in tasks]
            results = [f.result() for f in futures]
    else:
        results = [_run_batch(config, graph, a, l, r) for a, l, r in tasks]

    grouped: dict[tuple[str, int], list] = {}
    for (alg, rounds, runs), res in zip(tasks, results):
        grouped.setdefault((alg, rounds), []).append((runs.start, res))

    report = MetricsReport(config, graph)
    n_nodes, K, R = graph.node_count, config.K, config.mc_runs
    for (alg, rounds), parts in grouped.items():
        parts.sort(key=lambda p: p[0])
        rmse = np.concatenate([p[1][0] for p in parts])
        sent = int(sum(p[1][1].sum() for p in parts))
        seconds = sum(p[1][2] for p in parts)
        keys = [(alg, l) for l in config.rounds] if alg == "cf" else [(alg, rounds)]
        for key in keys:
            report.rmse_runs[key] = rmse
            report.runtime[key] = seconds / (R * K)
            if alg != "cf" and rounds > 0:
                report.transmission[key] = sent / (R * n_nodes * rounds * K)
    if out_dir is not None:
        write_outputs(report, out_dir)
    return report


def _fmt(x: float) -> str:
    return repr(float(x))


def write_outputs(report: MetricsReport, out_dir: str | Path) -> list[Path]:
    """Write the four CSV files and ``manifest.json`` into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    keys = report.keys()
    over_time = report.rmse_over_time
    avg = report.rmse
    tables = {
        "rmse_over_time.csv": (
            ["algorithm", "L", "k", "rmse"],
            [[a, l, k + 1, _fmt(v)] for a, l in keys for k, v in enumerate(over_time[(a, l)])],
        ),
        "rmse_vs_rounds.csv": (["algorithm", "L", "rmse"], [[a, l, _fmt(avg[(a, l)])] for a, l in keys]),
        "runtime_vs_rounds.csv": (
            ["algorithm", "L", "runtime_per_step_s"],
            [[a, l, _fmt(report.runtime[(a, l)])] for a, l in keys],
        ),
        "transmission_rate.csv": (
            ["algorithm", "L", "transmission_rate"],
            [[a, l, _fmt(report.transmission[(a, l)])] for a, l in keys if (a, l) in report.transmission],
        ),
    }
    written = []
    for name, (header, rows) in tables.items():
        path = out / name
        try:
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    manifest = {
        "config": report.config.to_dict(),
        "seed_scheme": {
            "generator": "numpy PCG64 via SeedSequence(seed, spawn_key=(purpose, run))",
            "purposes": {"topology": TOPOLOGY, "truth": TRUTH, "measurements": MEASUREMENTS},
            "runs": list(range(report.config.mc_runs)),
        },
        "topology": graph_to_dict(report.graph),
        "outputs": [p.name for p in written],
    }
    path = out / "manifest.json"
    try:
        path.write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    written.append(path)
    return written
