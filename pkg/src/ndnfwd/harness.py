"""Experiment harness: topology construction, traffic, metrics, CSV output.

A run is fully determined by (scenario, strategy, base_seed, run_index):
repeating it reproduces byte-identical metrics, and replications can run in
parallel worker processes without changing the results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import InterestPacket, DataPacket, Name
from .dqnaf import AgentConfig, DqnAfStrategy
from .engine import BurstLossModel, RngStreams, Simulator, stream_seed
from .router import Network, Router, is_probe_name
from .scenario import ScenarioConfig, ValidationError
from .strategies import (
    AsfStrategy,
    BestRouteStrategy,
    DqLearningStrategy,
    MulticastStrategy,
)


class EmptyInput(ValueError):
    pass


class MixedDurations(ValueError):
    pass


class IoError(OSError):
    pass


RUNS_CSV_COLUMNS = ["strategy", "run", "second", "data_rx", "interests_tx_total",
                    "interests_tx_f2", "interests_tx_f3"]
SUMMARY_CSV_COLUMNS = ["strategy", "metric", "mean", "stddev", "n"]
SUMMARY_METRICS = ["data_rx", "interests_tx_total", "interests_tx_f2", "interests_tx_f3"]


@dataclass
class RunMetrics:
    strategy: str
    run_index: int
    seed: int
    duration_s: int
    data_rx: list = field(default_factory=list)
    tx_total: list = field(default_factory=list)
    tx_f2: list = field(default_factory=list)
    tx_f3: list = field(default_factory=list)

    def per_second_rate(self, series: list) -> float:
        return sum(series) / self.duration_s

    def metric(self, name: str) -> float:
        series = {"data_rx": self.data_rx, "interests_tx_total": self.tx_total,
                  "interests_tx_f2": self.tx_f2, "interests_tx_f3": self.tx_f3}[name]
        return self.per_second_rate(series)


@dataclass
class Summary:
    strategy: str
    n: int
    means: dict
    stddevs: dict
    second_means: dict  # metric -> per-second mean series across runs


def strategy_assignment(cfg: ScenarioConfig, strategy_name: Optional[str]) -> dict:
    """Which strategy each node runs.

    With an explicit strategy the measure node runs it and the rest keep the
    scenario default, except DQ-Learning which must run network-wide so every
    router annotates the data packets it sends downstream.
    """
    if strategy_name is None:
        return {node: cfg.strategy_overrides.get(node, cfg.strategy_default)
                for node in cfg.nodes}
    assign = {}
    for node in cfg.nodes:
        if node == cfg.measure_node or strategy_name == "dq-learning":
            assign[node] = strategy_name
        else:
            assign[node] = cfg.strategy_overrides.get(node, cfg.strategy_default)
    return assign


def _make_strategy(name: str, cfg: ScenarioConfig, node: str, router: Router,
                   streams: RngStreams, weights_in=None):
    if name == "best-route":
        return BestRouteStrategy()
    if name == "multicast":
        return MulticastStrategy()
    if name == "asf":
        params = dict(cfg.asf_params)
        params.setdefault("timeout_ms", cfg.interest_lifetime_ms)
        return AsfStrategy(**params)
    if name == "dq-learning":
        return DqLearningStrategy(**cfg.dq_params)
    if name == "dqn-af":
        entry = router.fib.longest_prefix_match(cfg.prefix)
        if entry is None:
            return BestRouteStrategy()
        face_order = entry.faces()
        agent_cfg = AgentConfig(**cfg.dqnaf_params)
        init_rng = np.random.default_rng(
            stream_seed(streams.base_seed, streams.run_index, "net.init"))
        return DqnAfStrategy(face_order, agent_cfg, init_rng=init_rng,
                             explore_rng=streams.stream("agent.explore"),
                             replay_rng=streams.stream("agent.replay"),
                             weights_path=weights_in)
    raise ValidationError("strategy", f"unknown strategy {name!r}")


@dataclass
class BuiltSimulation:
    sim: Simulator
    network: Network
    metrics: RunMetrics
    measure_router: Router
    agent: Optional[DqnAfStrategy]


def build_simulation(cfg: ScenarioConfig, strategy_name: Optional[str], run_index: int,
                     weights_in=None) -> BuiltSimulation:
    sim = Simulator()
    streams = RngStreams(cfg.base_seed, run_index)
    net = Network(sim)
    duration_s = int(round(cfg.duration_s))
    duration_ms = cfg.duration_ms

    for node in cfg.nodes:
        net.add_router(node, lifetime_ms=cfg.interest_lifetime_ms)
    for spec in cfg.links:
        link = net.connect(spec.a, spec.b, spec.delay_ms, spec.bandwidth_bps,
                           spec.queue_capacity)
        for direction in link.directions.values():
            direction.rng = streams.stream(f"loss.{direction.label}")

    # producer application answers every interest under its prefix
    producer = net.routers[cfg.producer_node]

    def answer(interest: InterestPacket, face_id: int, now: float):
        data = DataPacket(name=interest.name, payload_size=cfg.payload_bytes)
        producer.receive_data(data, face_id, now)

    producer_app_face = producer.add_app_face(on_interest=answer)
    producer.fib.add_route(cfg.prefix, producer_app_face, cost=0)

    # static routes
    for route in cfg.routes:
        face = net.face_toward(route.node, route.nexthop)
        net.routers[route.node].fib.add_route(route.prefix, face, route.cost)

    # strategies (after the FIB is in place: agents snapshot the nexthop order)
    assignment = strategy_assignment(cfg, strategy_name)
    agent = None
    for node, strat_name in assignment.items():
        router = net.routers[node]
        strategy = _make_strategy(strat_name, cfg, node, router, streams,
                                  weights_in=weights_in if node == cfg.measure_node else None)
        router.set_strategy(strategy, rng=streams.stream(f"strategy.{node}"))
        if isinstance(strategy, DqnAfStrategy) and node == cfg.measure_node:
            agent = strategy
        if strategy.probe_interval_ms:
            _start_probe_rounds(sim, router, strategy, cfg.prefix, duration_ms)

    # instability events
    for ev in cfg.events:
        for a, b in ev.links:
            link = net.link_between(a, b)
            if ev.kind == "outage":
                link.add_outage(ev.start_s * 1000.0, ev.stop_s * 1000.0)
            else:
                for direction in link.directions.values():
                    direction.add_loss_window(ev.start_s * 1000.0, ev.stop_s * 1000.0,
                                              BurstLossModel(ev.rate, ev.mean_burst))

    # metrics
    strategy_id = strategy_name or cfg.strategy_overrides.get(cfg.measure_node,
                                                              cfg.strategy_default)
    metrics = RunMetrics(strategy=strategy_id, run_index=run_index,
                         seed=stream_seed(cfg.base_seed, run_index, "run"),
                         duration_s=duration_s,
                         data_rx=[0] * duration_s, tx_total=[0] * duration_s,
                         tx_f2=[0] * duration_s, tx_f3=[0] * duration_s)

    measure_router = net.routers[cfg.measure_node]
    measure_entry = measure_router.fib.longest_prefix_match(cfg.prefix)
    ranked_faces = measure_entry.faces() if measure_entry else []
    face_column = {}
    if len(ranked_faces) > 0:
        face_column[ranked_faces[0]] = metrics.tx_f2
    if len(ranked_faces) > 1:
        face_column[ranked_faces[1]] = metrics.tx_f3

    def on_interest_sent(face_id: int, interest: InterestPacket, now: float):
        if not cfg.count_probes and is_probe_name(interest.name):
            return
        second = int(now // 1000.0)
        if second >= duration_s:
            return
        metrics.tx_total[second] += 1
        column = face_column.get(face_id)
        if column is not None:
            column[second] += 1

    measure_router.interest_sent_hook = on_interest_sent

    # consumer application
    consumer = net.routers[cfg.consumer_node]

    def on_data(data: DataPacket, now: float):
        second = int(now // 1000.0)
        if second < duration_s:
            metrics.data_rx[second] += 1

    consumer_app_face = consumer.add_app_face(on_data=on_data)
    _start_consumer(sim, consumer, consumer_app_face, cfg)

    return BuiltSimulation(sim=sim, network=net, metrics=metrics,
                           measure_router=measure_router, agent=agent)


def _start_consumer(sim: Simulator, router: Router, app_face: int, cfg: ScenarioConfig):
    interval_ms = 1000.0 / cfg.consumer_rate
    start_ms = cfg.consumer_start_s * 1000.0
    stop_ms = cfg.consumer_stop_s * 1000.0
    state = {"seq": 0}

    def send():
        now = sim.now
        if now >= stop_ms:
            return
        seq = state["seq"]
        interest = InterestPacket(name=cfg.prefix.appended(str(seq)), nonce=seq,
                                  lifetime_ms=cfg.interest_lifetime_ms)
        router.express_interest(interest, app_face, now)
        state["seq"] = seq + 1
        next_time = start_ms + state["seq"] * interval_ms
        if next_time < stop_ms:
            sim.schedule(next_time, send)

    sim.schedule(start_ms, send)


def _start_probe_rounds(sim: Simulator, router: Router, strategy, prefix: Name,
                        duration_ms: float):
    interval = strategy.probe_interval_ms
    state = {"k": 1}

    def probe_round():
        entry = router.fib.longest_prefix_match(prefix)
        if entry is not None:
            for face in strategy.probe_faces(entry, sim.now):
                router.inject_probe(prefix, face, sim.now)
        state["k"] += 1
        next_time = state["k"] * interval
        if next_time < duration_ms:
            sim.schedule(next_time, probe_round)

    if interval < duration_ms:
        sim.schedule(interval, probe_round)


def run_experiment(cfg: ScenarioConfig, strategy_name: Optional[str] = None,
                   run_index: int = 0, weights_in=None, weights_out=None) -> RunMetrics:
    built = build_simulation(cfg, strategy_name, run_index, weights_in=weights_in)
    built.sim.run_until(cfg.duration_ms)
    for router in built.network.routers.values():
        if not router.audit_pit():
            raise RuntimeError(f"PIT audit failed at {router.name}")
    if built.agent is not None and not built.agent.audit_balanced():
        raise RuntimeError("pending-action audit failed")
    if built.agent is not None and weights_out is not None:
        built.agent.save_weights(weights_out)
    return built.metrics


def _run_worker(args) -> RunMetrics:
    cfg, strategy_name, run_index = args
    return run_experiment(cfg, strategy_name, run_index)


def run_replications(cfg: ScenarioConfig, strategy_name: Optional[str] = None,
                     runs: Optional[int] = None, jobs: int = 1,
                     weights_dir=None) -> list[RunMetrics]:
    """Run ``runs`` replications; parallel workers preserve run order.

    Weight persistence chains run k on run k-1's saved file, which forces
    sequential execution regardless of ``jobs``.
    """
    n_runs = cfg.runs if runs is None else runs
    if cfg.weight_mode == "persist" and strategy_name == "dqn-af":
        out_dir = Path(weights_dir or cfg.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        weights_path = out_dir / "weights-dqn-af.bin"
        results = []
        for run_index in range(n_runs):
            weights_in = weights_path if run_index > 0 and weights_path.exists() else None
            results.append(run_experiment(cfg, strategy_name, run_index,
                                          weights_in=weights_in, weights_out=weights_path))
        return results

    tasks = [(cfg, strategy_name, run_index) for run_index in range(n_runs)]
    if jobs <= 1 or n_runs == 1:
        return [_run_worker(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_worker, tasks))


def aggregate(runs: list[RunMetrics]) -> Summary:
    """Arithmetic means and sample stddevs over replications of one strategy."""
    if not runs:
        raise EmptyInput("no runs to aggregate")
    durations = {r.duration_s for r in runs}
    if len(durations) != 1:
        raise MixedDurations(f"durations differ: {sorted(durations)}")
    strategy = runs[0].strategy
    n = len(runs)
    means = {}
    stddevs = {}
    for metric in SUMMARY_METRICS:
        values = [r.metric(metric) for r in runs]
        mean = sum(values) / n
        if n > 1:
            var = sum((v - mean) ** 2 for v in values) / (n - 1)
            stddev = math.sqrt(var)
        else:
            stddev = 0.0
        means[metric] = mean
        stddevs[metric] = stddev
    duration = runs[0].duration_s
    second_means = {}
    for metric, attr in (("data_rx", "data_rx"), ("interests_tx_total", "tx_total"),
                         ("interests_tx_f2", "tx_f2"), ("interests_tx_f3", "tx_f3")):
        series = [sum(getattr(r, attr)[s] for r in runs) / n for s in range(duration)]
        second_means[metric] = series
    return Summary(strategy=strategy, n=n, means=means, stddevs=stddevs,
                   second_means=second_means)


def format_float(x: float) -> str:
    return repr(round(float(x), 9))


def write_csv(summaries: list[Summary], runs: list[RunMetrics], output_dir) -> tuple[Path, Path]:
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        runs_path = out / "runs.csv"
        with open(runs_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(RUNS_CSV_COLUMNS) + "\n")
            for r in runs:
                for second in range(r.duration_s):
                    row = [r.strategy, str(r.run_index), str(second),
                           str(r.data_rx[second]), str(r.tx_total[second]),
                           str(r.tx_f2[second]), str(r.tx_f3[second])]
                    fh.write(",".join(row) + "\n")
        summary_path = out / "summary.csv"
        with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(SUMMARY_CSV_COLUMNS) + "\n")
            for summary in summaries:
                for metric in SUMMARY_METRICS:
                    row = [summary.strategy, metric, format_float(summary.means[metric]),
                           format_float(summary.stddevs[metric]), str(summary.n)]
                    fh.write(",".join(row) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return runs_path, summary_path


TABLE_VARIANTS = {
    "dqn-af-1": {"learning_rate": 0.001, "optimizer": "rmsprop"},
    "dqn-af-2": {"learning_rate": 0.005, "optimizer": "rmsprop"},
    "dqn-af-3": {"learning_rate": 0.01, "optimizer": "rmsprop"},
    "dqn-af-4": {"learning_rate": 0.001, "optimizer": "adam"},
    "dqn-af-5": {"learning_rate": 0.005, "optimizer": "adam"},
    "dqn-af-6": {"learning_rate": 0.01, "optimizer": "adam"},
}

COMPARE_STRATEGIES = ["best-route", "multicast", "asf", "dq-learning", "dqn-af"]
