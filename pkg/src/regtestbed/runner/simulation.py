"""One simulation: deploy, wire, fund, measure, drain, tear down.

Mock simulations run on a virtual clock (see ``regtestbed.clock``), so a
300 s window takes only as long as the work inside it.  Container
simulations run in real time with one thread per periodic task.
"""
from __future__ import annotations

import logging
import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from ..clock import VirtualLoop
from ..config import SimulationConfig, validate
from ..errors import DeploymentError, NodeError
from ..loadgen import (BlkGeneratorSpec, LoadLog, TxGeneratorSpec, nominal_vs_effective,
                       run_blk_generator, run_tx_generator, schedule_generators)
from ..metrics import (HostSource, LineProtocolStore, MetricSample, MetricSeries, MockHostModel,
                       MockHostSource, Sampler, run_sampler)
from ..metrics.store import METRICS
from ..nodectl.mock import MockNetwork, MockParams
from ..topology import Topology, TopologyReport, apply_plan, connection_plan, generate_regular, verify_topology

log = logging.getLogger(__name__)

PHASES = ("deploying", "wiring", "funding", "measuring", "draining", "torn_down")
DEFAULT_DRAIN = 5.0
MOCK_DEPLOY_SECONDS_PER_NODE = 0.5
FUNDING_SYNC_TIMEOUT = 120.0


@dataclass(frozen=True)
class SimulationSeeds:
    topology: int
    tx: int
    blk: int

    @classmethod
    def derive(cls, seed: int, point: int = 0, rep: int = 0) -> "SimulationSeeds":
        state = np.random.SeedSequence([seed, point, rep]).generate_state(3, dtype=np.uint64)
        return cls(*(int(x) for x in state))


@dataclass
class SimulationResult:
    config: SimulationConfig
    run_id: str
    sim: int
    phases: dict[str, tuple[int, int]]
    window: tuple[int, int]
    samples: list[MetricSample]
    load: LoadLog
    topology: Topology
    verification: TopologyReport | None
    mempool_sizes: list[int] = field(default_factory=list)
    # (timestamp, per-node mempool sizes) at each sampling tick inside the window
    mempool_trace: list[tuple[int, list[int]]] = field(default_factory=list)
    funded_balances: list[int] = field(default_factory=list)
    credentials: tuple[str, str] | None = None

    def series(self, windowed: bool = True) -> dict[str, MetricSeries]:
        out = {}
        for metric in METRICS:
            s = MetricSeries.from_samples(metric, self.samples)
            out[metric] = s.window(*self.window) if windowed else s
        return out

    def tx_rates(self) -> tuple[float, float]:
        return nominal_vs_effective(self.load, self.phases["measuring"])

    def network_bytes(self) -> float:
        """Total network bytes moved inside the window, integrated from the rate samples."""
        s = self.series()["net_kbps"]
        return float(np.sum(s.values) * 1e3 * self.config.sample_interval)


def fund_wallets(nodes, blocks_extra: int = 100) -> None:
    """Mine len(nodes) + 100 blocks round-robin from node 0 so every wallet holds a mature coinbase."""
    n = len(nodes)
    for b in range(n + blocks_extra):
        nodes[b % n].generate_blocks(1)


def _wait_height(nodes, height: int, timeout: float) -> None:
    deadline = time.monotonic() + timeout
    pending = list(nodes)
    while pending:
        pending = [h for h in pending if h.get_block_count() < height]
        if not pending:
            return
        if time.monotonic() > deadline:
            raise NodeError(f"{len(pending)} node(s) did not reach height {height}")
        time.sleep(0.5)


def run_simulation(config: SimulationConfig, *, run_id: str = "sim", sim: int = 0,
                   seeds: SimulationSeeds | None = None, store: LineProtocolStore | None = None,
                   drain: float = DEFAULT_DRAIN, orchestrator=None, keep: bool = False,
                   epoch_ns: int | None = None, mock_params: MockParams | None = None,
                   host_model: MockHostModel | None = None,
                   deploy_seconds_per_node: float = MOCK_DEPLOY_SECONDS_PER_NODE) -> SimulationResult:
    validate(config)
    seeds = seeds or SimulationSeeds.derive(config.seed)
    if config.backend == "mock":
        return _run_mock(config, run_id, sim, seeds, store, drain, epoch_ns, mock_params,
                         host_model, deploy_seconds_per_node)
    return _run_container(config, run_id, sim, seeds, store, drain, orchestrator, keep)


def _specs(config: SimulationConfig, seeds: SimulationSeeds):
    tx = TxGeneratorSpec(config.tx_speed, seeds.tx) if config.tx_speed > 0 else None
    blk = BlkGeneratorSpec(config.blk_speed, seeds.blk) if config.blk_speed > 0 else None
    return tx, blk


def _run_mock(config, run_id, sim, seeds, store, drain, epoch_ns, params, model, step) -> SimulationResult:
    loop = VirtualLoop(epoch_ns)
    net = MockNetwork(0, params, clock=loop.time, label=f"{run_id}:{sim}")
    sampler = Sampler(MockHostSource(net, model, wall_ns=loop.wall_ns, clock=loop.time),
                      run_id, sim, store, wall_ns=loop.wall_ns)
    interval = config.sample_interval
    loop.every(interval, lambda k, t: sampler.tick(), start=0.0, include_start=True, priority=1)
    phases: dict[str, tuple[int, int]] = {}
    n, k = config.node_count, config.connections_per_node

    for i in range(n):
        loop.at((i + 1) * step, lambda t: net.add_node())
    loop.run_until(n * step)
    phases["deploying"] = (loop.wall_ns(0.0), loop.wall_ns())
    nodes = list(net.nodes)

    t = loop.wall_ns()
    topology = generate_regular(n, k, seeds.topology)
    apply_plan(nodes, connection_plan(topology))
    verification = verify_topology(nodes, topology, max_workers=1)
    phases["wiring"] = (t, loop.wall_ns())

    t = loop.wall_ns()
    funded = []
    if config.tx_speed > 0:
        fund_wallets(nodes)
        funded = [int(b) for b in (net.balance(i) for i in range(n))]
    # measurement starts on the next sampling tick so that no in-window rate
    # sample covers funding traffic
    start = (math.floor(loop.now / interval + 1e-9) + 1) * interval
    loop.run_until(start)
    phases["funding"] = (t, loop.wall_ns())

    end = start + config.duration
    tx_spec, blk_spec = _specs(config, seeds)
    load = schedule_generators(loop, nodes, tx_spec, blk_spec, start, end)
    load.nominal_tx_rate = config.tx_speed
    trace: list[tuple[int, list[int]]] = []
    loop.every(interval, lambda k, t: trace.append((loop.wall_ns(t), net.mempool_count.tolist())),
               start=start, until=end, priority=2)
    loop.run_until(end)
    phases["measuring"] = (loop.wall_ns(start), loop.wall_ns(end))
    mempool_sizes = net.mempool_count.tolist()

    loop.run_until(end + drain)
    phases["draining"] = (loop.wall_ns(end), loop.wall_ns())
    loop.clear()
    phases["torn_down"] = (loop.wall_ns(), loop.wall_ns())

    window_start = phases["deploying"][0] if config.include_deploy else phases["measuring"][0]
    return SimulationResult(config, run_id, sim, phases, (window_start, phases["measuring"][1]),
                            list(sampler.samples), load, topology, verification,
                            mempool_sizes, trace, funded)


def _run_container(config, run_id, sim, seeds, store, drain, orchestrator, keep) -> SimulationResult:
    from ..orchestrator import Orchestrator

    orch = orchestrator or Orchestrator()
    live_nodes: list = []
    sampler = Sampler(HostSource(), run_id, sim, store)
    stop_sampler = threading.Event()
    sampler_thread = run_sampler(sampler, config.sample_interval, stop_sampler)
    phases: dict[str, tuple[int, int]] = {}
    deployment = None
    try:
        t = time.time_ns()
        try:
            deployment = orch.deploy(config, run_id, instance=f"s{sim}")
        except DeploymentError as exc:
            deployment = getattr(exc, "deployment", None)
            raise
        nodes = orch.handles(deployment)
        live_nodes.extend(nodes)
        phases["deploying"] = (t, time.time_ns())

        t = time.time_ns()
        topology = generate_regular(config.node_count, config.connections_per_node, seeds.topology)
        apply_plan(nodes, connection_plan(topology))
        verification = verify_topology(nodes, topology)
        phases["wiring"] = (t, time.time_ns())

        t = time.time_ns()
        funded = []
        if config.tx_speed > 0:
            fund_wallets(nodes)
            _wait_height(nodes, config.node_count + 100, FUNDING_SYNC_TIMEOUT)
            funded = [h.get_balance() for h in nodes]
        phases["funding"] = (t, time.time_ns())

        tx_spec, blk_spec = _specs(config, seeds)
        stop = threading.Event()
        logs: dict[str, LoadLog] = {}
        start_ns = time.time_ns()
        until = time.monotonic() + config.duration
        threads = []
        if tx_spec:
            threads.append(threading.Thread(
                target=lambda: logs.__setitem__("tx", run_tx_generator(nodes, tx_spec, stop, until=until))))
        if blk_spec:
            threads.append(threading.Thread(
                target=lambda: logs.__setitem__("blk", run_blk_generator(nodes, blk_spec, stop, until=until))))
        for th in threads:
            th.start()
        remaining = until - time.monotonic()
        if remaining > 0:
            stop.wait(remaining)
        stop.set()
        for th in threads:
            th.join()
        end_ns = start_ns + round(config.duration * 1e9)
        phases["measuring"] = (start_ns, end_ns)
        load = LoadLog(nominal_tx_rate=config.tx_speed)
        for part in logs.values():
            load = load.merge(part)
        load.nominal_tx_rate = config.tx_speed
        mempool_sizes = [h.get_mempool_size() for h in nodes]

        t = time.time_ns()
        time.sleep(drain)
        phases["draining"] = (t, time.time_ns())
    finally:
        if deployment is not None and not keep:
            report = orch.teardown(deployment)
            if report.errors:
                log.warning("teardown of %s left errors: %s", run_id, report.errors)
        stop_sampler.set()
        sampler_thread.join()
    phases["torn_down"] = (time.time_ns(), time.time_ns())
    window_start = phases["deploying"][0] if config.include_deploy else phases["measuring"][0]
    return SimulationResult(config, run_id, sim, phases, (window_start, phases["measuring"][1]),
                            list(sampler.samples), load, topology, verification, mempool_sizes, [], funded,
                            deployment.credentials)
