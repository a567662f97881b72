"""Host metric sources, counter differencing and the periodic sampler.

CPU, memory and disk usage are read directly.  Disk I/O and network speed
are rates obtained by differencing cumulative byte counters between two
consecutive snapshots, in decimal units (MB = 1e6 B, KB = 1e3 B).
"""
from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from typing import Callable

from ..clock import run_periodic
from .store import LineProtocolStore, MetricSample

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CounterSnapshot:
    timestamp: int  # unix ns
    disk_bytes_read: int
    disk_bytes_written: int
    net_bytes_sent: int
    net_bytes_received: int


@dataclass(frozen=True)
class HostReading:
    """One poll of a source; ``None`` marks a failed read (a gap, never a zero)."""
    cpu_pct: float | None
    mem_used_gb: float | None
    disk_pct: float | None
    counters: CounterSnapshot | None


def derive_rates(prev: CounterSnapshot, cur: CounterSnapshot) -> tuple[float | None, float | None]:
    """(disk_io_mbps, net_kbps) over the interval between two snapshots.

    A counter that went backwards (reset) yields None for its rate.
    """
    dt = (cur.timestamp - prev.timestamp) / 1e9
    if dt <= 0:
        raise ValueError("snapshots must be strictly increasing in time")
    d_read = cur.disk_bytes_read - prev.disk_bytes_read
    d_written = cur.disk_bytes_written - prev.disk_bytes_written
    d_sent = cur.net_bytes_sent - prev.net_bytes_sent
    d_recv = cur.net_bytes_received - prev.net_bytes_received
    disk = None if d_read < 0 or d_written < 0 else (d_read + d_written) / dt / 1e6
    net = None if d_sent < 0 or d_recv < 0 else (d_sent + d_recv) / dt / 1e3
    return disk, net


class HostSource:
    """Whole-host readings through psutil.

    ``traffic`` overrides the network byte counters; by default they are the
    sum over host ``veth*`` interfaces (the container side of every
    container link), falling back to all non-loopback interfaces.
    """

    def __init__(self, disk_path: str = "/", traffic: Callable[[], tuple[int, int]] | None = None,
                 wall_ns: Callable[[], int] = time.time_ns):
        import psutil

        self.psutil = psutil
        self.disk_path = disk_path
        self.traffic = traffic or self._interface_traffic
        self.wall_ns = wall_ns
        psutil.cpu_percent(interval=None)  # prime the delta

    def _interface_traffic(self) -> tuple[int, int]:
        nics = self.psutil.net_io_counters(pernic=True)
        veth = [c for name, c in nics.items() if name.startswith("veth")]
        chosen = veth or [c for name, c in nics.items() if name != "lo"]
        return sum(c.bytes_sent for c in chosen), sum(c.bytes_recv for c in chosen)

    def _try(self, fn):
        try:
            return fn()
        except Exception as exc:  # a failed read becomes a gap
            log.debug("metric read failed: %s", exc)
            return None

    def read(self) -> HostReading:
        ps = self.psutil
        cpu = self._try(lambda: float(ps.cpu_percent(interval=None)))
        mem = self._try(lambda: ps.virtual_memory().used / 1e9)
        disk = self._try(lambda: float(ps.disk_usage(self.disk_path).percent))

        def counters():
            io = ps.disk_io_counters()
            sent, recv = self.traffic()
            return CounterSnapshot(self.wall_ns(), int(io.read_bytes), int(io.write_bytes), int(sent), int(recv))

        return HostReading(cpu, mem, disk, self._try(counters))


@dataclass(frozen=True)
class MockHostModel:
    """Constants of the synthetic host behind mock runs (model parameters, not measurements)."""
    cores: int = 4
    base_cpu_pct: float = 0.0
    cpu_pct_per_node: float = 0.02
    rpc_seconds: float = 0.002
    signature_seconds: float = 0.0002
    verification_seconds: float = 0.0001
    block_validation_seconds: float = 0.002
    container_create_seconds: float = 1.5
    handshake_seconds: float = 0.001
    base_mem_gb: float = 2.0
    mem_gb_per_node: float = 0.075
    mempool_overhead: float = 3.0
    disk_total_bytes: float = 100e9
    disk_base_bytes: float = 50e9


class MockHostSource:
    """Synthetic readings derived from a MockNetwork's own counters."""

    def __init__(self, network, model: MockHostModel | None = None,
                 wall_ns: Callable[[], int] = time.time_ns, clock: Callable[[], float] | None = None):
        self.network = network
        self.model = model or MockHostModel()
        self.wall_ns = wall_ns
        self.clock = clock or network.clock or time.monotonic
        self._last = None  # (t, busy_seconds)

    def _busy_seconds(self) -> float:
        w, m = self.network.work, self.model
        return (w.rpc_calls * m.rpc_seconds + w.signatures * m.signature_seconds
                + w.verifications * m.verification_seconds
                + w.block_validations * m.block_validation_seconds
                + w.containers_created * m.container_create_seconds
                + w.handshakes * m.handshake_seconds)

    def read(self) -> HostReading:
        net, m = self.network, self.model
        with net.lock:
            t = self.clock()
            busy = self._busy_seconds()
            live = sum(net.running)
            cpu = m.base_cpu_pct + m.cpu_pct_per_node * live
            if self._last is not None and t > self._last[0]:
                cpu += 100.0 * (busy - self._last[1]) / ((t - self._last[0]) * m.cores)
            self._last = (t, busy)
            cpu = min(cpu, 100.0)
            mem = m.base_mem_gb + m.mem_gb_per_node * live + net.mempool_bytes * m.mempool_overhead / 1e9
            disk = min(100.0, 100.0 * (m.disk_base_bytes + net.disk_written) / m.disk_total_bytes)
            sent, recv = net.total_traffic()
            snap = CounterSnapshot(self.wall_ns(), int(net.disk_read), int(net.disk_written), sent, recv)
        return HostReading(cpu, mem, disk, snap)


class Sampler:
    """Turns successive readings into MetricSamples and persists them."""

    def __init__(self, source, run_id: str, sim: int = 0, store: LineProtocolStore | None = None,
                 wall_ns: Callable[[], int] | None = None):
        self.source = source
        self.run_id = run_id
        self.sim = sim
        self.store = store
        self.wall_ns = wall_ns or getattr(source, "wall_ns", time.time_ns)
        self.samples: list[MetricSample] = []
        self._prev: CounterSnapshot | None = None
        self._lock = threading.Lock()

    def tick(self, *_args) -> list[MetricSample]:
        reading = self.source.read()
        ts = self.wall_ns()
        values = {"cpu_pct": reading.cpu_pct, "mem_used_gb": reading.mem_used_gb, "disk_pct": reading.disk_pct}
        snap = reading.counters
        if snap is not None and self._prev is not None and snap.timestamp > self._prev.timestamp:
            values["disk_io_mbps"], values["net_kbps"] = derive_rates(self._prev, snap)
        # after a gap the next interval has no baseline and is skipped
        self._prev = snap
        batch = [MetricSample(ts, metric, float(v), self.run_id, self.sim)
                 for metric, v in values.items() if v is not None]
        with self._lock:
            self.samples.extend(batch)
        if self.store is not None:
            self.store.append(batch)
        return batch


def run_sampler(sampler: Sampler, interval: float, stop: threading.Event) -> threading.Thread:
    """Start sampling in a background thread (first sample immediately)."""
    def loop():
        sampler.tick()
        run_periodic(lambda k, t: sampler.tick(), interval, stop)

    thread = threading.Thread(target=loop, name=f"sampler-{sampler.run_id}-{sampler.sim}", daemon=True)
    thread.start()
    return thread
