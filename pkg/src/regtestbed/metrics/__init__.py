"""Resource metrics: sampling, rate derivation, storage and batch statistics."""
from .aggregate import BatchSummary, aggregate_batch
from .sampler import (CounterSnapshot, HostReading, HostSource, MockHostModel, MockHostSource,
                      Sampler, derive_rates, run_sampler)
from .store import (METRICS, CorruptionReport, LineProtocolStore, MetricSample, MetricSeries,
                    parse_line)

UNITS = {
    "cpu_pct": "%",
    "mem_used_gb": "GB",
    "disk_pct": "%",
    "disk_io_mbps": "MB/s",
    "net_kbps": "KB/s",
}


def sample_host(source, run_id: str = "adhoc", sim: int = 0, now: int | None = None):
    """Poll ``source`` once: (direct-metric samples, counter snapshot or None).

    Failed reads are simply absent from the returned samples.
    """
    reading = source.read()
    ts = now if now is not None else (reading.counters.timestamp if reading.counters else source.wall_ns())
    samples = [MetricSample(ts, metric, float(value), run_id, sim)
               for metric, value in (("cpu_pct", reading.cpu_pct), ("mem_used_gb", reading.mem_used_gb),
                                     ("disk_pct", reading.disk_pct))
               if value is not None]
    return samples, reading.counters


__all__ = [
    "BatchSummary", "CorruptionReport", "CounterSnapshot", "HostReading", "HostSource",
    "LineProtocolStore", "METRICS", "MetricSample", "MetricSeries", "MockHostModel",
    "MockHostSource", "Sampler", "UNITS", "aggregate_batch", "derive_rates", "parse_line",
    "run_sampler", "sample_host",
]
