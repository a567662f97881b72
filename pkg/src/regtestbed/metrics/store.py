"""Append-only line-protocol file store, one file per run.

Every sample is one line::

    metrics,run_id=<id>,sim=<k> <metric>=<float> <unix-ns>
"""
from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

METRICS = ("cpu_pct", "mem_used_gb", "disk_pct", "disk_io_mbps", "net_kbps")
MEASUREMENT = "metrics"

_RUN_ID = re.compile(r"^[A-Za-z0-9_.\-]+$")
_LINE = re.compile(
    r"^metrics,run_id=(?P<run>[A-Za-z0-9_.\-]+),sim=(?P<sim>\d+) "
    r"(?P<metric>[a-z_]+)=(?P<value>\S+) (?P<ts>-?\d+)$"
)


@dataclass(frozen=True)
class MetricSample:
    timestamp: int  # unix ns
    metric: str
    value: float
    run_id: str
    sim: int = 0

    def to_line(self) -> str:
        return f"{MEASUREMENT},run_id={self.run_id},sim={self.sim} {self.metric}={self.value!r} {self.timestamp}"


@dataclass
class MetricSeries:
    metric: str
    timestamps: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    def window(self, start: int | None, end: int | None) -> "MetricSeries":
        """Samples with start < t <= end."""
        mask = np.ones(len(self.timestamps), dtype=bool)
        if start is not None:
            mask &= self.timestamps > start
        if end is not None:
            mask &= self.timestamps <= end
        return MetricSeries(self.metric, self.timestamps[mask], self.values[mask])

    @classmethod
    def from_samples(cls, metric: str, samples: Iterable[MetricSample]) -> "MetricSeries":
        picked = [s for s in samples if s.metric == metric]
        return cls(metric, np.array([s.timestamp for s in picked], dtype=np.int64),
                   np.array([s.value for s in picked], dtype=np.float64))


@dataclass
class CorruptionReport:
    skipped: int = 0
    lines: list[int] = field(default_factory=list)


def check_run_id(run_id: str) -> str:
    if not _RUN_ID.match(run_id):
        raise ValueError(f"run id {run_id!r} may only contain letters, digits, '_', '.', '-'")
    return run_id


def parse_line(line: str) -> MetricSample | None:
    m = _LINE.match(line)
    if m is None or m["metric"] not in METRICS:
        return None
    try:
        value = float(m["value"])
    except ValueError:
        return None
    return MetricSample(int(m["ts"]), m["metric"], value, m["run"], int(m["sim"]))


class LineProtocolStore:
    """Single-writer append-only store; readers may run concurrently and see a prefix."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.corruption = CorruptionReport()

    def append(self, samples: Iterable[MetricSample]) -> int:
        lines = []
        for s in samples:
            if s.metric not in METRICS:
                raise ValueError(f"unknown metric {s.metric!r}")
            check_run_id(s.run_id)
            lines.append(s.to_line() + "\n")
        if not lines:
            return 0
        with self._lock, self.path.open("a", encoding="utf-8", newline="\n") as fh:
            fh.write("".join(lines))
        return len(lines)

    persist = append

    def read(self) -> list[MetricSample]:
        """All well-formed samples in file order; bad lines are counted in ``corruption``."""
        report = CorruptionReport()
        out = []
        if self.path.exists():
            with self.path.open(encoding="utf-8", errors="replace", newline="\n") as fh:
                for lineno, raw in enumerate(fh, 1):
                    if not raw.endswith("\n"):
                        # a partial trailing write is not a sample yet
                        break
                    sample = parse_line(raw[:-1])
                    if sample is None:
                        report.skipped += 1
                        report.lines.append(lineno)
                    else:
                        out.append(sample)
        self.corruption = report
        return out

    def query(self, run_id: str, metric: str, window: tuple[int | None, int | None] | None = None,
              sim: int | None = None) -> MetricSeries:
        start, end = window if window is not None else (None, None)
        picked = [s for s in self.read()
                  if s.run_id == run_id and s.metric == metric and (sim is None or s.sim == sim)]
        return MetricSeries.from_samples(metric, picked).window(start, end)

    def load(self, run_id: str) -> dict[tuple[int, str], MetricSeries]:
        """Every (sim, metric) series of one run."""
        grouped: dict[tuple[int, str], list[MetricSample]] = {}
        for s in self.read():
            if s.run_id == run_id:
                grouped.setdefault((s.sim, s.metric), []).append(s)
        return {key: MetricSeries.from_samples(key[1], group) for key, group in grouped.items()}
