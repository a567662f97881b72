"""Batch statistics: time-average each simulation, then mean and population std."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import BatchError
from .store import METRICS, MetricSeries

Window = tuple[int, int]


@dataclass(frozen=True)
class BatchSummary:
    config: object
    repetitions: int
    mean: dict[str, float]
    std: dict[str, float]
    per_simulation: dict[str, list[float]] = field(default_factory=dict)
    incomplete: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"repetitions": self.repetitions, "mean": self.mean, "std": self.std,
                "per_simulation": self.per_simulation, "incomplete": list(self.incomplete),
                "std_kind": "population"}


def aggregate_batch(series: Sequence[Mapping[str, MetricSeries]], window: Window | Sequence[Window],
                    repetitions: int | None = None, config=None,
                    metrics: Sequence[str] = METRICS) -> BatchSummary:
    """Summarise one batch.

    ``series`` holds one {metric: MetricSeries} mapping per simulation and
    ``window`` is either one (start, end] pair for all of them or one pair
    per simulation.  A metric that has no in-window sample in some
    simulation is reported as incomplete instead of being averaged.
    """
    if repetitions is None:
        repetitions = getattr(config, "repetitions", len(series))
    if len(series) != repetitions:
        raise BatchError(f"batch needs {repetitions} simulations, got {len(series)}")
    if len(window) == 2 and all(isinstance(x, (int, np.integer)) for x in window):
        windows = [tuple(window)] * len(series)
    else:
        windows = [tuple(w) for w in window]
        if len(windows) != len(series):
            raise BatchError(f"{len(windows)} windows for {len(series)} simulations")

    mean, std, per_sim, incomplete = {}, {}, {}, []
    for metric in metrics:
        reduced = []
        for sim_series, (start, end) in zip(series, windows):
            s = sim_series.get(metric)
            if s is None:
                break
            values = s.window(start, end).values
            if len(values) == 0:
                break
            reduced.append(float(np.mean(values)))
        if len(reduced) != len(series):
            incomplete.append(metric)
            continue
        arr = np.array(reduced)
        per_sim[metric] = reduced
        mean[metric] = float(arr.mean())
        std[metric] = float(arr.std(ddof=0))
    return BatchSummary(config, repetitions, mean, std, per_sim, tuple(incomplete))
