"""Experiments: every plan point run ``repetitions`` times, then summarised.

A run directory holds everything needed to rebuild the report later::

    plan.ini            the plan, in run-file format
    metrics.lp          all samples of all simulations (line protocol)
    simulations.json    per simulation: point, repetition, phases, window, ...
    loadlog_s<k>.csv    load generator events of simulation k
    topology_s<k>.txt   planned peer graph of simulation k
    environment.json    host fingerprint
"""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..config import ExperimentPlan, load_plan, serialize, validate_plan
from ..loadgen import LoadLog, nominal_vs_effective
from ..metrics import UNITS, BatchSummary, LineProtocolStore, MetricSeries, aggregate_batch
from ..metrics.store import METRICS, check_run_id
from ..topology import write_edge_list
from .simulation import DEFAULT_DRAIN, SimulationResult, SimulationSeeds, run_simulation

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 2


@dataclass
class SimulationRecord:
    sim: int
    point: int
    rep: int
    window: tuple[int, int] | None = None
    phases: dict = field(default_factory=dict)
    nominal_tx: float = 0.0
    effective_tx: float = 0.0
    successful_sends: int = 0
    blocks: int = 0
    mempool_total: int = 0
    topology_passed: bool | None = None
    attempts: int = 1
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class PointResult:
    index: int
    value: float
    config: object
    summary: BatchSummary | None
    simulations: list[SimulationRecord]

    @property
    def incomplete(self) -> bool:
        return self.summary is None or bool(self.summary.incomplete) or any(not s.ok for s in self.simulations)

    @property
    def nominal_tx(self) -> float:
        return float(self.config.tx_speed)

    @property
    def effective_tx(self) -> float:
        ok = [s.effective_tx for s in self.simulations if s.ok]
        return float(np.mean(ok)) if ok else float("nan")

    @property
    def topology_passed(self) -> bool:
        return all(s.topology_passed is not False for s in self.simulations if s.ok)


@dataclass
class ExperimentReport:
    plan: ExperimentPlan
    run_id: str
    points: list[PointResult]
    environment: dict = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return any(p.incomplete for p in self.points)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "experiment": self.plan.id,
            "varied_parameter": self.plan.varied_parameter,
            "units": {**UNITS, "bytes": "decimal (1 KB = 1e3 B, 1 MB = 1e6 B)", "std": "population"},
            "environment": self.environment,
            "points": [
                {
                    "value": p.value,
                    "config": p.config.to_dict(),
                    "incomplete": p.incomplete,
                    "summary": p.summary.to_dict() if p.summary else None,
                    "nominal_tx": p.nominal_tx,
                    "effective_tx": p.effective_tx,
                    "topology_passed": p.topology_passed,
                    "simulations": [vars(s) for s in p.simulations],
                }
                for p in self.points
            ],
        }


def environment_fingerprint(backend: str) -> dict:
    import psutil

    return {
        "backend": backend,
        "cpu_count": os.cpu_count(),
        "ram_bytes": psutil.virtual_memory().total,
        "disk_bytes": psutil.disk_usage("/").total,
    }


def make_run_id(plan: ExperimentPlan) -> str:
    stamp = time.strftime("%Y%m%dT%H%M%S", time.gmtime())
    seed = plan.points[0].seed if plan.points else 0
    return f"exp{plan.id}-{stamp}-{seed}"


def _record(result: SimulationResult, point: int, rep: int, attempts: int) -> SimulationRecord:
    nominal, effective = nominal_vs_effective(result.load, result.phases["measuring"])
    return SimulationRecord(
        sim=result.sim, point=point, rep=rep, window=tuple(result.window), phases=result.phases,
        nominal_tx=nominal, effective_tx=effective,
        successful_sends=len(result.load.successes()),
        blocks=sum(1 for e in result.load.blk_events if e.outcome == "ok"),
        mempool_total=int(sum(result.mempool_sizes)),
        topology_passed=result.verification.passed if result.verification else None,
        attempts=attempts,
    )


def run_experiment(plan: ExperimentPlan, *, out: str | Path | None = None, run_id: str | None = None,
                   drain: float = DEFAULT_DRAIN, orchestrator=None, keep_last: bool = False,
                   simulate: Callable[..., SimulationResult] | None = None,
                   on_result: Callable[[SimulationResult], None] | None = None) -> ExperimentReport:
    """Run every point of ``plan`` as a batch and summarise it.

    A simulation that raises is retried once; a second failure marks its
    point incomplete and the experiment moves on.  With ``out`` set, all raw
    artifacts and the rendered report are written to ``out/<run_id>``.
    """
    validate_plan(plan)
    simulate = simulate or run_simulation
    run_id = check_run_id(run_id or make_run_id(plan))
    run_dir = None
    store = None
    if out is not None:
        run_dir = Path(out) / run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "plan.ini").write_text(serialize(plan), encoding="utf-8")
        store = LineProtocolStore(run_dir / "metrics.lp")

    backend = plan.points[0].backend if plan.points else "mock"
    environment = environment_fingerprint(backend)
    points = []
    sim = 0
    epoch = time.time_ns()
    total = plan.simulation_count()
    for pi, config in enumerate(plan.points):
        series, windows, records = [], [], []
        for rep in range(config.repetitions):
            seeds = SimulationSeeds.derive(config.seed, pi, rep)
            last = keep_last and sim == total - 1
            record = SimulationRecord(sim, pi, rep)
            for attempt in range(1, MAX_ATTEMPTS + 1):
                try:
                    result = simulate(config, run_id=run_id, sim=sim, seeds=seeds, store=store,
                                      drain=drain, orchestrator=orchestrator, keep=last,
                                      epoch_ns=epoch)
                except Exception as exc:
                    log.warning("simulation %d (point %d, rep %d) attempt %d failed: %s",
                                sim, pi, rep, attempt, exc)
                    record = SimulationRecord(sim, pi, rep, attempts=attempt, error=str(exc))
                    continue
                record = _record(result, pi, rep, attempt)
                epoch = max(time.time_ns(), result.phases["torn_down"][1] + 1_000_000_000)
                series.append(result.series(windowed=False))
                windows.append(result.window)
                if run_dir is not None:
                    result.load.to_csv(run_dir / f"loadlog_s{sim}.csv")
                    write_edge_list(result.topology, run_dir / f"topology_s{sim}.txt")
                    if last and result.credentials:
                        (run_dir / "credentials.json").write_text(json.dumps(result.credentials))
                if on_result is not None:
                    on_result(result)
                break
            records.append(record)
            sim += 1
        summary = None
        if len(series) == config.repetitions:
            summary = aggregate_batch(series, windows, config.repetitions, config)
        points.append(PointResult(pi, getattr(config, plan.varied_parameter), config, summary, records))
        log.info("point %d/%d (%s=%s) done", pi + 1, len(plan.points), plan.varied_parameter,
                 getattr(config, plan.varied_parameter))

    report = ExperimentReport(plan, run_id, points, environment)
    if run_dir is not None:
        _write_records(run_dir, report)
        from .report import emit_report

        emit_report(report, run_dir)
    return report


def _write_records(run_dir: Path, report: ExperimentReport) -> None:
    records = [vars(s) for p in report.points for s in p.simulations]
    (run_dir / "simulations.json").write_text(json.dumps(records, indent=1), encoding="utf-8")
    (run_dir / "environment.json").write_text(json.dumps(report.environment, indent=1), encoding="utf-8")


def load_report(run_dir: str | Path) -> ExperimentReport:
    """Rebuild an ExperimentReport from the raw artifacts of a run directory."""
    run_dir = Path(run_dir)
    plan = load_plan(run_dir / "plan.ini")
    raw = json.loads((run_dir / "simulations.json").read_text(encoding="utf-8"))
    environment = {}
    if (run_dir / "environment.json").exists():
        environment = json.loads((run_dir / "environment.json").read_text(encoding="utf-8"))
    run_id = run_dir.name
    store = LineProtocolStore(run_dir / "metrics.lp")
    grouped = store.load(run_id)
    if store.corruption.skipped:
        log.warning("%d corrupt metric line(s) skipped", store.corruption.skipped)

    points = []
    for pi, config in enumerate(plan.points):
        records = []
        for r in (r for r in raw if r["point"] == pi):
            r = dict(r)
            if r.get("window") is not None:
                r["window"] = tuple(r["window"])
            r["phases"] = {k: tuple(v) for k, v in (r.get("phases") or {}).items()}
            records.append(SimulationRecord(**r))
        records.sort(key=lambda s: s.rep)
        ok = [s for s in records if s.ok]
        summary = None
        if len(ok) == config.repetitions and ok:
            series = [{m: grouped.get((s.sim, m), MetricSeries(m, np.zeros(0, np.int64), np.zeros(0)))
                       for m in METRICS} for s in ok]
            summary = aggregate_batch(series, [s.window for s in ok], config.repetitions, config)
        for s in ok:
            path = run_dir / f"loadlog_s{s.sim}.csv"
            if path.exists():
                loadlog = LoadLog.from_csv(path, nominal_tx_rate=config.tx_speed)
                s.nominal_tx, s.effective_tx = nominal_vs_effective(loadlog, s.phases["measuring"])
        points.append(PointResult(pi, getattr(config, plan.varied_parameter), config, summary, records))
    return ExperimentReport(plan, run_id, points, environment)
