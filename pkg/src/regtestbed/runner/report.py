"""Render an ExperimentReport: CSV tables, a text summary and one plot per metric."""
from __future__ import annotations

import csv
import json
from pathlib import Path

from ..metrics import UNITS
from ..metrics.store import METRICS
from .experiment import ExperimentReport

TITLES = {
    "cpu_pct": "CPU usage",
    "mem_used_gb": "Memory usage",
    "disk_pct": "Disk usage",
    "disk_io_mbps": "Disk I/O",
    "net_kbps": "Network speed",
}
AXIS = {
    "node_count": "# of nodes",
    "connections_per_node": "# connections per node",
    "tx_speed": "TX speed (tx/s)",
    "blk_speed": "BLK speed (blocks/h)",
}


def panels(report: ExperimentReport) -> list[str]:
    """Metrics to plot; without any connections there is no network panel."""
    if report.points and all(p.config.connections_per_node == 0 for p in report.points):
        return [m for m in METRICS if m != "net_kbps"]
    return list(METRICS)


def _num(x) -> str:
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    return repr(x)


def _rows(point) -> list[list]:
    if point.summary is None:
        return []
    return [[_num(point.value), m, repr(point.summary.mean[m]), repr(point.summary.std[m])]
            for m in METRICS if m in point.summary.mean]


def emit_report(report: ExperimentReport, out_dir: str | Path, plots: bool = True) -> list[Path]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot write report to {out_dir}: {exc}") from exc
    written = []
    header = ["varied_value", "metric", "mean", "std"]

    path = out_dir / "report.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for p in report.points:
            writer.writerows(_rows(p))
    written.append(path)

    for p in report.points:
        path = out_dir / f"point_{p.index:02d}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(_rows(p))
        written.append(path)

    if any(p.config.tx_speed > 0 for p in report.points):
        path = out_dir / "tx_speed.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["varied_value", "nominal_tx_per_s", "effective_tx_per_s"])
            for p in report.points:
                writer.writerow([_num(p.value), repr(p.nominal_tx), repr(p.effective_tx)])
        written.append(path)

    path = out_dir / "summary.txt"
    path.write_text(_summary(report), encoding="utf-8")
    written.append(path)

    path = out_dir / "report.json"
    path.write_text(json.dumps(report.to_dict(), indent=1, default=str), encoding="utf-8")
    written.append(path)

    if plots and report.points:
        written += _plots(report, out_dir)
    return written


def _summary(report: ExperimentReport) -> str:
    plan = report.plan
    lines = [
        f"run {report.run_id}: experiment {plan.id}, varying {plan.varied_parameter}",
        f"{len(report.points)} point(s)",
    ]
    if not report.points:
        return "\n".join(lines) + "\n"
    base = report.points[0].config
    lines.append(f"nodes={base.node_count} peers={base.connections_per_node} tx/s={base.tx_speed} "
                 f"blk/h={base.blk_speed} (varied: {plan.varied_parameter})")
    lines.append(f"duration={base.duration}s sample_interval={base.sample_interval}s "
                 f"repetitions={base.repetitions} backend={base.backend} seed={base.seed}")
    lines.append("statistics: per-simulation time average, then batch mean +- population std")
    lines.append("units: " + ", ".join(f"{m}={u}" for m, u in UNITS.items()) + " (decimal KB/MB)")
    env = report.environment
    if env:
        lines.append(f"host: {env.get('cpu_count')} CPU, {env.get('ram_bytes', 0) / 1e9:.1f} GB RAM, "
                     f"{env.get('disk_bytes', 0) / 1e9:.1f} GB disk")
    lines.append("")
    for p in report.points:
        flag = " [INCOMPLETE]" if p.incomplete else ""
        lines.append(f"{plan.varied_parameter} = {_num(p.value)}{flag}")
        if p.summary is not None:
            for m in METRICS:
                if m in p.summary.mean:
                    lines.append(f"  {TITLES[m]:<14} {p.summary.mean[m]:12.4f} +- {p.summary.std[m]:.4f} {UNITS[m]}")
                else:
                    lines.append(f"  {TITLES[m]:<14} (no samples)")
        if p.config.tx_speed > 0:
            lines.append(f"  tx speed       nominal {p.nominal_tx:g} tx/s, effective {p.effective_tx:.3f} tx/s")
        failed = [s for s in p.simulations if not s.ok]
        for s in failed:
            lines.append(f"  simulation {s.sim} failed after {s.attempts} attempt(s): {s.error}")
        if not p.topology_passed:
            lines.append("  topology verification FAILED")
    return "\n".join(lines) + "\n"


def _plots(report: ExperimentReport, out_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    varied = report.plan.varied_parameter
    done = [p for p in report.points if p.summary is not None]
    for metric in panels(report):
        xs = [p.value for p in done if metric in p.summary.mean]
        ys = [p.summary.mean[metric] for p in done if metric in p.summary.mean]
        es = [p.summary.std[metric] for p in done if metric in p.summary.mean]
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3)
        ax.set_xlabel(AXIS.get(varied, varied))
        ax.set_ylabel(f"{TITLES[metric]} ({UNITS[metric]})")
        ax.set_title(TITLES[metric])
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"fig_{metric}.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        written.append(path)
    if varied == "tx_speed":
        fig, ax = plt.subplots(figsize=(4, 3))
        xs = [p.nominal_tx for p in report.points]
        ax.plot(xs, xs, "--", color="grey", label="nominal")
        ax.plot(xs, [p.effective_tx for p in report.points], "o-", label="effective")
        ax.set_xlabel("nominal tx/s")
        ax.set_ylabel("tx/s")
        ax.legend()
        fig.tight_layout()
        path = out_dir / "fig_tx_speed.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        written.append(path)
    return written
