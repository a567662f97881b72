"""Simulation configurations, the four experiment presets and the run-file format.

A simulation is described by four parameters (node count, peers per node,
transaction speed in tx/s, block speed in blocks/h) plus run controls.  An
experiment fixes three of them and sweeps the fourth; each sweep point is
run ``repetitions`` times and the repetitions form a batch.

Run files are INI documents with three sections::

    [network]
    node_count = 100
    connections_per_node = 8

    [load]
    tx_speed = 7
    blk_speed = 0

    [run]
    duration = 300
    sample_interval = 1
    repetitions = 5
    seed = 0
    backend = mock
    include_deploy = false
    # optional sweep; without it the file describes a single-point plan
    experiment = 3
    vary = tx_speed
    values = 0, 1, 4, 7, 15
"""
from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .errors import ValidationError

PARAMETERS = ("node_count", "connections_per_node", "tx_speed", "blk_speed")
BACKENDS = ("mock", "container")

DEFAULT_DURATION = 300.0
DEFAULT_SAMPLE_INTERVAL = 1.0
DEFAULT_REPETITIONS = 5

# the node-count grid of experiment 1 is our own choice inside [0, 400]
PRESET_SWEEPS = {
    1: ("node_count", (0, 50, 100, 200, 300, 400)),
    2: ("connections_per_node", (2, 4, 8, 12, 16)),
    3: ("tx_speed", (0, 1, 4, 7, 15)),
    4: ("blk_speed", (4, 8, 12, 16, 20)),
}
PRESET_BASE = {
    1: dict(node_count=0, connections_per_node=0, tx_speed=0.0, blk_speed=0.0),
    2: dict(node_count=100, connections_per_node=0, tx_speed=0.0, blk_speed=0.0),
    3: dict(node_count=100, connections_per_node=8, tx_speed=0.0, blk_speed=0.0),
    4: dict(node_count=100, connections_per_node=8, tx_speed=7.0, blk_speed=0.0),
}


@dataclass(frozen=True)
class SimulationConfig:
    node_count: int
    connections_per_node: int = 0
    tx_speed: float = 0.0
    blk_speed: float = 0.0
    duration: float = DEFAULT_DURATION
    sample_interval: float = DEFAULT_SAMPLE_INTERVAL
    repetitions: int = DEFAULT_REPETITIONS
    seed: int = 0
    backend: str = "mock"
    # count container creation inside the measurement window
    include_deploy: bool = False

    def with_param(self, name: str, value) -> "SimulationConfig":
        if name not in PARAMETERS:
            raise KeyError(name)
        cast = int if name in ("node_count", "connections_per_node") else float
        return replace(self, **{name: cast(value)})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ExperimentPlan:
    id: int
    varied_parameter: str
    points: tuple[SimulationConfig, ...] = field(default_factory=tuple)

    @property
    def values(self) -> list:
        return [getattr(p, self.varied_parameter) for p in self.points]

    def simulation_count(self) -> int:
        return sum(p.repetitions for p in self.points)


def validate(config: SimulationConfig) -> SimulationConfig:
    """Return ``config`` unchanged, or raise ValidationError for the first broken rule."""
    n, k = config.node_count, config.connections_per_node
    checks = [
        ("node_count_nonnegative", isinstance(n, int) and n >= 0,
         f"node_count must be a non-negative integer, got {n!r}"),
        ("degree_nonnegative", isinstance(k, int) and k >= 0,
         f"connections_per_node must be a non-negative integer, got {k!r}"),
        ("degree_lt_node_count", k == 0 or n > k,
         f"degree must be < node count (k={k}, n={n})"),
        ("handshake_parity", k == 0 or (n * k) % 2 == 0,
         f"node_count x connections_per_node must be even (n={n}, k={k})"),
        ("tx_speed_nonnegative", config.tx_speed >= 0,
         f"tx_speed must be >= 0, got {config.tx_speed}"),
        ("blk_speed_nonnegative", config.blk_speed >= 0,
         f"blk_speed must be >= 0, got {config.blk_speed}"),
        ("tx_needs_two_nodes", config.tx_speed == 0 or n >= 2,
         f"a tx load needs at least 2 nodes (sender != receiver), got n={n}"),
        ("blk_needs_a_node", config.blk_speed == 0 or n >= 1,
         f"a block load needs at least 1 node, got n={n}"),
        ("duration_positive", config.duration > 0,
         f"duration must be > 0, got {config.duration}"),
        ("sample_interval_positive", config.sample_interval > 0,
         f"sample_interval must be > 0, got {config.sample_interval}"),
        ("repetitions_positive", isinstance(config.repetitions, int) and config.repetitions >= 1,
         f"repetitions must be a positive integer, got {config.repetitions!r}"),
        ("seed_range", isinstance(config.seed, int) and 0 <= config.seed < 2**64,
         f"seed must be an unsigned 64-bit integer, got {config.seed!r}"),
        ("backend", config.backend in BACKENDS,
         f"backend must be one of {BACKENDS}, got {config.backend!r}"),
    ]
    for rule, ok, message in checks:
        if not ok:
            raise ValidationError(rule, message)
    return config


def validate_plan(plan: ExperimentPlan) -> ExperimentPlan:
    if plan.varied_parameter not in PARAMETERS:
        raise ValidationError("varied_parameter", f"unknown parameter {plan.varied_parameter!r}")
    for p in plan.points:
        validate(p)
    if plan.points:
        ref = plan.points[0].to_dict()
        for p in plan.points[1:]:
            d = p.to_dict()
            diff = [key for key in ref if key != plan.varied_parameter and d[key] != ref[key]]
            if diff:
                raise ValidationError(
                    "single_varied_parameter",
                    f"points differ in {diff} besides {plan.varied_parameter}")
    return plan


def preset(experiment_id: int, *, seed: int = 0, backend: str = "mock",
           duration: float = DEFAULT_DURATION,
           sample_interval: float = DEFAULT_SAMPLE_INTERVAL,
           repetitions: int = DEFAULT_REPETITIONS,
           values: Sequence | None = None) -> ExperimentPlan:
    """The preset plan for experiment 1-4.

    ``values`` overrides the tested values (the experiment 1 grid is a
    default, not a measured fact).
    """
    if experiment_id not in PRESET_SWEEPS:
        raise ValidationError("experiment_id", f"unknown preset experiment {experiment_id!r} (expected 1-4)")
    varied, default_values = PRESET_SWEEPS[experiment_id]
    base = SimulationConfig(
        **PRESET_BASE[experiment_id],
        duration=float(duration), sample_interval=float(sample_interval),
        repetitions=repetitions, seed=seed, backend=backend,
        include_deploy=experiment_id == 1,
    )
    points = tuple(base.with_param(varied, v) for v in (values if values is not None else default_values))
    return validate_plan(ExperimentPlan(experiment_id, varied, points))


def single_point_plan(config: SimulationConfig, experiment_id: int = 0,
                      varied: str = "node_count") -> ExperimentPlan:
    return validate_plan(ExperimentPlan(experiment_id, varied, (validate(config),)))


# ---------------------------------------------------------------------------
# run files

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(int(value)) if value.is_integer() else repr(value)
    return str(value)


def serialize(plan: ExperimentPlan) -> str:
    if not plan.points:
        raise ValidationError("points", "cannot serialize a plan without points")
    base = plan.points[0]
    parser = configparser.ConfigParser()
    parser["network"] = {
        "node_count": _fmt(base.node_count),
        "connections_per_node": _fmt(base.connections_per_node),
    }
    parser["load"] = {"tx_speed": _fmt(base.tx_speed), "blk_speed": _fmt(base.blk_speed)}
    parser["run"] = {
        "duration": _fmt(base.duration),
        "sample_interval": _fmt(base.sample_interval),
        "repetitions": _fmt(base.repetitions),
        "seed": _fmt(base.seed),
        "backend": base.backend,
        "include_deploy": _fmt(base.include_deploy),
        "experiment": _fmt(plan.id),
        "vary": plan.varied_parameter,
        "values": ", ".join(_fmt(v) for v in plan.values),
    }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def parse(text: str) -> ExperimentPlan:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError("syntax", str(exc)) from exc
    for section in ("network", "load", "run"):
        if not parser.has_section(section):
            raise ValidationError("missing_section", f"run file lacks [{section}]")
    known = {
        "network": {"node_count", "connections_per_node"},
        "load": {"tx_speed", "blk_speed"},
        "run": {"duration", "sample_interval", "repetitions", "seed", "backend",
                "include_deploy", "experiment", "vary", "values"},
    }
    for section, keys in known.items():
        extra = set(parser[section]) - keys
        if extra:
            raise ValidationError("unknown_key", f"[{section}] has unknown keys {sorted(extra)}")

    net, load, run = parser["network"], parser["load"], parser["run"]
    if "node_count" not in net:
        raise ValidationError("missing_key", "[network] node_count is required")
    try:
        base = SimulationConfig(
            node_count=net.getint("node_count"),
            connections_per_node=net.getint("connections_per_node", 0),
            tx_speed=load.getfloat("tx_speed", 0.0),
            blk_speed=load.getfloat("blk_speed", 0.0),
            duration=run.getfloat("duration", DEFAULT_DURATION),
            sample_interval=run.getfloat("sample_interval", DEFAULT_SAMPLE_INTERVAL),
            repetitions=run.getint("repetitions", DEFAULT_REPETITIONS),
            seed=run.getint("seed", 0),
            backend=run.get("backend", "mock"),
            include_deploy=run.getboolean("include_deploy", False),
        )
        experiment_id = run.getint("experiment", 0)
    except ValueError as exc:
        raise ValidationError("value_type", str(exc)) from exc

    varied = run.get("vary", "node_count")
    if varied not in PARAMETERS:
        raise ValidationError("varied_parameter", f"unknown parameter {varied!r}")
    if "values" in run:
        raw = [v.strip() for v in run["values"].split(",") if v.strip()]
        try:
            points = tuple(base.with_param(varied, float(v)) for v in raw)
        except ValueError as exc:
            raise ValidationError("value_type", str(exc)) from exc
    else:
        points = (base,)
    return validate_plan(ExperimentPlan(experiment_id, varied, points))


def load_plan(path: str | Path) -> ExperimentPlan:
    return parse(Path(path).read_text(encoding="utf-8"))
