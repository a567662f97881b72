import pytest
from hypothesis import given, strategies as st

from regtestbed.config import (ExperimentPlan, SimulationConfig, parse, preset, serialize,
                               single_point_plan, validate, validate_plan)
from regtestbed.errors import ValidationError


def cfg(**kw):
    kw.setdefault("node_count", 100)
    return SimulationConfig(**kw)


@pytest.mark.parametrize("i", [1, 2, 3, 4])
def test_preset_matches_golden(i, golden):
    g = golden(f"preset_{i}.json")
    plan = preset(i)
    assert plan.id == g["id"]
    assert plan.varied_parameter == g["varied_parameter"]
    assert [p.to_dict() for p in plan.points] == g["points"]


def test_preset_examples():
    p3 = preset(3)
    assert [(p.node_count, p.connections_per_node, p.tx_speed, p.blk_speed) for p in p3.points] == \
        [(100, 8, v, 0.0) for v in (0, 1, 4, 7, 15)]
    p4 = preset(4)
    assert p4.values == [4, 8, 12, 16, 20]
    assert all(p.tx_speed == 7 for p in p4.points)
    assert preset(2).values == [2, 4, 8, 12, 16]
    with pytest.raises(ValidationError) as exc:
        preset(5)
    assert exc.value.rule == "experiment_id"


def test_preset_value_override_and_include_deploy():
    plan = preset(1, values=[0, 10])
    assert plan.values == [0, 10]
    assert all(p.include_deploy for p in plan.points)
    assert not any(p.include_deploy for p in preset(2).points)


def test_preset_counts():
    assert preset(2).simulation_count() == 25
    assert preset(1).simulation_count() == 30


@pytest.mark.parametrize("kw, rule", [
    (dict(node_count=3, connections_per_node=3), "degree_lt_node_count"),
    (dict(node_count=5, connections_per_node=3), "handshake_parity"),
    (dict(duration=0), "duration_positive"),
    (dict(duration=-1), "duration_positive"),
    (dict(node_count=-1), "node_count_nonnegative"),
    (dict(connections_per_node=-2), "degree_nonnegative"),
    (dict(tx_speed=-1), "tx_speed_nonnegative"),
    (dict(blk_speed=-0.5), "blk_speed_nonnegative"),
    (dict(sample_interval=0), "sample_interval_positive"),
    (dict(repetitions=0), "repetitions_positive"),
    (dict(seed=2**64), "seed_range"),
    (dict(seed=-1), "seed_range"),
    (dict(backend="vm"), "backend"),
    (dict(node_count=1, tx_speed=1), "tx_needs_two_nodes"),
    (dict(node_count=0, blk_speed=4), "blk_needs_a_node"),
])
def test_validate_rejects(kw, rule):
    with pytest.raises(ValidationError) as exc:
        validate(cfg(**kw))
    assert exc.value.rule == rule
    assert isinstance(exc.value, ValueError)


def test_validate_accepts_table_row():
    c = cfg(connections_per_node=8)
    assert validate(c) is c
    assert validate(cfg(node_count=0)) is not None


def test_every_preset_point_validates():
    for i in range(1, 5):
        for p in preset(i).points:
            validate(p)


@given(n=st.integers(-3, 40), k=st.integers(-3, 40), dur=st.floats(-5, 5, allow_nan=False))
def test_rejection_names_one_rule(n, k, dur):
    c = SimulationConfig(node_count=n, connections_per_node=k, duration=dur)
    try:
        validate(c)
    except ValidationError as exc:
        assert isinstance(exc.rule, str) and exc.rule
        assert " " not in exc.rule
    else:
        assert n >= 0 and k >= 0 and dur > 0
        assert k == 0 or (n > k and n * k % 2 == 0)


def test_plan_must_vary_one_parameter():
    a = cfg(connections_per_node=8)
    b = cfg(connections_per_node=8, tx_speed=1.0, seed=3)
    with pytest.raises(ValidationError) as exc:
        validate_plan(ExperimentPlan(9, "tx_speed", (a, b)))
    assert exc.value.rule == "single_varied_parameter"
    with pytest.raises(ValidationError):
        validate_plan(ExperimentPlan(9, "colour", (a,)))


@pytest.mark.parametrize("i", [1, 2, 3, 4])
def test_serialize_round_trip(i):
    plan = preset(i, seed=42, duration=60)
    assert parse(serialize(plan)) == plan


def test_single_point_round_trip():
    plan = single_point_plan(cfg(connections_per_node=4, tx_speed=2.5, blk_speed=6))
    back = parse(serialize(plan))
    assert back.points == plan.points


MINIMAL = """
[network]
node_count = 10
connections_per_node = 2
[load]
tx_speed = 1
[run]
duration = 30  # short
"""


def test_parse_defaults():
    plan = parse(MINIMAL)
    (p,) = plan.points
    assert (p.node_count, p.connections_per_node, p.tx_speed, p.blk_speed) == (10, 2, 1.0, 0.0)
    assert p.duration == 30 and p.sample_interval == 1 and p.repetitions == 5
    assert p.backend == "mock"


@pytest.mark.parametrize("text, rule", [
    ("not an ini", "syntax"),
    ("[network]\nnode_count=3\n[load]\n", "missing_section"),
    (MINIMAL + "colour = red\n", "unknown_key"),
    ("[network]\n[load]\n[run]\n", "missing_key"),
    (MINIMAL.replace("= 10", "= ten"), "value_type"),
    (MINIMAL + "experiment = x\n", "value_type"),
    (MINIMAL + "vary = colour\n", "varied_parameter"),
    (MINIMAL + "vary = tx_speed\nvalues = 1, fast\n", "value_type"),
    (MINIMAL.replace("= 2\n", "= 3\n", 1).replace("= 10", "= 5"), "handshake_parity"),
])
def test_parse_errors(text, rule):
    with pytest.raises(ValidationError) as exc:
        parse(text)
    assert exc.value.rule == rule


def test_parse_sweep():
    plan = parse(MINIMAL + "experiment = 7\nvary = tx_speed\nvalues = 0, 2, 3.5\n")
    assert plan.id == 7 and plan.values == [0.0, 2.0, 3.5]
