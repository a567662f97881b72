from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regtestbed.errors import NodeError, ValidationError
from regtestbed.nodectl.mock import MockNetwork
from regtestbed.topology import (Topology, apply_plan, circulant_edges, connection_plan,
                                 generate_regular, read_edge_list, verify_topology, write_edge_list)

# n=6, k=3 ring lattice enumerated by hand: the 6-cycle plus the three diameters
HAND_6_3 = {(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 3), (1, 4), (2, 5)}


def brute_check(topo: Topology) -> None:
    """Independent check: count degrees from the raw pair list."""
    deg = Counter()
    seen = set()
    for i, j in topo.edges:
        assert i != j
        key = frozenset((i, j))
        assert key not in seen
        seen.add(key)
        deg[i] += 1
        deg[j] += 1
    assert len(topo.edges) * 2 == topo.node_count * topo.degree
    assert all(deg[v] == topo.degree for v in range(topo.node_count))


def test_circulant_by_hand():
    assert circulant_edges(6, 3) == HAND_6_3
    assert circulant_edges(5, 2) == {(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)}
    assert circulant_edges(5, 0) == set()


def test_six_three_relabelled():
    t = generate_regular(6, 3, seed=11)
    assert len(t.edges) == 9
    assert set(t.degrees()) == {3}
    # the antipodal matching survives relabelling: three disjoint edges whose
    # endpoints sit at ring distance 3 in the inverse permutation
    perm = np.random.default_rng(11).permutation(6)
    inv = np.argsort(perm)
    unlabelled = {tuple(sorted((int(inv[i]), int(inv[j])))) for i, j in t.edges}
    assert unlabelled == HAND_6_3


@pytest.mark.parametrize("k", [2, 4, 8, 12, 16])
def test_hundred_nodes(k):
    t = generate_regular(100, k, seed=k)
    assert len(t.edges) == 100 * k // 2
    brute_check(t)


def test_empty_and_zero_degree():
    assert generate_regular(5, 0, 1).edges == frozenset()
    assert generate_regular(0, 0, 1).edges == frozenset()
    assert connection_plan(generate_regular(0, 0)) == []


def test_invalid_parameters_raise():
    with pytest.raises(ValidationError):
        generate_regular(5, 3, 0)
    with pytest.raises(ValidationError):
        generate_regular(4, 4, 0)


def test_deterministic_and_seed_sensitive():
    assert generate_regular(50, 6, 3) == generate_regular(50, 6, 3)
    assert generate_regular(50, 6, 3).edges != generate_regular(50, 6, 4).edges


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 60), k=st.integers(1, 20), seed=st.integers(0, 2**64 - 1))
def test_random_cases_regular(n, k, seed):
    if k >= n or n * k % 2:
        with pytest.raises(ValidationError):
            generate_regular(n, k, seed)
        return
    t = generate_regular(n, k, seed)
    brute_check(t)
    # isomorphic across seeds: same degree sequence
    assert sorted(t.degrees()) == sorted(generate_regular(n, k, seed ^ 1).degrees())


def test_connection_plan_lower_initiates():
    t = Topology(3, 1, frozenset({(0, 1), (1, 2)}))
    assert connection_plan(t) == [(0, 1), (1, 2)]
    plan = connection_plan(generate_regular(100, 8, 5))
    assert len(plan) == 400
    assert all(a < b for a, b in plan)


def test_edge_list_round_trip(tmp_path):
    t = generate_regular(20, 4, 9)
    path = write_edge_list(t, tmp_path / "t.txt")
    lines = path.read_text().splitlines()
    assert lines[0] == "# nodes=20 degree=4"
    assert lines[1:] == [f"{i} {j}" for i, j in sorted(t.edges)]
    assert read_edge_list(path) == t


def test_edge_range_enforced():
    with pytest.raises(ValidationError):
        Topology(3, 1, frozenset({(1, 1)}))
    with pytest.raises(ValidationError):
        Topology(3, 1, frozenset({(0, 3)}))


def wired(n, k, seed=0):
    net = MockNetwork(n)
    t = generate_regular(n, k, seed)
    apply_plan(net.nodes, connection_plan(t))
    return net, t


def test_verify_matching_network():
    net, t = wired(20, 4)
    report = verify_topology(net.nodes, t)
    assert report.passed and report.discrepancies == []
    assert all(h.get_peer_count() == 4 for h in net.nodes)


def test_verify_dropped_edge():
    net, t = wired(20, 4)
    a, b = sorted(t.edges)[0]
    net.adjacency[a].discard(b)
    net.adjacency[b].discard(a)
    report = verify_topology(net.nodes, t)
    assert not report.passed
    bad = report.discrepancies
    assert sorted(c.node_id for c in bad) == [a, b]
    assert all(c.actual == 3 and c.status == "mismatch" for c in bad)


class Broken:
    def __init__(self, handle):
        self.node_id, self.host = handle.node_id, handle.host

    def peer_hosts(self):
        raise NodeError("connection refused")


def test_verify_unqueryable_node_isolated():
    net, t = wired(10, 2)
    nodes = list(net.nodes)
    nodes[3] = Broken(nodes[3])
    report = verify_topology(nodes, t)
    assert not report.passed
    (bad,) = report.discrepancies
    assert bad.node_id == 3 and bad.status == "unqueryable"
    assert report.to_dict()["passed"] is False
