"""Explicit k-regular peer graphs and the connect commands that build them.

Regtest nodes never discover peers on their own, so the testbed decides the
whole graph up front.  The graph is a circulant ring lattice (every vertex
linked to its k/2 nearest neighbours on each side, plus the antipodal vertex
when k is odd) whose vertex labels are shuffled by a seeded permutation.
"""
from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import SimulationConfig, validate
from .errors import NodeError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Topology:
    node_count: int
    degree: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        arr = self._array()
        if len(arr) and not (np.all(arr[:, 0] >= 0) and np.all(arr[:, 0] < arr[:, 1])
                             and np.all(arr[:, 1] < self.node_count)):
            bad = next((i, j) for i, j in self.edges if not 0 <= i < j < self.node_count)
            raise ValidationError("edge_range", f"edge {bad} is not 0 <= i < j < {self.node_count}")

    def _array(self) -> np.ndarray:
        return np.fromiter((v for e in self.edges for v in e), dtype=np.int64,
                           count=2 * len(self.edges)).reshape(-1, 2)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def degrees(self) -> np.ndarray:
        return np.bincount(self._array().ravel(), minlength=self.node_count)

    def neighbours(self, node: int) -> set[int]:
        return {j if i == node else i for i, j in self.edges if node in (i, j)}

    def is_regular(self) -> bool:
        deg = self.degrees()
        return bool(np.all(deg == self.degree)) and len(self.edges) * 2 == self.node_count * self.degree


def _circulant_pairs(n: int, k: int) -> np.ndarray:
    """(m, 2) array of ring-lattice edges as (low, high) pairs."""
    if k == 0 or n == 0:
        return np.zeros((0, 2), dtype=np.int64)
    i = np.arange(n)
    parts = [np.stack([i, (i + off) % n], axis=1) for off in range(1, k // 2 + 1)]
    if k % 2:
        half = np.arange(n // 2)
        parts.append(np.stack([half, half + n // 2], axis=1))
    # offsets stay below n/2 when n > k, so no pair repeats
    return np.sort(np.concatenate(parts), axis=1)


def circulant_edges(n: int, k: int) -> set[tuple[int, int]]:
    """Unlabelled ring lattice; requires n > k and n*k even when k > 0."""
    return {(int(a), int(b)) for a, b in _circulant_pairs(n, k)}


def generate_regular(n: int, k: int, seed: int = 0) -> Topology:
    validate(SimulationConfig(node_count=n, connections_per_node=k))
    perm = np.random.default_rng(seed).permutation(n) if n else np.zeros(0, dtype=np.int64)
    pairs = np.sort(perm[_circulant_pairs(n, k)], axis=1)
    topo = Topology(n, k, frozenset(zip(pairs[:, 0].tolist(), pairs[:, 1].tolist())))
    assert np.all(np.bincount(pairs.ravel(), minlength=n) == k)
    return topo


def connection_plan(topology: Topology) -> list[tuple[int, int]]:
    """One (initiator, target) command per edge; the lower index initiates."""
    return topology.sorted_edges()


# ---------------------------------------------------------------------------
# edge-list files

def write_edge_list(topology: Topology, path: str | Path) -> Path:
    path = Path(path)
    lines = [f"# nodes={topology.node_count} degree={topology.degree}"]
    lines += [f"{i} {j}" for i, j in topology.sorted_edges()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_edge_list(path: str | Path) -> Topology:
    n = k = None
    edges = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                key, _, value = token.partition("=")
                if key == "nodes":
                    n = int(value)
                elif key == "degree":
                    k = int(value)
            continue
        i, j = (int(x) for x in line.split())
        edges.add((min(i, j), max(i, j)))
    if n is None:
        n = 1 + max((j for _, j in edges), default=-1)
    if k is None:
        deg = Counter(v for e in edges for v in e)
        k = deg.most_common(1)[0][1] if deg else 0
    return Topology(n, k, frozenset(edges))


# ---------------------------------------------------------------------------
# verification against live nodes

@dataclass
class NodeCheck:
    node_id: int
    expected: int
    actual: int | None = None
    missing: list[int] = field(default_factory=list)
    extra: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.actual == self.expected and not self.missing and not self.extra

    @property
    def status(self) -> str:
        if self.error is not None:
            return "unqueryable"
        return "ok" if self.ok else "mismatch"


@dataclass
class TopologyReport:
    checks: list[NodeCheck]

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def discrepancies(self) -> list[NodeCheck]:
        return [c for c in self.checks if not c.ok]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "nodes": [
                {"node_id": c.node_id, "status": c.status, "expected": c.expected,
                 "actual": c.actual, "missing": c.missing, "extra": c.extra, "error": c.error}
                for c in self.checks
            ],
        }


def verify_topology(nodes: Sequence, topology: Topology, max_workers: int = 8) -> TopologyReport:
    """Compare every node's live peer list with the planned graph.

    Peers are matched by host.  A node whose RPC fails is reported as
    unqueryable and the scan carries on with the others.
    """
    by_host = {h.host: h.node_id for h in nodes}
    expected_peers = {h.node_id: set() for h in nodes}
    for i, j in topology.edges:
        expected_peers.setdefault(i, set()).add(j)
        expected_peers.setdefault(j, set()).add(i)

    def check(handle) -> NodeCheck:
        want = expected_peers.get(handle.node_id, set())
        result = NodeCheck(handle.node_id, expected=len(want))
        try:
            hosts = list(handle.peer_hosts())
        except NodeError as exc:
            result.error = str(exc)
            return result
        seen = set()
        for host in hosts:
            if host in by_host:
                seen.add(by_host[host])
            else:
                result.extra.append(host)
        result.actual = len(hosts)
        result.missing = sorted(want - seen)
        result.extra += [str(p) for p in sorted(seen - want)]
        return result

    if not nodes:
        return TopologyReport([])
    with ThreadPoolExecutor(max_workers=max(1, min(max_workers, len(nodes)))) as pool:
        checks = list(pool.map(check, nodes))
    checks.sort(key=lambda c: c.node_id)
    bad = [c.node_id for c in checks if not c.ok]
    if bad:
        log.warning("topology mismatch on %d node(s): %s", len(bad), bad[:10])
    return TopologyReport(checks)


def apply_plan(nodes: Sequence, plan: Iterable[tuple[int, int]]) -> None:
    by_id = {h.node_id: h for h in nodes}
    for src, dst in plan:
        by_id[src].connect_peer(by_id[dst])
