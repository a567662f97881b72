"""In-process deterministic stand-in for a regtest bitcoind network.

All mock nodes of one network share a single chain and UTXO set (blocks
propagate instantly), while every node keeps its own view of the mempool:
a transaction only reaches nodes with a path to its sender.  Amounts are
integer satoshis and fees are zero, so total supply is exactly
``block_reward * height`` at all times.

Traffic is charged along the breadth-first spanning tree of each flood:
every hop adds the payload to the sender's ``bytes_sent`` and the
receiver's ``bytes_received``.  Blocks cost a header plus a short id per
transaction, mimicking compact block relay.
"""
from __future__ import annotations

import hashlib
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import InsufficientFunds, NodeError

COIN = 100_000_000


@dataclass(frozen=True)
class MockParams:
    block_reward: int = 50 * COIN
    coinbase_maturity: int = 100
    # P2PKH sizes: 10 + 148 per input + 34 per output (1-in-1-out = 192, 1-in-2-out = 226)
    tx_overhead_bytes: int = 10
    tx_input_bytes: int = 148
    tx_output_bytes: int = 34
    coinbase_bytes: int = 100
    block_header_bytes: int = 80
    short_id_bytes: int = 6
    max_block_bytes: int = 1_000_000
    handshake_bytes: int = 300
    keepalive_bytes: int = 64
    keepalive_interval: float = 120.0
    # disk model
    container_bytes: int = 40_000_000
    wallet_write_bytes: int = 4096

    def tx_size(self, n_in: int, n_out: int) -> int:
        return self.tx_overhead_bytes + self.tx_input_bytes * n_in + self.tx_output_bytes * n_out


@dataclass(frozen=True)
class Utxo:
    owner: int
    amount: int
    maturity_height: int = 0
    coinbase: bool = False


@dataclass
class MockTx:
    txid: str
    sender: int
    inputs: list[tuple[str, int]]
    outputs: list[tuple[int, int]]
    size: int
    reach: np.ndarray
    input_amount: int = 0


@dataclass
class WorkCounters:
    """Cumulative operation counts feeding the synthetic CPU model."""
    rpc_calls: int = 0
    signatures: int = 0
    verifications: int = 0
    block_validations: int = 0
    containers_created: int = 0
    handshakes: int = 0


def _hash(*parts) -> str:
    return hashlib.sha256(":".join(str(p) for p in parts).encode()).hexdigest()


def decode_address(address: str) -> int:
    """Owner node id of a mock address."""
    try:
        prefix, owner, _ = address.split("-")
        if prefix != "bcrt1mock":
            raise ValueError(prefix)
        return int(owner)
    except ValueError:
        raise NodeError(f"invalid mock address {address!r}", code=-5) from None


class MockNetwork:
    """Shared ledger, mempools and traffic counters for a set of mock nodes."""

    def __init__(self, node_count: int = 0, params: MockParams | None = None,
                 clock: Callable[[], float] | None = None, label: str = "mock"):
        self.params = params or MockParams()
        self.clock = clock
        self.label = label
        self.lock = threading.RLock()
        self.nodes: list[MockNode] = []
        self.running: list[bool] = []
        self.adjacency: list[set[int]] = []
        self.height = 0
        self.blocks: list[tuple[str, int, int]] = []  # (hash, miner, n_tx)
        self.utxos: dict[tuple[str, int], Utxo] = {}
        self.by_owner: list[set[tuple[str, int]]] = []
        self.mempool: dict[str, MockTx] = {}
        self.mempool_outputs: dict[tuple[str, int], Utxo] = {}
        self.spent: set[tuple[str, int]] = set()
        self.sent = np.zeros(0, dtype=np.int64)
        self.received = np.zeros(0, dtype=np.int64)
        self.mempool_count = np.zeros(0, dtype=np.int64)
        self.mempool_bytes = 0
        self.disk_written = 0
        self.disk_read = 0
        self.chain_bytes = 0
        self.work = WorkCounters()
        self._seq = 0
        self._addr_seq: list[int] = []
        self._trees: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._edge_a: list[int] = []
        self._edge_b: list[int] = []
        self._edge_t: list[float] = []
        self._accrued_to: float | None = None
        for _ in range(node_count):
            self.add_node()

    # ------------------------------------------------------------------
    # membership and topology

    def add_node(self) -> "MockNode":
        with self.lock:
            node_id = len(self.nodes)
            node = MockNode(self, node_id)
            self.nodes.append(node)
            self.running.append(True)
            self.adjacency.append(set())
            self.by_owner.append(set())
            self._addr_seq.append(0)
            self.sent = np.append(self.sent, 0)
            self.received = np.append(self.received, 0)
            self.mempool_count = np.append(self.mempool_count, 0)
            for tx in self.mempool.values():
                tx.reach = np.append(tx.reach, False)
            self.disk_written += self.params.container_bytes
            self.work.containers_created += 1
            self._trees.clear()
            return node

    def stop_node(self, node_id: int) -> None:
        with self.lock:
            self._accrue()
            self.running[node_id] = False
            for peer in self.adjacency[node_id]:
                self.adjacency[peer].discard(node_id)
            self.adjacency[node_id].clear()
            self._drop_edges(node_id)
            self._trees.clear()

    def start_node(self, node_id: int) -> None:
        with self.lock:
            self.running[node_id] = True

    def _drop_edges(self, node_id: int) -> None:
        keep = [i for i, (a, b) in enumerate(zip(self._edge_a, self._edge_b)) if node_id not in (a, b)]
        self._edge_a = [self._edge_a[i] for i in keep]
        self._edge_b = [self._edge_b[i] for i in keep]
        self._edge_t = [self._edge_t[i] for i in keep]

    def _require_running(self, node_id: int) -> None:
        if not (0 <= node_id < len(self.nodes)) or not self.running[node_id]:
            raise NodeError(f"node {node_id} is not running", code=-28)

    def connect(self, src: int, dst: int) -> None:
        with self.lock:
            self._require_running(src)
            if src == dst:
                raise NodeError("cannot connect a node to itself", code=-23)
            self._require_running(dst)
            if dst in self.adjacency[src]:
                return
            self._accrue()
            self.adjacency[src].add(dst)
            self.adjacency[dst].add(src)
            hs = self.params.handshake_bytes
            self.sent[[src, dst]] += hs
            self.received[[src, dst]] += hs
            self.work.handshakes += 1
            self._edge_a.append(src)
            self._edge_b.append(dst)
            self._edge_t.append(self._now())
            self._trees.clear()

    def _now(self) -> float:
        return self.clock() if self.clock is not None else 0.0

    def _accrue(self) -> None:
        """Charge keepalive pings due on every live connection up to now."""
        if self.clock is None:
            return
        now = self.clock()
        last = self._accrued_to
        self._accrued_to = now
        if last is None or now <= last or not self._edge_a:
            return
        t0 = np.asarray(self._edge_t)
        interval = self.params.keepalive_interval
        due = np.floor((now - t0) / interval) - np.floor(np.maximum(last - t0, 0.0) / interval)
        due = np.maximum(due, 0).astype(np.int64) * self.params.keepalive_bytes
        if not due.any():
            return
        for ends in (self._edge_a, self._edge_b):
            idx = np.asarray(ends)
            np.add.at(self.sent, idx, due)
            np.add.at(self.received, idx, due)

    def _tree(self, root: int) -> tuple[np.ndarray, np.ndarray]:
        """(reach mask, child count per node) of the BFS tree rooted at ``root``."""
        cached = self._trees.get(root)
        if cached is not None:
            return cached
        n = len(self.nodes)
        reach = np.zeros(n, dtype=bool)
        children = np.zeros(n, dtype=np.int64)
        reach[root] = True
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in sorted(self.adjacency[u]):
                if not reach[v] and self.running[v]:
                    reach[v] = True
                    children[u] += 1
                    queue.append(v)
        self._trees[root] = (reach, children)
        return reach, children

    def _flood(self, root: int, size: int) -> np.ndarray:
        reach, children = self._tree(root)
        if size:
            self.sent += children * size
            self.received += reach * size
            self.received[root] -= size
        return reach

    # ------------------------------------------------------------------
    # wallet

    def new_address(self, node_id: int) -> str:
        with self.lock:
            self._require_running(node_id)
            self._addr_seq[node_id] += 1
            return f"bcrt1mock-{node_id}-{self._addr_seq[node_id]}"

    def _spendable(self, node_id: int) -> list[tuple[tuple[str, int], Utxo]]:
        """Mature outputs not spent by a pending transaction.

        An unconfirmed output counts once its transaction has reached the
        owner's mempool.
        """
        coins = []
        for op in self.by_owner[node_id]:
            if op in self.spent:
                continue
            u = self.utxos.get(op)
            if u is None:
                if not self.mempool[op[0]].reach[node_id]:
                    continue
                u = self.mempool_outputs[op]
            if u.maturity_height <= self.height:
                coins.append((op, u))
        return coins

    def balance(self, node_id: int) -> int:
        with self.lock:
            self._require_running(node_id)
            return sum(u.amount for _, u in self._spendable(node_id))

    def send(self, node_id: int, address: str, amount: int) -> str:
        with self.lock:
            self._require_running(node_id)
            dest = decode_address(address)
            if not (0 <= dest < len(self.nodes)):
                raise NodeError(f"address {address!r} belongs to no node", code=-5)
            amount = int(amount)
            if amount <= 0:
                raise NodeError("amount must be positive", code=-3)
            coins = self._spendable(node_id)
            coins.sort(key=lambda c: (-c[1].amount, c[0]))
            picked, total = [], 0
            for op, u in coins:
                if total >= amount:
                    break
                picked.append(op)
                total += u.amount
            if total < amount:
                raise InsufficientFunds(
                    f"node {node_id}: balance {sum(u.amount for _, u in coins)} < {amount}", code=-6)
            outputs = [(dest, amount)]
            if total > amount:
                outputs.append((node_id, total - amount))
            self._accrue()
            self._seq += 1
            txid = _hash(self.label, "tx", self._seq, picked, outputs)
            size = self.params.tx_size(len(picked), len(outputs))
            reach = self._flood(node_id, size)
            tx = MockTx(txid, node_id, picked, outputs, size, reach.copy(), input_amount=total)
            self.mempool[txid] = tx
            self.mempool_count += reach
            self.mempool_bytes += size
            self.spent.update(picked)
            for vout, (owner, value) in enumerate(outputs):
                op = (txid, vout)
                self.mempool_outputs[op] = Utxo(owner, value)
                self.by_owner[owner].add(op)
            n_reached = int(reach.sum())
            self.work.signatures += len(picked)
            self.work.verifications += (n_reached - 1) * len(picked)
            self.disk_written += self.params.wallet_write_bytes * (2 if dest != node_id else 1)
            return txid

    # ------------------------------------------------------------------
    # mining

    def _select(self, miner: int) -> list[MockTx]:
        budget = self.params.max_block_bytes - self.params.block_header_bytes - self.params.coinbase_bytes
        chosen: list[MockTx] = []
        included: set[str] = set()
        for tx in self.mempool.values():
            if not tx.reach[miner] or tx.size > budget:
                continue
            parents = {op[0] for op in tx.inputs if op[0] in self.mempool}
            if not parents <= included:
                continue
            chosen.append(tx)
            included.add(tx.txid)
            budget -= tx.size
        return chosen

    def generate(self, miner: int, count: int) -> list[str]:
        with self.lock:
            self._require_running(miner)
            if count < 1:
                raise NodeError("count must be >= 1", code=-8)
            self._accrue()
            p = self.params
            hashes = []
            n_live = sum(self.running)
            for b in range(count):
                txs = self._select(miner) if b == 0 else []
                for tx in txs:
                    self._confirm(tx)
                self.height += 1
                block_hash = _hash(self.label, "block", self.height, miner, [t.txid for t in txs])
                cb = (_hash(self.label, "coinbase", self.height), 0)
                self.utxos[cb] = Utxo(miner, p.block_reward, self.height + p.coinbase_maturity, True)
                self.by_owner[miner].add(cb)
                self.blocks.append((block_hash, miner, len(txs)))
                hashes.append(block_hash)
                self._flood(miner, p.block_header_bytes + p.short_id_bytes * len(txs))
                full = p.block_header_bytes + p.coinbase_bytes + sum(t.size for t in txs)
                self.chain_bytes += full
                self.disk_written += full * n_live
                self.work.block_validations += n_live
            return hashes

    def _confirm(self, tx: MockTx) -> None:
        del self.mempool[tx.txid]
        self.mempool_count -= tx.reach
        self.mempool_bytes -= tx.size
        for op in tx.inputs:
            self.spent.discard(op)
            u = self.utxos.pop(op, None)
            if u is None:
                u = self.mempool_outputs.pop(op)
            self.by_owner[u.owner].discard(op)
        for vout, (owner, value) in enumerate(tx.outputs):
            op = (tx.txid, vout)
            self.mempool_outputs.pop(op, None)
            self.utxos[op] = Utxo(owner, value)
            self.by_owner[owner].add(op)

    # ------------------------------------------------------------------
    # reads

    def traffic(self, node_id: int) -> tuple[int, int]:
        with self.lock:
            self._require_running(node_id)
            self._accrue()
            return int(self.sent[node_id]), int(self.received[node_id])

    def total_traffic(self) -> tuple[int, int]:
        with self.lock:
            self._accrue()
            return int(self.sent.sum()), int(self.received.sum())

    def supply(self) -> int:
        """Confirmed UTXOs plus pending outputs minus pending spends."""
        with self.lock:
            confirmed = sum(u.amount for u in self.utxos.values())
            pending_out = sum(v for tx in self.mempool.values() for _, v in tx.outputs)
            pending_in = sum(tx.input_amount for tx in self.mempool.values())
            return confirmed + pending_out - pending_in

    def check_conservation(self) -> bool:
        return self.supply() == self.params.block_reward * self.height

    def state_digest(self) -> str:
        """Hash of the full observable ledger and counter state."""
        with self.lock:
            h = hashlib.sha256()
            h.update(repr((self.height, sorted(self.utxos.items()), list(self.mempool),
                           self.sent.tolist(), self.received.tolist(),
                           self.mempool_count.tolist())).encode())
            return h.hexdigest()


class MockNode:
    """NodeHandle for one mock node; every call counts as one RPC."""

    def __init__(self, network: MockNetwork, node_id: int):
        self.network = network
        self.node_id = node_id
        self.host = f"mock-{node_id}"
        self.p2p_address = f"{self.host}:18444"

    def __repr__(self):
        return f"MockNode({self.node_id})"

    def _rpc(self):
        self.network.work.rpc_calls += 1

    def ping(self) -> None:
        self._rpc()
        self.network._require_running(self.node_id)

    def connect_peer(self, target: "MockNode") -> None:
        self._rpc()
        self.network.connect(self.node_id, target.node_id)

    def get_new_address(self) -> str:
        self._rpc()
        return self.network.new_address(self.node_id)

    def send_to_address(self, address: str, amount: int) -> str:
        self._rpc()
        return self.network.send(self.node_id, address, amount)

    def generate_blocks(self, count: int) -> list[str]:
        self._rpc()
        return self.network.generate(self.node_id, count)

    def get_balance(self) -> int:
        self._rpc()
        return self.network.balance(self.node_id)

    def get_peer_count(self) -> int:
        self._rpc()
        net = self.network
        with net.lock:
            net._require_running(self.node_id)
            return len(net.adjacency[self.node_id])

    def peer_hosts(self) -> list[str]:
        self._rpc()
        net = self.network
        with net.lock:
            net._require_running(self.node_id)
            return [net.nodes[p].host for p in sorted(net.adjacency[self.node_id])]

    def get_mempool_size(self) -> int:
        self._rpc()
        net = self.network
        with net.lock:
            net._require_running(self.node_id)
            return int(net.mempool_count[self.node_id])

    def get_traffic_counters(self) -> tuple[int, int]:
        self._rpc()
        return self.network.traffic(self.node_id)

    def get_block_count(self) -> int:
        self._rpc()
        self.network._require_running(self.node_id)
        return self.network.height

    def stop(self) -> None:
        self.network.stop_node(self.node_id)

    def start(self) -> None:
        self.network.start_node(self.node_id)
