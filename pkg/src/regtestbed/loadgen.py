"""Transaction and block load generators.

Each transaction tick picks a random source and a different random
destination, reads the source's spendable balance, draws an amount
uniformly from ``[min_amount, balance]``, asks the destination for a fresh
address and sends.  Each block tick asks a uniformly chosen node to mine one
block.  Every tick outcome (ok, skip, error) is logged.

Random draws happen on the scheduling side, one tick at a time, so a
generator's choices depend only on its seed and tick index even when the
RPCs themselves run on a worker pool.
"""
from __future__ import annotations

import csv
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .clock import VirtualLoop, run_periodic
from .errors import NodeError

log = logging.getLogger(__name__)

DEFAULT_MIN_AMOUNT = 10_000  # 0.0001 coin in satoshis
MAX_TX_WORKERS = 16

CSV_HEADER = ["timestamp", "kind", "source", "dest", "amount", "outcome", "id"]


@dataclass(frozen=True)
class TxGeneratorSpec:
    rate: float
    rng_seed: int = 0
    min_amount: int = DEFAULT_MIN_AMOUNT

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be >= 0")

    @property
    def interval(self) -> float:
        return 1.0 / self.rate

    @property
    def workers(self) -> int:
        return max(1, min(math.ceil(self.rate), MAX_TX_WORKERS))


@dataclass(frozen=True)
class BlkGeneratorSpec:
    rate: float  # blocks per hour
    rng_seed: int = 0

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be >= 0")

    @property
    def interval(self) -> float:
        return 3600.0 / self.rate


@dataclass(frozen=True)
class TxEvent:
    timestamp: int  # unix ns
    source: int
    dest: int
    amount: int | None
    outcome: str  # ok | skip | error
    id: str = ""


@dataclass(frozen=True)
class BlkEvent:
    timestamp: int
    miner: int
    outcome: str
    id: str = ""


@dataclass
class LoadLog:
    tx_events: list[TxEvent] = field(default_factory=list)
    blk_events: list[BlkEvent] = field(default_factory=list)
    nominal_tx_rate: float = 0.0
    tx_ticks: int = 0
    blk_ticks: int = 0

    def merge(self, other: "LoadLog") -> "LoadLog":
        return LoadLog(
            sorted(self.tx_events + other.tx_events, key=lambda e: e.timestamp),
            sorted(self.blk_events + other.blk_events, key=lambda e: e.timestamp),
            self.nominal_tx_rate or other.nominal_tx_rate,
            self.tx_ticks + other.tx_ticks,
            self.blk_ticks + other.blk_ticks,
        )

    def successes(self) -> list[TxEvent]:
        return [e for e in self.tx_events if e.outcome == "ok"]

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        rows = [(e.timestamp, "tx", e.source, e.dest, "" if e.amount is None else e.amount, e.outcome, e.id)
                for e in self.tx_events]
        rows += [(e.timestamp, "blk", e.miner, "", "", e.outcome, e.id) for e in self.blk_events]
        rows.sort(key=lambda r: (r[0], r[1]))
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            writer.writerows(rows)
        return path

    @classmethod
    def from_csv(cls, path: str | Path, nominal_tx_rate: float = 0.0) -> "LoadLog":
        out = cls(nominal_tx_rate=nominal_tx_rate)
        with Path(path).open(newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                ts = int(row["timestamp"])
                if row["kind"] == "tx":
                    amount = int(row["amount"]) if row["amount"] else None
                    out.tx_events.append(TxEvent(ts, int(row["source"]), int(row["dest"]), amount,
                                                 row["outcome"], row["id"]))
                else:
                    out.blk_events.append(BlkEvent(ts, int(row["source"]), row["outcome"], row["id"]))
        out.tx_ticks = len(out.tx_events)
        out.blk_ticks = len(out.blk_events)
        return out


def nominal_vs_effective(log: LoadLog, window: tuple[int, int]) -> tuple[float, float]:
    """(nominal, effective) tx/s; effective counts successful sends in the (start, end] ns window."""
    start, end = window
    length = (end - start) / 1e9
    if length <= 0:
        raise ValueError("empty window")
    ok = sum(1 for e in log.tx_events if e.outcome == "ok" and start < e.timestamp <= end)
    return log.nominal_tx_rate, ok / length


# ---------------------------------------------------------------------------
# tick logic shared by the threaded and the virtual-time drivers

class TxGenerator:
    def __init__(self, nodes: Sequence, spec: TxGeneratorSpec):
        if len(nodes) < 2:
            raise ValueError("the transaction generator needs at least two nodes")
        self.nodes = list(nodes)
        self.spec = spec
        self.rng = np.random.default_rng(spec.rng_seed)

    def draw(self) -> tuple[int, int, float]:
        n = len(self.nodes)
        src = int(self.rng.integers(n))
        dst = int(self.rng.integers(n - 1))
        if dst >= src:
            dst += 1
        return src, dst, float(self.rng.random())

    def execute(self, draw: tuple[int, int, float], timestamp: int) -> TxEvent:
        src_i, dst_i, u = draw
        src, dst = self.nodes[src_i], self.nodes[dst_i]
        floor = self.spec.min_amount
        try:
            balance = src.get_balance()
            if balance < floor:
                return TxEvent(timestamp, src.node_id, dst.node_id, None, "skip", f"balance {balance}")
            amount = floor + min(int(u * (balance - floor + 1)), balance - floor)
            address = dst.get_new_address()
            txid = src.send_to_address(address, amount)
        except NodeError as exc:
            return TxEvent(timestamp, src.node_id, dst.node_id, None, "error", str(exc))
        return TxEvent(timestamp, src.node_id, dst.node_id, amount, "ok", txid)


class BlkGenerator:
    def __init__(self, nodes: Sequence, spec: BlkGeneratorSpec):
        if not nodes:
            raise ValueError("the block generator needs at least one node")
        self.nodes = list(nodes)
        self.spec = spec
        self.rng = np.random.default_rng(spec.rng_seed)

    def draw(self) -> int:
        return int(self.rng.integers(len(self.nodes)))

    def execute(self, miner_i: int, timestamp: int) -> BlkEvent:
        miner = self.nodes[miner_i]
        try:
            (block_hash,) = miner.generate_blocks(1)
        except (NodeError, ValueError) as exc:
            return BlkEvent(timestamp, miner.node_id, "error", str(exc))
        return BlkEvent(timestamp, miner.node_id, "ok", block_hash)


# ---------------------------------------------------------------------------
# real-time drivers

def run_tx_generator(nodes: Sequence, spec: TxGeneratorSpec, stop: threading.Event, *,
                     until: float | None = None, clock: Callable[[], float] = time.monotonic,
                     wall_ns: Callable[[], int] = time.time_ns) -> LoadLog:
    """Send transactions at ``spec.rate`` until ``stop`` is set (or ``until`` passes).

    Each tick is handed to a bounded worker pool, so one slow RPC only
    delays its own transaction.  Returns once in-flight sends have finished.
    """
    out = LoadLog(nominal_tx_rate=spec.rate)
    if spec.rate == 0:
        return out
    gen = TxGenerator(nodes, spec)
    lock = threading.Lock()

    def work(draw):
        # stamped on completion: a send that finishes after the window does
        # not count towards the effective rate
        event = gen.execute(draw, 0)
        with lock:
            out.tx_events.append(replace(event, timestamp=wall_ns()))

    with ThreadPoolExecutor(max_workers=spec.workers, thread_name_prefix="txgen") as pool:
        def tick(k, due):
            pool.submit(work, gen.draw())

        out.tx_ticks = run_periodic(tick, spec.interval, stop, start=clock(), until=until, clock=clock)
    out.tx_events.sort(key=lambda e: e.timestamp)
    return out


def run_blk_generator(nodes: Sequence, spec: BlkGeneratorSpec, stop: threading.Event, *,
                      until: float | None = None, clock: Callable[[], float] = time.monotonic,
                      wall_ns: Callable[[], int] = time.time_ns) -> LoadLog:
    out = LoadLog()
    if spec.rate == 0:
        return out
    gen = BlkGenerator(nodes, spec)

    def tick(k, due):
        miner = gen.draw()
        out.blk_events.append(replace(gen.execute(miner, 0), timestamp=wall_ns()))

    out.blk_ticks = run_periodic(tick, spec.interval, stop, start=clock(), until=until, clock=clock)
    return out


# ---------------------------------------------------------------------------
# virtual-time drivers (mock backend)

def schedule_generators(loop: VirtualLoop, nodes: Sequence, tx: TxGeneratorSpec | None,
                        blk: BlkGeneratorSpec | None, start: float, end: float) -> LoadLog:
    """Register both generators on ``loop`` for ticks in (start, end].

    The returned log fills up as the loop runs.
    """
    out = LoadLog(nominal_tx_rate=tx.rate if tx else 0.0)
    if tx is not None and tx.rate > 0:
        txgen = TxGenerator(nodes, tx)

        def tx_tick(k, t):
            out.tx_ticks += 1
            out.tx_events.append(txgen.execute(txgen.draw(), loop.wall_ns(t)))

        loop.every(tx.interval, tx_tick, start=start, until=end, priority=0)
    if blk is not None and blk.rate > 0:
        blkgen = BlkGenerator(nodes, blk)

        def blk_tick(k, t):
            out.blk_ticks += 1
            out.blk_events.append(blkgen.execute(blkgen.draw(), loop.wall_ns(t)))

        loop.every(blk.interval, blk_tick, start=start, until=end, priority=0)
    return out
