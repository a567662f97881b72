"""Brute-force reference computations shared by unit and acceptance tests.

Each oracle recomputes a quantity from raw inputs with plain Python loops,
independent of the vectorised code under test.
"""
import math
import random

from regtestbed.errors import NodeError
from regtestbed.nodectl.mock import COIN, MockNetwork


def unspent_total(net: MockNetwork) -> int:
    """Sum every output not consumed by a pending transaction, confirmed or not."""
    total = 0
    for op, u in list(net.utxos.items()) + list(net.mempool_outputs.items()):
        if op not in net.spent:
            total += u.amount
    return total


def random_ledger_run(seed: int, n_ops: int = 12, max_nodes: int = 5) -> tuple[bool, int]:
    """Apply a random connect/fund/send/mine sequence, checking conservation after each step.

    Returns (conserved throughout, number of successful sends).
    """
    rng = random.Random(seed)
    n = rng.randint(2, max_nodes)
    net = MockNetwork(n)
    nodes = net.nodes
    sends = 0
    for _ in range(n_ops):
        op = rng.choice(("connect", "fund", "send", "send", "mine"))
        try:
            if op == "connect":
                a, b = rng.sample(range(n), 2)
                nodes[a].connect_peer(nodes[b])
            elif op == "fund":
                nodes[rng.randrange(n)].generate_blocks(rng.randint(1, 110))
            elif op == "mine":
                nodes[rng.randrange(n)].generate_blocks(1)
            else:
                a, b = rng.sample(range(n), 2)
                bal = net.balance(a)
                amount = rng.randint(1, max(1, bal + COIN))
                nodes[a].send_to_address(nodes[b].get_new_address(), amount)
                sends += 1
        except NodeError:
            pass
        expected = net.params.block_reward * net.height
        if unspent_total(net) != expected or net.supply() != expected:
            return False, sends
    return True, sends


def rates_oracle(times_ns, disk_read, disk_written, sent, received):
    """Per-interval (disk MB/s, net KB/s) from raw cumulative lists; None on any reset."""
    out = []
    for i in range(1, len(times_ns)):
        dt = (times_ns[i] - times_ns[i - 1]) / 1e9
        dr, dw = disk_read[i] - disk_read[i - 1], disk_written[i] - disk_written[i - 1]
        ds, dv = sent[i] - sent[i - 1], received[i] - received[i - 1]
        disk = None if dr < 0 or dw < 0 else (dr + dw) / dt / 1e6
        net = None if ds < 0 or dv < 0 else (ds + dv) / dt / 1e3
        out.append((disk, net))
    return out


def batch_oracle(per_sim_values):
    """Two-pass mean then population std of per-simulation arithmetic means."""
    means = []
    for vals in per_sim_values:
        s = 0.0
        for v in vals:
            s += v
        means.append(s / len(vals))
    m = sum(means) / len(means)
    var = sum((x - m) ** 2 for x in means) / len(means)
    return m, math.sqrt(var)


def rel_close(a: float, b: float, tol: float = 1e-9) -> bool:
    return abs(a - b) <= tol * max(abs(a), abs(b), 1e-300) or a == b
