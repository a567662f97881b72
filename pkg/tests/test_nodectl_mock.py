import pytest
from hypothesis import settings, strategies as st
from hypothesis.stateful import RuleBasedStateMachine, invariant, precondition, rule

from regtestbed.clock import VirtualLoop
from regtestbed.errors import InsufficientFunds, NodeError
from regtestbed.nodectl.mock import COIN, MockNetwork, decode_address

from oracles import random_ledger_run, unspent_total

REWARD = 50 * COIN


def funded(n=2):
    """n nodes; node 0 owns exactly one mature coinbase (50 coin)."""
    net = MockNetwork(n)
    net.nodes[0].generate_blocks(1)
    net.nodes[1].generate_blocks(100)
    return net


def test_fresh_node_reads():
    net = MockNetwork(1)
    h = net.nodes[0]
    assert (h.get_balance(), h.get_peer_count(), h.get_mempool_size()) == (0, 0, 0)
    assert h.get_traffic_counters() == (0, 0)
    assert h.get_block_count() == 0


def test_connect_and_idempotence():
    net = MockNetwork(2)
    a, b = net.nodes
    a.connect_peer(b)
    assert a.get_peer_count() == b.get_peer_count() == 1
    counters = a.get_traffic_counters()
    assert counters[0] > 0 and counters[1] > 0
    assert b.get_traffic_counters()[1] > 0
    a.connect_peer(b)
    assert a.get_peer_count() == b.get_peer_count() == 1
    assert a.get_traffic_counters() == counters
    with pytest.raises(NodeError):
        a.connect_peer(a)


def test_connect_to_stopped_node_fails():
    net = MockNetwork(2)
    net.nodes[1].stop()
    with pytest.raises(NodeError):
        net.nodes[0].connect_peer(net.nodes[1])
    with pytest.raises(NodeError):
        net.nodes[1].get_new_address()
    net.nodes[1].start()
    net.nodes[0].connect_peer(net.nodes[1])


def test_fresh_addresses():
    net = MockNetwork(2)
    a1, a2 = net.nodes[1].get_new_address(), net.nodes[1].get_new_address()
    assert a1 != a2
    assert decode_address(a1) == decode_address(a2) == 1
    with pytest.raises(NodeError):
        decode_address("bc1qsomethingelse")


def test_maturity_after_101_blocks():
    net = MockNetwork(1)
    h = net.nodes[0]
    h.generate_blocks(100)
    assert h.get_balance() == 0
    h.generate_blocks(1)
    assert h.get_block_count() == 101
    assert h.get_balance() == REWARD


def test_full_spend_is_one_in_one_out():
    net = funded()
    net.nodes[0].connect_peer(net.nodes[1])
    txid = net.nodes[0].send_to_address(net.nodes[1].get_new_address(), REWARD)
    tx = net.mempool[txid]
    assert (len(tx.inputs), len(tx.outputs), tx.size) == (1, 1, 192)


def test_partial_spend_has_change():
    net = funded()
    net.nodes[0].connect_peer(net.nodes[1])
    txid = net.nodes[0].send_to_address(net.nodes[1].get_new_address(), 20 * COIN)
    tx = net.mempool[txid]
    assert tx.outputs == [(1, 20 * COIN), (0, 30 * COIN)]
    assert tx.size == 226
    assert net.balance(0) == 30 * COIN
    assert net.nodes[1].get_mempool_size() == 1


def test_received_unconfirmed_spendable_once_reached():
    net = funded(3)
    a, b, c = net.nodes
    a.connect_peer(b)
    a.send_to_address(c.get_new_address(), 20 * COIN)
    # c has no path to a: the output exists but never reached c
    assert net.balance(2) == 0
    a.send_to_address(b.get_new_address(), 30 * COIN)
    assert net.balance(1) == 30 * COIN
    b.send_to_address(c.get_new_address(), 25 * COIN)
    assert net.balance(1) == 5 * COIN
    assert unspent_total(net) == 50 * COIN * net.height


def test_insufficient_funds_leaves_mempool():
    net = funded()
    before = net.state_digest()
    with pytest.raises(InsufficientFunds) as exc:
        net.nodes[0].send_to_address(net.nodes[1].get_new_address(), 60 * COIN)
    assert exc.value.code == -6
    assert net.mempool == {}
    assert net.state_digest() == before
    with pytest.raises(NodeError):
        net.nodes[0].send_to_address(net.nodes[1].get_new_address(), 0)


def test_fewest_inputs_selected():
    net = MockNetwork(2)
    net.nodes[0].generate_blocks(3)
    net.nodes[1].generate_blocks(100)
    assert net.balance(0) == 3 * REWARD
    txid = net.nodes[0].send_to_address(net.nodes[1].get_new_address(), 60 * COIN)
    assert len(net.mempool[txid].inputs) == 2


def test_mining_clears_all_mempools():
    net = MockNetwork(4)
    for i in range(4):
        net.nodes[i].connect_peer(net.nodes[(i + 1) % 4])
    for i in range(4):
        net.nodes[i].generate_blocks(1)
    net.nodes[0].generate_blocks(100)
    for k in range(10):
        src = k % 4
        net.nodes[src].send_to_address(net.nodes[(src + 1) % 4].get_new_address(), COIN)
    assert all(h.get_mempool_size() == 10 for h in net.nodes)
    net.nodes[2].generate_blocks(1)
    assert all(h.get_mempool_size() == 0 for h in net.nodes)
    assert net.check_conservation()
    with pytest.raises(NodeError):
        net.nodes[0].generate_blocks(0)


def test_mempool_reach_follows_edges():
    net = MockNetwork(3)
    net.nodes[0].connect_peer(net.nodes[1])
    net.nodes[0].generate_blocks(101)
    net.nodes[0].send_to_address(net.nodes[2].get_new_address(), COIN)
    assert [h.get_mempool_size() for h in net.nodes] == [1, 1, 0]
    # a miner outside the flood cannot include the transaction
    net.nodes[2].generate_blocks(1)
    assert net.nodes[0].get_mempool_size() == 1


def test_flood_byte_accounting():
    # path 0-1-2: a 226-byte tx crosses two hops
    net = MockNetwork(3)
    net.nodes[0].connect_peer(net.nodes[1])
    net.nodes[1].connect_peer(net.nodes[2])
    net.nodes[0].generate_blocks(101)
    base = [net.traffic(i) for i in range(3)]
    net.nodes[0].send_to_address(net.nodes[2].get_new_address(), COIN)
    delta = [tuple(x - y for x, y in zip(net.traffic(i), base[i])) for i in range(3)]
    assert delta == [(226, 0), (226, 226), (0, 226)]
    before = net.total_traffic()
    net.nodes[0].generate_blocks(1)
    after = net.total_traffic()
    # compact block: 80-byte header + 6 bytes per tx, two hops
    assert after[0] - before[0] == 2 * (80 + 6)


def test_keepalive_accrues_with_clock():
    loop = VirtualLoop(0)
    net = MockNetwork(2, clock=loop.time)
    net.nodes[0].connect_peer(net.nodes[1])
    start = net.total_traffic()
    loop.run_until(119)
    assert net.total_traffic() == start
    loop.run_until(360)
    sent, recv = net.total_traffic()
    assert sent - start[0] == 3 * 64 * 2


def test_counters_monotone():
    net = MockNetwork(3)
    prev = [net.traffic(i) for i in range(3)]
    net.nodes[0].connect_peer(net.nodes[1])
    net.nodes[1].connect_peer(net.nodes[2])
    net.nodes[0].generate_blocks(105)
    for k in range(5):
        net.nodes[0].send_to_address(net.nodes[2].get_new_address(), COIN)
        cur = [net.traffic(i) for i in range(3)]
        assert all(c[0] >= p[0] and c[1] >= p[1] for c, p in zip(cur, prev))
        prev = cur


def test_determinism():
    def script():
        net = MockNetwork(3, label="same")
        net.nodes[0].connect_peer(net.nodes[1])
        net.nodes[0].generate_blocks(102)
        net.nodes[0].send_to_address(net.nodes[1].get_new_address(), 7 * COIN)
        net.nodes[1].generate_blocks(1)
        return net.state_digest()
    assert script() == script()


@pytest.mark.parametrize("seed", range(200))
def test_random_sequences_conserve(seed):
    ok, _ = random_ledger_run(seed)
    assert ok


class LedgerMachine(RuleBasedStateMachine):
    def __init__(self):
        super().__init__()
        self.net = MockNetwork(4)

    @rule(a=st.integers(0, 3), b=st.integers(0, 3))
    def connect(self, a, b):
        if a != b:
            self.net.nodes[a].connect_peer(self.net.nodes[b])

    @rule(miner=st.integers(0, 3), count=st.integers(1, 120))
    def mine(self, miner, count):
        self.net.nodes[miner].generate_blocks(count)

    @precondition(lambda self: self.net.height > 100)
    @rule(a=st.integers(0, 3), b=st.integers(0, 3), frac=st.floats(0.01, 1.2))
    def send(self, a, b, frac):
        if a == b:
            return
        amount = max(1, int(frac * self.net.balance(a)))
        try:
            self.net.nodes[a].send_to_address(self.net.nodes[b].get_new_address(), amount)
        except InsufficientFunds:
            assert amount > self.net.balance(a)

    @invariant()
    def conserved(self):
        expected = REWARD * self.net.height
        assert self.net.supply() == expected
        assert unspent_total(self.net) == expected

    @invariant()
    def balances_nonnegative(self):
        assert all(self.net.balance(i) >= 0 for i in range(4))


TestLedgerMachine = LedgerMachine.TestCase
TestLedgerMachine.settings = settings(max_examples=50, stateful_step_count=25, deadline=None)
