# The in-process backend: one shared chain, per-node mempools, byte counters.
from regtestbed.clock import VirtualLoop
from regtestbed.nodectl.mock import COIN, MockNetwork
from regtestbed.topology import apply_plan, connection_plan, generate_regular

loop = VirtualLoop()
net = MockNetwork(6, clock=loop.time)
nodes = net.nodes
apply_plan(nodes, connection_plan(generate_regular(6, 2, seed=0)))

# coinbase outputs need 100 confirmations, so the first reward unlocks at height 101
nodes[0].generate_blocks(1)
nodes[1].generate_blocks(100)
print("balance of node 0:", nodes[0].get_balance() / COIN)

txid = nodes[0].send_to_address(nodes[3].get_new_address(), 20 * COIN)
print([n.get_mempool_size() for n in nodes])   # flooded across the whole ring

nodes[2].generate_blocks(1)
print([n.get_mempool_size() for n in nodes], net.check_conservation())

loop.run_until(600)   # idle links still cost keepalive bytes
print(net.total_traffic())
