# Ring lattices with shuffled labels: every node ends up with exactly k peers.
import numpy as np

from regtestbed.topology import circulant_edges, connection_plan, generate_regular

# unlabelled lattice on 8 nodes, each joined to its 2 neighbours either side
lattice = sorted(circulant_edges(8, 4))
print(len(lattice), "edges:", lattice)

topo = generate_regular(8, 4, seed=3)
topo.degrees()        # array of 4s
topo.is_regular()     # True
topo.neighbours(0)

# the lower index dials out, so node 0 initiates every one of its connections
plan = connection_plan(topo)
print(plan[:5])

# odd degree needs an even node count; the seeded shuffle is reproducible
a = generate_regular(100, 8, seed=11)
b = generate_regular(100, 8, seed=11)
print(a.edges == b.edges, np.unique(a.degrees()))
