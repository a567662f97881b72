"""Private Bitcoin regtest testbed: deployment, topology, load and resource metrics."""

__version__ = "0.1.0"
