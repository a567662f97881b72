"""Node control: one handle type per backend, same method surface.

Amounts are integer satoshis everywhere in this package; the RPC client
converts to BTC on the wire.
"""
from typing import Protocol

from .mock import COIN, MockNetwork, MockNode, MockParams, decode_address
from .rpc import P2P_PORT, RPC_PORT, RpcNode


class NodeHandle(Protocol):
    node_id: int
    host: str
    p2p_address: str

    def ping(self) -> None: ...
    def connect_peer(self, target: "NodeHandle") -> None: ...
    def peer_hosts(self) -> list[str]: ...
    def get_new_address(self) -> str: ...
    def send_to_address(self, address: str, amount: int) -> str: ...
    def generate_blocks(self, count: int) -> list[str]: ...
    def get_balance(self) -> int: ...
    def get_peer_count(self) -> int: ...
    def get_mempool_size(self) -> int: ...
    def get_traffic_counters(self) -> tuple[int, int]: ...


__all__ = ["COIN", "MockNetwork", "MockNode", "MockParams", "NodeHandle",
           "P2P_PORT", "RPC_PORT", "RpcNode", "decode_address"]
