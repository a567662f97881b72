"""JSON-RPC client for a real bitcoind running in regtest mode."""
from __future__ import annotations

import itertools
import json
import logging
import threading
import time
from decimal import Decimal

import requests

from ..errors import InsufficientFunds, NodeError, RpcTransportError

log = logging.getLogger(__name__)

RPC_PORT = 18332
P2P_PORT = 18444
COIN = 100_000_000

RPC_WALLET_INSUFFICIENT_FUNDS = -6


def to_btc(satoshis: int) -> Decimal:
    return (Decimal(int(satoshis)) / COIN).quantize(Decimal("0.00000001"))


def to_sat(btc) -> int:
    return int((Decimal(str(btc)) * COIN).to_integral_value())


class RpcNode:
    """NodeHandle backed by bitcoind's HTTP JSON-RPC interface.

    Calls on one handle are serialized; transport failures are retried
    ``retries`` times with a linear backoff.
    """

    def __init__(self, node_id: int, host: str, port: int = RPC_PORT,
                 credentials: tuple[str, str] = ("testbed", "testbed"),
                 timeout: float = 5.0, retries: int = 3, backoff: float = 0.5,
                 p2p_port: int = P2P_PORT, connect_timeout: float = 10.0):
        self.node_id = node_id
        self.host = host
        self.port = port
        self.credentials = credentials
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.p2p_address = f"{host}:{p2p_port}"
        self.connect_timeout = connect_timeout
        self.url = f"http://{host}:{port}/"
        self._lock = threading.Lock()
        self._ids = itertools.count()
        self._session = requests.Session()
        self._session.auth = credentials

    def __repr__(self):
        return f"RpcNode({self.node_id}, {self.url})"

    def call(self, method: str, *params):
        body = {"jsonrpc": "1.0", "id": f"testbed-{self.node_id}-{next(self._ids)}",
                "method": method, "params": list(params)}
        payload = json.dumps(body, default=_encode_decimal)
        with self._lock:
            for attempt in range(self.retries + 1):
                try:
                    resp = self._session.post(self.url, data=payload, timeout=self.timeout,
                                              headers={"Content-Type": "application/json"})
                    break
                except requests.RequestException as exc:
                    if attempt == self.retries:
                        raise RpcTransportError(f"{self.url} {method}: {exc}") from exc
                    log.debug("rpc %s to %s failed (%s), retrying", method, self.url, exc)
                    time.sleep(self.backoff * (attempt + 1))
        if resp.status_code == 401:
            raise NodeError(f"{self.url}: authentication failed", code=401)
        try:
            data = json.loads(resp.text, parse_float=Decimal)
        except ValueError:
            raise NodeError(f"{self.url} {method}: HTTP {resp.status_code} with non-JSON body") from None
        err = data.get("error")
        if err:
            code, message = err.get("code"), err.get("message", "")
            if code == RPC_WALLET_INSUFFICIENT_FUNDS:
                raise InsufficientFunds(message, code=code)
            raise NodeError(f"{method}: {message}", code=code)
        return data.get("result")

    # -- NodeHandle surface -------------------------------------------------

    def ping(self) -> None:
        self.call("getblockcount")

    def peer_hosts(self) -> list[str]:
        return [p["addr"].rsplit(":", 1)[0].strip("[]") for p in self.call("getpeerinfo")]

    def connect_peer(self, target) -> None:
        if target.host in self.peer_hosts():
            return
        self.call("addnode", target.p2p_address, "onetry")
        deadline = time.monotonic() + self.connect_timeout
        while time.monotonic() < deadline:
            if target.host in self.peer_hosts():
                return
            time.sleep(0.2)
        raise NodeError(f"node {self.node_id} could not connect to {target.p2p_address}")

    def get_new_address(self) -> str:
        return self.call("getnewaddress")

    def send_to_address(self, address: str, amount: int) -> str:
        return self.call("sendtoaddress", address, to_btc(amount))

    def generate_blocks(self, count: int) -> list[str]:
        if count < 1:
            raise NodeError("count must be >= 1", code=-8)
        return self.call("generatetoaddress", count, self.get_new_address())

    def get_balance(self) -> int:
        return to_sat(self.call("getbalance"))

    def get_peer_count(self) -> int:
        return len(self.call("getpeerinfo"))

    def get_mempool_size(self) -> int:
        return int(self.call("getmempoolinfo")["size"])

    def get_traffic_counters(self) -> tuple[int, int]:
        totals = self.call("getnettotals")
        return int(totals["totalbytessent"]), int(totals["totalbytesrecv"])

    def get_block_count(self) -> int:
        return int(self.call("getblockcount"))

    def ensure_wallet(self, name: str = "default") -> None:
        """Create or load a wallet; recent bitcoind versions start without one."""
        try:
            self.call("getwalletinfo")
            return
        except RpcTransportError:
            raise
        except NodeError:
            pass
        try:
            self.call("createwallet", name)
        except NodeError:
            self.call("loadwallet", name)


def _encode_decimal(value):
    if isinstance(value, Decimal):
        return float(value)
    raise TypeError(f"cannot encode {type(value).__name__}")
