"""Container lifecycle for the real backend: one bitcoind container per node.

Every runtime object gets the ``regtestbed.run`` label so a run can always
be torn down completely, even from another process.
"""
from __future__ import annotations

import logging
import secrets
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from .config import SimulationConfig
from .errors import DeploymentError, NodeError
from .nodectl.rpc import P2P_PORT, RPC_PORT, RpcNode

log = logging.getLogger(__name__)

RUN_LABEL = "regtestbed.run"
NODE_LABEL = "regtestbed.node"
DEFAULT_IMAGE = "ruimarinho/bitcoin-core:24"
DEFAULT_CONCURRENCY = 8
READINESS_TIMEOUT = 60.0
READINESS_POLL = 0.5


def bitcoind_args(rpc_user: str, rpc_password: str, subnet: str = "0.0.0.0/0",
                  extra: tuple[str, ...] = ()) -> list[str]:
    return [
        "-regtest=1",
        "-server=1",
        "-listen=1",
        "-dnsseed=0",
        "-printtoconsole=1",
        "-rpcbind=0.0.0.0",
        f"-rpcallowip={subnet}",
        f"-rpcport={RPC_PORT}",
        f"-port={P2P_PORT}",
        f"-rpcuser={rpc_user}",
        f"-rpcpassword={rpc_password}",
        "-fallbackfee=0.0002",
        # chains of unconfirmed change grow long at high tx rates without blocks
        "-limitancestorcount=1000",
        "-limitdescendantcount=1000",
        *extra,
    ]


@dataclass
class ContainerInfo:
    node_id: int
    container_id: str
    ip_address: str


@dataclass
class Deployment:
    run_id: str
    network_name: str
    credentials: tuple[str, str]
    containers: list[ContainerInfo] = field(default_factory=list)
    state: str = "creating"  # creating | ready | degraded | torn_down
    created_at: float | None = None
    ready_at: float | None = None


@dataclass
class TeardownReport:
    removed_containers: list[str] = field(default_factory=list)
    removed_networks: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    order: list[str] = field(default_factory=list)

    @property
    def noop(self) -> bool:
        return not self.removed_containers and not self.removed_networks and not self.errors


def docker_client():
    """A docker SDK client from the environment (DOCKER_HOST or the local socket)."""
    import docker

    return docker.from_env()


class Orchestrator:
    def __init__(self, client=None, image: str = DEFAULT_IMAGE, concurrency: int = DEFAULT_CONCURRENCY,
                 readiness_timeout: float = READINESS_TIMEOUT, readiness_poll: float = READINESS_POLL,
                 extra_args: tuple[str, ...] = (),
                 handle_factory: Callable[..., object] | None = None):
        self._client = client
        self.image = image
        self.concurrency = concurrency
        self.readiness_timeout = readiness_timeout
        self.readiness_poll = readiness_poll
        self.extra_args = tuple(extra_args)
        self.handle_factory = handle_factory or (
            lambda node_id, ip, credentials: RpcNode(node_id, ip, RPC_PORT, credentials))
        self._state_lock = threading.Lock()

    @property
    def client(self):
        if self._client is None:
            try:
                self._client = docker_client()
            except Exception as exc:
                raise DeploymentError(f"container runtime unreachable: {exc}") from exc
        return self._client

    def _set_state(self, d: Deployment, state: str) -> None:
        with self._state_lock:
            d.state = state

    # ------------------------------------------------------------------

    def deploy(self, config: SimulationConfig, run_id: str, instance: str | None = None) -> Deployment:
        """Start ``config.node_count`` labelled containers and wait until each answers RPC.

        ``instance`` distinguishes object names when one run deploys
        several times (one deployment per simulation).
        """
        client = self.client
        try:
            client.ping()
        except Exception as exc:
            raise DeploymentError(f"container runtime unreachable: {exc}") from exc
        self._ensure_image(client)

        labels = {RUN_LABEL: run_id}
        credentials = ("testbed", secrets.token_hex(12))
        prefix = f"{run_id}-{instance}" if instance else run_id
        d = Deployment(run_id, f"{prefix}-net", credentials, created_at=time.time())
        network = client.networks.create(d.network_name, driver="bridge", labels=labels)
        subnet = _subnet_of(network) or "0.0.0.0/0"
        args = bitcoind_args(*credentials, subnet=subnet, extra=self.extra_args)

        def create(node_id: int) -> ContainerInfo:
            container = client.containers.run(
                self.image, command=args, name=f"{prefix}-node{node_id}", detach=True,
                network=d.network_name, labels={**labels, NODE_LABEL: str(node_id)})
            container.reload()
            ip = container.attrs["NetworkSettings"]["Networks"][d.network_name]["IPAddress"]
            return ContainerInfo(node_id, container.id, ip)

        failures = []
        with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
            futures = [pool.submit(create, i) for i in range(config.node_count)]
            for fut in futures:
                try:
                    d.containers.append(fut.result())
                except Exception as exc:
                    failures.append(str(exc))
        d.containers.sort(key=lambda c: c.node_id)
        if failures:
            self._set_state(d, "degraded")
            err = DeploymentError(f"{len(failures)} container(s) failed to start: {failures[0]}")
            err.deployment = d
            raise err

        not_ready = self._wait_ready(d)
        if not_ready:
            self._set_state(d, "degraded")
            err = DeploymentError(f"readiness timeout on nodes {not_ready}")
            err.deployment = d
            raise err
        d.ready_at = time.time()
        self._set_state(d, "ready")
        return d

    def _ensure_image(self, client) -> None:
        try:
            client.images.get(self.image)
        except Exception:
            try:
                client.images.pull(self.image)
            except Exception as exc:
                raise DeploymentError(f"image {self.image} missing and could not be pulled: {exc}") from exc

    def _wait_ready(self, d: Deployment) -> list[int]:
        def probe(info: ContainerInfo) -> bool:
            handle = self.handle_factory(info.node_id, info.ip_address, d.credentials)
            deadline = time.monotonic() + self.readiness_timeout
            while True:
                try:
                    handle.ping()
                    if hasattr(handle, "ensure_wallet"):
                        handle.ensure_wallet()
                    return True
                except NodeError:
                    if time.monotonic() >= deadline:
                        return False
                    time.sleep(self.readiness_poll)

        if not d.containers:
            return []
        with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
            ok = list(pool.map(probe, d.containers))
        return [c.node_id for c, good in zip(d.containers, ok) if not good]

    def handles(self, d: Deployment) -> list:
        if d.state != "ready":
            raise DeploymentError(f"deployment {d.run_id} is {d.state}, not ready")
        return [self.handle_factory(c.node_id, c.ip_address, d.credentials) for c in d.containers]

    # ------------------------------------------------------------------

    def attach(self, run_id: str, credentials: tuple[str, str]) -> Deployment:
        """Rebuild a Deployment from the live labelled containers of ``run_id``."""
        client = self.client
        found = client.containers.list(all=True, filters={"label": f"{RUN_LABEL}={run_id}"})
        d = Deployment(run_id, "", credentials)
        for c in found:
            nets = c.attrs["NetworkSettings"]["Networks"]
            d.network_name = d.network_name or next(iter(nets), "")
            ip = nets.get(d.network_name, {}).get("IPAddress", "")
            d.containers.append(ContainerInfo(int(c.labels[NODE_LABEL]), c.id, ip))
        d.containers.sort(key=lambda c: c.node_id)
        d.state = "ready" if d.containers else "torn_down"
        return d

    def teardown(self, target: Deployment | str) -> TeardownReport:
        """Remove every container, then the network, labelled with the run id.  Idempotent."""
        run_id = target.run_id if isinstance(target, Deployment) else target
        client = self.client
        report = TeardownReport()
        flt = {"label": f"{RUN_LABEL}={run_id}"}
        containers = client.containers.list(all=True, filters=flt)

        def remove(c):
            try:
                c.remove(force=True)
                return c.id, None
            except Exception as exc:
                return c.id, f"container {c.id}: {exc}"

        with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
            for cid, err in pool.map(remove, containers):
                if err:
                    report.errors.append(err)
                else:
                    report.removed_containers.append(cid)
                    report.order.append(f"container:{cid}")
        for net in client.networks.list(filters=flt):
            try:
                net.remove()
                report.removed_networks.append(net.name)
                report.order.append(f"network:{net.name}")
            except Exception as exc:
                report.errors.append(f"network {net.name}: {exc}")
        if isinstance(target, Deployment):
            self._set_state(target, "torn_down")
        return report

    def leftovers(self, run_id: str) -> int:
        flt = {"label": f"{RUN_LABEL}={run_id}"}
        client = self.client
        return len(client.containers.list(all=True, filters=flt)) + len(client.networks.list(filters=flt))


def _subnet_of(network) -> str | None:
    try:
        network.reload()
        configs = network.attrs["IPAM"]["Config"] or []
        return configs[0].get("Subnet") if configs else None
    except Exception:
        return None
