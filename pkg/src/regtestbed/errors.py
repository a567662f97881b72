"""Exception hierarchy shared across the testbed."""


class TestbedError(Exception):
    """Base class for every error raised by regtestbed."""

    __test__ = False  # keep pytest from collecting this as a test class


class ValidationError(TestbedError, ValueError):
    """A configuration broke exactly one named rule."""

    def __init__(self, rule: str, message: str):
        super().__init__(f"{rule}: {message}")
        self.rule = rule
        self.message = message


class NodeError(TestbedError):
    """An operation on a node failed (RPC error, stopped node, ...)."""

    def __init__(self, message: str, code: int | None = None):
        super().__init__(message)
        self.code = code


class RpcTransportError(NodeError):
    """The node could not be reached at all."""


class InsufficientFunds(NodeError):
    """The wallet cannot cover the requested amount."""


class DeploymentError(TestbedError):
    """Container deployment failed or was used in the wrong state."""


class BatchError(TestbedError, ValueError):
    """Batch aggregation received the wrong number of simulations."""
