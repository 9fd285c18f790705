"""Deferred-execution client and eager server for 1-D numeric arrays."""
from .client import ArrayHandle, Client, ClientConfig, MetricsReport, ReleasedHandleError, ServerError
from .server import ArrayServer
from .transport import LocalTransport, SocketTransport

__all__ = [
    "ArrayHandle",
    "ArrayServer",
    "Client",
    "ClientConfig",
    "LocalTransport",
    "MetricsReport",
    "ReleasedHandleError",
    "ServerError",
    "SocketTransport",
]

__version__ = "0.1.0"
