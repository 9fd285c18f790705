"""Byte-level transports carrying frames between a client and a server."""
from __future__ import annotations

import socket

from .protocol import read_frame
from .server import ArrayServer


class LocalTransport:
    """Hands frames straight to an in-process :class:`ArrayServer`.

    The frames are still fully encoded and decoded, so everything the client
    sees is exactly what it would receive over a socket.
    """

    def __init__(self, server: ArrayServer | None = None):
        self.server = server if server is not None else ArrayServer()
        self.session = self.server.new_session()

    def roundtrip(self, frame: bytes) -> bytes:
        return self.server.handle_frame(frame, self.session)

    def close(self):
        pass


class SocketTransport:
    def __init__(self, host: str = "127.0.0.1", port: int = 5555, timeout: float | None = 30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def roundtrip(self, frame: bytes) -> bytes:
        self.sock.sendall(frame)
        reply = read_frame(self.sock)
        if reply is None:
            raise ConnectionError("server closed the connection")
        return reply

    def close(self):
        self.sock.close()
