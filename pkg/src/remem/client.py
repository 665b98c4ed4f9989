"""Client side of the one-sided read protocol."""

from __future__ import annotations

import os
import socket

from . import wire
from .errors import (
    ConnectError,
    ConnectionLostError,
    OutOfBoundsError,
    ProtocolError,
    UnknownWindowError,
)

#: Large reads are split into requests of this many bytes so neither side
#: buffers the whole transfer; invisible at the API level.
READ_CHUNK_BYTES = 8 << 20

ENDPOINT_ENV_VAR = "REMEM_ENDPOINT"


def default_endpoint() -> str:
    return os.environ.get(ENDPOINT_ENV_VAR, f"127.0.0.1:{wire.DEFAULT_PORT}")


def _connect(endpoint) -> socket.socket:
    if isinstance(endpoint, tuple):
        host, port = endpoint
    else:
        host, _, port = endpoint.rpartition(":")
        if not host:
            raise ConnectError(f"endpoint {endpoint!r} is not host:port")
        port = int(port)
    try:
        return socket.create_connection((host, port), timeout=30)
    except OSError as exc:
        raise ConnectError(f"{host}:{port}: {exc}") from exc


class RemoteWindow:
    """Handle on one exposed window over one connection.

    Use from one thread at a time; open several handles for concurrent
    reads of the same window.
    """

    def __init__(self, window_id: int, size_bytes: int, endpoint, sock: socket.socket):
        self.window_id = window_id
        self.size_bytes = size_bytes
        self.endpoint = endpoint
        self._sock: socket.socket | None = sock

    def _require_sock(self) -> socket.socket:
        if self._sock is None:
            raise ConnectionLostError("window handle is closed")
        return self._sock

    def read(self, offset: int, length: int) -> bytes:
        if length == 0:
            return b""
        if offset < 0 or length < 0 or offset + length > self.size_bytes:
            raise OutOfBoundsError(
                f"range [{offset}, {offset + length}) exceeds window of "
                f"{self.size_bytes} bytes"
            )
        sock = self._require_sock()
        parts = []
        pos = offset
        end = offset + length
        while pos < end:
            take = min(READ_CHUNK_BYTES, end - pos)
            wire.send_message(sock, wire.ReadReq(self.window_id, pos, take))
            resp = wire.recv_message(sock)
            if not isinstance(resp, wire.ReadResp):
                raise ProtocolError(
                    "unexpected-response", f"wanted READ_RESP, got {type(resp).__name__}"
                )
            if resp.status == wire.OUT_OF_BOUNDS:
                raise OutOfBoundsError("server rejected range")
            if resp.status == wire.UNKNOWN_WINDOW:
                raise UnknownWindowError(f"window {self.window_id}")
            if resp.status != wire.OK:
                raise ProtocolError("server-error", f"status {resp.status}")
            if len(resp.payload) != take:
                raise ProtocolError(
                    "bad-length", f"asked {take} bytes, got {len(resp.payload)}"
                )
            parts.append(resp.payload)
            pos += take
        return parts[0] if len(parts) == 1 else b"".join(parts)

    def close(self) -> None:
        """Idempotent; best-effort CLOSE_REQ then drop the connection."""
        sock, self._sock = self._sock, None
        if sock is None:
            return
        try:
            wire.send_message(sock, wire.CloseReq(self.window_id))
            wire.recv_message(sock)
        except (ConnectionLostError, ProtocolError):
            pass
        finally:
            try:
                sock.close()
            except OSError:
                pass

    def __enter__(self) -> "RemoteWindow":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_window(endpoint, window_id: int) -> RemoteWindow:
    """Open a handle; the size comes from the server's OPEN_RESP."""
    endpoint = endpoint if endpoint is not None else default_endpoint()
    sock = _connect(endpoint)
    try:
        wire.send_message(sock, wire.OpenReq(window_id))
        resp = wire.recv_message(sock)
        if not isinstance(resp, wire.OpenResp):
            raise ProtocolError(
                "unexpected-response", f"wanted OPEN_RESP, got {type(resp).__name__}"
            )
        if resp.status == wire.UNKNOWN_WINDOW:
            raise UnknownWindowError(f"window {window_id}")
        if resp.status != wire.OK:
            raise ProtocolError("server-error", f"status {resp.status}")
    except BaseException:
        sock.close()
        raise
    return RemoteWindow(window_id, resp.size_bytes, endpoint, sock)


def list_windows(endpoint) -> dict[int, int]:
    """One-shot LIST: window id -> size in bytes."""
    endpoint = endpoint if endpoint is not None else default_endpoint()
    sock = _connect(endpoint)
    try:
        wire.send_message(sock, wire.ListReq())
        resp = wire.recv_message(sock)
        if not isinstance(resp, wire.ListResp) or resp.status != wire.OK:
            raise ProtocolError("unexpected-response", "LIST failed")
        return dict(resp.windows)
    finally:
        sock.close()
