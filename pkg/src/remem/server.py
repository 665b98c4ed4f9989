"""Passive window server for one-sided reads.

The server exposes in-memory (or memory-mapped) byte regions as numbered
windows. Request handling is bounds check plus copy, nothing else, and no
state is kept per client between requests, so a client can vanish at any
point without leaving residue. Every connection is handled on its own
thread; requests within a connection are processed strictly in order.
"""

from __future__ import annotations

import logging
import mmap
import socket
import threading
from pathlib import Path

from . import wire
from .errors import ConnectionLostError, DuplicateWindowIdError, ProtocolError

logger = logging.getLogger(__name__)


def _parse_endpoint(endpoint) -> tuple[str, int]:
    if isinstance(endpoint, tuple):
        return endpoint
    host, _, port = endpoint.rpartition(":")
    if not host:
        raise ValueError(f"endpoint {endpoint!r} is not host:port")
    return host, int(port)


class WindowServer:
    """Serves read-only windows over the framed wire protocol.

    Windows are provisioned before :meth:`start`; clients cannot write.
    """

    def __init__(self, bind=("127.0.0.1", wire.DEFAULT_PORT)):
        self._bind = _parse_endpoint(bind)
        self._windows: dict[int, memoryview] = {}
        self._next_id = 1
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._conn_threads: list[threading.Thread] = []
        self._conns: set[socket.socket] = set()
        self._lock = threading.Lock()
        self._stopping = threading.Event()
        self._mmaps: list[mmap.mmap] = []

    # -- provisioning -------------------------------------------------------

    def add_window(self, data, window_id: int | None = None) -> int:
        """Expose a byte region; returns the window id."""
        view = memoryview(data).toreadonly().cast("B")
        with self._lock:
            if window_id is None:
                window_id = self._next_id
            elif window_id == 0:
                raise DuplicateWindowIdError("window id 0 is reserved")
            elif window_id in self._windows:
                raise DuplicateWindowIdError(f"window {window_id} already exposed")
            self._windows[window_id] = view
            self._next_id = max(self._next_id, window_id) + 1
            return window_id

    def add_vfs_window(self, alloc_dir, window_id: int | None = None) -> int:
        """Expose a VFS allocation's data file via a read-only mapping."""
        data_path = Path(alloc_dir) / "data.bin"
        with open(data_path, "rb") as f:
            mapped = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
        self._mmaps.append(mapped)
        return self.add_window(mapped, window_id)

    def remove_window(self, window_id: int) -> None:
        """Un-expose a window; ids are not reused."""
        with self._lock:
            self._windows.pop(window_id, None)

    def windows(self) -> dict[int, int]:
        with self._lock:
            return {wid: len(view) for wid, view in self._windows.items()}

    # -- lifecycle ----------------------------------------------------------

    @property
    def endpoint(self) -> tuple[str, int]:
        if self._listener is None:
            raise RuntimeError("server not started")
        return self._listener.getsockname()[:2]

    def start(self) -> "WindowServer":
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind(self._bind)
        except OSError:
            listener.close()
            raise
        listener.listen(128)
        # close() alone does not wake a blocked accept(); poll instead.
        listener.settimeout(0.2)
        self._listener = listener
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="remem-accept", daemon=True
        )
        self._accept_thread.start()
        logger.info("serving %d windows on %s:%d", len(self._windows), *self.endpoint)
        return self

    def stop(self) -> None:
        """Stop accepting, let in-flight requests finish, close connections."""
        self._stopping.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)
        with self._lock:
            conns = list(self._conns)
        for conn in conns:
            # Stop further requests while letting the in-flight response
            # drain; SHUT_RD leaves the send side open.
            try:
                conn.shutdown(socket.SHUT_RD)
            except OSError:
                pass
        for thread in self._conn_threads:
            thread.join(timeout=5)
        with self._lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.close()
            except OSError:
                pass
        for mapped in self._mmaps:
            try:
                mapped.close()
            except (BufferError, ValueError):
                pass

    def __enter__(self) -> "WindowServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- request handling ---------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping.is_set():
            try:
                conn, peer = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            conn.settimeout(None)
            with self._lock:
                self._conns.add(conn)
                thread = threading.Thread(
                    target=self._serve_connection,
                    args=(conn, peer),
                    name=f"remem-conn-{peer[1]}",
                    daemon=True,
                )
                self._conn_threads.append(thread)
            thread.start()

    def _serve_connection(self, conn: socket.socket, peer) -> None:
        try:
            while True:
                try:
                    msg = wire.recv_message(conn, eof_ok=True)
                except ProtocolError as exc:
                    # The stream cannot be re-framed; answer with a terminal
                    # status-3 frame and drop the connection.
                    logger.info("protocol error from %s: %s", peer, exc)
                    try:
                        wire.send_message(
                            conn, wire.CloseResp(status=wire.PROTOCOL_ERROR)
                        )
                    except ConnectionLostError:
                        pass
                    return
                except ConnectionLostError:
                    return
                if msg is None:
                    return
                if not self._handle(conn, msg, peer):
                    return
        finally:
            try:
                conn.close()
            except OSError:
                pass
            with self._lock:
                self._conns.discard(conn)

    def _handle(self, conn: socket.socket, msg, peer) -> bool:
        """Dispatch one request; False ends the connection."""
        try:
            if isinstance(msg, wire.OpenReq):
                view = self._windows.get(msg.window_id)
                if view is None:
                    wire.send_message(conn, wire.OpenResp(wire.UNKNOWN_WINDOW, 0))
                else:
                    wire.send_message(conn, wire.OpenResp(wire.OK, len(view)))
            elif isinstance(msg, wire.ReadReq):
                view = self._windows.get(msg.window_id)
                if view is None:
                    wire.send_message(conn, wire.ReadResp(wire.UNKNOWN_WINDOW, b""))
                elif msg.offset + msg.length > len(view):
                    wire.send_message(conn, wire.ReadResp(wire.OUT_OF_BOUNDS, b""))
                else:
                    wire.send_read_resp(
                        conn, wire.OK, view[msg.offset : msg.offset + msg.length]
                    )
            elif isinstance(msg, wire.ListReq):
                entries = tuple(sorted(self.windows().items()))
                wire.send_message(conn, wire.ListResp(wire.OK, entries))
            elif isinstance(msg, wire.CloseReq):
                wire.send_message(conn, wire.CloseResp(wire.OK))
            else:
                # A response frame arriving at the server is a protocol error.
                wire.send_message(conn, wire.CloseResp(wire.PROTOCOL_ERROR))
                return False
        except ConnectionLostError:
            logger.info("client %s went away mid-response", peer)
            return False
        return True


def serve(bind_endpoint, exposures) -> WindowServer:
    """Start a server exposing ``exposures``: (data, window_id-or-None) pairs."""
    server = WindowServer(bind_endpoint)
    for data, window_id in exposures:
        server.add_window(data, window_id)
    return server.start()
