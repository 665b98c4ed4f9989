"""Framed wire protocol for one-sided window reads.

Frame layout (all integers little-endian)::

    magic   4 bytes  "RMEM"
    version u8       1
    type    u8
    body    per message type, see the dataclasses below

A response's type is its request's type with the high bit set. Status
codes: 0 OK, 1 UNKNOWN_WINDOW, 2 OUT_OF_BOUNDS, 3 PROTOCOL_ERROR. A
READ_RESP carries a payload only when its status is OK.

When a server cannot identify the request type (bad magic, bad version,
unknown type byte) it answers with a terminal ``CloseResp`` carrying
status PROTOCOL_ERROR and drops the connection, since the stream can no
longer be framed.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass, field

from .errors import ConnectionLostError, ProtocolError

MAGIC = b"RMEM"
VERSION = 1
HEADER_LEN = 6

DEFAULT_PORT = 7930

# Status codes
OK = 0
UNKNOWN_WINDOW = 1
OUT_OF_BOUNDS = 2
PROTOCOL_ERROR = 3

OPEN_REQ = 0x01
READ_REQ = 0x02
LIST_REQ = 0x03
CLOSE_REQ = 0x04
OPEN_RESP = 0x81
READ_RESP = 0x82
LIST_RESP = 0x83
CLOSE_RESP = 0x84


@dataclass(frozen=True)
class OpenReq:
    window_id: int
    msg_type = OPEN_REQ


@dataclass(frozen=True)
class OpenResp:
    status: int
    size_bytes: int
    msg_type = OPEN_RESP


@dataclass(frozen=True)
class ReadReq:
    window_id: int
    offset: int
    length: int
    msg_type = READ_REQ


@dataclass(frozen=True)
class ReadResp:
    status: int
    payload: bytes
    msg_type = READ_RESP


@dataclass(frozen=True)
class ListReq:
    msg_type = LIST_REQ


@dataclass(frozen=True)
class ListResp:
    status: int
    windows: tuple[tuple[int, int], ...] = field(default_factory=tuple)
    msg_type = LIST_RESP


@dataclass(frozen=True)
class CloseReq:
    window_id: int
    msg_type = CLOSE_REQ


@dataclass(frozen=True)
class CloseResp:
    status: int
    msg_type = CLOSE_RESP


WireMessage = (
    OpenReq | OpenResp | ReadReq | ReadResp | ListReq | ListResp | CloseReq | CloseResp
)

_KNOWN_TYPES = {
    OPEN_REQ,
    READ_REQ,
    LIST_REQ,
    CLOSE_REQ,
    OPEN_RESP,
    READ_RESP,
    LIST_RESP,
    CLOSE_RESP,
}


def _header(msg_type: int) -> bytes:
    return MAGIC + bytes((VERSION, msg_type))


def encode(msg: WireMessage) -> bytes:
    if isinstance(msg, OpenReq):
        return _header(OPEN_REQ) + struct.pack("<Q", msg.window_id)
    if isinstance(msg, OpenResp):
        return _header(OPEN_RESP) + struct.pack("<BQ", msg.status, msg.size_bytes)
    if isinstance(msg, ReadReq):
        return _header(READ_REQ) + struct.pack(
            "<QQQ", msg.window_id, msg.offset, msg.length
        )
    if isinstance(msg, ReadResp):
        if msg.status != OK and msg.payload:
            raise ProtocolError("payload-on-error", "non-OK READ_RESP carries bytes")
        return (
            _header(READ_RESP)
            + struct.pack("<BQ", msg.status, len(msg.payload))
            + msg.payload
        )
    if isinstance(msg, ListReq):
        return _header(LIST_REQ)
    if isinstance(msg, ListResp):
        body = struct.pack("<BQ", msg.status, len(msg.windows))
        for window_id, size in msg.windows:
            body += struct.pack("<QQ", window_id, size)
        return _header(LIST_RESP) + body
    if isinstance(msg, CloseReq):
        return _header(CLOSE_REQ) + struct.pack("<Q", msg.window_id)
    if isinstance(msg, CloseResp):
        return _header(CLOSE_RESP) + struct.pack("<B", msg.status)
    raise TypeError(f"not a wire message: {msg!r}")


def _check_header(buf: bytes) -> int:
    """Validate a 6-byte header, returning the message type."""
    if len(buf) < HEADER_LEN:
        raise ProtocolError("truncated", f"header needs {HEADER_LEN} bytes, got {len(buf)}")
    if buf[:4] != MAGIC:
        raise ProtocolError("bad-magic", buf[:4].hex())
    if buf[4] != VERSION:
        raise ProtocolError("bad-version", str(buf[4]))
    msg_type = buf[5]
    if msg_type not in _KNOWN_TYPES:
        raise ProtocolError("unknown-type", f"0x{msg_type:02x}")
    return msg_type


def _decode_body(msg_type: int, body: bytes) -> WireMessage:
    def fixed(fmt: str):
        size = struct.calcsize(fmt)
        if len(body) != size:
            raise ProtocolError(
                "bad-length", f"type 0x{msg_type:02x} wants {size} body bytes, got {len(body)}"
            )
        return struct.unpack(fmt, body)

    if msg_type == OPEN_REQ:
        return OpenReq(*fixed("<Q"))
    if msg_type == OPEN_RESP:
        return OpenResp(*fixed("<BQ"))
    if msg_type == READ_REQ:
        return ReadReq(*fixed("<QQQ"))
    if msg_type == READ_RESP:
        if len(body) < 9:
            raise ProtocolError("bad-length", "READ_RESP body under 9 bytes")
        status, payload_len = struct.unpack("<BQ", body[:9])
        payload = body[9:]
        if len(payload) != payload_len:
            raise ProtocolError(
                "bad-length", f"payload_len {payload_len}, got {len(payload)} bytes"
            )
        if status != OK and payload_len != 0:
            raise ProtocolError("payload-on-error", "non-OK READ_RESP carries bytes")
        return ReadResp(status, payload)
    if msg_type == LIST_REQ:
        if body:
            raise ProtocolError("bad-length", "LIST_REQ carries no body")
        return ListReq()
    if msg_type == LIST_RESP:
        if len(body) < 9:
            raise ProtocolError("bad-length", "LIST_RESP body under 9 bytes")
        status, count = struct.unpack("<BQ", body[:9])
        rest = body[9:]
        if len(rest) != 16 * count:
            raise ProtocolError(
                "bad-length", f"LIST_RESP count {count} wants {16 * count} bytes"
            )
        windows = tuple(
            struct.unpack_from("<QQ", rest, 16 * i) for i in range(count)
        )
        return ListResp(status, windows)
    if msg_type == CLOSE_REQ:
        return CloseReq(*fixed("<Q"))
    if msg_type == CLOSE_RESP:
        return CloseResp(*fixed("<B"))
    raise ProtocolError("unknown-type", f"0x{msg_type:02x}")  # pragma: no cover


def decode(buf: bytes) -> WireMessage:
    """Decode exactly one complete frame; trailing bytes are an error."""
    msg_type = _check_header(buf)
    return _decode_body(msg_type, buf[HEADER_LEN:])


# -- stream framing -----------------------------------------------------------


def _recv_exact(sock: socket.socket, n: int, *, eof_ok: bool = False) -> bytes | None:
    """Read exactly n bytes; clean EOF at a frame boundary returns None."""
    chunks = []
    got = 0
    while got < n:
        try:
            chunk = sock.recv(min(n - got, 1 << 20))
        except OSError as exc:
            raise ConnectionLostError(str(exc)) from exc
        if not chunk:
            if eof_ok and got == 0:
                return None
            raise ConnectionLostError(f"connection closed after {got}/{n} bytes")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


_FIXED_BODY_LEN = {
    OPEN_REQ: 8,
    OPEN_RESP: 9,
    READ_REQ: 24,
    LIST_REQ: 0,
    CLOSE_REQ: 8,
    CLOSE_RESP: 1,
}


def recv_message(sock: socket.socket, *, eof_ok: bool = False) -> WireMessage | None:
    """Read one frame off a stream socket.

    Returns None on clean EOF at a frame boundary when ``eof_ok``; raises
    ProtocolError for malformed frames and ConnectionLostError for EOF
    mid-frame.
    """
    header = _recv_exact(sock, HEADER_LEN, eof_ok=eof_ok)
    if header is None:
        return None
    msg_type = _check_header(header)
    if msg_type in _FIXED_BODY_LEN:
        body = _recv_exact(sock, _FIXED_BODY_LEN[msg_type]) if _FIXED_BODY_LEN[msg_type] else b""
    elif msg_type == READ_RESP:
        body = _recv_exact(sock, 9)
        _, payload_len = struct.unpack("<BQ", body)
        if payload_len:
            body += _recv_exact(sock, payload_len)
    else:  # LIST_RESP
        body = _recv_exact(sock, 9)
        _, count = struct.unpack("<BQ", body)
        if count:
            body += _recv_exact(sock, 16 * count)
    return _decode_body(msg_type, body)


def send_message(sock: socket.socket, msg: WireMessage) -> None:
    try:
        sock.sendall(encode(msg))
    except OSError as exc:
        raise ConnectionLostError(str(exc)) from exc


def send_read_resp(sock: socket.socket, status: int, payload) -> None:
    """Send a READ_RESP without copying the payload buffer."""
    payload = memoryview(payload)
    try:
        sock.sendall(_header(READ_RESP) + struct.pack("<BQ", status, len(payload)))
        if len(payload):
            sock.sendall(payload)
    except OSError as exc:
        raise ConnectionLostError(str(exc)) from exc
