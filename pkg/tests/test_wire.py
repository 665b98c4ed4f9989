import random
import struct

import pytest

from remem import wire
from remem.errors import ProtocolError

ALL_TYPES = [
    wire.OPEN_REQ,
    wire.OPEN_RESP,
    wire.READ_REQ,
    wire.READ_RESP,
    wire.LIST_REQ,
    wire.LIST_RESP,
    wire.CLOSE_REQ,
    wire.CLOSE_RESP,
]


def random_message(rng: random.Random) -> wire.WireMessage:
    msg_type = rng.choice(ALL_TYPES)
    u64 = lambda: rng.getrandbits(64)  # noqa: E731
    if msg_type == wire.OPEN_REQ:
        return wire.OpenReq(u64())
    if msg_type == wire.OPEN_RESP:
        return wire.OpenResp(rng.randrange(4), u64())
    if msg_type == wire.READ_REQ:
        return wire.ReadReq(u64(), u64(), u64())
    if msg_type == wire.READ_RESP:
        if rng.random() < 0.7:
            return wire.ReadResp(wire.OK, rng.randbytes(rng.randrange(0, 300)))
        return wire.ReadResp(rng.randrange(1, 4), b"")
    if msg_type == wire.LIST_REQ:
        return wire.ListReq()
    if msg_type == wire.LIST_RESP:
        windows = tuple((u64(), u64()) for _ in range(rng.randrange(0, 8)))
        return wire.ListResp(rng.randrange(4), windows)
    if msg_type == wire.CLOSE_REQ:
        return wire.CloseReq(u64())
    return wire.CloseResp(rng.randrange(4))


def test_golden_read_req_frame():
    # Assembled by hand from the frame layout, independently of encode():
    # magic, version, type, then window_id/offset/length as <Q.
    golden = bytes(
        [0x52, 0x4D, 0x45, 0x4D, 0x01, 0x02]
    ) + struct.pack("<QQQ", 1, 0, 16)
    assert golden.hex(" ") == (
        "52 4d 45 4d 01 02 01 00 00 00 00 00 00 00 00 00 00 00 00 00 00 00"
        " 10 00 00 00 00 00 00 00"
    )
    assert wire.encode(wire.ReadReq(window_id=1, offset=0, length=16)) == golden
    assert wire.decode(golden) == wire.ReadReq(1, 0, 16)


def test_round_trip_all_types():
    rng = random.Random(0x5EED)
    seen = set()
    for _ in range(400):
        msg = random_message(rng)
        seen.add(type(msg).__name__)
        assert wire.decode(wire.encode(msg)) == msg
    assert len(seen) == 8


def test_response_type_mirrors_request():
    pairs = [
        (wire.OPEN_REQ, wire.OPEN_RESP),
        (wire.READ_REQ, wire.READ_RESP),
        (wire.LIST_REQ, wire.LIST_RESP),
        (wire.CLOSE_REQ, wire.CLOSE_RESP),
    ]
    for req, resp in pairs:
        assert resp & 0x7F == req
        assert resp & 0x80


def test_decode_bad_magic():
    frame = b"XMEM" + bytes([1, wire.LIST_REQ])
    with pytest.raises(ProtocolError) as info:
        wire.decode(frame)
    assert info.value.reason == "bad-magic"


def test_decode_bad_version():
    frame = b"RMEM" + bytes([9, wire.LIST_REQ])
    with pytest.raises(ProtocolError) as info:
        wire.decode(frame)
    assert info.value.reason == "bad-version"


def test_decode_unknown_type():
    frame = b"RMEM" + bytes([1, 0x7F])
    with pytest.raises(ProtocolError) as info:
        wire.decode(frame)
    assert info.value.reason == "unknown-type"


def test_decode_short_header():
    with pytest.raises(ProtocolError) as info:
        wire.decode(b"RMEM\x01")
    assert info.value.reason == "truncated"


def test_decode_truncated_body():
    frame = wire.encode(wire.ReadReq(1, 2, 3))
    for cut in range(wire.HEADER_LEN, len(frame)):
        with pytest.raises(ProtocolError):
            wire.decode(frame[:cut])


def test_decode_trailing_bytes():
    frame = wire.encode(wire.CloseReq(5)) + b"\x00"
    with pytest.raises(ProtocolError):
        wire.decode(frame)


def test_read_resp_payload_len_must_match():
    frame = wire._header(wire.READ_RESP) + struct.pack("<BQ", 0, 10) + b"short"
    with pytest.raises(ProtocolError):
        wire.decode(frame)


def test_read_resp_error_status_carries_no_payload():
    frame = (
        wire._header(wire.READ_RESP)
        + struct.pack("<BQ", wire.OUT_OF_BOUNDS, 3)
        + b"abc"
    )
    with pytest.raises(ProtocolError) as info:
        wire.decode(frame)
    assert info.value.reason == "payload-on-error"
    with pytest.raises(ProtocolError):
        wire.encode(wire.ReadResp(wire.OUT_OF_BOUNDS, b"abc"))


def test_status_codes():
    assert (wire.OK, wire.UNKNOWN_WINDOW, wire.OUT_OF_BOUNDS, wire.PROTOCOL_ERROR) == (
        0,
        1,
        2,
        3,
    )
