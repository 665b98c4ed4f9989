import random
import socket
import threading

import pytest

from conftest import endpoint_str
from remem import client, wire
from remem.errors import (
    ConnectError,
    ConnectionLostError,
    DuplicateWindowIdError,
    OutOfBoundsError,
    ProtocolError,
    UnknownWindowError,
)
from remem.server import WindowServer, serve


def test_list_single_window(running_server):
    running_server.add_window(bytes(4096))
    windows = client.list_windows(endpoint_str(running_server))
    assert list(windows.values()) == [4096]


def test_list_no_windows(running_server):
    assert client.list_windows(endpoint_str(running_server)) == {}


def test_auto_ids_distinct(server):
    first = server.add_window(bytes(10))
    second = server.add_window(bytes(20))
    assert first != second
    assert first != 0 and second != 0


def test_duplicate_window_id(server):
    server.add_window(bytes(10), window_id=7)
    with pytest.raises(DuplicateWindowIdError):
        server.add_window(bytes(20), window_id=7)
    with pytest.raises(DuplicateWindowIdError):
        server.add_window(bytes(20), window_id=0)


def test_serve_helper():
    handle = serve(("127.0.0.1", 0), [(b"abc", None), (b"defg", 9)])
    try:
        windows = client.list_windows(endpoint_str(handle))
        assert windows[9] == 4
        assert sorted(windows.values()) == [3, 4]
    finally:
        handle.stop()


def test_open_existing_window(running_server):
    wid = running_server.add_window(bytes(1234))
    window = client.open_window(endpoint_str(running_server), wid)
    assert window.size_bytes == 1234
    window.close()


def test_open_absent_window(running_server):
    with pytest.raises(UnknownWindowError):
        client.open_window(endpoint_str(running_server), 999)


def test_connect_refused():
    with pytest.raises(ConnectError):
        client.open_window("127.0.0.1:1", 1)  # port 1: nothing listens


def test_client_rejects_wrong_magic():
    # Fault-injection stub: accepts one connection, replies with garbage.
    listener = socket.socket()
    listener.bind(("127.0.0.1", 0))
    listener.listen(1)

    def stub():
        conn, _ = listener.accept()
        conn.recv(64)
        conn.sendall(b"XMEM" + bytes([1, 0x81]) + bytes(9))
        conn.close()

    thread = threading.Thread(target=stub, daemon=True)
    thread.start()
    try:
        with pytest.raises(ProtocolError) as info:
            client.open_window("%s:%d" % listener.getsockname()[:2], 1)
        assert info.value.reason == "bad-magic"
    finally:
        listener.close()
        thread.join(timeout=5)


def test_read_known_fill(running_server):
    data = bytes(i % 256 for i in range(4096))
    wid = running_server.add_window(data)
    with client.open_window(endpoint_str(running_server), wid) as window:
        assert window.read(0, 16) == bytes(range(16))


def test_read_boundaries(running_server):
    data = bytes(i % 256 for i in range(1000))
    wid = running_server.add_window(data)
    with client.open_window(endpoint_str(running_server), wid) as window:
        assert window.read(999, 1) == data[999:]
        with pytest.raises(OutOfBoundsError):
            window.read(999, 2)


def test_random_reads_match_shadow(running_server):
    rng = random.Random(0xFEED)
    shadow = rng.randbytes(300_000)
    wid = running_server.add_window(shadow)
    with client.open_window(endpoint_str(running_server), wid) as window:
        for _ in range(200):
            offset = rng.randrange(len(shadow))
            length = rng.randrange(0, len(shadow) - offset + 1)
            assert window.read(offset, length) == shadow[offset : offset + length]


def test_read_spans_internal_chunks(running_server, monkeypatch):
    monkeypatch.setattr(client, "READ_CHUNK_BYTES", 1000)
    rng = random.Random(1)
    shadow = rng.randbytes(10_500)
    wid = running_server.add_window(shadow)
    with client.open_window(endpoint_str(running_server), wid) as window:
        assert window.read(0, 10_500) == shadow
        assert window.read(999, 2002) == shadow[999 : 999 + 2002]


def test_len_zero_read_skips_the_wire(running_server):
    wid = running_server.add_window(bytes(10))
    window = client.open_window(endpoint_str(running_server), wid)
    running_server.stop()  # a wire round trip would now fail
    assert window.read(5, 0) == b""
    window.close()


def test_close_idempotent_and_read_after_close(running_server):
    wid = running_server.add_window(bytes(10))
    window = client.open_window(endpoint_str(running_server), wid)
    window.close()
    window.close()
    with pytest.raises(ConnectionLostError):
        window.read(0, 1)


def test_close_then_reopen(running_server):
    wid = running_server.add_window(bytes(range(10)))
    endpoint = endpoint_str(running_server)
    window = client.open_window(endpoint, wid)
    window.close()
    again = client.open_window(endpoint, wid)
    assert again.read(0, 10) == bytes(range(10))
    again.close()


def test_concurrent_clients_overlapping_ranges(running_server):
    data = bytes(i % 251 for i in range(100_000))
    wid = running_server.add_window(data)
    endpoint = endpoint_str(running_server)
    failures = []

    def reader(seed):
        rng = random.Random(seed)
        try:
            with client.open_window(endpoint, wid) as window:
                for _ in range(40):
                    offset = rng.randrange(50_000)
                    length = rng.randrange(1, 50_000)
                    if window.read(offset, length) != data[offset : offset + length]:
                        failures.append(f"mismatch at {offset}+{length}")
        except Exception as exc:  # noqa: BLE001
            failures.append(repr(exc))

    threads = [threading.Thread(target=reader, args=(i,)) for i in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not failures


def test_server_stateless_across_client_abort(running_server):
    data = bytes(100)
    wid = running_server.add_window(data)
    endpoint = endpoint_str(running_server)
    before = client.list_windows(endpoint)

    # Abort a client mid-sequence: open, issue a read, kill the socket
    # without CLOSE. The server must not accumulate or lose state.
    window = client.open_window(endpoint, wid)
    window.read(0, 50)
    window._sock.close()  # hard kill, no protocol goodbye
    window._sock = None

    after = client.list_windows(endpoint)
    assert after == before
    again = client.open_window(endpoint, wid)
    assert again.read(0, 100) == data
    again.close()


def test_stop_is_clean_while_idle_connections_exist(server):
    server.add_window(bytes(10))
    server.start()
    window = client.open_window(endpoint_str(server), 1)
    server.stop()  # must not hang on the idle connection
    with pytest.raises((ConnectionLostError, ProtocolError)):
        window.read(0, 1)


def test_request_out_of_bounds_status(running_server):
    wid = running_server.add_window(bytes(10))
    sock = socket.create_connection(running_server.endpoint)
    try:
        wire.send_message(sock, wire.ReadReq(wid, 5, 100))
        resp = wire.recv_message(sock)
        assert resp == wire.ReadResp(wire.OUT_OF_BOUNDS, b"")
    finally:
        sock.close()


def test_request_unknown_window_status(running_server):
    sock = socket.create_connection(running_server.endpoint)
    try:
        wire.send_message(sock, wire.ReadReq(424242, 0, 1))
        resp = wire.recv_message(sock)
        assert resp == wire.ReadResp(wire.UNKNOWN_WINDOW, b"")
    finally:
        sock.close()


def test_malformed_frame_gets_status_3(running_server):
    sock = socket.create_connection(running_server.endpoint)
    try:
        sock.sendall(b"JUNKJUNKJUNK")
        resp = wire.recv_message(sock)
        assert resp == wire.CloseResp(wire.PROTOCOL_ERROR)
    finally:
        sock.close()


def test_endpoint_env_default(monkeypatch):
    monkeypatch.setenv(client.ENDPOINT_ENV_VAR, "10.0.0.8:1234")
    assert client.default_endpoint() == "10.0.0.8:1234"
    monkeypatch.delenv(client.ENDPOINT_ENV_VAR)
    assert client.default_endpoint().endswith(str(wire.DEFAULT_PORT))
