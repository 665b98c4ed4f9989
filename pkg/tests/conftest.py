import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from remem.pagetable import PageTable
from remem.server import WindowServer


@pytest.fixture
def table():
    return PageTable()


@pytest.fixture
def server():
    srv = WindowServer(("127.0.0.1", 0))
    yield srv
    srv.stop()


@pytest.fixture
def running_server(server):
    server.start()
    return server


def endpoint_str(server) -> str:
    return "%s:%d" % server.endpoint
