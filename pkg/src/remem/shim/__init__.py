"""Build helper for the preload allocator shim.

The shim itself is a small C shared object (the allocator ABI is a symbol
contract, so it cannot be Python); this module locates the source and
compiles it on demand. Linux-only by nature and excluded from the portable
test suite.

Usage::

    LD_PRELOAD=$(python -c 'import remem.shim as s; print(s.build())') \
        REMEM_ENABLE=1 REMEM_VFS_ROOT=/path/to/store  some-binary
"""

from __future__ import annotations

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

SOURCE = Path(__file__).with_name("remem_shim.c")

#: Environment variables the shim reads.
ENV_ENABLE = "REMEM_ENABLE"
ENV_ROOT = "REMEM_VFS_ROOT"
ENV_THRESHOLD = "REMEM_THRESHOLD"
ENV_LOG = "REMEM_LOG"

DEFAULT_THRESHOLD = 1 << 20


def supported() -> bool:
    return sys.platform.startswith("linux") and shutil.which("cc") is not None


def build(out_path: str | Path | None = None, cc: str = "cc") -> Path:
    """Compile the shim; returns the shared-object path."""
    if out_path is None:
        out_path = Path(tempfile.gettempdir()) / "libremem_shim.so"
    out_path = Path(out_path)
    cmd = [
        cc,
        "-shared",
        "-fPIC",
        "-O2",
        "-Wall",
        str(SOURCE),
        "-o",
        str(out_path),
        "-ldl",
        "-lpthread",
    ]
    subprocess.run(cmd, check=True, capture_output=True, text=True)
    return out_path
