"""Baseline backend: plain in-process buffers and bulk copies.

This is the reference the two distributed backends are measured against;
a write is one slice assignment (a memcpy under the hood), a read is one
slice copy out.
"""

from __future__ import annotations

from .errors import OutOfBoundsError, ZeroSizeError
from .pagetable import DEFAULT_PAGE_SIZE, Backend, PageTable, default_table


class LocalRegion:
    """Single-owner byte region registered with a page table.

    Concurrent reads of disjoint ranges are fine; overlapping write+read
    from different threads is a caller error (memory-safe, result
    unspecified).
    """

    def __init__(
        self,
        size_bytes: int,
        page_size: int = DEFAULT_PAGE_SIZE,
        table: PageTable | None = None,
    ):
        if size_bytes < 1:
            raise ZeroSizeError("local region size must be >= 1 byte")
        self._table = table if table is not None else default_table()
        self._record = self._table.register_allocation(
            size_bytes, page_size, Backend.LOCAL
        )
        self._buf = bytearray(size_bytes)
        self._freed = False

    @property
    def alloc_id(self) -> int:
        return self._record.id

    @property
    def size_bytes(self) -> int:
        return self._record.size_bytes

    def _check_range(self, offset: int, length: int) -> None:
        if offset < 0 or length < 0 or offset + length > len(self._buf):
            raise OutOfBoundsError(
                f"range [{offset}, {offset + length}) exceeds region of "
                f"{len(self._buf)} bytes"
            )

    def write(self, offset: int, src) -> None:
        src = memoryview(src)
        self._check_range(offset, len(src))
        self._buf[offset : offset + len(src)] = src

    def read(self, offset: int, length: int) -> bytes:
        self._check_range(offset, length)
        return bytes(self._buf[offset : offset + length])

    def view(self) -> memoryview:
        """Zero-copy read-only view (used by checksum and serving paths)."""
        return memoryview(self._buf).toreadonly()

    def free(self) -> None:
        if not self._freed:
            self._table.unregister_allocation(self._record.id)
            self._buf = bytearray()
            self._freed = True

    def __enter__(self) -> "LocalRegion":
        return self

    def __exit__(self, *exc) -> None:
        self.free()


def alloc(
    size_bytes: int,
    page_size: int = DEFAULT_PAGE_SIZE,
    table: PageTable | None = None,
) -> LocalRegion:
    return LocalRegion(size_bytes, page_size, table)
