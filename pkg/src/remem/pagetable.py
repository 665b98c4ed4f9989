"""Allocation tracking and byte-range to page-extent translation.

Every backend registers its allocations here; the table owns only the
geometry (sizes and page layout), never the bytes themselves.
"""

from __future__ import annotations

import enum
import math
import threading
import time
from dataclasses import dataclass

from .errors import (
    InvalidPageSizeError,
    OutOfBoundsError,
    UnknownAllocationError,
    ZeroSizeError,
)

#: Default logical page size (1 MiB). Small enough that desk-scale tests
#: exercise multi-page paths, large enough that per-page overhead is noise
#: at hundred-megabyte payloads.
DEFAULT_PAGE_SIZE = 1 << 20

MIN_PAGE_SIZE = 4096

#: Reserved invalid allocation id; never assigned.
INVALID_ID = 0


class Backend(enum.Enum):
    """Which backend owns an allocation's bytes."""

    LOCAL = "local"
    VFS = "vfs"
    REMOTE = "remote"


@dataclass(frozen=True)
class AllocationRecord:
    id: int
    size_bytes: int
    page_size: int
    backend: Backend
    created_at: int  # monotonic ns

    @property
    def page_count(self) -> int:
        return math.ceil(self.size_bytes / self.page_size)

    def page_length(self, page_index: int) -> int:
        """Valid byte count of a page; the final page may be partial."""
        start = page_index * self.page_size
        return min(self.page_size, self.size_bytes - start)


@dataclass(frozen=True)
class PageExtent:
    page_index: int
    intra_page_offset: int
    length: int


@dataclass(frozen=True)
class TableStats:
    live_allocations: int
    live_bytes: int
    per_backend: dict[Backend, int]


def _check_page_size(page_size: int) -> None:
    if page_size < MIN_PAGE_SIZE or page_size & (page_size - 1):
        raise InvalidPageSizeError(
            f"page_size must be a power of two >= {MIN_PAGE_SIZE}, got {page_size}"
        )


class PageTable:
    """Thread-safe registry of live allocations.

    Ids start at 1, increase strictly across register calls, and are never
    reused within the table's lifetime, so a stale id can only ever miss.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._records: dict[int, AllocationRecord] = {}
        self._next_id = 1

    def register_allocation(
        self,
        size_bytes: int,
        page_size: int = DEFAULT_PAGE_SIZE,
        backend: Backend = Backend.LOCAL,
    ) -> AllocationRecord:
        if size_bytes < 1:
            raise ZeroSizeError("allocation size must be >= 1 byte")
        _check_page_size(page_size)
        with self._lock:
            return self._insert(self._next_id, size_bytes, page_size, backend)

    def register_with_id(
        self,
        alloc_id: int,
        size_bytes: int,
        page_size: int,
        backend: Backend,
    ) -> AllocationRecord:
        """Register under an externally claimed id (on-disk re-attach).

        The id must exceed every id this table has assigned so far, which
        preserves the strictly-increasing guarantee.
        """
        if size_bytes < 1:
            raise ZeroSizeError("allocation size must be >= 1 byte")
        _check_page_size(page_size)
        with self._lock:
            if alloc_id < self._next_id:
                raise ValueError(
                    f"id {alloc_id} is not above this table's high-water mark "
                    f"({self._next_id - 1})"
                )
            return self._insert(alloc_id, size_bytes, page_size, backend)

    def _insert(
        self, alloc_id: int, size_bytes: int, page_size: int, backend: Backend
    ) -> AllocationRecord:
        record = AllocationRecord(
            id=alloc_id,
            size_bytes=size_bytes,
            page_size=page_size,
            backend=backend,
            created_at=time.monotonic_ns(),
        )
        self._records[alloc_id] = record
        self._next_id = alloc_id + 1
        return record

    def peek_next_id(self) -> int:
        """Smallest id a future registration may receive."""
        with self._lock:
            return self._next_id

    def get(self, alloc_id: int) -> AllocationRecord:
        with self._lock:
            try:
                return self._records[alloc_id]
            except KeyError:
                raise UnknownAllocationError(f"allocation {alloc_id}") from None

    def unregister_allocation(self, alloc_id: int) -> None:
        with self._lock:
            if alloc_id not in self._records:
                raise UnknownAllocationError(f"allocation {alloc_id}")
            del self._records[alloc_id]

    def resolve(
        self, record: AllocationRecord, offset: int, length: int
    ) -> list[PageExtent]:
        """Map [offset, offset+length) onto ascending page extents.

        The extents are contiguous, non-overlapping, and their lengths sum
        to ``length``. The record must still be registered.
        """
        self.get(record.id)  # liveness check
        if offset < 0 or length < 0 or offset + length > record.size_bytes:
            raise OutOfBoundsError(
                f"range [{offset}, {offset + length}) exceeds allocation of "
                f"{record.size_bytes} bytes"
            )
        if length == 0:
            return []
        page_size = record.page_size
        extents = []
        pos = offset
        end = offset + length
        while pos < end:
            page = pos // page_size
            intra = pos - page * page_size
            take = min(page_size - intra, end - pos)
            extents.append(PageExtent(page, intra, take))
            pos += take
        return extents

    def stats(self) -> TableStats:
        with self._lock:
            per_backend = {backend: 0 for backend in Backend}
            total = 0
            for record in self._records.values():
                per_backend[record.backend] += record.size_bytes
                total += record.size_bytes
            return TableStats(
                live_allocations=len(self._records),
                live_bytes=total,
                per_backend=per_backend,
            )


_default_table = PageTable()


def default_table() -> PageTable:
    """Process-wide table used when callers do not supply their own."""
    return _default_table
