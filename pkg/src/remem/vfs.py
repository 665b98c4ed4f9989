"""File-backed memory store on a shared POSIX directory.

Each allocation lives under ``<root>/alloc-<id>/`` as a ``meta.json``
describing its geometry plus a single ``data.bin`` holding all pages as
logical extents of one file (one file per allocation keeps metadata
traffic low on shared filesystems). An optional per-allocation LRU page
cache holds a configurable fraction of pages in memory.

Sharing discipline is single-writer / multi-reader across processes;
writes become visible to other handles after :meth:`VfsStore.sync`.

On-disk layout::

    <root>/format_version            ASCII decimal, newline-terminated
    <root>/alloc-<id>/meta.json
    <root>/alloc-<id>/data.bin       exactly size_bytes long
"""

from __future__ import annotations

import enum
import json
import logging
import math
import os
import re
import shutil
import threading
from collections import OrderedDict
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import (
    IncompatibleFormatVersionError,
    UnknownAllocationError,
    ZeroSizeError,
)
from .pagetable import DEFAULT_PAGE_SIZE, AllocationRecord, Backend, PageTable

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
CHECKSUM_ALGO = "fnv1a64"

#: Fraction of pages cached by default; genome-index style workloads touch
#: only a small hot fraction of their data, so caching everything wastes
#: memory.
DEFAULT_CACHE_FRACTION = 0.2

#: Environment variable the CLI and shim consult for the store root.
ROOT_ENV_VAR = "REMEM_VFS_ROOT"

_ALLOC_DIR_RE = re.compile(r"^alloc-(\d+)$")

_META_FIELDS = (
    "format_version",
    "alloc_id",
    "size_bytes",
    "page_size",
    "checksum_algo",
    "created_at",
)


class CachePolicy(enum.Enum):
    NONE = "none"
    LRU = "lru"


@dataclass(frozen=True)
class CacheStats:
    hits: int
    misses: int
    evictions: int
    resident_pages: int


class _PageCache:
    """LRU cache over full pages of one allocation.

    A lookup miss counts even when capacity is zero (the access still went
    to disk); eviction removes the least recently used page.
    """

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.pages: OrderedDict[int, bytes] = OrderedDict()
        self.hits = 0
        self.misses = 0
        self.evictions = 0
        self.lock = threading.Lock()

    def get(self, page_index: int) -> bytes | None:
        with self.lock:
            data = self.pages.get(page_index)
            if data is None:
                self.misses += 1
                return None
            self.hits += 1
            self.pages.move_to_end(page_index)
            return data

    def put(self, page_index: int, data: bytes) -> None:
        if self.capacity <= 0:
            return
        with self.lock:
            if page_index in self.pages:
                self.pages.move_to_end(page_index)
                self.pages[page_index] = data
                return
            self.pages[page_index] = data
            while len(self.pages) > self.capacity:
                self.pages.popitem(last=False)
                self.evictions += 1

    def invalidate(self, page_indices) -> None:
        with self.lock:
            for page_index in page_indices:
                self.pages.pop(page_index, None)

    def count_misses(self, n: int) -> None:
        with self.lock:
            self.misses += n

    def stats(self) -> CacheStats:
        with self.lock:
            return CacheStats(self.hits, self.misses, self.evictions, len(self.pages))


class _Allocation:
    def __init__(self, record: AllocationRecord, directory: Path, capacity: int):
        self.record = record
        self.directory = directory
        self.cache = _PageCache(capacity)
        self.fd: int | None = None
        self.fd_lock = threading.Lock()

    def data_path(self) -> Path:
        return self.directory / "data.bin"

    def ensure_fd(self) -> int:
        with self.fd_lock:
            if self.fd is None:
                self.fd = os.open(self.data_path(), os.O_RDWR)
            return self.fd

    def close_fd(self) -> None:
        with self.fd_lock:
            if self.fd is not None:
                os.close(self.fd)
                self.fd = None


def _write_meta(path: Path, record: AllocationRecord) -> None:
    meta = {
        "format_version": FORMAT_VERSION,
        "alloc_id": record.id,
        "size_bytes": record.size_bytes,
        "page_size": record.page_size,
        "checksum_algo": CHECKSUM_ALGO,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def _read_meta(path: Path) -> dict:
    meta = json.loads(path.read_text(encoding="utf-8"))
    missing = [f for f in _META_FIELDS if f not in meta]
    if missing:
        raise ValueError(f"meta.json missing fields: {missing}")
    if meta["format_version"] != FORMAT_VERSION:
        raise IncompatibleFormatVersionError(
            f"allocation meta format {meta['format_version']}, "
            f"supported {FORMAT_VERSION}"
        )
    return meta


class VfsStore:
    """Handle on a store root; opening is idempotent and re-attaches.

    The handle may be shared across threads. Across processes the contract
    is at most one writer; readers see synced bytes.
    """

    def __init__(
        self,
        root: str | os.PathLike,
        page_size: int = DEFAULT_PAGE_SIZE,
        cache_fraction: float = DEFAULT_CACHE_FRACTION,
        cache_policy: CachePolicy = CachePolicy.LRU,
        table: PageTable | None = None,
    ):
        if not 0.0 <= cache_fraction <= 1.0:
            raise ValueError(f"cache_fraction must be in [0, 1], got {cache_fraction}")
        self.root = Path(root)
        self.page_size = page_size
        self.cache_fraction = cache_fraction
        self.cache_policy = cache_policy
        self._table = table if table is not None else PageTable()
        self._allocations: dict[int, _Allocation] = {}
        self._lock = threading.Lock()
        self._open_root()
        self._attach_existing()

    # -- store lifecycle ---------------------------------------------------

    def _open_root(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        version_path = self.root / "format_version"
        if version_path.exists():
            text = version_path.read_text(encoding="ascii").strip()
            if not text.isdigit() or int(text) != FORMAT_VERSION:
                raise IncompatibleFormatVersionError(
                    f"store format {text!r}, supported {FORMAT_VERSION}"
                )
        else:
            version_path.write_text(f"{FORMAT_VERSION}\n", encoding="ascii")

    def _attach_existing(self) -> None:
        found = []
        for entry in self.root.iterdir():
            m = _ALLOC_DIR_RE.match(entry.name)
            if m and entry.is_dir():
                found.append((int(m.group(1)), entry))
        for alloc_id, directory in sorted(found):
            meta = _read_meta(directory / "meta.json")
            if meta["alloc_id"] != alloc_id:
                raise ValueError(
                    f"{directory} meta alloc_id {meta['alloc_id']} does not match "
                    f"directory name"
                )
            data = directory / "data.bin"
            actual = data.stat().st_size
            if actual != meta["size_bytes"]:
                raise ValueError(
                    f"{data} is {actual} bytes, meta says {meta['size_bytes']}"
                )
            record = self._table.register_with_id(
                alloc_id, meta["size_bytes"], meta["page_size"], Backend.VFS
            )
            self._allocations[alloc_id] = _Allocation(
                record, directory, self._capacity_for(record)
            )

    def _capacity_for(self, record: AllocationRecord) -> int:
        if self.cache_policy is CachePolicy.NONE:
            return 0
        return math.floor(self.cache_fraction * record.page_count)

    def close(self) -> None:
        with self._lock:
            for alloc in self._allocations.values():
                alloc.close_fd()

    def __enter__(self) -> "VfsStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- allocation lifecycle ----------------------------------------------

    def create(self, size_bytes: int) -> int:
        if size_bytes < 1:
            raise ZeroSizeError("allocation size must be >= 1 byte")
        directory, alloc_id = self._claim_directory()
        try:
            record = self._table.register_with_id(
                alloc_id, size_bytes, self.page_size, Backend.VFS
            )
            data = directory / "data.bin"
            with open(data, "wb") as f:
                f.truncate(size_bytes)  # sparse where the filesystem allows
            _write_meta(directory / "meta.json", record)
        except BaseException:
            shutil.rmtree(directory, ignore_errors=True)
            raise
        alloc = _Allocation(record, directory, self._capacity_for(record))
        with self._lock:
            self._allocations[alloc_id] = alloc
        return alloc_id

    def _claim_directory(self) -> tuple[Path, int]:
        # mkdir is the atomic claim, so concurrent creators (including the
        # preload shim) can share one root without handing out the same id.
        candidate = self._table.peek_next_id()
        while True:
            directory = self.root / f"alloc-{candidate}"
            try:
                directory.mkdir()
                return directory, candidate
            except FileExistsError:
                candidate += 1

    def _get(self, alloc_id: int) -> _Allocation:
        with self._lock:
            alloc = self._allocations.get(alloc_id)
        if alloc is None:
            raise UnknownAllocationError(f"allocation {alloc_id}")
        return alloc

    def record(self, alloc_id: int) -> AllocationRecord:
        return self._get(alloc_id).record

    def allocation_ids(self) -> list[int]:
        with self._lock:
            return sorted(self._allocations)

    def free(self, alloc_id: int) -> None:
        with self._lock:
            alloc = self._allocations.pop(alloc_id, None)
        if alloc is None:
            raise UnknownAllocationError(f"allocation {alloc_id}")
        alloc.close_fd()
        self._table.unregister_allocation(alloc_id)
        shutil.rmtree(alloc.directory)

    # -- data path -----------------------------------------------------------

    def write(self, alloc_id: int, offset: int, src) -> None:
        alloc = self._get(alloc_id)
        src = memoryview(src)
        extents = self._table.resolve(alloc.record, offset, len(src))
        # Stale pages must go before the bytes do, or a concurrent reader
        # of this handle could see pre-write data served from cache.
        alloc.cache.invalidate(e.page_index for e in extents)
        if len(src):
            fd = alloc.ensure_fd()
            os.pwrite(fd, src, offset)

    def read(self, alloc_id: int, offset: int, length: int) -> bytes:
        alloc = self._get(alloc_id)
        extents = self._table.resolve(alloc.record, offset, length)
        if not extents:
            return b""
        fd = alloc.ensure_fd()
        if alloc.cache.capacity <= 0:
            # Pass-through: one read for the whole range, one miss per page.
            alloc.cache.count_misses(len(extents))
            return os.pread(fd, length, offset)
        parts = []
        page_size = alloc.record.page_size
        for extent in extents:
            page = alloc.cache.get(extent.page_index)
            if page is None:
                page_len = alloc.record.page_length(extent.page_index)
                page = os.pread(fd, page_len, extent.page_index * page_size)
                alloc.cache.put(extent.page_index, page)
            parts.append(
                page[extent.intra_page_offset : extent.intra_page_offset + extent.length]
            )
        return b"".join(parts)

    def cache_stats(self, alloc_id: int) -> CacheStats:
        return self._get(alloc_id).cache.stats()

    def drop_cache(self, alloc_id: int) -> None:
        """Drop resident pages (counters keep their history)."""
        alloc = self._get(alloc_id)
        alloc.cache.invalidate(list(alloc.cache.pages))

    def advise_cold(self, alloc_id: int) -> None:
        """Ask the OS to drop its cached pages for this allocation's file.

        Unprivileged and best-effort; a no-op where fadvise is unavailable.
        """
        alloc = self._get(alloc_id)
        if hasattr(os, "posix_fadvise"):
            fd = alloc.ensure_fd()
            os.fsync(fd)
            os.posix_fadvise(fd, 0, 0, os.POSIX_FADV_DONTNEED)

    def sync(self, alloc_id: int) -> None:
        alloc = self._get(alloc_id)
        with alloc.fd_lock:
            if alloc.fd is not None:
                os.fsync(alloc.fd)

    def stats(self):
        return self._table.stats()


# -- operator inspection ------------------------------------------------------


@dataclass(frozen=True)
class InspectEntry:
    alloc_id: int
    size_bytes: int | None
    page_size: int | None
    page_count: int | None
    on_disk_bytes: int | None
    created_at: str | None
    error: str | None


def inspect_root(root: str | os.PathLike) -> list[InspectEntry]:
    """Lenient listing of a store root for operator tooling.

    Unlike opening a store, a corrupt allocation yields an error entry
    instead of failing the whole listing. An uninitialized directory lists
    as empty; a directory written by a newer format raises.
    """
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"{root} is not a directory")
    version_path = root / "format_version"
    if version_path.exists():
        text = version_path.read_text(encoding="ascii").strip()
        if not text.isdigit() or int(text) != FORMAT_VERSION:
            raise IncompatibleFormatVersionError(
                f"store format {text!r}, supported {FORMAT_VERSION}"
            )
    entries = []
    for entry in sorted(root.iterdir()):
        m = _ALLOC_DIR_RE.match(entry.name)
        if not m or not entry.is_dir():
            continue
        alloc_id = int(m.group(1))
        try:
            meta = _read_meta(entry / "meta.json")
            stat = (entry / "data.bin").stat()
            if stat.st_size != meta["size_bytes"]:
                raise ValueError(
                    f"data.bin is {stat.st_size} bytes, meta says "
                    f"{meta['size_bytes']}"
                )
            entries.append(
                InspectEntry(
                    alloc_id=alloc_id,
                    size_bytes=meta["size_bytes"],
                    page_size=meta["page_size"],
                    page_count=math.ceil(meta["size_bytes"] / meta["page_size"]),
                    on_disk_bytes=stat.st_blocks * 512,
                    created_at=meta["created_at"],
                    error=None,
                )
            )
        except (OSError, ValueError, IncompatibleFormatVersionError, KeyError) as exc:
            logger.warning("inspect: %s: %s", entry, exc)
            entries.append(
                InspectEntry(
                    alloc_id=alloc_id,
                    size_bytes=None,
                    page_size=None,
                    page_count=None,
                    on_disk_bytes=None,
                    created_at=None,
                    error=str(exc),
                )
            )
    return entries
