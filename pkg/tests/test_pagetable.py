import random
import threading

import pytest

from oracles import brute_force_extents
from remem.errors import (
    InvalidPageSizeError,
    OutOfBoundsError,
    UnknownAllocationError,
    ZeroSizeError,
)
from remem.pagetable import Backend, PageTable

MiB = 1 << 20


def test_register_single_partial_page(table):
    record = table.register_allocation(1, 4096, Backend.LOCAL)
    assert record.page_count == 1
    assert record.id == 1


def test_register_page_boundary_arithmetic(table):
    assert table.register_allocation(4096, 4096, Backend.VFS).page_count == 1
    assert table.register_allocation(4097, 4096, Backend.VFS).page_count == 2


def test_register_100mb_in_1mib_pages(table):
    # oracle: count pages byte by byte at desk scale, then scale check
    def counted_pages(size, page_size):
        pages = set()
        for byte in range(size):
            pages.add(byte // page_size)
        return len(pages)

    for size, page_size in [(1, 4096), (8192, 4096), (10000, 4096), (65536, 8192)]:
        record = table.register_allocation(size, page_size, Backend.REMOTE)
        assert record.page_count == counted_pages(size, page_size)
    big = table.register_allocation(104857600, 1048576, Backend.REMOTE)
    assert big.page_count == 100


def test_register_rejects_zero_size(table):
    with pytest.raises(ZeroSizeError):
        table.register_allocation(0, 4096, Backend.LOCAL)


@pytest.mark.parametrize("page_size", [0, 1, 2048, 4095, 4097, 6144, 1 << 63 | 1])
def test_register_rejects_bad_page_size(table, page_size):
    with pytest.raises(InvalidPageSizeError):
        table.register_allocation(1, page_size, Backend.LOCAL)


def test_ids_strictly_increase(table):
    ids = [table.register_allocation(1, 4096, Backend.LOCAL).id for _ in range(50)]
    assert ids == sorted(ids)
    assert len(set(ids)) == len(ids)
    assert 0 not in ids


def test_ids_not_reused_after_free(table):
    first = table.register_allocation(1, 4096, Backend.LOCAL)
    table.unregister_allocation(first.id)
    second = table.register_allocation(1, 4096, Backend.LOCAL)
    assert second.id > first.id


def test_resolve_identity_case(table):
    record = table.register_allocation(10 * MiB, MiB, Backend.LOCAL)
    extents = table.resolve(record, 0, MiB)
    assert len(extents) == 1
    assert (extents[0].page_index, extents[0].intra_page_offset, extents[0].length) == (
        0,
        0,
        MiB,
    )


def test_resolve_spanning_read(table):
    record = table.register_allocation(10 * MiB, MiB, Backend.LOCAL)
    extents = table.resolve(record, int(1.5 * MiB), MiB)
    assert [(e.page_index, e.intra_page_offset, e.length) for e in extents] == [
        (1, 524288, 524288),
        (2, 0, 524288),
    ]


def test_resolve_partial_final_page(table):
    record = table.register_allocation(4097, 4096, Backend.LOCAL)
    extents = table.resolve(record, 4090, 7)
    assert [(e.page_index, e.intra_page_offset, e.length) for e in extents] == [
        (0, 4090, 6),
        (1, 0, 1),
    ]


def test_resolve_out_of_bounds(table):
    record = table.register_allocation(4096, 4096, Backend.LOCAL)
    with pytest.raises(OutOfBoundsError):
        table.resolve(record, 4000, 97)
    with pytest.raises(OutOfBoundsError):
        table.resolve(record, 4097, 1)


def test_resolve_matches_brute_force(table):
    rng = random.Random(0xBEEF)
    for _ in range(40):
        page_size = 4096 << rng.randrange(4)
        size = rng.randrange(1, 48 * 1024)
        record = table.register_allocation(size, page_size, Backend.VFS)
        for _ in range(8):
            offset = rng.randrange(size)
            length = rng.randrange(1, size - offset + 1)
            got = [
                (e.page_index, e.intra_page_offset, e.length)
                for e in table.resolve(record, offset, length)
            ]
            assert got == brute_force_extents(size, page_size, offset, length)


def test_resolve_extents_reconstruct_range(table):
    rng = random.Random(7)
    size = 37 * 1000
    data = bytes(rng.randrange(256) for _ in range(size))
    record = table.register_allocation(size, 4096, Backend.LOCAL)
    for _ in range(50):
        offset = rng.randrange(size)
        length = rng.randrange(1, size - offset + 1)
        parts = []
        for e in table.resolve(record, offset, length):
            start = e.page_index * 4096 + e.intra_page_offset
            parts.append(data[start : start + e.length])
        # contiguity and ordering fall out of byte equality
        assert b"".join(parts) == data[offset : offset + length]
        assert sum(e.length for e in table.resolve(record, offset, length)) == length


def test_resolve_after_unregister(table):
    record = table.register_allocation(4096, 4096, Backend.LOCAL)
    table.unregister_allocation(record.id)
    with pytest.raises(UnknownAllocationError):
        table.resolve(record, 0, 1)


def test_unregister_twice(table):
    record = table.register_allocation(4096, 4096, Backend.LOCAL)
    table.unregister_allocation(record.id)
    with pytest.raises(UnknownAllocationError):
        table.unregister_allocation(record.id)


def test_unregister_invalid_sentinel(table):
    with pytest.raises(UnknownAllocationError):
        table.unregister_allocation(0)


def test_stats_fresh_table(table):
    stats = table.stats()
    assert stats.live_allocations == 0
    assert stats.live_bytes == 0
    assert stats.per_backend == {b: 0 for b in Backend}


def test_stats_single_allocation(table):
    table.register_allocation(4096, 4096, Backend.LOCAL)
    stats = table.stats()
    assert stats.live_allocations == 1
    assert stats.live_bytes == 4096
    assert stats.per_backend[Backend.LOCAL] == 4096
    assert stats.per_backend[Backend.VFS] == 0


def test_stats_sums_live_bytes(table):
    for mib in (1, 2, 3):
        table.register_allocation(mib * MiB, MiB, Backend.VFS)
    assert table.stats().live_bytes == 6 * MiB


def test_stats_invariant_under_registration_order():
    sizes = [(5000, Backend.LOCAL), (7000, Backend.VFS), (11000, Backend.REMOTE)]
    a, b = PageTable(), PageTable()
    for size, backend in sizes:
        a.register_allocation(size, 4096, backend)
    for size, backend in reversed(sizes):
        b.register_allocation(size, 4096, backend)
    assert a.stats() == b.stats()


def test_concurrent_register_lookup_unregister(table):
    errors = []
    ids = []
    lock = threading.Lock()

    def worker(seed):
        rng = random.Random(seed)
        try:
            for _ in range(200):
                record = table.register_allocation(
                    rng.randrange(1, 10000), 4096, Backend.LOCAL
                )
                with lock:
                    ids.append(record.id)
                table.get(record.id)
                if rng.random() < 0.5:
                    table.unregister_allocation(record.id)
                table.stats()
        except Exception as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert len(set(ids)) == len(ids)


def test_lookup_racing_unregister_never_torn(table):
    record = table.register_allocation(4096, 4096, Backend.LOCAL)
    results = []

    def reader():
        try:
            results.append(table.get(record.id))
        except UnknownAllocationError:
            results.append(None)

    threads = [threading.Thread(target=reader) for _ in range(16)]
    killer = threading.Thread(target=lambda: table.unregister_allocation(record.id))
    for t in threads[:8]:
        t.start()
    killer.start()
    for t in threads[8:]:
        t.start()
    for t in threads + [killer]:
        t.join()
    assert all(r is None or r == record for r in results)
