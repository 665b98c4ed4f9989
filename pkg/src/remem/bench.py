"""Timed read/copy sweeps across the three backends.

The measured primitive is the data access itself: one contiguous bulk copy
for the local baseline, one full sequential read for the file-backed and
remote backends. Provisioning, allocation, and connection setup happen
outside the timed region and are reported separately. Every repetition
checksums what it read; a mismatch is a hard failure because a timing for
wrong bytes is worthless.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import client as remote_client
from . import local
from .errors import ConfigError, EmptyGroupError, IntegrityError
from .pagetable import Backend, PageTable
from .pattern import checksum, generate_pattern
from .server import WindowServer
from .vfs import CacheStats, VfsStore

logger = logging.getLogger(__name__)

RAW_HEADER = "backend,size_bytes,rep,elapsed_ns,throughput_mb_s,checksum"
SUMMARY_HEADER = (
    "backend,size_bytes,n,mean_ns,median_ns,stddev_ns,min_ns,max_ns,mean_mb_s"
)

DEFAULT_SIZES_MB = list(range(100, 1001, 100))
DEFAULT_REPETITIONS = 10
DEFAULT_SEED = 42


@dataclass
class BenchmarkConfig:
    backends: list[Backend] = field(
        default_factory=lambda: [Backend.LOCAL, Backend.VFS, Backend.REMOTE]
    )
    sizes_mb: list[int] = field(default_factory=lambda: list(DEFAULT_SIZES_MB))
    repetitions: int = DEFAULT_REPETITIONS
    pattern_seed: int = DEFAULT_SEED
    scale: int = 1
    vfs_root: str | None = None
    endpoint: str | None = None
    cache_fraction: float = 0.2
    cold: bool = False

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if not self.backends:
            raise ConfigError("at least one backend required")
        if not self.sizes_mb:
            raise ConfigError("sizes_mb must be non-empty")
        if any(a >= b for a, b in zip(self.sizes_mb, self.sizes_mb[1:])):
            raise ConfigError(f"sizes_mb must be strictly increasing: {self.sizes_mb}")
        if self.scale < 1:
            raise ConfigError(f"scale must be >= 1, got {self.scale}")
        if min(self.size_bytes_list()) < 1:
            raise ConfigError("scale reduces a size below one byte")

    def size_bytes_list(self) -> list[int]:
        """Decimal-MB sizes divided by the desk-scale factor."""
        return [mb * 10**6 // self.scale for mb in self.sizes_mb]


@dataclass(frozen=True)
class MeasurementRecord:
    backend: Backend
    size_bytes: int
    rep_index: int
    elapsed_ns: int
    throughput_mb_s: float
    checksum: int

    @classmethod
    def from_timing(
        cls,
        backend: Backend,
        size_bytes: int,
        rep_index: int,
        elapsed_ns: int,
        digest: int,
    ) -> "MeasurementRecord":
        if elapsed_ns <= 0:
            # Monotonic clocks can tie on very fast ops; never record zero.
            elapsed_ns = 1
        return cls(
            backend=backend,
            size_bytes=size_bytes,
            rep_index=rep_index,
            elapsed_ns=elapsed_ns,
            throughput_mb_s=compute_throughput(size_bytes, elapsed_ns),
            checksum=digest,
        )


def compute_throughput(size_bytes: int, elapsed_ns: int) -> float:
    return (size_bytes / 1e6) / (elapsed_ns / 1e9)


@dataclass(frozen=True)
class SummaryStat:
    backend: Backend
    size_bytes: int
    n: int
    mean_ns: float
    median_ns: float
    stddev_ns: float
    min_ns: int
    max_ns: int
    mean_mb_s: float
    median_mb_s: float
    stddev_mb_s: float
    min_mb_s: float
    max_mb_s: float


@dataclass
class RunResult:
    records: list[MeasurementRecord]
    setup_ns: int
    cache_stats: list[CacheStats] | None = None


def _verify(digest: int, expected: int, backend: Backend, size: int, rep: int) -> None:
    if digest != expected:
        raise IntegrityError(
            f"{backend.value} size={size} rep={rep}: checksum "
            f"{digest:#018x} != expected {expected:#018x}"
        )


def run_local(
    size_bytes: int, reps: int, seed: int, table: PageTable | None = None
) -> RunResult:
    """Baseline: timer spans exactly one contiguous copy per repetition."""
    t0 = time.perf_counter_ns()
    src = generate_pattern(seed, size_bytes)
    expected = checksum(src)
    region = local.alloc(size_bytes, table=table)
    setup_ns = time.perf_counter_ns() - t0
    records = []
    try:
        for rep in range(reps):
            start = time.perf_counter_ns()
            region.write(0, src)
            elapsed = time.perf_counter_ns() - start
            digest = checksum(region.view())
            _verify(digest, expected, Backend.LOCAL, size_bytes, rep)
            records.append(
                MeasurementRecord.from_timing(
                    Backend.LOCAL, size_bytes, rep, elapsed, digest
                )
            )
    finally:
        region.free()
    return RunResult(records, setup_ns)


def run_vfs(
    size_bytes: int, reps: int, seed: int, store: VfsStore, cold: bool = False
) -> RunResult:
    """One full sequential read of the allocation per repetition.

    Provisioning (create + write + sync) is untimed. Per-repetition cache
    counter deltas ride along in the result.
    """
    t0 = time.perf_counter_ns()
    src = generate_pattern(seed, size_bytes)
    expected = checksum(src)
    alloc_id = store.create(size_bytes)
    records = []
    deltas = []
    try:
        store.write(alloc_id, 0, src)
        store.sync(alloc_id)
        del src
        setup_ns = time.perf_counter_ns() - t0
        for rep in range(reps):
            if cold:
                store.drop_cache(alloc_id)
                store.advise_cold(alloc_id)
            before = store.cache_stats(alloc_id)
            start = time.perf_counter_ns()
            data = store.read(alloc_id, 0, size_bytes)
            elapsed = time.perf_counter_ns() - start
            after = store.cache_stats(alloc_id)
            digest = checksum(data)
            _verify(digest, expected, Backend.VFS, size_bytes, rep)
            records.append(
                MeasurementRecord.from_timing(
                    Backend.VFS, size_bytes, rep, elapsed, digest
                )
            )
            deltas.append(
                CacheStats(
                    hits=after.hits - before.hits,
                    misses=after.misses - before.misses,
                    evictions=after.evictions - before.evictions,
                    resident_pages=after.resident_pages,
                )
            )
    finally:
        store.free(alloc_id)
    return RunResult(records, setup_ns, deltas)


def _pick_window(endpoint, size_bytes: int) -> int:
    windows = remote_client.list_windows(endpoint)
    fitting = [(size, wid) for wid, size in windows.items() if size >= size_bytes]
    if not fitting:
        raise ConfigError(
            f"no exposed window holds {size_bytes} bytes "
            f"(available: {sorted(windows.values())})"
        )
    return min(fitting)[1]


def run_remote(
    size_bytes: int,
    reps: int,
    seed: int,
    endpoint,
    window_id: int | None = None,
) -> RunResult:
    """One-way read of the window per repetition; connection setup untimed.

    The window must be provisioned from the same seed; because the pattern
    is prefix-stable a larger window still verifies.
    """
    t0 = time.perf_counter_ns()
    expected = checksum(generate_pattern(seed, size_bytes))
    if window_id is None:
        window_id = _pick_window(endpoint, size_bytes)
    window = remote_client.open_window(endpoint, window_id)
    if window.size_bytes < size_bytes:
        window.close()
        raise ConfigError(
            f"window {window_id} holds {window.size_bytes} bytes, need {size_bytes}"
        )
    setup_ns = time.perf_counter_ns() - t0
    records = []
    try:
        for rep in range(reps):
            start = time.perf_counter_ns()
            data = window.read(0, size_bytes)
            elapsed = time.perf_counter_ns() - start
            digest = checksum(data)
            _verify(digest, expected, Backend.REMOTE, size_bytes, rep)
            records.append(
                MeasurementRecord.from_timing(
                    Backend.REMOTE, size_bytes, rep, elapsed, digest
                )
            )
    finally:
        window.close()
    return RunResult(records, setup_ns)


@dataclass
class SuiteResult:
    records: list[MeasurementRecord]
    summaries: list[SummaryStat]
    setup_ns: dict[tuple[str, int], int]
    cache_stats: dict[int, list[CacheStats]]


def run_suite(config: BenchmarkConfig) -> SuiteResult:
    """Run the full sweep described by ``config``.

    When no endpoint is configured, a loopback window server is spawned for
    the duration of the remote sweep; when no VFS root is configured, a
    temporary directory is used and removed afterwards.
    """
    import tempfile

    records: list[MeasurementRecord] = []
    setup_ns: dict[tuple[str, int], int] = {}
    cache_stats: dict[int, list[CacheStats]] = {}
    sizes = config.size_bytes_list()

    for backend in config.backends:
        if backend is Backend.LOCAL:
            for size in sizes:
                result = run_local(size, config.repetitions, config.pattern_seed)
                records.extend(result.records)
                setup_ns[(backend.value, size)] = result.setup_ns
        elif backend is Backend.VFS:
            if config.vfs_root is not None:
                root_ctx = None
                root = config.vfs_root
            else:
                root_ctx = tempfile.TemporaryDirectory(prefix="remem-bench-")
                root = root_ctx.name
            try:
                store = VfsStore(root, cache_fraction=config.cache_fraction)
                with store:
                    for size in sizes:
                        result = run_vfs(
                            size,
                            config.repetitions,
                            config.pattern_seed,
                            store,
                            cold=config.cold,
                        )
                        records.extend(result.records)
                        setup_ns[(backend.value, size)] = result.setup_ns
                        cache_stats[size] = result.cache_stats or []
            finally:
                if root_ctx is not None:
                    root_ctx.cleanup()
        elif backend is Backend.REMOTE:
            if config.endpoint is not None:
                for size in sizes:
                    result = run_remote(
                        size, config.repetitions, config.pattern_seed, config.endpoint
                    )
                    records.extend(result.records)
                    setup_ns[(backend.value, size)] = result.setup_ns
            else:
                with WindowServer(("127.0.0.1", 0)) as server:
                    endpoint = "%s:%d" % server.endpoint
                    for size in sizes:
                        wid = server.add_window(
                            generate_pattern(config.pattern_seed, size)
                        )
                        try:
                            result = run_remote(
                                size,
                                config.repetitions,
                                config.pattern_seed,
                                endpoint,
                                window_id=wid,
                            )
                        finally:
                            server.remove_window(wid)
                        records.extend(result.records)
                        setup_ns[(backend.value, size)] = result.setup_ns
    for key, ns in sorted(setup_ns.items()):
        logger.info("setup %s size=%d: %.3f ms", key[0], key[1], ns / 1e6)
    return SuiteResult(records, summarize(records), setup_ns, cache_stats)


# -- statistics ----------------------------------------------------------------


def summarize(records: list[MeasurementRecord]) -> list[SummaryStat]:
    """Per (backend, size) sample statistics; stddev is the n-1 estimator.

    A single-record group reports stddev 0 (its n field flags the
    degeneracy, and a warning is logged).
    """
    if not records:
        raise EmptyGroupError("no records to summarize")
    groups: dict[tuple[str, int], list[MeasurementRecord]] = {}
    for record in records:
        groups.setdefault((record.backend.value, record.size_bytes), []).append(record)
    stats = []
    for (_, size_bytes), group in sorted(groups.items()):
        elapsed = [r.elapsed_ns for r in group]
        throughput = [r.throughput_mb_s for r in group]
        n = len(group)
        if n == 1:
            logger.warning(
                "group (%s, %d) has a single record; stddev degenerate",
                group[0].backend.value,
                size_bytes,
            )
        stats.append(
            SummaryStat(
                backend=group[0].backend,
                size_bytes=size_bytes,
                n=n,
                mean_ns=statistics.fmean(elapsed),
                median_ns=float(statistics.median(elapsed)),
                stddev_ns=statistics.stdev(elapsed) if n > 1 else 0.0,
                min_ns=min(elapsed),
                max_ns=max(elapsed),
                mean_mb_s=statistics.fmean(throughput),
                median_mb_s=float(statistics.median(throughput)),
                stddev_mb_s=statistics.stdev(throughput) if n > 1 else 0.0,
                min_mb_s=min(throughput),
                max_mb_s=max(throughput),
            )
        )
    return stats


# -- CSV emit/parse ------------------------------------------------------------


def write_raw_csv(records: list[MeasurementRecord], path) -> None:
    with open(path, "w", newline="", encoding="ascii") as f:
        writer = csv.writer(f)
        writer.writerow(RAW_HEADER.split(","))
        for r in records:
            writer.writerow(
                [
                    r.backend.value,
                    r.size_bytes,
                    r.rep_index,
                    r.elapsed_ns,
                    repr(r.throughput_mb_s),
                    r.checksum,
                ]
            )


def read_raw_csv(path) -> list[MeasurementRecord]:
    records = []
    with open(path, newline="", encoding="ascii") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != RAW_HEADER.split(","):
            raise ConfigError(f"{path}: unexpected raw CSV header {header}")
        for row in reader:
            records.append(
                MeasurementRecord(
                    backend=Backend(row[0]),
                    size_bytes=int(row[1]),
                    rep_index=int(row[2]),
                    elapsed_ns=int(row[3]),
                    throughput_mb_s=float(row[4]),
                    checksum=int(row[5]),
                )
            )
    return records


def write_summary_csv(stats: list[SummaryStat], path) -> None:
    with open(path, "w", newline="", encoding="ascii") as f:
        writer = csv.writer(f)
        writer.writerow(SUMMARY_HEADER.split(","))
        for s in stats:
            writer.writerow(
                [
                    s.backend.value,
                    s.size_bytes,
                    s.n,
                    repr(s.mean_ns),
                    repr(s.median_ns),
                    repr(s.stddev_ns),
                    s.min_ns,
                    s.max_ns,
                    repr(s.mean_mb_s),
                ]
            )


def read_summary_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="ascii") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != SUMMARY_HEADER.split(","):
            raise ConfigError(
                f"{path}: unexpected summary CSV header {reader.fieldnames}"
            )
        for row in reader:
            rows.append(
                {
                    "backend": row["backend"],
                    "size_bytes": int(row["size_bytes"]),
                    "n": int(row["n"]),
                    "mean_ns": float(row["mean_ns"]),
                    "median_ns": float(row["median_ns"]),
                    "stddev_ns": float(row["stddev_ns"]),
                    "min_ns": int(row["min_ns"]),
                    "max_ns": int(row["max_ns"]),
                    "mean_mb_s": float(row["mean_mb_s"]),
                }
            )
    return rows


def emit_csv(stats, records, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = out_dir / "raw.csv"
    summary = out_dir / "summary.csv"
    write_raw_csv(records, raw)
    write_summary_csv(stats, summary)
    return raw, summary


def write_run_metadata(config: BenchmarkConfig, out_dir) -> Path:
    """Sidecar describing the run so `verify` can recheck without flags."""
    path = Path(out_dir) / "run.json"
    payload = {
        "backends": [b.value for b in config.backends],
        "sizes_mb": config.sizes_mb,
        "repetitions": config.repetitions,
        "pattern_seed": config.pattern_seed,
        "scale": config.scale,
        "cache_fraction": config.cache_fraction,
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


# -- verification --------------------------------------------------------------


def verify_records(records: list[MeasurementRecord], seed: int | None) -> list[str]:
    """Recheck recorded invariants; returns a list of human-readable problems."""
    problems = []
    if not records:
        return ["no records"]
    counts: dict[tuple[str, int], int] = {}
    for r in records:
        counts[(r.backend.value, r.size_bytes)] = (
            counts.get((r.backend.value, r.size_bytes), 0) + 1
        )
        if r.elapsed_ns <= 0:
            problems.append(f"{r}: elapsed_ns not positive")
        recomputed = compute_throughput(r.size_bytes, r.elapsed_ns)
        if abs(recomputed - r.throughput_mb_s) > math.ulp(
            max(abs(recomputed), abs(r.throughput_mb_s))
        ):
            problems.append(
                f"{r.backend.value}/{r.size_bytes}/rep{r.rep_index}: stored "
                f"throughput {r.throughput_mb_s!r} != recomputed {recomputed!r}"
            )
    if len(set(counts.values())) > 1:
        problems.append(f"unequal group counts: {counts}")
    if seed is None:
        problems.append("pattern seed unknown; checksums not verified")
    else:
        expected: dict[int, int] = {}
        for r in records:
            if r.size_bytes not in expected:
                expected[r.size_bytes] = checksum(generate_pattern(seed, r.size_bytes))
            if r.checksum != expected[r.size_bytes]:
                problems.append(
                    f"{r.backend.value}/{r.size_bytes}/rep{r.rep_index}: checksum "
                    f"{r.checksum} != pattern oracle {expected[r.size_bytes]}"
                )
    return problems
