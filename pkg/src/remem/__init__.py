"""remem: one memory interface, three places for the bytes to live.

Allocations can stay in process memory (the baseline), live as page files
on a shared directory, or be read one-sidedly out of windows exposed by a
remote server. A benchmark harness sweeps payload sizes across all three
and emits CSV plus comparison figures.
"""

from . import errors
from .bench import (
    BenchmarkConfig,
    MeasurementRecord,
    SummaryStat,
    run_local,
    run_remote,
    run_suite,
    run_vfs,
    summarize,
)
from .client import RemoteWindow, list_windows, open_window
from .local import LocalRegion, alloc
from .pagetable import (
    DEFAULT_PAGE_SIZE,
    AllocationRecord,
    Backend,
    PageExtent,
    PageTable,
    default_table,
)
from .pattern import checksum, generate_pattern
from .server import WindowServer, serve
from .vfs import CachePolicy, CacheStats, VfsStore, inspect_root

__version__ = "0.1.0"

__all__ = [
    "AllocationRecord",
    "Backend",
    "BenchmarkConfig",
    "CachePolicy",
    "CacheStats",
    "DEFAULT_PAGE_SIZE",
    "LocalRegion",
    "MeasurementRecord",
    "PageExtent",
    "PageTable",
    "RemoteWindow",
    "SummaryStat",
    "VfsStore",
    "WindowServer",
    "alloc",
    "checksum",
    "default_table",
    "errors",
    "generate_pattern",
    "inspect_root",
    "list_windows",
    "open_window",
    "run_local",
    "run_remote",
    "run_suite",
    "run_vfs",
    "serve",
    "summarize",
    "__version__",
]
