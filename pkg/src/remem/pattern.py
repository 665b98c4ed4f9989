"""Deterministic payload generation and checksumming for the benchmark.

The pattern generator is a 64-bit xorshift (shifts 13, 7, 17) emitting its
full state as 8 little-endian bytes per step, so the same (seed, length)
yields the same bytes on every platform. Checksums are 64-bit FNV-1a.

Both hot paths are JIT-compiled with numba when available; the pure-Python
fallbacks produce identical bytes and are kept importable for platforms
without a JIT (and as a cross-check in the test suite).
"""

from __future__ import annotations

import struct

import numpy as np

_U64_MASK = (1 << 64) - 1

FNV_OFFSET_BASIS = 14695981039346656037
FNV_PRIME = 1099511628211

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


if _HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _xorshift_fill_jit(seed, out):  # pragma: no cover - compiled
        s = np.uint64(seed)
        for i in range(out.size):
            s ^= s << np.uint64(13)
            s ^= s >> np.uint64(7)
            s ^= s << np.uint64(17)
            out[i] = s

    @njit(cache=True, nogil=True)
    def _fnv1a_jit(data):  # pragma: no cover - compiled
        h = np.uint64(FNV_OFFSET_BASIS)
        p = np.uint64(FNV_PRIME)
        for i in range(data.size):
            h = (h ^ np.uint64(data[i])) * p
        return h


def _xorshift_bytes_py(seed: int, length: int) -> bytes:
    s = seed & _U64_MASK
    words = []
    for _ in range((length + 7) // 8):
        s = (s ^ (s << 13)) & _U64_MASK
        s = (s ^ (s >> 7)) & _U64_MASK
        s = (s ^ (s << 17)) & _U64_MASK
        words.append(s)
    return struct.pack(f"<{len(words)}Q", *words)[:length]


def _fnv1a_py(data) -> int:
    h = FNV_OFFSET_BASIS
    for b in bytes(data):
        h = ((h ^ b) * FNV_PRIME) & _U64_MASK
    return h


def generate_pattern(seed: int, length: int) -> bytes:
    """Deterministic bytes for (seed, length); prefixes are stable."""
    if length < 0:
        raise ValueError("length must be >= 0")
    if length == 0:
        return b""
    if not _HAVE_NUMBA:
        return _xorshift_bytes_py(seed, length)
    out = np.empty((length + 7) // 8, dtype=np.uint64)
    _xorshift_fill_jit(np.uint64(seed & _U64_MASK), out)
    return out.astype("<u8", copy=False).tobytes()[:length]


def checksum(data) -> int:
    """64-bit FNV-1a over any bytes-like object."""
    if not _HAVE_NUMBA:
        return _fnv1a_py(data)
    arr = np.frombuffer(memoryview(data), dtype=np.uint8)
    return int(_fnv1a_jit(arr))
