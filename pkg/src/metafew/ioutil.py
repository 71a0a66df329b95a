"""Small shared I/O helpers: config trailers on binary artifacts, float
formatting for text artifacts, seeded generators, bounded parallel maps."""

from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import DataError

TRAILER_MAGIC = b"CFG1"

WORKERS_ENV = "METAFEW_WORKERS"


def write_config_trailer(fh, text: str) -> None:
    """Append an optional config block after a binary payload."""
    raw = text.encode("utf-8")
    fh.write(TRAILER_MAGIC)
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def read_config_trailer(blob: bytes, pos: int) -> str | None:
    """Parse the trailing config block, if present, at offset pos."""
    if pos == len(blob):
        return None
    if blob[pos:pos + 4] != TRAILER_MAGIC:
        raise DataError(f"unexpected {len(blob) - pos} trailing bytes")
    (length,) = struct.unpack_from("<I", blob, pos + 4)
    raw = blob[pos + 8:pos + 8 + length]
    if len(raw) != length or pos + 8 + length != len(blob):
        raise DataError("truncated config trailer")
    return raw.decode("utf-8")


def fmt_float(x: float) -> str:
    """Shortest exact round-trip decimal form."""
    return repr(float(x))


def stable_rng(*entropy: int) -> np.random.Generator:
    """Generator keyed by a tuple of nonnegative ints; reproducible across
    runs and independent of draw order elsewhere."""
    return np.random.default_rng(np.random.SeedSequence([int(e) for e in entropy]))


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parallel_map(fn, items, workers: int = 1) -> list:
    """Ordered map, optionally over a bounded thread pool."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
