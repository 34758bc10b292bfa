"""Compression backends and the pairwise compression distance.

The distance between two texts is the compressed size of their
concatenation divided by the sum of their individually compressed
sizes.  Similar texts share structure, so the concatenation compresses
well and the ratio drops toward one half; unrelated texts push it
toward one.  Raw DEFLATE is the default backend because it carries no
container overhead, which matters when the inputs are only a couple of
hundred bytes long.
"""

from __future__ import annotations

import threading
import time
import zlib
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

ALGORITHMS = ("deflate", "gzip", "lz-fast")

# memLevel 6 emits byte-identical streams to the default (8) for inputs
# shorter than its 16 KiB hash window while allocating a quarter of the
# state, which cuts per-call setup cost roughly fourfold on short texts.
_DEFLATE_MEM_LEVEL = 6

_LEVEL_RANGE = {"deflate": (1, 9), "gzip": (1, 9), "lz-fast": (1, 16)}


class EmptyTextError(ValueError):
    """Raised when a size or distance is requested for empty text."""


class CompressorUnavailableError(ValueError):
    """Raised when the selected algorithm's backend is not installed."""


def _load_lz4():
    try:
        import lz4.block
    except ImportError:
        return None
    return lz4.block


def algorithm_available(name: str) -> bool:
    """Return whether *name* can actually compress on this install."""
    if name in ("deflate", "gzip"):
        return True
    if name == "lz-fast":
        return _load_lz4() is not None
    return False


def _as_bytes(text: str | bytes) -> bytes:
    if isinstance(text, str):
        return text.encode("utf-8")
    return text


@dataclass(frozen=True)
class CompressorSpec:
    """A named compression algorithm pinned to one level.

    Parameters
    ----------
    algorithm : str
        One of ``deflate`` (raw, headerless), ``gzip`` (DEFLATE in a
        gzip container) or ``lz-fast`` (optional, needs the ``lz4``
        extra).
    level : int
        Effort setting.  1-9 for the DEFLATE family, 1-16 for lz-fast.
    """

    algorithm: str = "deflate"
    level: int = 9

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )
        lo, hi = _LEVEL_RANGE[self.algorithm]
        if not isinstance(self.level, int) or not lo <= self.level <= hi:
            raise ValueError(
                f"level for {self.algorithm} must be an int in [{lo}, {hi}], "
                f"got {self.level!r}"
            )
        if self.algorithm == "lz-fast" and _load_lz4() is None:
            raise CompressorUnavailableError(
                "algorithm 'lz-fast' needs the lz4 package; "
                "install with: pip install squall[lz4]"
            )

    @property
    def deterministic(self) -> bool:
        """Whether repeated calls yield byte-identical output.

        True for every built-in backend: raw DEFLATE has no header, the
        gzip path leaves the header timestamp at zero, and lz-fast has
        no header at all.  The flag exists so engine configuration can
        refuse a future backend that embeds run-varying state.
        """
        return True

    def compress(self, text: str | bytes) -> bytes:
        """Compress *text* (str is encoded as UTF-8) and return the bytes."""
        data = _as_bytes(text)
        if not data:
            raise EmptyTextError("cannot compress empty text")
        if self.algorithm == "deflate":
            # wbits=-15 selects a raw stream; zlib.compress grew a wbits
            # argument only in 3.11, so go through compressobj.
            obj = zlib.compressobj(self.level, zlib.DEFLATED, -15, _DEFLATE_MEM_LEVEL)
        elif self.algorithm == "gzip":
            # wbits=31 selects the gzip container; zlib leaves the header
            # mtime at zero, unlike the gzip module on this Python.
            obj = zlib.compressobj(self.level, zlib.DEFLATED, 31, _DEFLATE_MEM_LEVEL)
        else:
            block = _load_lz4()
            if block is None:
                raise CompressorUnavailableError(
                    "algorithm 'lz-fast' needs the lz4 package"
                )
            if self.level <= 1:
                return block.compress(data, store_size=False)
            return block.compress(
                data, mode="high_compression", compression=self.level,
                store_size=False,
            )
        return obj.compress(data) + obj.flush()

    def compressed_size(self, text: str | bytes) -> int:
        """Return the size in bytes of *text* after compression."""
        return len(self.compress(text))


class SizeCache:
    """Thread-safe LRU cache of compressed sizes for one compressor.

    Keyed by the raw input bytes.  Sizes are computed outside the lock,
    so two threads may both compute a missing entry; the result is
    identical either way because the backend is deterministic.
    """

    def __init__(self, spec: CompressorSpec, capacity: int = 4096) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.spec = spec
        self.capacity = capacity
        self.hits = 0
        self.misses = 0
        self._entries: OrderedDict[bytes, int] = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def size(self, data: bytes) -> int:
        """Return the compressed size of *data*, caching the answer."""
        with self._lock:
            cached = self._entries.get(data)
            if cached is not None:
                self.hits += 1
                self._entries.move_to_end(data)
                return cached
            self.misses += 1
        value = self.spec.compressed_size(data)
        with self._lock:
            self._entries[data] = value
            self._entries.move_to_end(data)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
        return value

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            self.hits = 0
            self.misses = 0


def pair_distance(
    x: str | bytes,
    y: str | bytes,
    spec: CompressorSpec | None = None,
    cache: SizeCache | None = None,
) -> float:
    """Compression distance between two texts.

    Computes ``C(x + y) / (C(x) + C(y))`` where ``C`` is the compressed
    size under *spec*.  Values land near 0.5 for near-duplicates and
    near 1.0 for unrelated texts; the measure is not symmetric, though
    in practice ``D(x, y)`` and ``D(y, x)`` differ by well under 0.05.

    Single-text sizes go through *cache* when one is given; the
    concatenation is always compressed fresh, since pairs rarely repeat.
    """
    if spec is None:
        spec = CompressorSpec()
    bx = _as_bytes(x)
    by = _as_bytes(y)
    if not bx or not by:
        raise EmptyTextError("cannot measure distance to empty text")
    if cache is not None:
        cx = cache.size(bx)
        cy = cache.size(by)
    else:
        cx = spec.compressed_size(bx)
        cy = spec.compressed_size(by)
    return spec.compressed_size(bx + by) / (cx + cy)


@dataclass(frozen=True)
class BenchRow:
    """One benchmark measurement for a single algorithm/level pair."""

    algorithm: str
    level: int
    mean_ratio: float
    texts_per_sec: float


@dataclass(frozen=True)
class BenchReport:
    """Benchmark results across compressor candidates."""

    rows: tuple[BenchRow, ...]
    n_texts: int

    def text_block(self) -> str:
        """Render the report as an aligned plain-text table."""
        lines = [f"{'algorithm':<10} {'level':>5} {'mean_ratio':>10} {'texts_per_sec':>13}"]
        for row in self.rows:
            lines.append(
                f"{row.algorithm:<10} {row.level:>5d} {row.mean_ratio:>10.4f} "
                f"{row.texts_per_sec:>13.1f}"
            )
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "n_texts": self.n_texts,
            "rows": [
                {
                    "algorithm": row.algorithm,
                    "level": row.level,
                    "mean_ratio": row.mean_ratio,
                    "texts_per_sec": row.texts_per_sec,
                }
                for row in self.rows
            ],
        }


def default_bench_specs() -> list[CompressorSpec]:
    """Candidate compressors for benchmarking: every installed backend."""
    specs = [
        CompressorSpec("deflate", 1),
        CompressorSpec("deflate", 6),
        CompressorSpec("deflate", 9),
        CompressorSpec("gzip", 9),
    ]
    if algorithm_available("lz-fast"):
        specs.append(CompressorSpec("lz-fast", 1))
    return specs


def compressor_benchmark(
    texts: Sequence[str | bytes],
    specs: Iterable[CompressorSpec] | None = None,
    timer: Callable[[], float] = time.perf_counter,
) -> BenchReport:
    """Measure compression ratio and throughput over a text corpus.

    Each candidate compresses every text once for warmup (so lazy
    backend setup is not billed), then once under the clock.  The ratio
    is compressed size over original size, averaged per text.
    """
    if not texts:
        raise ValueError("benchmark needs at least one text")
    payloads = [_as_bytes(t) for t in texts]
    if any(not p for p in payloads):
        raise EmptyTextError("benchmark corpus contains an empty text")
    if specs is None:
        specs = default_bench_specs()
    rows = []
    for spec in specs:
        for payload in payloads:
            spec.compress(payload)
        start = timer()
        total_ratio = 0.0
        for payload in payloads:
            total_ratio += len(spec.compress(payload)) / len(payload)
        elapsed = timer() - start
        per_sec = len(payloads) / elapsed if elapsed > 0 else float("inf")
        rows.append(
            BenchRow(
                algorithm=spec.algorithm,
                level=spec.level,
                mean_ratio=total_ratio / len(payloads),
                texts_per_sec=per_sec,
            )
        )
    return BenchReport(rows=tuple(rows), n_texts=len(payloads))
