"""Scanning 0/1 records for contaminated head runs.

Positions are 1-based throughout: ``bits[0]`` is toss ``X_1``. A window
counts toward the longest run when it holds *at most* ``T`` tails; the window
event used for hitting times requires *exactly* ``T`` tails.
"""
from __future__ import annotations

from collections import deque
from typing import Iterable, Sequence

import numpy as np

from .core import RunParams, as_bits

__all__ = [
    "window_is_event_a",
    "longest_contaminated_run",
    "longest_run_bruteforce",
    "first_hitting_time",
    "StreamScanner",
    "scan_stream",
]


def window_is_event_a(seq: Sequence[int] | np.ndarray, n: int, params: RunParams) -> bool:
    """True iff the window of length ``m`` starting at toss ``n`` has exactly ``T`` zeros."""
    bits = as_bits(seq)
    m = params.m
    if n < 1 or n + m - 1 > bits.size:
        raise IndexError(f"window start {n} with m={m} does not fit in a sequence of length {bits.size}")
    zeros = m - int(bits[n - 1 : n - 1 + m].sum())
    return zeros == params.T


def _zero_boundaries(bits: np.ndarray) -> np.ndarray:
    # 1-based zero positions framed by virtual zeros at 0 and N+1
    n = bits.size
    z = np.flatnonzero(bits == 0) + 1
    return np.concatenate(([0], z, [n + 1])).astype(np.int64)


def longest_contaminated_run(seq: Sequence[int] | np.ndarray, T: int) -> int:
    """Length of the longest window holding at most ``T`` zeros.

    Sliding-window scan in one pass: with zero positions ``z_1 < ... < z_K``
    framed by ``z_0 = 0`` and ``z_{K+1} = N + 1``, the left edge of a maximal
    window always sits just after some zero, so the answer is
    ``max_i z_{i+T+1} - z_i - 1``.
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    bits = as_bits(seq)
    b = _zero_boundaries(bits)
    if b.size < T + 2:
        return int(bits.size)
    return int((b[T + 1 :] - b[: b.size - T - 1]).max() - 1)


def longest_run_bruteforce(seq: Sequence[int] | np.ndarray, T: int) -> int:
    """O(N^2) reference: scan every window."""
    bits = [int(x) for x in seq]
    best = 0
    for i in range(len(bits)):
        zeros = 0
        for j in range(i, len(bits)):
            zeros += bits[j] == 0
            if zeros > T:
                break
            best = max(best, j - i + 1)
    return best


def first_hitting_time(seq: Sequence[int] | np.ndarray, params: RunParams) -> int | None:
    """Completion index ``n + m - 1`` of the first window with exactly ``T`` zeros.

    Returns ``None`` when no window qualifies.
    """
    bits = as_bits(seq)
    m, T = params.m, params.T
    if bits.size < m:
        return None
    c = np.concatenate(([0], np.cumsum(bits == 0, dtype=np.int64)))
    counts = c[m:] - c[:-m]
    hits = np.flatnonzero(counts == T)
    if hits.size == 0:
        return None
    return int(hits[0]) + m


class StreamScanner:
    """Single-pass scanner with memory bounded by ``T`` and the largest window.

    Bits arrive either one at a time through :meth:`push` or in blocks through
    :meth:`feed`; both paths give the same answers as the whole-array
    functions on the concatenated input.

    >>> s = StreamScanner(T=1, windows=[3])
    >>> s.feed([1, 1, 0, 1])
    >>> s.longest, s.hitting_time(3)
    (4, 3)
    """

    _PUSH_FLUSH = 4096

    def __init__(self, T: int, windows: Iterable[int] = ()) -> None:
        if T < 0:
            raise ValueError("T must be non-negative")
        self.T = int(T)
        self.windows = tuple(sorted({int(m) for m in windows}))
        if any(m < 1 for m in self.windows):
            raise ValueError("window lengths must be positive")
        self.n = 0
        self._best = 0
        # last T+1 zero positions (virtual zero at 0 until real ones arrive)
        self._recent_zeros: deque[int] = deque([0], maxlen=self.T + 1)
        self._tail_len = max(self.windows, default=1) - 1
        self._tail = np.zeros(0, dtype=np.uint8)
        self._hits: dict[int, int | None] = {m: None for m in self.windows}
        self._pending: list[int] = []

    def push(self, bit: int) -> None:
        if bit not in (0, 1):
            raise ValueError("bit must be 0 or 1")
        self._pending.append(int(bit))
        if len(self._pending) >= self._PUSH_FLUSH:
            self._flush()

    def _flush(self) -> None:
        if self._pending:
            block = np.asarray(self._pending, dtype=np.uint8)
            self._pending = []
            self._feed_block(block)

    def feed(self, block: Sequence[int] | np.ndarray) -> None:
        self._flush()
        self._feed_block(as_bits(block))

    def _feed_block(self, bits: np.ndarray) -> None:
        if bits.size == 0:
            return
        start = self.n
        T = self.T
        zpos = np.flatnonzero(bits == 0) + (start + 1)
        if zpos.size:
            z = np.concatenate((np.fromiter(self._recent_zeros, dtype=np.int64), zpos))
            if z.size >= T + 2:
                gap = int((z[T + 1 :] - z[: z.size - T - 1]).max()) - 1
                self._best = max(self._best, gap)
            self._recent_zeros.extend(zpos[-(T + 1) :].tolist())
        self.n = start + bits.size
        self._update_hits(bits, start)

    def _update_hits(self, bits: np.ndarray, start: int) -> None:
        live = [m for m in self.windows if self._hits[m] is None]
        if live:
            ext = np.concatenate((self._tail, bits))
            ext_start = start - self._tail.size  # absolute index before ext[0]
            c = np.concatenate(([0], np.cumsum(ext == 0, dtype=np.int64)))
            for m in live:
                if ext.size < m:
                    continue
                off = max(0, self._tail.size - (m - 1))
                cc = c[off:]
                counts = cc[m:] - cc[:-m]
                hits = np.flatnonzero(counts == self.T)
                if hits.size:
                    self._hits[m] = ext_start + off + int(hits[0]) + m
        if self._tail_len:
            self._tail = np.concatenate((self._tail, bits))[-self._tail_len :]

    @property
    def longest(self) -> int:
        """Longest at-most-``T``-zeros window over all bits seen so far."""
        self._flush()
        if len(self._recent_zeros) < self.T + 1:
            current = self.n
        else:
            current = self.n - self._recent_zeros[0]
        return max(self._best, current)

    def hitting_time(self, m: int) -> int | None:
        self._flush()
        return self._hits[m]

    @property
    def all_hit(self) -> bool:
        self._flush()
        return all(v is not None for v in self._hits.values())


def scan_stream(bits: Iterable[int], T: int, windows: Iterable[int] = ()) -> StreamScanner:
    """Consume ``bits`` one at a time and return the finished scanner."""
    scanner = StreamScanner(T, windows)
    for b in bits:
        scanner.push(b)
    return scanner
