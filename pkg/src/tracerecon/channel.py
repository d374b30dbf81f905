"""Seeded deletion channel with ground-truth instrumentation.

Every trace carries the set of deleted source indices and the origin map
``f(j)``, the source index of trace bit ``j``. Random streams are PCG64
generators keyed by ``SeedSequence(seed, spawn_key=stream)`` so that any
phase of an experiment can be replayed from its ``(seed, stream)`` pair.

Besides whole traces, :class:`TraceSource` can emit *windows*: the bits of
a trace at indices ``[lo, lo+W)`` together with the trace length. A window
is sampled from exactly the same distribution as the corresponding slice of
a full trace, but only touches the source bits that can land inside it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .bitstring import BitString, as_bits


class RngStream:
    """Reproducible random stream identified by ``(seed, stream)``."""

    __slots__ = ("seed", "stream", "_gen")

    def __init__(self, seed: int, stream: Sequence[int] = ()):
        self.seed = int(seed)
        self.stream = tuple(int(s) for s in stream)
        self._gen = None

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream + tuple(ids))

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def stream_label(self) -> str:
        return ".".join(str(s) for s in self.stream) or "-"

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))


@dataclass(frozen=True)
class DeletionRecord:
    deleted: np.ndarray  # sorted source indices
    origin: np.ndarray  # origin[j] = source index of trace bit j
    source_len: int

    def deleted_upto(self, idx: int) -> int:
        """Number of deleted source indices in ``[0, idx]``."""
        return int(np.searchsorted(self.deleted, idx, side="right"))


@dataclass(frozen=True)
class InstrumentedTrace:
    bits: BitString
    record: DeletionRecord
    source_len: int

    def __len__(self) -> int:
        return len(self.bits)


def _from_keep(src: np.ndarray, keep: np.ndarray) -> InstrumentedTrace:
    origin = np.flatnonzero(keep)
    deleted = np.flatnonzero(~keep)
    for a in (origin, deleted):
        a.flags.writeable = False
    n = src.shape[0]
    return InstrumentedTrace(BitString(src[keep]), DeletionRecord(deleted, origin, n), n)


def transmit(x, delta: float, rng) -> InstrumentedTrace:
    """Delete each bit of ``x`` independently with probability ``delta``."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    src = as_bits(x).array
    keep = as_stream(rng).gen.random(src.shape[0]) >= delta
    return _from_keep(src, keep)


def transmit_concat(x, v, delta: float, rng) -> InstrumentedTrace:
    """Transmit ``x`` and ``v`` separately and join the traces.

    Equal in distribution to ``transmit(x + v, delta)``; the record lives in
    the concatenated index space.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    rng = as_stream(rng)
    a, b = as_bits(x).array, as_bits(v).array
    keep_a = rng.child(0).gen.random(a.shape[0]) >= delta
    keep_b = rng.child(1).gen.random(b.shape[0]) >= delta
    return _from_keep(np.concatenate((a, b)), np.concatenate((keep_a, keep_b)))


def padded_origin(t: InstrumentedTrace, n_prime: int) -> np.ndarray:
    """Origin map extended to ``n_prime`` positions by virtual zero padding."""
    out = np.empty(n_prime, dtype=np.int64)
    L = min(len(t), n_prime)
    out[:L] = t.record.origin[:L]
    if n_prime > L:
        out[L:] = t.source_len + np.arange(n_prime - L) + (L - len(t))
    return out


def last_surviving(t: InstrumentedTrace, end: int) -> int:
    """Largest trace index whose origin is at most ``end``, or -1."""
    if not 0 <= end < t.source_len:
        raise IndexError(f"end={end} outside source of length {t.source_len}")
    return int(np.searchsorted(t.record.origin, end, side="right")) - 1


def dump_traces(fh: TextIO, seed: int, stream: str, traces: Iterable) -> None:
    """Write ``<seed>,<stream>,<bits>`` lines, one per trace."""
    for i, t in enumerate(traces):
        bits = t.bits if isinstance(t, InstrumentedTrace) else as_bits(t)
        fh.write(f"{seed},{stream}/{i},{bits}\n")


@dataclass
class WindowBatch:
    """Bits of ``B`` traces at trace indices ``[lo, lo+W)``.

    Column ``c`` holds trace index ``lo + c``. Columns before ``first_valid``
    (negative indices) and from ``avail[b]`` on (past the trace end) are zero.
    ``last`` holds the ground-truth last-surviving index for the ``end``
    passed at sampling time, or is ``None`` when no end was requested.
    """

    bits: np.ndarray
    lo: int
    avail: np.ndarray
    trace_len: np.ndarray
    last: Optional[np.ndarray] = None

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def first_valid(self) -> int:
        return max(0, -self.lo)

    def __len__(self) -> int:
        return self.bits.shape[0]

    @classmethod
    def from_traces(cls, traces: Sequence, lo: int, width: int, end: Optional[int] = None) -> "WindowBatch":
        B = len(traces)
        bits = np.zeros((B, width), dtype=np.uint8)
        tlen = np.zeros(B, dtype=np.int64)
        last = np.full(B, -1, dtype=np.int64) if end is not None else None
        c0 = max(0, -lo)
        for i, t in enumerate(traces):
            arr = (t.bits if isinstance(t, InstrumentedTrace) else as_bits(t)).array
            tlen[i] = arr.shape[0]
            seg = arr[lo + c0 : lo + width] if lo + c0 < arr.shape[0] else arr[:0]
            bits[i, c0 : c0 + seg.shape[0]] = seg
            if end is not None:
                last[i] = last_surviving(t, end)
        avail = np.clip(tlen - lo, 0, width)
        return cls(bits, lo, avail, tlen, last)


# Above this expected number of deletions per cell the dense Bernoulli draw is used.
_SPARSE_RATE = 0.05


class TraceSource:
    """Independent traces of a fixed source string through the deletion channel.

    ``traces_drawn`` counts every trace handed out, whole or windowed.
    """

    def __init__(self, source, delta: float, rng):
        if not 0.0 <= delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {delta}")
        self.source = as_bits(source)
        self.delta = float(delta)
        self.rng = as_stream(rng)
        self.traces_drawn = 0

    @classmethod
    def concat(cls, x, v, delta: float, rng) -> "TraceSource":
        return cls(as_bits(x) + as_bits(v), delta, rng)

    @property
    def n(self) -> int:
        return len(self.source)

    def draw(self, count: int, rng: Optional[RngStream] = None) -> list:
        """``count`` whole instrumented traces."""
        gen = (rng or self.rng).gen
        src = self.source.array
        out = []
        for _ in range(count):
            keep = gen.random(src.shape[0]) >= self.delta
            out.append(_from_keep(src, keep))
        self.traces_drawn += count
        return out

    def _deletion_mask(self, gen, B: int, L: int) -> np.ndarray:
        d = self.delta
        if d == 0.0 or L == 0:
            return np.zeros((B, L), dtype=bool)
        if d > _SPARSE_RATE:
            return gen.random((B, L)) < d
        # iid Bernoulli cells, drawn as a Binomial total plus a uniform subset
        total = int(gen.binomial(B * L, d))
        flat = np.zeros(B * L, dtype=bool)
        if total:
            flat[gen.choice(B * L, size=total, replace=False)] = True
        return flat.reshape(B, L)

    def draw_windows(
        self,
        count: int,
        lo: int,
        width: int,
        end: Optional[int] = None,
        rng: Optional[RngStream] = None,
        chunk: int = 20000,
    ) -> WindowBatch:
        """Trace bits at indices ``[lo, lo+width)`` for ``count`` fresh traces.

        With ``end`` given, the batch also carries ``last_surviving(., end)``.
        """
        gen = (rng or self.rng).gen
        parts = []
        for start in range(0, count, chunk):
            parts.append(self._windows_chunk(gen, min(chunk, count - start), lo, width, end))
        self.traces_drawn += count
        if not parts:
            empty = np.zeros(0, dtype=np.int64)
            return WindowBatch(np.zeros((0, width), np.uint8), lo, empty, empty, empty if end is not None else None)
        bits = np.concatenate([p[0] for p in parts])
        tlen = np.concatenate([p[1] for p in parts])
        last = np.concatenate([p[2] for p in parts]) if end is not None else None
        avail = np.clip(tlen - lo, 0, width)
        return WindowBatch(bits, lo, avail, tlen, last)

    def _windows_chunk(self, gen, B, lo, width, end):
        src = self.source.array
        n = src.shape[0]
        d = self.delta
        hi = lo + width - 1
        a = min(max(0, lo), n)
        if end is not None:
            a = min(a, end)
        prefix = gen.binomial(a, d, size=B) if a > 0 else np.zeros(B, dtype=np.int64)
        need = max(hi, end if end is not None else hi) - a + 1
        need = max(need, 0) + int(prefix.max(initial=0))
        slack = int(need * d + 8.0 * np.sqrt(need * d + 1.0) + 16)
        L = min(n - a, need + slack)
        dele = self._deletion_mask(gen, B, L)
        kept = ~dele
        rank = np.cumsum(kept, axis=1, dtype=np.int64) - 1
        seg_del = L - (rank[:, -1] + 1) if L else np.zeros(B, dtype=np.int64)
        rest = n - a - L
        rest_del = gen.binomial(rest, d, size=B) if rest > 0 else np.zeros(B, dtype=np.int64)
        tlen = n - prefix - seg_del - rest_del

        col = (a - prefix)[:, None] + rank - lo
        ok = kept & (col >= 0) & (col < width)
        rows, js = np.nonzero(ok)
        bits = np.zeros((B, width), dtype=np.uint8)
        bits[rows, col[rows, js]] = src[a + js]

        last = None
        if end is not None:
            if end - a < L:
                last = end - prefix - np.sum(dele[:, : end - a + 1], axis=1)
            else:
                last = np.zeros(B, dtype=np.int64)
        # Rows whose segment ran out before covering the window (or the end
        # index) are extended with fresh per-bit draws over the rest of the
        # source; the already drawn deletions are kept, so this is exact.
        covered = a - prefix + (L - seg_del) - 1
        short = (a + L < n) & (covered < hi)
        if end is not None and end - a >= L:
            short[:] = True
        for b in np.flatnonzero(short):
            keep = np.concatenate((kept[b], gen.random(n - a - L) >= d))
            r = np.cumsum(keep, dtype=np.int64) - 1
            c = a - prefix[b] + r - lo
            sel = keep & (c >= 0) & (c < width)
            bits[b] = 0
            bits[b, c[sel]] = src[a + np.flatnonzero(sel)]
            tlen[b] = n - prefix[b] - (keep.shape[0] - int(keep.sum()))
            if end is not None:
                last[b] = end - prefix[b] - int((~keep[: end - a + 1]).sum())
        return bits, tlen, last
