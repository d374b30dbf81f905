"""Bitwise majority alignment, the goodness predicate and replayed invariants."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .bitstring import BitString, as_bits
from .channel import InstrumentedTrace, padded_origin
from .desert import DesertParams


@dataclass(frozen=True)
class BmaResult:
    w: BitString
    round_margins: np.ndarray


@dataclass(frozen=True)
class BmaTraceState:
    """Per-round pointer view; row ``t`` is the state before round ``t``."""

    current: np.ndarray
    position: np.ndarray
    distance: np.ndarray


def _trace_array(t) -> np.ndarray:
    if isinstance(t, InstrumentedTrace):
        return t.bits.array
    return as_bits(t).array


def pad_traces(n_prime: int, traces: Sequence) -> np.ndarray:
    arrs = [_trace_array(t) for t in traces]
    U = np.zeros((len(arrs), n_prime), dtype=np.uint8)
    for i, a in enumerate(arrs):
        if a.shape[0] > n_prime:
            raise ValueError(f"trace {i} has length {a.shape[0]} > n'={n_prime}")
        U[i, : a.shape[0]] = a
    return U


def majority_tiebreak(bits) -> int:
    """Strict majority of ``bits``; an exact tie gives 0."""
    b = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits, dtype=np.int64)
    if b.size == 0:
        raise ValueError("majority of an empty multiset")
    return int(2 * int(b.sum()) > b.size)


def run_bma(n_prime: int, traces: Sequence) -> BmaResult:
    if len(traces) == 0:
        raise ValueError("BMA needs at least one trace")
    U = pad_traces(n_prime, traces)
    w, margins, _ = kernels.bma_rounds(U, False)
    margins.flags.writeable = False
    return BmaResult(BitString(w), margins)


def bma_states(n_prime: int, traces: Sequence[InstrumentedTrace]) -> tuple:
    """Run BMA and return the result plus the pointer history as a :class:`BmaTraceState`."""
    U = pad_traces(n_prime, traces)
    w, margins, hist = kernels.bma_rounds(U, True)
    N = len(traces)
    pos = np.empty_like(hist)
    for i, t in enumerate(traces):
        f = padded_origin(t, n_prime + 1)
        pos[:, i] = f[hist[:, i]]
    dist = pos - np.arange(n_prime + 1)[:, None]
    return BmaResult(BitString(w), margins), BmaTraceState(hist, pos, dist)


def _max_in_window(sorted_idx: np.ndarray, L: int) -> int:
    if sorted_idx.size == 0:
        return 0
    right = np.searchsorted(sorted_idx, sorted_idx + L, side="left")
    return int((right - np.arange(sorted_idx.size)).max())


def goodness(records: Sequence, n_prime: int, p: DesertParams, R: Optional[int] = None) -> bool:
    """Deletion-sparsity test over all records.

    (i) every length ``2C^2 M`` window holds at most C deletions of each record;
    (ii) every length ``M+C+1`` window meets deletions of at most ``R/C^3`` records.
    ``R`` defaults to ``ceil(9N/10)``.
    """
    recs = [r.record if isinstance(r, InstrumentedTrace) else r for r in records]
    N = len(recs)
    if N == 0:
        return True
    if R is None:
        R = math.ceil(9 * N / 10)
    C, M = p.C, p.M
    L1 = 2 * C * C * M
    L2 = M + C + 1
    dels = [np.asarray(r.deleted, dtype=np.int64) for r in recs]
    dels = [d[d < n_prime] for d in dels]
    if any(_max_in_window(d, L1) > C for d in dels):
        return False
    starts = max(n_prime - L2 + 1, 1)
    hit = np.zeros(starts + 1, dtype=np.int64)
    for d in dels:
        if d.size == 0:
            continue
        lo = np.clip(d - L2 + 1, 0, starts)
        hi = np.clip(d + 1, 0, starts)
        cover = np.zeros(starts + 1, dtype=np.int64)
        np.add.at(cover, lo, 1)
        np.add.at(cover, hi, -1)
        hit += np.cumsum(cover) > 0
    return bool(hit[:starts].max() <= R / C**3)


@dataclass(frozen=True)
class InvariantReport:
    ok: bool
    clause: Optional[str] = None
    round: Optional[int] = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def check_bma_invariant(x_prime, traces: Sequence[InstrumentedTrace], upto: int, C: int) -> InvariantReport:
    """Replay BMA with ground truth and check the alignment invariant up to round ``upto``.

    For every round t: the output prefix matches ``x_prime``, every distance
    lies in ``[0, C]`` and the distances sum to at most ``2R/C`` (R = number
    of traces).
    """
    x = as_bits(x_prime).array
    n_prime = x.shape[0]
    res, st = bma_states(n_prime, traces)
    w = res.w.array
    R = len(traces)
    upto = min(upto, n_prime)
    bad = np.flatnonzero(w[:upto] != x[:upto])
    first_bad_prefix = int(bad[0]) + 1 if bad.size else None
    for t in range(upto + 1):
        if first_bad_prefix is not None and t >= first_bad_prefix:
            return InvariantReport(False, "prefix", t, f"w[{t - 1}] != x'[{t - 1}]")
        d = st.distance[t]
        if d.min() < 0:
            return InvariantReport(False, "distance>=0", t, f"trace {int(np.argmin(d))}")
        if d.max() > C:
            return InvariantReport(False, "distance<=C", t, f"trace {int(np.argmax(d))}")
        if d.sum() > 2 * R / C:
            return InvariantReport(False, "sum<=2R/C", t, f"sum={int(d.sum())}")
    return InvariantReport(True)
