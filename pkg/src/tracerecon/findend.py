"""Locating the right end of a desert from traces.

``coarse_estimate`` pins the end's image in a trace to within a few sigma
and recovers the tail string by vote. ``align`` then finds, in a single
trace, the image of the desert's last bit; ``find_end`` averages many such
alignments and rescales by ``1/(1-delta)``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .bitstring import BitString, CycSet, Pattern, cyc_set, noncyc_starts
from .channel import InstrumentedTrace, RngStream, TraceSource, WindowBatch
from .desert import Signature, TailString, desert_pattern, signature_from_tail
from .params import ReconParams


class FindEndError(RuntimeError):
    """Base class for FindEnd failures."""


class NoBreakFound(FindEndError):
    pass


class VoteFailed(FindEndError):
    pass


class AllNil(FindEndError):
    pass


@dataclass(frozen=True)
class CoarseEstimate:
    beta_hat: int
    tail: TailString
    pattern: Pattern

    @property
    def k(self) -> int:
        return self.pattern.k


@dataclass(frozen=True)
class FindEndResult:
    b: int
    aligns: np.ndarray  # -1 encodes nil
    estimate: CoarseEstimate
    beta: float
    non_nil: int


def round_half_away(v: float) -> int:
    return int(math.floor(abs(v) + 0.5)) * (1 if v >= 0 else -1)


def _trace_arr(t) -> np.ndarray:
    return t.bits.array if isinstance(t, InstrumentedTrace) else np.asarray(t, dtype=np.uint8)


def coarse_estimate(
    r: int,
    u,
    sampler: TraceSource,
    params: ReconParams,
    rng: RngStream,
    pattern: Optional[Pattern] = None,
) -> CoarseEstimate:
    """Interval scan for a coarse end position, then a plurality vote on the tail."""
    s = pattern or desert_pattern(u, r, params.desert())
    cyc = cyc_set(s)
    k, sig, d, n = s.k, params.sigma, params.delta, sampler.n
    alpha = params.alpha
    r_hat = math.ceil((1.0 - d) * r)

    # Phase 1: leftmost interval [r_hat + j sig, r_hat + (j+4) sig] where at
    # least half the traces hold a complete non-cyclic k-subword.
    j_max = math.ceil(max(n - r_hat, 0) / sig)
    j = np.arange(j_max + 1)
    lo = r_hat + j * sig
    hi = lo + 4 * sig
    counts = np.zeros(j.size, dtype=np.int64)
    for t in sampler.draw(alpha, rng.child(1)):
        arr = _trace_arr(t)
        mask = noncyc_starts(arr, cyc) if arr.shape[0] >= k else np.zeros(0, bool)
        cs = np.concatenate(([0], np.cumsum(mask, dtype=np.int64)))
        a = np.clip(lo, 0, mask.size)
        b = np.clip(np.minimum(hi, arr.shape[0] - 1) - k + 2, 0, mask.size)
        counts += (cs[np.maximum(a, b)] - cs[a]) > 0
    ok = np.flatnonzero(2 * counts >= alpha)
    if ok.size == 0:
        raise NoBreakFound(f"no interval past {r_hat} shows a pattern break in half the traces")
    beta_hat = int(hi[ok[0]])

    # Phase 2: every trace votes for the 8 sig bits at its first break inside J'.
    width = 8 * sig
    votes = Counter()
    for t in sampler.draw(alpha, rng.child(2)):
        arr = _trace_arr(t)
        a = max(0, beta_hat - 3 * sig)
        b = min(arr.shape[0] - 1, beta_hat + 3 * sig)
        if b - a + 1 < k:
            continue
        hits = np.flatnonzero(noncyc_starts(arr[a : b + 1], cyc))
        if hits.size == 0:
            continue
        tau = a + int(hits[0])
        if tau + width > arr.shape[0]:
            continue
        votes[arr[tau : tau + width].tobytes()] += 1
    if not votes:
        raise VoteFailed(f"no trace found a pattern break near {beta_hat}")
    top = max(votes.values())
    winner = min(key for key, c in votes.items() if c == top)
    tail = TailString(BitString(np.frombuffer(winner, dtype=np.uint8)))
    return CoarseEstimate(beta_hat, tail, s)


@dataclass(frozen=True)
class AlignPlan:
    """Everything ``align`` needs, precomputed once per estimate."""

    k: int
    lo: int
    width: int
    table: np.ndarray
    sig: np.ndarray
    sigma: int
    delta: float

    @classmethod
    def build(cls, est: CoarseEstimate, params: ReconParams) -> "AlignPlan":
        cyc: CycSet = cyc_set(est.pattern)
        k, sig = est.k, params.sigma
        if k >= 2:
            sg = signature_from_tail(est.tail, cyc, sig).bits.array
            lo, width = est.beta_hat - 3 * sig, 15 * sig + 1
        else:
            sg = np.zeros(0, dtype=np.uint8)
            lo, width = est.beta_hat - 3 * sig, 6 * sig + 1
        return cls(k, lo, width, cyc.table, np.ascontiguousarray(sg), sig, params.delta)

    @property
    def window(self) -> tuple:
        return self.lo, self.lo + self.width - 1


def align_windows(plan: AlignPlan, batch: WindowBatch, rng: RngStream) -> np.ndarray:
    """Align every window of ``batch``; returns global trace indices, -1 for nil."""
    if batch.lo != plan.lo or batch.width != plan.width:
        raise ValueError("window batch does not match the alignment window")
    avail = np.ascontiguousarray(batch.avail, dtype=np.int64)
    if plan.k == 1:
        first = kernels.right_form_scan(batch.bits, batch.first_valid, avail, 1, plan.table, plan.sig, False)
        return np.where(first >= 0, plan.lo + first - 1, -1)
    L = kernels.right_form_scan(batch.bits, batch.first_valid, avail, plan.k, plan.table, plan.sig, True)
    S = plan.sig.shape[0]
    out = np.full(len(batch), -1, dtype=np.int64)
    hit = np.flatnonzero(L >= 0)
    if hit.size:
        p_keep = (1.0 - plan.delta) ** (15 * plan.sigma - L[hit])
        coin = rng.gen.random(hit.size)
        keep = hit[coin < p_keep]
        out[keep] = plan.lo + L[keep] - S + 1 + (plan.k - 2)
    return out


def align(est: CoarseEstimate, y, params: ReconParams, rng: RngStream) -> Optional[int]:
    """Single-trace alignment: the image of the desert's last bit, or None."""
    plan = AlignPlan.build(est, params)
    batch = WindowBatch.from_traces([y], plan.lo, plan.width)
    v = int(align_windows(plan, batch, rng)[0])
    return None if v < 0 else v


def find_end(
    r: int,
    u,
    given: Sequence,
    sampler: TraceSource,
    params: ReconParams,
    rng: RngStream,
) -> FindEndResult:
    est = coarse_estimate(r, u, sampler, params, rng.child(0))
    plan = AlignPlan.build(est, params)
    given_batch = WindowBatch.from_traces(list(given), plan.lo, plan.width)
    aligns = align_windows(plan, given_batch, rng.child(3))
    fresh = sampler.draw_windows(params.gamma, plan.lo, plan.width, rng=rng.child(4))
    h = align_windows(plan, fresh, rng.child(5))
    good = h[h >= 0]
    if good.size == 0:
        raise AllNil(f"all {params.gamma} alignments returned nil")
    beta = float(good.mean())
    b = round_half_away(beta / (1.0 - params.delta))
    return FindEndResult(b, aligns, est, beta, int(good.size))
