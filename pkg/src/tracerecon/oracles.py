"""Reference implementations used to check the library.

These work on plain Python strings or direct numpy comparisons and do not
reuse the scanning code they are meant to check. They are slow by design.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _s(x) -> str:
    if isinstance(x, str):
        return x
    return "".join("1" if int(b) else "0" for b in np.asarray(getattr(x, "array", x)).tolist())


@dataclass
class OracleReport:
    claim: str
    instance: str
    passed: bool
    counterexample: Optional[dict] = None
    checked: int = 0
    extra: dict = field(default_factory=dict)


def brute_period(w) -> int:
    w = _s(w)
    for p in range(1, len(w) + 1):
        if all(w[j] == w[j + p] for j in range(len(w) - p)):
            return p
    raise ValueError("empty string")


def is_primitive(s: str) -> bool:
    return brute_period(s) == len(s)


def brute_cyc(s) -> frozenset:
    s = _s(s)
    return frozenset(s[i:] + s[:i] for i in range(len(s)))


def brute_leftmost_noncyc(w, s) -> Optional[int]:
    w, cyc = _s(w), brute_cyc(s)
    k = len(_s(s))
    for i in range(len(w) - k + 1):
        if w[i : i + k] not in cyc:
            return i
    return None


def oracle_first_deep(x, m: int, C: int) -> Optional[int]:
    """Exhaustive window scan: every centred window, every period up to C."""
    a = np.asarray(getattr(x, "array", x), dtype=np.uint8) if not isinstance(x, str) else np.frombuffer(x.encode(), np.uint8) - 48
    M = 2 * m + 1
    if a.shape[0] < M:
        return None
    W = sliding_window_view(a, M)
    hit = np.zeros(W.shape[0], dtype=bool)
    for p in range(1, C + 1):
        if p >= M:
            hit[:] = True
            break
        hit |= np.all(W[:, :-p] == W[:, p:], axis=1)
    idx = np.flatnonzero(hit)
    return int(idx[0]) + m if idx.size else None


def oracle_desert_end(x, r: int, k: int, m: int) -> int:
    x = _s(x)
    e = r + m
    while e + 1 < len(x):
        if x[e + 1] != x[e - k + 1]:
            return e
        e += 1
    raise ValueError("no break before the end of the string")


def oracle_last_surviving(keep_or_origin, end: int, is_mask: bool = False) -> int:
    """Last trace index whose source index is at most ``end``; -1 if none."""
    if is_mask:
        return int(np.count_nonzero(np.asarray(keep_or_origin)[: end + 1])) - 1
    count = 0
    for o in np.asarray(keep_or_origin).tolist():
        if o <= end:
            count += 1
    return count - 1


def _primitive_patterns(k: int):
    for bits in itertools.product("01", repeat=k):
        s = "".join(bits)
        if is_primitive(s):
            yield s


def check_middle_deletion(k_max: int) -> OracleReport:
    """Exhaustive check: deleting the middle bit of a cyclic run breaks the cycle.

    For every primitive s with 2 <= k <= k_max and every w of length 2k+1 whose
    k-subwords are all rotations of s, removing w[k] must leave a k-subword
    that is not a rotation of s.
    """
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    checked = 0
    for k in range(2, k_max + 1):
        seen = set()
        for s in _primitive_patterns(k):
            cyc = brute_cyc(s)
            if cyc in seen:
                continue
            seen.add(cyc)
            for bits in itertools.product("01", repeat=2 * k + 1):
                w = "".join(bits)
                if any(w[i : i + k] not in cyc for i in range(k + 2)):
                    continue
                checked += 1
                v = w[:k] + w[k + 1 :]
                if all(v[i : i + k] in cyc for i in range(k + 1)):
                    return OracleReport(
                        "middle-deletion", f"k<={k_max}", False, {"s": s, "w": w, "after": v}, checked
                    )
    return OracleReport("middle-deletion", f"k<={k_max}", True, None, checked)


def mc_channel_stats(x, delta: float, trials: int, seed: int) -> dict:
    """Empirical trace-length moments and per-position survival rates."""
    from .channel import RngStream, transmit

    if trials < 100:
        raise ValueError("use at least 100 trials")
    n = len(x)
    lengths = np.empty(trials, dtype=np.int64)
    survive = np.zeros(n, dtype=np.int64)
    root = RngStream(seed)
    for t in range(trials):
        tr = transmit(x, delta, root.child(t))
        lengths[t] = len(tr)
        survive[tr.record.origin] += 1
    sd = math.sqrt(n * delta * (1 - delta))
    return {
        "mean": float(lengths.mean()),
        "var": float(lengths.var()),
        "expected_mean": (1 - delta) * n,
        "binomial_sd": sd,
        "survival": survive / trials,
        "lengths": lengths,
    }


def mc_align_bias(x, end: int, params, trials: int, seed: int, est=None, chunk: int = 50000) -> dict:
    """Mean and standard error of non-nil alignments over fresh traces.

    Without ``est`` the ground-truth coarse estimate is used:
    ``beta_hat = round((1-delta) end)`` and the true tail.
    """
    from .bitstring import Pattern
    from .channel import RngStream, TraceSource
    from .desert import tail_string
    from .findend import AlignPlan, CoarseEstimate, align_windows

    xs = _s(x)
    if est is None:
        k = None
        for kk in range(1, params.C + 1):
            if all(xs[j] == xs[j + kk] for j in range(end - params.M + 1, end - kk + 1)):
                k = kk
                break
        if k is None:
            raise ValueError("end does not close a desert with pattern length <= C")
        s = xs[end - k + 1 : end + 1]
        est = CoarseEstimate(round((1 - params.delta) * end), tail_string(x, end, k, params.sigma), Pattern(s))
    plan = AlignPlan.build(est, params)
    src = TraceSource(x, params.delta, RngStream(seed))
    total = 0.0
    total2 = 0.0
    kept = 0
    hits = 0
    for i, start in enumerate(range(0, trials, chunk)):
        cnt = min(chunk, trials - start)
        batch = src.draw_windows(cnt, plan.lo, plan.width, end=end, rng=RngStream(seed, (1, i)))
        out = align_windows(plan, batch, RngStream(seed, (2, i)))
        good = out[out >= 0]
        kept += good.size
        rel = (good - plan.lo).astype(np.float64)  # centred to keep the variance well conditioned
        total += float(rel.sum())
        total2 += float((rel**2).sum())
        hits += int(np.count_nonzero(out == batch.last))
    rel_mean = total / kept if kept else float("nan")
    var = total2 / kept - rel_mean * rel_mean if kept else float("nan")
    mean = plan.lo + rel_mean
    stderr = math.sqrt(max(var, 0.0) / kept) if kept else float("nan")
    return {
        "mean": mean,
        "stderr": stderr,
        "target": (1 - params.delta) * end,
        "nil_rate": 1 - kept / trials,
        "exact_rate": hits / trials,
        "window": plan.window,
    }
