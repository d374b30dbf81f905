"""Hot inner loops, each with a numba kernel and a vectorized numpy twin.

The public names at the bottom dispatch on :data:`tracerecon._accel.USE_NUMBA`.
Both variants are deterministic and must agree bit for bit; the test-suite
checks that directly.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------- BMA rounds


def _bma_rounds_loop(U, record):
    N, n = U.shape
    w = np.zeros(n, np.uint8)
    margins = np.zeros(n, np.int32)
    cur = np.zeros(N, np.int64)
    hist = np.zeros((n + 1 if record else 0, N), np.int64)
    for t in range(n):
        if record:
            for i in range(N):
                hist[t, i] = cur[i]
        ones = 0
        for i in range(N):
            ones += U[i, cur[i]]
        maj = 1 if 2 * ones > N else 0
        w[t] = maj
        margins[t] = ones if maj == 1 else N - ones
        for i in range(N):
            if U[i, cur[i]] == maj:
                cur[i] += 1
    if record:
        for i in range(N):
            hist[n, i] = cur[i]
    return w, margins, hist


_bma_rounds_nb = njit(_bma_rounds_loop)


def _bma_rounds_np(U, record):
    N, n = U.shape
    w = np.zeros(n, np.uint8)
    margins = np.zeros(n, np.int32)
    cur = np.zeros(N, np.int64)
    hist = np.zeros((n + 1 if record else 0, N), np.int64)
    rows = np.arange(N)
    for t in range(n):
        if record:
            hist[t] = cur
        col = U[rows, cur]
        ones = int(col.sum())
        maj = 1 if 2 * ones > N else 0
        w[t] = maj
        margins[t] = ones if maj else N - ones
        cur += col == maj
    if record:
        hist[n] = cur
    return w, margins, hist


# ------------------------------------------------------ periodic window scan


def _first_periodic_window_loop(x, M, C):
    n = x.shape[0]
    if n < M:
        return -1
    best = -1
    for p in range(1, C + 1):
        L = M - p
        if L <= 0:
            return 0
        stop = n - p
        if best >= 0 and best + L - 1 < stop:
            stop = best + L - 1
        run = 0
        for q in range(stop):
            if x[q] == x[q + p]:
                run += 1
                if run >= L:
                    j = q - L + 1
                    if best < 0 or j < best:
                        best = j
                    break
            else:
                run = 0
    return best


_first_periodic_window_nb = njit(_first_periodic_window_loop)


def periodic_window_starts(x, M, C):
    """Boolean mask over window starts ``j`` whose length-``M`` window has a period ``<= C``."""
    x = np.asarray(x, dtype=np.uint8)
    n = x.shape[0]
    out = np.zeros(max(n - M + 1, 0), dtype=bool)
    if out.size == 0:
        return out
    for p in range(1, C + 1):
        L = M - p
        if L <= 0:
            out[:] = True
            break
        eq = (x[:-p] == x[p:]).astype(np.int32)
        cs = np.concatenate(([0], np.cumsum(eq)))
        win = cs[L:] - cs[:-L]
        out |= win[: out.size] == L
    return out


def _first_periodic_window_np(x, M, C):
    hits = np.flatnonzero(periodic_window_starts(x, M, C))
    return int(hits[0]) if hits.size else -1


# ------------------------------------------------- right-form window scan


def _right_form_scan_loop(bits, lo_valid, avail, k, table, sig, need_full):
    B, W = bits.shape
    S = sig.shape[0]
    mask = (1 << k) - 1
    out = np.full(B, -1, np.int64)
    for b in range(B):
        hi = min(avail[b], W)
        if need_full and (lo_valid != 0 or hi != W):
            continue
        code = 0
        filled = 0
        first = -1
        for q in range(lo_valid, hi):
            code = ((code << 1) | bits[b, q]) & mask
            filled += 1
            if filled >= k and not table[code]:
                first = q - k + 1
                break
        if first < 0:
            continue
        if S == 0:
            out[b] = first
            continue
        if first + S > hi:
            continue
        ok = True
        for j in range(S):
            if bits[b, first + j] != sig[j]:
                ok = False
                break
        if ok:
            out[b] = first + S - 1
    return out


_right_form_scan_nb = njit(_right_form_scan_loop)


def kmer_codes(bits, k):
    """Integer codes of every length-``k`` window along the last axis (MSB first)."""
    bits = np.asarray(bits, dtype=np.int64)
    width = bits.shape[-1] - k + 1
    if width <= 0:
        return np.zeros(bits.shape[:-1] + (0,), dtype=np.int64)
    codes = np.zeros(bits.shape[:-1] + (width,), dtype=np.int64)
    for j in range(k):
        codes = (codes << 1) | bits[..., j : j + width]
    return codes


def _right_form_scan_np(bits, lo_valid, avail, k, table, sig, need_full):
    B, W = bits.shape
    S = sig.shape[0]
    out = np.full(B, -1, np.int64)
    if B == 0 or W < k:
        return out
    avail = np.minimum(avail, W)
    codes = kmer_codes(bits, k)
    starts = np.arange(codes.shape[1])
    noncyc = ~table[codes]
    noncyc &= starts[None, :] >= lo_valid
    noncyc &= starts[None, :] + k <= avail[:, None]
    if need_full:
        noncyc &= ((avail == W) & (lo_valid == 0))[:, None]
    has = noncyc.any(axis=1)
    first = np.argmax(noncyc, axis=1)
    if S == 0:
        out[has] = first[has]
        return out
    fits = has & (first + S <= avail)
    rows = np.flatnonzero(fits)
    if rows.size:
        idx = first[rows, None] + np.arange(S)[None, :]
        match = (bits[rows[:, None], idx] == sig[None, :]).all(axis=1)
        good = rows[match]
        out[good] = first[good] + S - 1
    return out


# ----------------------------------------------------------------- dispatch

if USE_NUMBA:
    bma_rounds = _bma_rounds_nb
    first_periodic_window = _first_periodic_window_nb
    right_form_scan = _right_form_scan_nb
else:
    bma_rounds = _bma_rounds_np
    first_periodic_window = _first_periodic_window_np
    right_form_scan = _right_form_scan_np

BACKENDS = {
    "numba": {
        "bma_rounds": _bma_rounds_nb,
        "first_periodic_window": _first_periodic_window_nb,
        "right_form_scan": _right_form_scan_nb,
    },
    "numpy": {
        "bma_rounds": _bma_rounds_np,
        "first_periodic_window": _first_periodic_window_np,
        "right_form_scan": _right_form_scan_np,
    },
}
