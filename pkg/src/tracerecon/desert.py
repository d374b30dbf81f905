"""Deserts (long low-period stretches) and the objects around a desert's right end."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .bitstring import BitString, CycSet, Pattern, as_bits, cyc_set, noncyc_starts, smallest_period


class DesertError(ValueError):
    """Raised when a desert query's precondition does not hold for the given string."""


@dataclass(frozen=True)
class DesertParams:
    m: int
    C: int

    def __post_init__(self):
        if self.m < 1 or self.C < 1:
            raise ValueError(f"need m >= 1 and C >= 1, got m={self.m}, C={self.C}")
        if self.C >= self.M:
            raise ValueError(f"C={self.C} must be below the minimum desert length M={self.M}")

    @property
    def M(self) -> int:
        return 2 * self.m + 1


@dataclass(frozen=True)
class DesertLocation:
    r: int
    pattern: Pattern
    end: Optional[int] = None


@dataclass(frozen=True)
class TailString:
    bits: BitString

    def __len__(self):
        return len(self.bits)


@dataclass(frozen=True)
class Signature:
    bits: BitString

    def __len__(self):
        return len(self.bits)


def first_deep_in_desert(x, p: DesertParams) -> Optional[int]:
    """Smallest i whose centred length-M window is a desert, or None."""
    arr = as_bits(x).array
    if arr.shape[0] < p.M:
        return None
    j = kernels.first_periodic_window(arr, p.M, p.C)
    return None if j < 0 else int(j) + p.m


def deep_positions(x, p: DesertParams) -> np.ndarray:
    """All locations that are deep in some desert."""
    starts = kernels.periodic_window_starts(as_bits(x).array, p.M, p.C)
    return np.flatnonzero(starts) + p.m


def desert_pattern(x, r: int, p: DesertParams) -> Pattern:
    x = as_bits(x)
    window = x.subword(r - p.m, r + p.m)
    k = smallest_period(window)
    if k > p.C:
        raise DesertError(f"window around {r} has smallest period {k} > C={p.C}")
    return Pattern(window[:k])


def desert_end(x, r: int, k: int, m: int) -> int:
    """Smallest end >= r+m with x[end+1] != x[end-k+1]."""
    arr = as_bits(x).array
    n = arr.shape[0]
    lo = r + m
    if lo - k + 1 < 0:
        raise DesertError("r + m - k + 1 must be a valid index")
    idx = np.arange(lo, n - 1)
    breaks = np.flatnonzero(arr[idx + 1] != arr[idx - k + 1])
    if breaks.size == 0:
        raise DesertError(f"desert starting near {r} runs to the end of the string")
    return int(idx[breaks[0]])


def tail_string(x, end: int, k: int, sigma: int) -> TailString:
    x = as_bits(x)
    start = end - k + 2
    stop = start + 8 * sigma
    if start < 0 or stop > len(x):
        raise IndexError(f"tail [{start}:{stop}) out of range for length {len(x)}")
    return TailString(x[start:stop])


def signature_from_tail(tail, s, sigma: int) -> Signature:
    """Shortest prefix of ``tail`` holding a non-cyclic k-subword past its first k bits."""
    bits = tail.bits if isinstance(tail, TailString) else as_bits(tail)
    cyc = s if isinstance(s, CycSet) else cyc_set(s)
    k = cyc.k
    if k < 2:
        raise ValueError("signatures are only defined for k >= 2")
    mask = noncyc_starts(bits, cyc)
    later = np.flatnonzero(mask[k:])
    if later.size == 0:
        return Signature(bits)
    d = int(later[0]) + k + k - 1
    return Signature(bits[: d + 1])


def match_right_form(window, sig, cyc: CycSet) -> Optional[int]:
    """End index L of ``sig`` inside ``window`` when the window reads w + sig + v, else None."""
    arr = as_bits(window).array
    sig_arr = (sig.bits if isinstance(sig, Signature) else as_bits(sig)).array
    hits = np.flatnonzero(noncyc_starts(arr, cyc))
    if hits.size == 0:
        return None
    i = int(hits[0])
    S = sig_arr.shape[0]
    if i + S > arr.shape[0] or not np.array_equal(arr[i : i + S], sig_arr):
        return None
    return i + S - 1
