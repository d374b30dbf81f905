"""Bit-level string primitives: subwords, periods, cyclic-shift sets."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

from .kernels import kmer_codes


class BitString:
    """Immutable 0-indexed bit sequence.

    Bits are held one per byte in a read-only ``uint8`` array, which gives O(1)
    reads and vectorized subword comparisons. The textual form is ASCII
    ``'0'``/``'1'``, first bit first.
    """

    __slots__ = ("_a", "_hash")

    def __init__(self, bits: Iterable[int] | np.ndarray | str = ()):
        if isinstance(bits, BitString):
            arr = bits._a
        elif isinstance(bits, str):
            raw = np.frombuffer(bits.encode("ascii"), dtype=np.uint8)
            if raw.size and not np.all((raw == 48) | (raw == 49)):
                raise ValueError(f"not a bitstring: {bits[:40]!r}")
            arr = (raw - 48).astype(np.uint8)
        else:
            arr = np.asarray(bits)
            if arr.ndim != 1:
                raise ValueError("bits must be one-dimensional")
            if arr.size and (arr.min() < 0 or arr.max() > 1):
                raise ValueError("bits must be 0 or 1")
            arr = arr.astype(np.uint8, copy=True)
        if arr.flags.writeable:
            arr.flags.writeable = False
        self._a = arr
        self._hash = None

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "BitString":
        return cls(rng.integers(0, 2, size=n, dtype=np.uint8))

    @property
    def array(self) -> np.ndarray:
        """Read-only ``uint8`` view of the bits."""
        return self._a

    def __len__(self) -> int:
        return self._a.shape[0]

    def __getitem__(self, key):
        if isinstance(key, slice):
            return BitString(self._a[key])
        return int(self._a[key])

    def subword(self, a: int, b: int) -> "BitString":
        """Inclusive subword ``x[a..b]``."""
        if not 0 <= a <= b <= len(self) - 1:
            raise IndexError(f"subword [{a}:{b}] out of range for length {len(self)}")
        return BitString(self._a[a : b + 1])

    def __add__(self, other: "BitString") -> "BitString":
        return BitString(np.concatenate((self._a, BitString(other)._a)))

    def __mul__(self, times: int) -> "BitString":
        return BitString(np.tile(self._a, times))

    def __eq__(self, other) -> bool:
        if isinstance(other, str):
            other = BitString(other)
        if not isinstance(other, BitString):
            return NotImplemented
        return self._a.shape == other._a.shape and bool(np.array_equal(self._a, other._a))

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((len(self), np.packbits(self._a).tobytes()))
        return self._hash

    def __str__(self) -> str:
        return (self._a + 48).tobytes().decode("ascii")

    def __repr__(self) -> str:
        text = str(self)
        if len(text) > 48:
            text = text[:45] + "..."
        return f"BitString('{text}', len={len(self)})"

    def packed(self) -> bytes:
        return np.packbits(self._a).tobytes()


def as_bits(x) -> BitString:
    return x if isinstance(x, BitString) else BitString(x)


def smallest_period(w) -> int:
    """Smallest p >= 1 with w[j] == w[j+p] for all valid j (failure-function method)."""
    bits = as_bits(w).array.tolist()
    n = len(bits)
    if n == 0:
        raise ValueError("smallest_period needs a nonempty string")
    fail = [0] * n
    j = 0
    for i in range(1, n):
        while j and bits[i] != bits[j]:
            j = fail[j - 1]
        if bits[i] == bits[j]:
            j += 1
        fail[i] = j
    return n - fail[-1]


@dataclass(frozen=True)
class Pattern:
    """A primitive repeating unit ``s`` of a desert."""

    s: BitString

    def __post_init__(self):
        s = as_bits(self.s)
        object.__setattr__(self, "s", s)
        if len(s) == 0:
            raise ValueError("pattern must be nonempty")
        if smallest_period(s) != len(s):
            raise ValueError(f"pattern {s} is not primitive")

    @property
    def k(self) -> int:
        return len(self.s)

    def __str__(self) -> str:
        return str(self.s)


@dataclass(frozen=True)
class CycSet:
    members: frozenset
    k: int

    def __contains__(self, w) -> bool:
        return as_bits(w) in self.members

    def __len__(self) -> int:
        return len(self.members)

    @cached_property
    def table(self) -> np.ndarray:
        """Lookup table over k-bit codes: True where the code is a rotation of s."""
        tab = np.zeros(1 << self.k, dtype=bool)
        for m in self.members:
            code = 0
            for b in m.array.tolist():
                code = (code << 1) | b
            tab[code] = True
        return tab


def cyc_set(s) -> CycSet:
    if not isinstance(s, Pattern):
        s = Pattern(as_bits(s))
    a = s.s.array
    rotations = frozenset(BitString(np.roll(a, -i)) for i in range(s.k))
    return CycSet(rotations, s.k)


def noncyc_starts(w, cyc: CycSet) -> np.ndarray:
    """Mask over start positions i whose k-subword is not in ``cyc``."""
    codes = kmer_codes(as_bits(w).array, cyc.k)
    return ~cyc.table[codes]


def leftmost_noncyc(w, cyc: CycSet) -> Optional[int]:
    mask = noncyc_starts(w, cyc)
    hits = np.flatnonzero(mask)
    return int(hits[0]) if hits.size else None


def is_prefix_of_power(w, s) -> bool:
    w = as_bits(w).array
    s = as_bits(s.s if isinstance(s, Pattern) else s).array
    if w.size == 0:
        raise ValueError("is_prefix_of_power needs a nonempty string")
    k = s.size
    return bool(np.array_equal(w, s[np.arange(w.size) % k]))
