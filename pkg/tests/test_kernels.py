"""The numba and numpy kernels must agree exactly."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tracerecon import kernels
from tracerecon.bitstring import cyc_set
from tracerecon.oracles import is_primitive

NB = kernels.BACKENDS["numba"]
NP = kernels.BACKENDS["numpy"]


@given(st.integers(0, 2**32), st.integers(1, 30), st.integers(1, 120), st.booleans())
def test_bma_rounds_agree(seed, N, n, record):
    rng = np.random.default_rng(seed)
    U = rng.integers(0, 2, size=(N, n), dtype=np.uint8)
    a = NB["bma_rounds"](U, record)
    b = NP["bma_rounds"](U, record)
    for p, q in zip(a, b):
        assert np.array_equal(p, q)


@given(st.integers(0, 2**32), st.integers(1, 400), st.integers(3, 40), st.integers(1, 6), st.floats(0, 1))
def test_first_periodic_window_agree(seed, n, M, C, bias):
    rng = np.random.default_rng(seed)
    x = (rng.random(n) < bias).astype(np.uint8)
    assert NB["first_periodic_window"](x, M, C) == NP["first_periodic_window"](x, M, C)


@given(st.integers(0, 2**32), st.integers(1, 5), st.integers(-5, 5), st.booleans(), st.integers(0, 8))
def test_right_form_scan_agree(seed, k, lo_valid, need_full, S):
    rng = np.random.default_rng(seed)
    s = "".join(rng.choice(["0", "1"], size=k))
    if not is_primitive(s):
        return
    table = cyc_set(s).table
    W = 40
    period = np.frombuffer((s * W).encode(), np.uint8)[:W] - 48
    avail_hi = W + 3  # kernels must clamp to the window width
    bits = np.tile(period, (64, 1)).astype(np.uint8)
    flips = rng.random(bits.shape) < 0.05
    bits ^= flips.astype(np.uint8)
    avail = rng.integers(0, avail_hi, size=64)
    avail[:20] = W
    lo = max(0, lo_valid)
    sig = rng.integers(0, 2, size=S).astype(np.uint8) if k > 1 else np.zeros(0, np.uint8)
    if S and k > 1:
        # plant the signature after the first break in some rows
        sig[: min(k, S)] = bits[0, 10 : 10 + min(k, S)]
    a = NB["right_form_scan"](bits, lo, avail, k, table, sig, need_full)
    b = NP["right_form_scan"](bits, lo, avail, k, table, sig, need_full)
    assert np.array_equal(a, b)


def test_periodic_window_starts_brute():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 80))
        M = int(rng.integers(3, 15))
        C = int(rng.integers(1, 5))
        x = (rng.random(n) < rng.random()).astype(np.uint8)
        mask = kernels.periodic_window_starts(x, M, C)
        want = [
            any(all(x[j + q] == x[j + q + p] for q in range(M - p)) for p in range(1, C + 1))
            for j in range(n - M + 1)
        ]
        assert mask.tolist() == want


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_kmer_codes(k):
    bits = np.array([[1, 0, 1, 1, 0, 0, 1]], np.uint8)
    codes = kernels.kmer_codes(bits, k)[0].tolist()
    want = [int("".join(map(str, bits[0, i : i + k])), 2) for i in range(7 - k + 1)]
    assert codes == want
