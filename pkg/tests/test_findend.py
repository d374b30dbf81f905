import numpy as np
import pytest

import tracerecon.findend as fe
from tracerecon.bitstring import BitString, Pattern
from tracerecon.channel import RngStream, TraceSource, WindowBatch, last_surviving, transmit
from tracerecon.desert import desert_end, desert_pattern, first_deep_in_desert, tail_string
from tracerecon.findend import (
    AlignPlan,
    AllNil,
    CoarseEstimate,
    NoBreakFound,
    align,
    align_windows,
    coarse_estimate,
    find_end,
    round_half_away,
)
from tracerecon.harness import Implant, GenSpec, generate_string
from tracerecon.params import derive_params


def instance(pattern, n=3000, delta=0.0, seed=0, overrides=None, pos=800, length=200):
    p = derive_params(n, delta=delta, overrides=overrides)
    x = generate_string(GenSpec("implant", (Implant(pattern, length, pos),)), n, p.desert(), RngStream(seed))
    r = first_deep_in_desert(x, p.desert())
    k = desert_pattern(x, r, p.desert()).k
    end = desert_end(x, r, k, p.m)
    return x, p, r, k, end


@pytest.mark.parametrize("pattern", ["01", "001", "0111", "00101"])
def test_zero_delta_is_exact_k_at_least_2(pattern):
    x, p, r, k, end = instance(pattern, overrides={"sigma": 4})
    assert end == 800 + 199
    src = TraceSource(x, 0.0, RngStream(1))
    u = BitString(x.array[: r + p.m + 1])
    est = coarse_estimate(r, u, src, p, RngStream(2))
    assert abs(est.beta_hat - end) <= 2 * p.sigma
    assert est.tail == tail_string(x, end, k, p.sigma)
    y = transmit(x, 0.0, RngStream(3))
    assert align(est, y, p, RngStream(4)) == end
    before = src.traces_drawn
    res = find_end(r, u, [y] * 5, src, p, RngStream(5))
    assert res.b == end and res.aligns.tolist() == [end] * 5
    assert src.traces_drawn - before == 2 * p.alpha + p.gamma


def test_zero_delta_is_exact_k_equal_1():
    x, p, r, k, end = instance("0")
    assert k == 1
    src = TraceSource(x, 0.0, RngStream(1))
    u = BitString(x.array[: r + p.m + 1])
    est = coarse_estimate(r, u, src, p, RngStream(2))
    y = transmit(x, 0.0, RngStream(3))
    ell = align(est, y, p, RngStream(4))
    # the first opposite bit is x[end+1]; the returned index is one before it
    assert ell == end == last_surviving(y, end)
    assert find_end(r, u, [y], src, p, RngStream(5)).b == end


def test_align_outputs_lie_in_window():
    x, p, r, k, end = instance("01", n=20000, delta=2e-5, pos=5000, length=300)
    assert p.warnings == ()
    src = TraceSource(x, p.delta, RngStream(1))
    u = BitString(x.array[: r + p.m + 1])
    est = coarse_estimate(r, u, src, p, RngStream(2))
    plan = AlignPlan.build(est, p)
    wb = src.draw_windows(5000, plan.lo, plan.width, end=end, rng=RngStream(3))
    out = align_windows(plan, wb, RngStream(4))
    lo, hi = plan.window
    got = out[out >= 0]
    assert got.size > 4500
    assert np.all((got >= lo) & (got <= hi))
    assert np.mean(out == wb.last) > 0.95


def test_discount_never_rejects_at_zero_delta_and_at_full_window():
    x, p, r, k, end = instance("01", overrides={"sigma": 4})
    est = CoarseEstimate(end - 4, tail_string(x, end, k, p.sigma), Pattern("01"))
    plan = AlignPlan.build(est, p)
    batch = WindowBatch.from_traces([transmit(x, 0.0, RngStream(i)) for i in range(50)], plan.lo, plan.width)
    assert np.all(align_windows(plan, batch, RngStream(9)) == end)
    # sig ending at L = 15 sigma: exponent 0, kept with probability one even
    # though delta > 0 in the parameters
    p2 = derive_params(3000, delta=0.05, overrides={"sigma": 4})
    sig = plan.sig
    S = sig.size
    row = np.zeros((1, plan.width), np.uint8)
    row[0, : plan.width - S] = np.array([0, 1] * plan.width, np.uint8)[: plan.width - S]
    row[0, plan.width - S :] = sig
    plan2 = AlignPlan(plan.k, plan.lo, plan.width, plan.table, sig, 4, p2.delta)
    if row[0, plan.width - S - 1] == sig[0]:
        row[0, : plan.width - S] ^= 1
    wb = WindowBatch(np.repeat(row, 200, axis=0), plan.lo, np.full(200, plan.width), np.full(200, 10**6))
    out = align_windows(plan2, wb, RngStream(1))
    assert np.all(out == plan.lo + plan.width - 1 - S + 1 + plan.k - 2)


def test_clamped_window_is_nil_for_k_at_least_2():
    x, p, r, k, end = instance("01", overrides={"sigma": 4})
    est = CoarseEstimate(end - 4, tail_string(x, end, k, p.sigma), Pattern("01"))
    short = BitString(x.array[: end + 5])
    assert align(est, short, p, RngStream(0)) is None


def test_round_half_away():
    assert round_half_away(2.5) == 3
    assert round_half_away(-2.5) == -3
    assert round_half_away(2.49) == 2


def test_no_break_found():
    n = 400
    x = BitString("01" * (n // 2))
    p = derive_params(n, delta=0.0, overrides={"C": 3})
    src = TraceSource(x, 0.0, RngStream(0))
    with pytest.raises(NoBreakFound):
        coarse_estimate(20, BitString(x.array[:40]), src, p, RngStream(1))


def test_all_nil(monkeypatch):
    x, p, r, k, end = instance("01", overrides={"sigma": 4})
    bogus = CoarseEstimate(end + 500, tail_string(x, end, k, p.sigma), Pattern("01"))
    monkeypatch.setattr(fe, "coarse_estimate", lambda *a, **kw: bogus)
    src = TraceSource(x, 0.0, RngStream(1))
    with pytest.raises(AllNil):
        find_end(r, BitString(x.array[: r + p.m + 1]), [], src, p, RngStream(2))
