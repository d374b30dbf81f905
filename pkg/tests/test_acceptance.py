"""Acceptance suite: each test reproduces one numbered criterion at its stated
tolerance and records a PASS/FAIL line that is printed at the end of the run."""
import math
import time

import numpy as np
import pytest

from tracerecon.bitstring import BitString
from tracerecon.bma import check_bma_invariant, goodness, run_bma
from tracerecon.channel import RngStream, TraceSource, WindowBatch, last_surviving, transmit
from tracerecon.desert import DesertParams, first_deep_in_desert, tail_string
from tracerecon.findend import AlignPlan, align_windows, coarse_estimate, find_end
from tracerecon.harness import ExperimentConfig, first_desert_instance, generate_string, reports_to_csv, run_trials
from tracerecon.oracles import check_middle_deletion, mc_align_bias, oracle_first_deep
from tracerecon.params import derive_params
from tracerecon.pipeline import preprocess

DESK_N = 10**5
DESK_DELTA = 1e-5
DESK_GEN = "implant:01:300:20000"


@pytest.fixture(scope="module")
def desk():
    inst = first_desert_instance(DESK_N, DESK_DELTA, seed=2024, gen=DESK_GEN)
    assert inst.params.warnings == ()
    assert inst.k == 2
    return inst


def _u(inst):
    return BitString(inst.z.array[: inst.r + inst.params.m + 1])


def test_criterion_01_channel(acceptance):
    t0 = time.perf_counter()
    n, delta, T = 10**4, 0.01, 10**4
    x = BitString.random(n, np.random.default_rng(1))
    xa = x.array
    lengths = np.empty(T)
    bad = 0
    root = RngStream(101)
    for i in range(T):
        t = transmit(x, delta, root.child(i))
        o, d = t.record.origin, t.record.deleted
        lengths[i] = len(t)
        ok = (
            o.size + d.size == n
            and np.all(np.diff(o) > 0)
            and np.array_equal(o - np.searchsorted(d, o), np.arange(o.size))
            and np.array_equal(t.bits.array, xa[o])
        )
        bad += not ok
    dt = time.perf_counter() - t0
    tol = 4 * math.sqrt(n * delta * (1 - delta))
    dev = abs(lengths.mean() - 9900)
    passed = dev <= tol and bad == 0 and dt < 5
    acceptance(1, passed, f"|mean-9900|={dev:.2f} (tol {tol:.1f}), invariant failures={bad}, {dt:.1f}s")
    assert passed


def test_criterion_02_middle_deletion(acceptance):
    t0 = time.perf_counter()
    rep = check_middle_deletion(6)
    dt = time.perf_counter() - t0
    passed = rep.passed and dt < 10
    acceptance(2, passed, f"{rep.checked} strings checked, counterexample={rep.counterexample}, {dt:.1f}s")
    assert passed


def test_criterion_03_desert_detection(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    mismatches = checks = with_desert = 0
    for _ in range(1000):
        L = int(rng.integers(13, 513))
        x = rng.integers(0, 2, L).astype(np.uint8)
        if rng.random() < 0.5:
            # plant a periodic stretch so both present and absent cases occur
            k = int(rng.integers(1, 5))
            s = rng.integers(0, 2, k).astype(np.uint8)
            ln = int(rng.integers(5, 30))
            pos = int(rng.integers(0, max(1, L - ln)))
            seg = s[np.arange(min(ln, L - pos)) % k]
            x[pos : pos + seg.size] = seg
        for m in range(2, 7):
            for C in range(1, 5):
                got = first_deep_in_desert(x, DesertParams(m, C))
                want = oracle_first_deep(x, m, C)
                checks += 1
                with_desert += want is not None
                mismatches += got != want
    dt = time.perf_counter() - t0
    passed = mismatches == 0 and dt < 30
    acceptance(3, passed, f"{checks} comparisons ({with_desert} with a desert), mismatches={mismatches}, {dt:.1f}s")
    assert passed


def _bma_setup(seed):
    n, delta, N = 2000, 5e-4, 25
    p = derive_params(n, delta=delta)
    dp = p.desert()
    x = generate_string("desert-free", n, dp, RngStream(seed, (0,)))
    traces = [transmit(x, delta, RngStream(seed, (1, i))) for i in range(N)]
    return x, traces, dp


def test_criterion_04_bma_exactness(acceptance):
    t0 = time.perf_counter()
    exact = good_runs = inv_fail = margin_fail = inv_all = 0
    for seed in range(100):
        x, traces, dp = _bma_setup(seed)
        n, N = len(x), len(traces)
        res = run_bma(n, traces)
        exact += res.w == x
        R = math.ceil(9 * N / 10)
        inv_all += bool(check_bma_invariant(x, traces, n, dp.C))
        if goodness(traces, n, dp):
            good_runs += 1
            inv_fail += not check_bma_invariant(x, traces, n, dp.C)
            margin_fail += int(res.round_margins.min() < math.ceil(9 * R / 10))
    dt = time.perf_counter() - t0
    passed = exact >= 99 and inv_fail == 0 and margin_fail == 0 and dt < 60
    acceptance(
        4,
        passed,
        f"exact {exact}/100; good runs {good_runs}, invariant failures {inv_fail}, margin failures {margin_fail}; "
        f"invariant holds on {inv_all}/100 runs irrespective of goodness; {dt:.1f}s",
    )
    assert passed


def test_criterion_05_bma_robustness(acceptance):
    t0 = time.perf_counter()
    good_runs = changed_on_good = unchanged_all = total = 0
    for seed in range(100):
        x, traces, dp = _bma_setup(seed)
        n, N = len(x), len(traces)
        bad = N // 10
        rest = traces[bad:]
        base = run_bma(n, traces).w
        is_good = goodness(rest, n, dp, R=len(rest))
        good_runs += is_good
        cut = n  # r' + m + 1 with r' = n' - m - 1
        for adv in ("0" * n, "1" * n, str(x)[::-1]):
            w = run_bma(n, [adv] * bad + rest).w
            same = w[:cut] == base[:cut]
            total += 1
            unchanged_all += same
            if is_good:
                changed_on_good += not same
    dt = time.perf_counter() - t0
    passed = changed_on_good == 0 and dt < 60
    acceptance(
        5,
        passed,
        f"good runs {good_runs}, prefix changes on good runs {changed_on_good}; "
        f"unchanged in {unchanged_all}/{total} substitutions overall; {dt:.1f}s",
    )
    assert passed


def test_criterion_06_coarse_estimate(desk, acceptance):
    t0 = time.perf_counter()
    p = desk.params
    target = (1 - p.delta) * desk.end
    true_tail = tail_string(desk.z, desk.end, desk.k, p.sigma)
    ok = 0
    for seed in range(100):
        src = TraceSource(desk.z, p.delta, RngStream(6000 + seed))
        try:
            est = coarse_estimate(desk.r, _u(desk), src, p, RngStream(6000 + seed, (1,)))
        except Exception:
            continue
        ok += abs(est.beta_hat - target) <= 2 * p.sigma and est.tail == true_tail
    dt = time.perf_counter() - t0
    passed = ok >= 95 and dt < 120
    acceptance(6, passed, f"{ok}/100 seeds within 2 sigma with exact tail (sigma={p.sigma}), {dt:.1f}s")
    assert passed


def test_criterion_07_align(desk, acceptance):
    t0 = time.perf_counter()
    p = desk.params
    src = TraceSource(desk.z, p.delta, RngStream(7000))
    est = coarse_estimate(desk.r, _u(desk), src, p, RngStream(7000, (1,)))
    plan = AlignPlan.build(est, p)
    lo, hi = plan.window
    wb = src.draw_windows(10**4, plan.lo, plan.width, end=desk.end, rng=RngStream(7000, (2,)))
    out = align_windows(plan, wb, RngStream(7000, (3,)))
    got = out[out >= 0]
    in_window = bool(np.all((got >= lo) & (got <= hi)))
    exact = float(np.mean(out == wb.last))
    t1 = time.perf_counter()
    mc = mc_align_bias(desk.z, desk.end, p, 10**6, seed=7001, est=est)
    dt_c = time.perf_counter() - t1
    bias = abs(mc["mean"] - mc["target"])
    passed = in_window and exact >= 0.98 and bias <= 0.5 and dt_c < 600
    acceptance(
        7,
        passed,
        f"(a) in J: {in_window}; (b) exact {exact:.4f}; (c) |mean-(1-d)end|={bias:.4f} "
        f"(stderr {mc['stderr']:.4f}, nil rate {mc['nil_rate']:.4f}); (c) took {dt_c:.1f}s, total {time.perf_counter() - t0:.1f}s",
    )
    assert passed


def test_criterion_08_findend(desk, acceptance):
    t0 = time.perf_counter()
    p = desk.params
    hits = 0
    weak = 0
    fracs = []
    for seed in range(100):
        src = TraceSource(desk.z, p.delta, RngStream(8000 + seed))
        given = src.draw(p.N, RngStream(8000 + seed, (1,)))
        try:
            res = find_end(desk.r, _u(desk), given, src, p, RngStream(8000 + seed, (2,)))
        except Exception:
            continue
        if res.b != desk.end:
            continue
        hits += 1
        lasts = np.array([last_surviving(t, desk.end) for t in given])
        frac = float(np.mean(res.aligns == lasts))
        fracs.append(frac)
        weak += frac < 0.9
    dt = time.perf_counter() - t0
    passed = hits >= 95 and weak == 0 and dt < 600
    acceptance(
        8,
        passed,
        f"b = end in {hits}/100 runs; runs with < 0.9N exact alignments: {weak}; "
        f"min fraction {min(fracs) if fracs else float('nan'):.3f}; {dt:.1f}s",
    )
    assert passed


def test_criterion_09_end_to_end(acceptance):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(
        ns=[DESK_N], deltas=[DESK_DELTA], trials=20, seed=909, gen="multi-desert", omit_timing=True
    )
    first = run_trials(cfg)
    csv1 = reports_to_csv(first)
    csv2 = reports_to_csv(run_trials(cfg))
    wins = sum(r.success for r in first)
    rounds = sorted({r.rounds for r in first})
    reasons = sorted({r.failure_reason for r in first if r.failure_reason})
    dt = time.perf_counter() - t0
    passed = wins >= 18 and csv1 == csv2 and dt < 1800
    acceptance(
        9,
        passed,
        f"{wins}/20 exact reconstructions, rounds seen {rounds}, failures {reasons}; "
        f"CSV byte-identical on rerun: {csv1 == csv2}; {dt:.1f}s",
    )
    assert passed


def test_criterion_10_preprocess(acceptance):
    t0 = time.perf_counter()
    n, C = 10**4, 4
    m = 22
    retries = dirty = 0
    for seed in range(1000):
        stats = {}
        v = preprocess(n, C, RngStream(seed), stats=stats)
        retries += stats["retries"]
        dirty += oracle_first_deep(v, m, C) is not None
    dt = time.perf_counter() - t0
    passed = retries == 0 and dirty == 0 and dt < 60
    acceptance(10, passed, f"1000 calls, retries={retries}, oracle-detected deserts={dirty}, {dt:.1f}s")
    assert passed
