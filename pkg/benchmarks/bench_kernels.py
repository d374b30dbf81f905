#!/usr/bin/env python3
"""Compare the numba kernels against their numpy twins.

Usage:
  python3 benchmarks/bench_kernels.py [--n 150000] [--traces 105] [--repeat 5]

Each kernel runs on identical inputs under both backends; outputs are
checked for equality before timing. The numba column excludes the first
(compiling) call.
"""
import argparse
import time

import numpy as np

from tracerecon import kernels
from tracerecon._accel import HAS_NUMBA
from tracerecon.bitstring import cyc_set
from tracerecon.channel import RngStream, TraceSource
from tracerecon.bma import pad_traces
from tracerecon.params import derive_params


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def cases(n, n_traces, n_windows):
    p = derive_params(n, delta=1e-5)
    rng = np.random.default_rng(0)
    x = rng.integers(0, 2, n).astype(np.uint8)
    src = TraceSource(x, p.delta, RngStream(0))
    U = pad_traces(n, src.draw(n_traces))
    yield "bma_rounds", (U, False)

    # one long run late in the string so the scan covers most of it
    y = x.copy()
    y[int(0.9 * n) : int(0.9 * n) + 2 * p.M] = 1
    yield "first_periodic_window", (y, p.M, p.C)

    pat = "01"
    z = x.copy()
    end = n // 2
    z[end - 300 : end + 1] = np.frombuffer((pat * 200).encode(), np.uint8)[:301] - 48
    width = 15 * p.sigma + 1
    lo = int((1 - p.delta) * end) - 3 * p.sigma
    wb = TraceSource(z, p.delta, RngStream(1)).draw_windows(n_windows, lo, width, end=end)
    table = cyc_set(pat).table
    sig = np.ascontiguousarray(z[end - 1 : end + 2 * p.sigma])
    yield "right_form_scan", (wb.bits, wb.first_valid, np.ascontiguousarray(wb.avail, np.int64), 2, table, sig, True)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=150000)
    ap.add_argument("--traces", type=int, default=105)
    ap.add_argument("--windows", type=int, default=100000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not HAS_NUMBA:
        print("numba is not installed; only the numpy backend is available")

    print(f"{'kernel':<24}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}  agree")
    for name, kargs in cases(args.n, args.traces, args.windows):
        t_np, out_np = best_of(kernels.BACKENDS["numpy"][name], kargs, args.repeat)
        if HAS_NUMBA:
            fn = kernels.BACKENDS["numba"][name]
            fn(*kargs)  # compile
            t_nb, out_nb = best_of(fn, kargs, args.repeat)
            print(f"{name:<24}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}  {same(out_np, out_nb)}")
        else:
            print(f"{name:<24}{1e3 * t_np:>12.2f}{'-':>12}{'-':>10}  -")


if __name__ == "__main__":
    main()
