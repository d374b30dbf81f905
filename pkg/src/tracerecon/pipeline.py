"""Preprocessing and the top-level reconstruction loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bitstring import BitString, as_bits, is_prefix_of_power
from .bma import run_bma
from .channel import RngStream, TraceSource, as_stream
from .desert import DesertError, DesertParams, desert_pattern, first_deep_in_desert
from .findend import FindEndError, find_end
from .params import ReconParams, derive_params, icbrt_ceil

MAX_RESAMPLES = 64


class PreprocessError(RuntimeError):
    pass


def preprocess(n: int, C: int, rng, m: Optional[int] = None, stats: Optional[dict] = None) -> BitString:
    """Uniform random suffix of length ``ceil(n/2)`` certified to hold no desert.

    Deserts are checked with half-window ``m`` (default ``ceil(n^(1/3))``) and
    pattern length up to ``C``. ``stats['retries']`` receives the resample count.
    """
    rng = as_stream(rng)
    m = icbrt_ceil(n) if m is None else m
    p = DesertParams(m, C)
    length = (n + 1) // 2
    for attempt in range(MAX_RESAMPLES + 1):
        v = BitString.random(length, rng.child(attempt).gen)
        if first_deep_in_desert(v, p) is None:
            if stats is not None:
                stats["retries"] = attempt
            return v
    raise PreprocessError(f"no desert-free suffix after {MAX_RESAMPLES} resamples (m={m}, C={C})")


@dataclass
class Commit:
    """One extension of the committed prefix ``u``."""

    round: int
    r: int
    b: Optional[int]
    length: int
    prefix_ok: Optional[bool] = None


@dataclass
class ReconOutcome:
    x_hat: Optional[BitString]
    failure: Optional[str] = None
    failure_round: Optional[int] = None
    traces_used: int = 0
    rounds: int = 0
    commits: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.x_hat is not None


def _prefix_ok(truth, u: np.ndarray) -> Optional[bool]:
    if truth is None:
        return None
    t = truth.array
    return bool(u.shape[0] <= t.shape[0] and np.array_equal(t[: u.shape[0]], u))


def reconstruct(
    sampler: TraceSource,
    params: ReconParams,
    rng,
    truth=None,
    bma_only: bool = False,
) -> ReconOutcome:
    """Reconstruct the sampler's source from fresh traces.

    ``truth`` (optional) is only used to annotate commits for diagnostics.
    """
    rng = as_stream(rng)
    n = sampler.n
    if params.n != n:
        raise ValueError(f"params derived for n={params.n} but the source has length {n}")
    dp = params.desert()
    m = params.m
    truth = as_bits(truth) if truth is not None else None
    start = sampler.traces_drawn

    def outcome(x_hat=None, reason=None, rnd=None, rounds=0, commits=()):
        return ReconOutcome(x_hat, reason, rnd, sampler.traces_drawn - start, rounds, list(commits))

    z = sampler.draw(params.N, rng.child(0, 0))
    w = run_bma(n, z).w
    if bma_only:
        return outcome(w)
    r = first_deep_in_desert(w, dp)
    if r is None:
        return outcome(w)
    u = w.array[: r + m + 1].copy()
    commits = [Commit(0, r, None, u.shape[0], _prefix_ok(truth, u))]
    max_rounds = math.ceil(n / m)
    for rnd in range(1, max_rounds + 1):
        rr = rng.child(rnd)
        ys = sampler.draw(params.N, rr.child(0))
        try:
            res = find_end(r, BitString(u), ys, sampler, params, rr.child(1))
        except (FindEndError, DesertError) as exc:
            return outcome(reason=f"findend:{type(exc).__name__}", rnd=rnd, rounds=rnd, commits=commits)
        b = res.b
        if b >= n - 1 or b < r + m:
            why = "end-at-boundary" if b >= n - 1 else "end-before-frontier"
            return outcome(reason=why, rnd=rnd, rounds=rnd, commits=commits)
        k = desert_pattern(u, r, dp).k
        ext = np.empty(b + 1, dtype=np.uint8)
        ext[: u.shape[0]] = u
        for i in range(u.shape[0], b + 1):
            ext[i] = ext[i - k]
        u = ext
        assert is_prefix_of_power(u[r - m : b + 1], BitString(u[r - m : r - m + k]))
        commits.append(Commit(rnd, r, b, u.shape[0], _prefix_ok(truth, u)))

        rest = n - b - 1
        suffixes = []
        for y, ell in zip(ys, res.aligns):
            arr = y.bits.array[int(ell) + 1 :]
            suffixes.append(arr[:rest])  # a misaligned trace may run long
        w = run_bma(rest, suffixes).w
        r_star = first_deep_in_desert(w, dp)
        if r_star is None:
            u = np.concatenate((u, w.array))
            commits.append(Commit(rnd, r, b, u.shape[0], _prefix_ok(truth, u)))
            return outcome(BitString(u), rounds=rnd, commits=commits)
        r_new = b + 1 + r_star
        assert r_new - r >= 2 * m, "frontier advanced by less than 2m"
        r = r_new
        u = np.concatenate((u, w.array[: r_star + m + 1]))
        commits.append(Commit(rnd, r, b, u.shape[0], _prefix_ok(truth, u)))
        if u.shape[0] == n:
            return outcome(BitString(u), rounds=rnd, commits=commits)
    return outcome(reason="round-limit", rnd=max_rounds, rounds=max_rounds, commits=commits)


def expected_traces(params: ReconParams, rounds: int) -> int:
    """Trace budget at the given round count: initial BMA plus N + 2 alpha + gamma per round."""
    return params.N + rounds * (params.N + 2 * params.alpha + params.gamma)


def reconstruct_string(x, delta: float, seed: int, overrides=None, bma_only: bool = False):
    """Convenience driver: preprocess, build the sampler and reconstruct ``x``.

    Returns ``(outcome, params, z)`` where ``z = x + v`` is the transmitted string.
    """
    x = as_bits(x)
    root = RngStream(seed)
    base = derive_params(len(x), delta=delta, overrides=overrides)
    v = preprocess(len(x), base.C, root.child(1))
    z = x + v
    params = base.with_n(len(z))
    sampler = TraceSource(z, delta, root.child(2))
    out = reconstruct(sampler, params, root.child(3), truth=z, bma_only=bma_only)
    return out, params, z
