"""Seeded experiment runner: test strings, trial sweeps and report files."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, List, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from . import kernels
from .bitstring import BitString
from .channel import RngStream, TraceSource, as_stream, last_surviving
from .desert import DesertParams, desert_end, desert_pattern, first_deep_in_desert
from .findend import FindEndError, find_end
from .params import derive_params
from .pipeline import preprocess, reconstruct

CSV_HEADER = ["n", "delta", "seed", "trial", "success", "traces_used", "wall_ms", "failure_reason"]
MAX_GEN_TRIES = 64


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class Implant:
    pattern: str
    length: int
    position: int

    @property
    def k(self) -> int:
        return len(self.pattern)


@dataclass(frozen=True)
class GenSpec:
    kind: str  # uniform | desert-free | implant | multi-desert
    implants: tuple = ()


def default_multi_desert(n: int, length: int = 300) -> tuple:
    return tuple(Implant(p, length, int(f * n)) for p, f in (("0", 0.2), ("01", 0.45), ("001", 0.7)))


def parse_gen(text: str, n: int) -> GenSpec:
    """Parse ``uniform``, ``desert-free``, ``implant:PAT:LEN:POS`` or
    ``multi-desert[:PAT:LEN:POS;PAT:LEN:POS...]``."""
    kind, _, rest = text.partition(":")
    if kind in ("uniform", "desert-free"):
        return GenSpec(kind)
    if kind not in ("implant", "multi-desert"):
        raise ValueError(f"unknown generator kind {kind!r}")
    if not rest:
        if kind == "implant":
            return GenSpec(kind, (Implant("01", 300, n // 5),))
        return GenSpec(kind, default_multi_desert(n))
    imps = []
    for part in rest.split(";"):
        pat, length, pos = part.split(":")
        imps.append(Implant(pat, int(length), int(pos)))
    if kind == "implant" and len(imps) != 1:
        raise ValueError("implant takes exactly one PAT:LEN:POS triple")
    return GenSpec(kind, tuple(imps))


def _check_implants(implants: Sequence[Implant], n: int, p: DesertParams):
    last_end = -1
    for imp in sorted(implants, key=lambda i: i.position):
        if not set(imp.pattern) <= {"0", "1"} or not 1 <= imp.k <= p.C:
            raise GenerationError(f"pattern {imp.pattern!r} must be a bitstring of length 1..C={p.C}")
        if imp.length < p.M:
            raise GenerationError(f"implant length {imp.length} is below M={p.M}")
        if imp.position < 1 or imp.position + imp.length + 1 > n:
            raise GenerationError(f"implant at {imp.position} of length {imp.length} does not fit in n={n}")
        if last_end >= 0 and imp.position - last_end < p.M:
            raise GenerationError(f"implant at {imp.position} collides with the previous one")
        last_end = imp.position + imp.length


def _apply(x: np.ndarray, imp: Implant):
    s = np.frombuffer(imp.pattern.encode(), np.uint8) - 48
    k = s.size
    x[imp.position : imp.position + imp.length] = s[np.arange(imp.length) % k]
    # force the run to stop exactly at the implant's edges
    x[imp.position - 1] = 1 - s[k - 1]
    x[imp.position + imp.length] = 1 - s[imp.length % k]


def generate_string(gen, n: int, p: DesertParams, rng) -> BitString:
    """Test string of the requested kind, certified by a full desert scan."""
    if isinstance(gen, str):
        gen = parse_gen(gen, n)
    rng = as_stream(rng)
    if gen.kind == "uniform":
        return BitString.random(n, rng.gen)
    implants = gen.implants if gen.kind in ("implant", "multi-desert") else ()
    if gen.kind == "implant" and len(implants) != 1:
        raise GenerationError("implant needs exactly one implant")
    _check_implants(implants, n, p)
    want = np.zeros(max(n - p.M + 1, 0), dtype=bool)
    for imp in implants:
        want[imp.position : imp.position + imp.length - p.M + 1] = True
    for attempt in range(MAX_GEN_TRIES):
        x = rng.child(attempt).gen.integers(0, 2, size=n, dtype=np.uint8)
        for imp in implants:
            _apply(x, imp)
        if np.array_equal(kernels.periodic_window_starts(x, p.M, p.C), want):
            return BitString(x)
    raise GenerationError(f"could not certify a {gen.kind} string after {MAX_GEN_TRIES} tries")


@dataclass
class ExperimentConfig:
    ns: List[int] = field(default_factory=lambda: [100000])
    deltas: Optional[List[float]] = None
    epsilons: Optional[List[float]] = None
    trials: int = 10
    seed: int = 0
    gen: str = "multi-desert"
    overrides: dict = field(default_factory=dict)
    bma_only: bool = False
    omit_timing: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if (self.deltas is None) == (self.epsilons is None):
            if self.deltas is None:
                self.deltas = [1e-5]
            else:
                raise ValueError("give deltas or epsilons, not both")

    def cells(self):
        for n in self.ns:
            if self.deltas is not None:
                for d in self.deltas:
                    yield n, float(d)
            else:
                for e in self.epsilons:
                    yield n, n ** (-(1.0 / 3.0 + e))

    @classmethod
    def from_json(cls, path: str, **flags) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in flags.items() if v is not None})
        if "deltas" in flags and flags["deltas"] is not None:
            data.pop("epsilons", None)
        if "epsilons" in flags and flags["epsilons"] is not None:
            data.pop("deltas", None)
        return cls(**data)


@dataclass
class TrialReport:
    n: int
    delta: float
    seed: int
    trial: int
    success: bool
    traces_used: int
    wall_ms: Optional[float]
    failure_reason: Optional[str] = None
    rounds: int = 0


def run_trial(n: int, delta: float, seed: int, cell: int, trial: int, cfg: ExperimentConfig) -> TrialReport:
    root = RngStream(seed, (cell, trial))
    t0 = time.perf_counter()
    try:
        base = derive_params(n, delta=delta, overrides=cfg.overrides)
        x = generate_string(cfg.gen, n, base.desert(), root.child(0))
        v = preprocess(n, base.C, root.child(1))
        z = x + v
        params = base.with_n(len(z))
        sampler = TraceSource(z, delta, root.child(2))
        out = reconstruct(sampler, params, root.child(3), bma_only=cfg.bma_only)
        ok = out.x_hat is not None and out.x_hat[:n] == x
        reason = None if ok else (out.failure or "mismatch")
        rep = TrialReport(n, delta, seed, trial, ok, out.traces_used, None, reason, out.rounds)
    except Exception as exc:  # recorded per trial, the sweep carries on
        rep = TrialReport(n, delta, seed, trial, False, 0, None, f"error:{type(exc).__name__}")
    if not cfg.omit_timing:
        rep.wall_ms = (time.perf_counter() - t0) * 1000.0
    return rep


def run_trials(cfg: ExperimentConfig, progress=None) -> List[TrialReport]:
    reports = []
    for ci, (n, d) in enumerate(cfg.cells()):
        for t in range(cfg.trials):
            rep = run_trial(n, d, cfg.seed, ci, t, cfg)
            reports.append(rep)
            if progress is not None:
                progress(rep)
    return reports


def _csv_row(r: TrialReport) -> list:
    return [
        r.n,
        repr(float(r.delta)),
        r.seed,
        r.trial,
        int(bool(r.success)),
        r.traces_used,
        "" if r.wall_ms is None else f"{r.wall_ms:.1f}",
        r.failure_reason or "",
    ]


def reports_to_csv(reports: Iterable[TrialReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(_csv_row(r))
    return buf.getvalue()


def read_csv(path: str) -> List[TrialReport]:
    out = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {rd.fieldnames}")
        for row in rd:
            out.append(
                TrialReport(
                    int(row["n"]),
                    float(row["delta"]),
                    int(row["seed"]),
                    int(row["trial"]),
                    row["success"] == "1",
                    int(row["traces_used"]),
                    float(row["wall_ms"]) if row["wall_ms"] else None,
                    row["failure_reason"] or None,
                )
            )
    return out


def summarize(reports: Sequence[TrialReport]) -> List[dict]:
    """One aggregate row per (n, delta) cell, in first-seen order."""
    cells = {}
    for r in reports:
        cells.setdefault((r.n, r.delta), []).append(r)
    rows = []
    for (n, d), rs in cells.items():
        wall = [r.wall_ms for r in rs if r.wall_ms is not None]
        rows.append(
            {
                "n": n,
                "delta": d,
                "trials": len(rs),
                "successes": sum(r.success for r in rs),
                "success_rate": sum(r.success for r in rs) / len(rs),
                "mean_traces": float(np.mean([r.traces_used for r in rs])),
                "mean_wall_ms": float(np.mean(wall)) if wall else None,
            }
        )
    return rows


def summary_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    cols = ["n", "delta", "trials", "successes", "success_rate", "mean_traces", "mean_wall_ms"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow(["" if row[c] is None else row[c] for c in cols])
    return buf.getvalue()


def render_svg(reports: Sequence[TrialReport], width: int = 640, height: int = 400) -> str:
    """Success rate against delta (log axis), one line per n, points labelled with trial counts."""
    rows = summarize(reports)
    pad_l, pad_r, pad_t, pad_b = 60, 20, 30, 50
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b
    ds = [r["delta"] for r in rows if r["delta"] > 0]
    lo = math.log10(min(ds)) if ds else -6.0
    hi = math.log10(max(ds)) if ds else -4.0
    if hi - lo < 1e-9:
        lo, hi = lo - 0.5, hi + 0.5

    def px(d):
        v = math.log10(d) if d > 0 else lo
        return pad_l + (v - lo) / (hi - lo) * pw

    def py(rate):
        return pad_t + (1.0 - rate) * ph

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="black"/>',
        f'<text x="{pad_l + pw / 2}" y="{height - 10}" text-anchor="middle" font-size="12">delta (log scale)</text>',
        f'<text x="15" y="{pad_t + ph / 2}" font-size="12" transform="rotate(-90 15 {pad_t + ph / 2})" '
        'text-anchor="middle">success rate</text>',
    ]
    for tick in (0.0, 0.5, 1.0):
        parts.append(
            f'<text x="{pad_l - 6}" y="{py(tick) + 4:.1f}" text-anchor="end" font-size="10">{tick:.1f}</text>'
        )
    by_n = {}
    for r in rows:
        by_n.setdefault(r["n"], []).append(r)
    for i, (n, rs) in enumerate(sorted(by_n.items())):
        col = colors[i % len(colors)]
        rs = sorted(rs, key=lambda r: r["delta"])
        pts = " ".join(f"{px(r['delta']):.1f},{py(r['success_rate']):.1f}" for r in rs)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        for r in rs:
            x, y = px(r["delta"]), py(r["success_rate"])
            parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="{col}"/>')
            parts.append(f'<text x="{x + 4:.1f}" y="{y - 4:.1f}" font-size="9">{r["trials"]}</text>')
            parts.append(
                f'<text x="{x:.1f}" y="{pad_t + ph + 14}" text-anchor="middle" font-size="9">{r["delta"]:.1e}</text>'
            )
        parts.append(f'<text x="{pad_l + pw - 80}" y="{pad_t + 14 * (i + 1)}" font-size="11" fill="{col}">n={escape(str(n))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit(reports: Sequence[TrialReport], fmt: str, path: Optional[str] = None) -> str:
    """Serialize reports as ``csv``, ``json`` or ``svg-plot``; write to ``path`` when given."""
    if fmt == "csv":
        text = reports_to_csv(reports)
    elif fmt == "json":
        text = json.dumps([asdict(r) for r in reports], indent=2) + "\n"
    elif fmt == "svg-plot":
        text = render_svg(reports)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        try:
            parent = os.path.dirname(os.path.abspath(path))
            os.makedirs(parent, exist_ok=True)
            with open(path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {fmt} output to {path}: {exc}") from exc
    return text


@dataclass
class DesertInstance:
    """A preprocessed string with ground truth for its first desert."""

    z: BitString
    params: object
    r: int
    end: int
    k: int


def first_desert_instance(n: int, delta: float, seed: int, gen: str = "implant", overrides=None) -> DesertInstance:
    root = RngStream(seed)
    base = derive_params(n, delta=delta, overrides=overrides)
    x = generate_string(gen, n, base.desert(), root.child(0))
    z = x + preprocess(n, base.C, root.child(1))
    params = base.with_n(len(z))
    dp = params.desert()
    r = first_deep_in_desert(z, dp)
    if r is None:
        raise GenerationError("generated string has no desert")
    k = desert_pattern(z, r, dp).k
    return DesertInstance(z, params, r, desert_end(z, r, k, params.m), k)


def findend_stats(inst: DesertInstance, seed: int) -> tuple:
    """Run FindEnd once on ``inst`` and return ``(result_or_error, rows)``.

    Each row is ``(trace_id, outcome, location, last_oracle)`` for one of the
    N given traces.
    """
    root = RngStream(seed, (7,))
    p = inst.params
    sampler = TraceSource(inst.z, p.delta, root.child(0))
    given = sampler.draw(p.N, root.child(1))
    u = BitString(inst.z.array[: inst.r + p.m + 1])
    try:
        res = find_end(inst.r, u, given, sampler, p, root.child(2))
    except FindEndError as exc:
        return exc, []
    rows = []
    for i, (t, ell) in enumerate(zip(given, res.aligns)):
        rows.append((i, "nil" if ell < 0 else "aligned", int(ell), last_surviving(t, inst.end)))
    return res, rows
