"""Command line entry point (``tracerecon`` / ``python -m tracerecon``)."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import List, Optional

from .channel import RngStream, TraceSource, dump_traces
from .harness import (
    ExperimentConfig,
    emit,
    findend_stats,
    first_desert_instance,
    generate_string,
    read_csv,
    run_trials,
    summarize,
    summary_to_csv,
)
from .oracles import mc_align_bias
from .params import derive_params, parse_overrides
from .pipeline import reconstruct_string


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v]


def _ints(text: str) -> List[int]:
    return [int(float(v)) for v in text.split(",") if v]


def _common(p: argparse.ArgumentParser, grid: bool = False):
    if grid:
        p.add_argument("--n", type=_ints, help="string length(s), comma separated")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--delta", type=_floats, help="deletion rate(s), comma separated")
        g.add_argument("--epsilon", type=_floats, help="rate exponent(s): delta = n^-(1/3+eps)")
    else:
        p.add_argument("--n", type=lambda s: int(float(s)), default=100000)
        g = p.add_mutually_exclusive_group()
        g.add_argument("--delta", type=float)
        g.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--gen", default=None, help="uniform | desert-free | implant[:PAT:LEN:POS] | multi-desert[...]")
    p.add_argument("--override", action="append", default=[], metavar="K=V", help="m, C, N, alpha, gamma, sigma")
    p.add_argument("--out", default=None)


def _delta(args) -> float:
    if args.delta is not None:
        return args.delta
    if args.epsilon is not None:
        return derive_params(args.n, epsilon=args.epsilon).delta
    return 1e-5


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tracerecon", description="Deletion-channel trace reconstruction toolkit")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("reconstruct", help="single reconstruction; prints the estimate or FAILURE")
    _common(p)
    p.add_argument("--bma-only", action="store_true")

    p = sub.add_parser("bench", help="seeded sweep over an (n, delta) grid")
    _common(p, grid=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--format", choices=["csv", "json", "svg-plot"], default="csv")
    p.add_argument("--bma-only", action="store_true", default=None)
    p.add_argument("--config", default=None, help="JSON experiment config; flags take precedence")
    p.add_argument("--omit-timing", action="store_true", default=None, help="leave wall_ms blank")

    p = sub.add_parser("summarize", help="aggregate a bench CSV per (n, delta)")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", default=None)

    p = sub.add_parser("findend-stats", help="per-trace alignment outcomes of one FindEnd call")
    _common(p)

    p = sub.add_parser("align-stats", help="Monte-Carlo bias and exactness of single-trace alignment")
    _common(p)
    p.add_argument("--trials", type=int, default=10000)

    p = sub.add_parser("simulate", help="dump channel traces as <seed>,<stream>,<bits> lines")
    _common(p)
    p.add_argument("--trials", type=int, default=10)
    return ap


def _write(text: str, path: Optional[str]):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = parse_overrides(getattr(args, "override", []))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    seed = 0 if getattr(args, "seed", None) is None else args.seed

    if args.cmd == "reconstruct":
        d = _delta(args)
        base = derive_params(args.n, delta=d, overrides=overrides)
        x = generate_string(args.gen or "multi-desert", args.n, base.desert(), RngStream(seed, (0,)))
        out, params, _ = reconstruct_string(x, d, seed, overrides=overrides, bma_only=args.bma_only)
        for w in params.warnings:
            print(f"warning: {w}", file=sys.stderr)
        ok = out.x_hat is not None and out.x_hat[: args.n] == x
        text = f"{out.x_hat[: args.n]}\n" if out.x_hat is not None else f"FAILURE {out.failure} round={out.failure_round}\n"
        _write(text, args.out)
        print(
            f"match={'yes' if ok else 'no'} rounds={out.rounds} traces_used={out.traces_used}",
            file=sys.stderr,
        )
        return 0 if ok else 1

    if args.cmd == "bench":
        flags = {
            "ns": args.n,
            "deltas": args.delta,
            "epsilons": args.epsilon,
            "trials": args.trials,
            "seed": args.seed,
            "gen": args.gen,
            "overrides": overrides or None,
            "bma_only": args.bma_only,
            "omit_timing": args.omit_timing,
        }
        if args.config:
            cfg = ExperimentConfig.from_json(args.config, **flags)
        else:
            cfg = ExperimentConfig(**{k: v for k, v in flags.items() if v is not None})

        def progress(r):
            print(f"n={r.n} delta={r.delta:g} trial={r.trial} success={r.success}", file=sys.stderr)

        reports = run_trials(cfg, progress)
        text = emit(reports, args.format, args.out)
        if not args.out:
            sys.stdout.write(text)
        return 0

    if args.cmd == "summarize":
        reports = []
        for path in args.inputs:
            reports.extend(read_csv(path))
        _write(summary_to_csv(summarize(reports)), args.out)
        return 0

    if args.cmd == "findend-stats":
        inst = first_desert_instance(args.n, _delta(args), seed, args.gen or "implant", overrides)
        res, rows = findend_stats(inst, seed)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trace_id", "outcome", "location", "last_oracle"])
        w.writerows(rows)
        _write(buf.getvalue(), args.out)
        b = getattr(res, "b", None)
        print(f"end={inst.end} b={b if b is not None else res}", file=sys.stderr)
        return 0

    if args.cmd == "align-stats":
        inst = first_desert_instance(args.n, _delta(args), seed, args.gen or "implant", overrides)
        stats = mc_align_bias(inst.z, inst.end, inst.params, args.trials, seed)
        stats["end"] = inst.end
        stats["window"] = list(stats["window"])
        _write(json.dumps(stats, indent=2) + "\n", args.out)
        return 0

    if args.cmd == "simulate":
        d = _delta(args)
        base = derive_params(args.n, delta=d, overrides=overrides)
        x = generate_string(args.gen or "uniform", args.n, base.desert(), RngStream(seed, (0,)))
        src = TraceSource(x, d, RngStream(seed, (1,)))
        fh = open(args.out, "w") if args.out else sys.stdout
        try:
            dump_traces(fh, seed, "1", src.draw(args.trials))
        finally:
            if args.out:
                fh.close()
        return 0
    return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
