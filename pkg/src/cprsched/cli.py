"""Command line entry point: generate, simulate, verify, adversary, batch."""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from typing import List, Optional

from .classifier import Factor
from .engine import ALGOS, RunConfig, adversary, batch, run, write_summary, write_trace
from .workloads import ARRIVAL_DISTS, LAXITY_DISTS, EventSchedule, WorkloadSpec, gen_random


def _workload_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=4000)
    p.add_argument("--wmax", type=int, default=1024)
    p.add_argument("--laxity", choices=LAXITY_DISTS, default="uniform")
    p.add_argument("--arrivals", choices=ARRIVAL_DISTS, default="uniform")
    p.add_argument("--lambda", dest="lam", type=float, default=0.7)
    p.add_argument("--bandwidth", choices=("geometric", "full"), default="geometric")
    p.add_argument("--seed", type=int, default=0)


def _spec(args) -> WorkloadSpec:
    return WorkloadSpec(args.n, args.wmax, args.laxity, args.arrivals, args.lam, args.seed, args.bandwidth)


def _emit(schedule: EventSchedule, out: Optional[str]) -> None:
    if out:
        schedule.write(out)
    else:
        sys.stdout.write(schedule.to_text())


def cmd_generate(args) -> int:
    _emit(gen_random(_spec(args)), args.out)
    return 0


def cmd_adversary(args) -> int:
    _emit(adversary(args.lemma, rounds=args.rounds, d=args.d, x=args.x, w=args.w, seed=args.seed), args.out)
    return 0


def cmd_simulate(args) -> int:
    if args.schedule:
        config = RunConfig(args.algo, args.factor, args.rho, schedule_path=args.schedule,
                           check_invariants=args.check_invariants, out=args.out)
    else:
        config = RunConfig(args.algo, args.factor, args.rho, workload=_spec(args),
                           check_invariants=args.check_invariants, out=args.out)
    trace = run(config)
    if args.out:
        write_trace(trace, args.out)
    beta, alpha = trace.beta(), trace.alpha()
    print(f"slots={len(trace.rows)} events={len(beta.ratios)} "
          f"beta_max={float(beta.max) if beta.ratios else 0:.12g} "
          f"alpha_max={alpha.max:.12g} pct_below4={alpha.pct_below(4.0):.12g}")
    for v in trace.violations:
        print(f"invariant: {v}", file=sys.stderr)
    return 1 if trace.violations else 0


def cmd_verify(args) -> int:
    from .verifier import verify_schedule

    report = verify_schedule(args.trace, args.capacity, args.window)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_text())
    print(report.summary())
    return 0 if report.ok else 1


def expand_matrix(doc) -> List[dict]:
    """A list of run entries, or {"base": {...}, "grid": {key: [values]}}."""
    if isinstance(doc, list):
        return [dict(e) for e in doc]
    base, grid = doc.get("base", {}), doc.get("grid", {})
    keys = sorted(grid)
    entries = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        e = dict(base)
        e.update(zip(keys, combo))
        e.setdefault("name", "-".join(f"{v}" for v in combo) or "run")
        entries.append(e)
    return entries


def cmd_batch(args) -> int:
    with open(args.matrix) as fh:
        entries = expand_matrix(json.load(fh))
    rows = batch(entries, args.jobs)
    write_summary(rows, args.out)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows)} runs, {failed} failed -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cprsched", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="random workload -> schedule file")
    _workload_flags(p)
    p.add_argument("--out", help="schedule file (default: stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("adversary", help="lemma schedule -> schedule file")
    p.add_argument("--lemma", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--x", type=int, default=1)
    p.add_argument("--w", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_adversary)

    p = sub.add_parser("simulate", help="schedule + algorithm -> trace CSVs")
    p.add_argument("--schedule", help="schedule file; otherwise generate from the workload flags")
    p.add_argument("--algo", choices=ALGOS, default="cpr")
    p.add_argument("--factor", choices=[f.value for f in Factor], default="log")
    p.add_argument("--rho", type=float, default=1)
    p.add_argument("--check-invariants", action="store_true")
    p.add_argument("--out", help="trace directory")
    _workload_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="trace directory -> feasibility report")
    p.add_argument("trace")
    p.add_argument("--capacity", type=float, default=1)
    p.add_argument("--window", type=int)
    p.add_argument("--out", help="report file")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("batch", help="config matrix -> summary CSV")
    p.add_argument("matrix")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="summary.csv")
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "rho", None) is not None and float(args.rho).is_integer():
        args.rho = int(args.rho)
    return args.func(args)
