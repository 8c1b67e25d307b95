"""Slot-by-slot simulation driver, trace files and batch runs."""

from __future__ import annotations

import csv
import json
import os
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

from . import __version__
from .baselines import CR, PR
from .classifier import Factor
from .core import Client, fmt_number
from .cpr import CPR, GraceRecord, Protocol, ReallocationEvent, laxity_grace
from .forest import COUNT, WEIGHT, Placement
from .metrics import MetricsTracker, SlotRow, alpha_series, beta_series, realloc_cost
from .workloads import EventSchedule, WorkloadSpec, gen_lemma1, gen_lemma2, gen_lemma3, gen_random

ALGOS = ("cpr", "pr", "pr-weight", "cr")


def fmt(x) -> str:
    """Ratios and weights: 12 significant digits."""
    if x is None:
        return ""
    return format(float(x), ".12g")


def make_protocol(algo: str, factor="log", capacity: float = 1) -> Protocol:
    if algo == "cpr":
        return CPR(Factor.parse(factor) if isinstance(factor, str) else factor, capacity)
    if algo == "pr":
        return PR(COUNT)
    if algo == "pr-weight":
        return PR(WEIGHT)
    if algo == "cr":
        return CR()
    raise ValueError(f"unknown algorithm {algo!r}; pick one of {ALGOS}")


@dataclass
class RunConfig:
    algo: str = "cpr"
    factor: str = "log"
    rho: float = 1
    workload: Optional[WorkloadSpec] = None
    schedule: Optional[EventSchedule] = None
    schedule_path: Optional[str] = None
    check_invariants: bool = False
    out: Optional[str] = None

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algorithm {self.algo!r}; pick one of {ALGOS}")
        Factor.parse(self.factor)

    def load_schedule(self) -> EventSchedule:
        if self.schedule is not None:
            return self.schedule
        if self.schedule_path is not None:
            return EventSchedule.read(self.schedule_path)
        if self.workload is not None:
            return gen_random(self.workload)
        raise ValueError("config needs a workload spec or a schedule")

    def echo(self) -> dict:
        d = {"algo": self.algo, "rho": self.rho}
        if self.algo == "cpr":
            d["factor"] = Factor.parse(self.factor).value
        if self.workload is not None:
            d["workload"] = asdict(self.workload)
        if self.schedule_path is not None:
            d["schedule"] = os.path.basename(self.schedule_path)
        return d


@dataclass
class Interval:
    client: int
    placement: Placement
    start: int
    end: int = -1


@dataclass
class RunTrace:
    header: dict
    clients: Dict[int, Client]
    rows: List[SlotRow] = field(default_factory=list)
    events: List[ReallocationEvent] = field(default_factory=list)
    intervals: List[Interval] = field(default_factory=list)
    graces: List[GraceRecord] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.header["horizon"]

    def beta(self):
        return beta_series(self.rows)

    def alpha(self):
        return alpha_series(self.rows)


def run(config: RunConfig, schedule: Optional[EventSchedule] = None) -> RunTrace:
    """Drive one protocol over a schedule.

    Slot ``t``: clients whose last slot was ``t - 1`` leave (each departure is
    consolidated before the next), arrivals of ``t`` are placed, then the
    protocol's end-of-slot hook runs.  Everything that moved in between forms
    the slot's single reallocation event.
    """
    from .verifier import verify_class_invariant

    sched = schedule or config.load_schedule()
    proto = make_protocol(config.algo, config.factor)
    tracker = MetricsTracker(config.rho)
    header = {
        "version": __version__,
        "config": config.echo(),
        "rng": sched.rng,
        "seed": sched.seed,
        "horizon": sched.horizon,
        "clients": len(sched.clients),
    }
    trace = RunTrace(header, {c.id: c for c in sched.clients})

    arriving = defaultdict(list)
    leaving = defaultdict(list)
    for c in sched.clients:
        arriving[c.arrival].append(c)
        leaving[c.departure + 1].append(c)

    current: Dict[int, Interval] = {}
    for t in range(1, sched.horizon + 1):
        gone = sorted(leaving.get(t, ()), key=lambda c: c.id)
        new = sorted(arriving.get(t, ()), key=lambda c: c.id)
        dirty = set()
        moves = []
        for c in gone:
            dirty.add(proto.home[c.id])
            tracker.departed(c)
            moves.extend(proto.depart(c.id, t))
            iv = current.pop(c.id)
            iv.end = t - 1
        for c in new:
            tracker.arrived(c)
            proto.arrive(c, t)
        population = len(current) + len(new)
        moves.extend(proto.end_slot(t, population))

        event = ReallocationEvent(t, moves)
        for cid in sorted({c for m in moves for c in m.clients}):
            iv = current.get(cid)
            if iv is None:
                continue
            now = proto.placement(cid)
            dirty.add(proto.home[cid])
            if now.position != iv.placement.position:
                event.relocated[cid] = (iv.placement, now)
                iv.end = t - 1
                current[cid] = Interval(cid, now, t)
                trace.intervals.append(current[cid])
                trace.graces.append(laxity_grace(iv.placement, now, t))
        for c in new:
            dirty.add(proto.home[c.id])
            current[c.id] = Interval(c.id, proto.placement(c.id), t)
            trace.intervals.append(current[c.id])

        R = realloc_cost((trace.clients[c].laxity for c in event.relocated), config.rho)
        event.cost = R
        if event.relocated:
            trace.events.append(event)
        tracker.close_slot(
            t, proto.station_count(), proto.class_count(), R, len(event.relocated),
            arrivals=len(new), departures=len(gone),
        )
        if config.check_invariants and dirty:
            for forest in dirty:
                for v in verify_class_invariant(forest.dump()):
                    trace.violations.append(f"t={t}: {v}")

    for iv in current.values():
        iv.end = sched.horizon
    trace.intervals.sort(key=lambda iv: (iv.client, iv.start))
    trace.rows = tracker.rows
    return trace


# ------------------------------------------------------------------- output

METRIC_COLUMNS = ["t", "S", "H_time", "H_load", "Gamma", "R", "D", "ratio", "realloc_count"]


def write_trace(trace: RunTrace, out: str) -> None:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "run.json"), "w") as fh:
        json.dump(trace.header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out, "metrics.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in trace.rows:
            w.writerow([r.t, r.S, r.H_time, r.H_load, r.gamma, fmt(r.R), fmt(r.D),
                        fmt(r.ratio), r.realloc_count])
    with open(os.path.join(out, "events.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "client_or_subtree", "from", "to", "cost"])
        rho = trace.header["config"]["rho"]
        for ev in trace.events:
            for cid, (old, new) in sorted(ev.relocated.items()):
                cost = realloc_cost([trace.clients[cid].laxity], rho)
                w.writerow([ev.t, cid, old.label(), new.label(), fmt(cost)])
    with open(os.path.join(out, "placements.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["client", "station", "class", "lane", "anchor", "path", "period",
                    "offset", "start", "end", "arrival", "departure", "w", "b"])
        for iv in trace.intervals:
            p, c = iv.placement, trace.clients[iv.client]
            w.writerow([iv.client, p.station_uid, p.cls, p.lane, p.anchor, p.path or "-",
                        p.period, p.offset, iv.start, iv.end, c.arrival, c.departure,
                        fmt_number(c.laxity), fmt_number(c.bandwidth)])
    with open(os.path.join(out, "graces.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "client", "from", "to"])
        for g in trace.graces:
            w.writerow([g.t, g.client, g.source, g.target])


# -------------------------------------------------------------------- batch

SUMMARY_COLUMNS = [
    "name", "algo", "factor", "laxity", "arrivals", "n", "wmax", "seed", "status",
    "slots", "events", "beta_max", "beta_mean", "beta_std", "beta_mean_plus_std",
    "pct_below4", "pct_below4_load", "alpha_max", "anomalies", "seconds", "error",
]


def config_from_dict(entry: dict) -> RunConfig:
    """Build a run from one batch-matrix entry.

    Keys: algo, factor, rho, and either a random workload (n, wmax, laxity,
    arrivals, lambda, seed, bandwidth), an ``adversary`` block
    ({"lemma": 1|2|3, ...}) or a ``schedule`` path.
    """
    algo = entry.get("algo", "cpr")
    factor = entry.get("factor", "log")
    rho = entry.get("rho", 1)
    if "schedule" in entry:
        return RunConfig(algo, factor, rho, schedule_path=entry["schedule"])
    if "adversary" in entry:
        return RunConfig(algo, factor, rho, schedule=adversary(**entry["adversary"]))
    spec = WorkloadSpec(
        n=int(entry["n"]), w_max=int(entry.get("wmax", 1024)),
        laxity=entry.get("laxity", "uniform"), arrivals=entry.get("arrivals", "uniform"),
        lam=float(entry.get("lambda", 0.7)), seed=int(entry.get("seed", 0)),
        bandwidth=entry.get("bandwidth", "geometric"),
    )
    return RunConfig(algo, factor, rho, workload=spec)


def adversary(lemma: int, rounds: int = 20, d: int = 3, x: int = 1, w: int = 64, seed: int = 0):
    lemma = int(lemma)
    if lemma == 1:
        return gen_lemma1(rounds)
    if lemma == 2:
        return gen_lemma2(d)
    if lemma == 3:
        return gen_lemma3(x, w, seed)
    raise ValueError(f"unknown lemma {lemma}")


def summarize(entry: dict) -> dict:
    row = {k: "" for k in SUMMARY_COLUMNS}
    row.update({k: entry.get(k, "") for k in ("name", "algo", "factor", "laxity", "arrivals", "n", "seed")})
    row["wmax"] = entry.get("wmax", "")
    start = time.perf_counter()
    try:
        trace = run(config_from_dict(entry))
    except Exception as exc:  # noqa: BLE001 - one bad run must not stop the batch
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        return row
    beta, alpha = trace.beta(), trace.alpha()
    row.update(
        status="ok",
        slots=len(trace.rows),
        events=len(beta.ratios),
        beta_max=fmt(beta.max),
        beta_mean=fmt(beta.mean) if beta.ratios else "",
        beta_std=fmt(beta.std) if beta.ratios else "",
        beta_mean_plus_std=fmt(beta.mean + beta.std) if beta.ratios else "",
        pct_below4=fmt(alpha.pct_below(4.0)),
        pct_below4_load=fmt(alpha.pct_below(4.0, "load")),
        alpha_max=fmt(alpha.max),
        anomalies=len(beta.anomalies),
        seconds=f"{time.perf_counter() - start:.2f}",
    )
    return row


def batch(entries: Sequence[dict], jobs: int = 1) -> List[dict]:
    if jobs <= 1:
        return [summarize(e) for e in entries]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(summarize, entries))


def write_summary(rows: Sequence[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
