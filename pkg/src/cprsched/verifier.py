"""Independent replay of a run's placement intervals.

Only the trace (placement intervals, periods, offsets, graces) is consulted;
nothing here touches a live forest.
"""

from __future__ import annotations

import csv
import json
import os
from bisect import bisect_right
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import UnsupportedInput, as_number, ceil_pow2, is_pow2
from .metrics import h_of

FULL_REPLAY_LIMIT = 4000


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class Span:
    """One placement interval as seen by the verifier."""

    client: int
    station: int
    lane: int
    period: int
    offset: int
    start: int
    end: int


@dataclass
class ReplayInput:
    horizon: int
    spans: List[Span]
    life: Dict[int, Tuple[int, int, float, float]]  # client -> (a, d, w, b)
    graces: List[Tuple[int, int]]  # (t, client)


@dataclass
class FeasibilityReport:
    laxity_violations: List[Tuple[int, int, int]] = field(default_factory=list)
    bandwidth_overflows: List[Tuple[int, int, float]] = field(default_factory=list)
    lane_conflicts: List[Tuple[int, int, int, int]] = field(default_factory=list)
    grace_usage: Dict[Tuple[int, int], int] = field(default_factory=dict)
    slots_checked: int = 0
    sampled: bool = False

    @property
    def ok(self) -> bool:
        return not (self.laxity_violations or self.bandwidth_overflows or self.lane_conflicts)

    @property
    def graces_used(self) -> int:
        return sum(self.grace_usage.values())

    def to_text(self) -> str:
        out = ["kind,a,b,c,d"]
        for c, s, g in self.laxity_violations:
            out.append(f"laxity,{c},{s},{g},")
        for st, t, agg in self.bandwidth_overflows:
            out.append(f"bandwidth,{st},{t},{agg:.12g},")
        for st, lane, t, n in self.lane_conflicts:
            out.append(f"lane,{st},{lane},{t},{n}")
        for (c, t), used in sorted(self.grace_usage.items()):
            out.append(f"grace,{c},{t},{used},")
        return "\n".join(out) + "\n"

    def summary(self) -> str:
        mode = "sampled" if self.sampled else "full"
        return (
            f"{mode} replay over {self.slots_checked} slots: "
            f"{len(self.laxity_violations)} laxity violations, "
            f"{len(self.bandwidth_overflows)} bandwidth overflows, "
            f"{len(self.lane_conflicts)} lane conflicts, "
            f"{self.graces_used}/{len(self.grace_usage)} graces used"
        )


# ------------------------------------------------------------ trace input

def from_trace(trace) -> ReplayInput:
    """Flatten an in-memory RunTrace."""
    spans = [
        Span(iv.client, iv.placement.station_uid, iv.placement.lane, iv.placement.period,
             iv.placement.offset, iv.start, iv.end)
        for iv in trace.intervals
    ]
    life = {c.id: (c.arrival, c.departure, c.laxity, c.bandwidth) for c in trace.clients.values()}
    graces = [(g.t, g.client) for g in trace.graces]
    return ReplayInput(trace.horizon, spans, life, graces)


def _rows(path: str):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


def read_trace(directory: str) -> ReplayInput:
    """Load the CSVs written by the engine."""
    try:
        with open(os.path.join(directory, "run.json")) as fh:
            horizon = int(json.load(fh)["horizon"])
    except (OSError, KeyError, ValueError) as exc:
        raise TraceError(f"run.json: {exc}") from None
    spans, life, graces = [], {}, []
    name = os.path.join(directory, "placements.csv")
    for lineno, row in _rows(name):
        try:
            cid = int(row["client"])
            spans.append(Span(cid, int(row["station"]), int(row["lane"]), int(row["period"]),
                              int(row["offset"]), int(row["start"]), int(row["end"])))
            life[cid] = (int(row["arrival"]), int(row["departure"]),
                         as_number(row["w"]), as_number(row["b"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceError(f"placements.csv row {lineno}: {exc}") from None
    for lineno, row in _rows(os.path.join(directory, "graces.csv")):
        try:
            graces.append((int(row["t"]), int(row["client"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceError(f"graces.csv row {lineno}: {exc}") from None
    return ReplayInput(horizon, spans, life, graces)


def _transmissions(span: Span) -> np.ndarray:
    first = span.start + (span.offset - span.start) % span.period
    return np.arange(first, span.end + 1, span.period, dtype=np.int64)


# ----------------------------------------------------------------- replay

def verify_schedule(trace, B: float = 1, window: Optional[int] = None) -> FeasibilityReport:
    """Check laxity windows and per-station capacity slot by slot.

    ``trace`` is a RunTrace, a trace directory or a ReplayInput.  Laxity gaps
    are always checked over whole lives.  The capacity check covers every slot
    unless ``window`` is given (or the run has more than 4000 clients), in
    which case it covers ``window`` slots (default: twice the largest period)
    after every grace time.
    """
    if isinstance(trace, ReplayInput):
        data = trace
    elif isinstance(trace, (str, os.PathLike)):
        data = read_trace(os.fspath(trace))
    else:
        data = from_trace(trace)
    report = FeasibilityReport()

    per_client: Dict[int, List[np.ndarray]] = defaultdict(list)
    sta, lane, slot, bw = [], [], [], []
    for span in data.spans:
        if span.client not in data.life:
            raise TraceError(f"placement of unknown client {span.client}")
        ts = _transmissions(span)
        per_client[span.client].append(ts)
        sta.append(np.full(ts.size, span.station, dtype=np.int64))
        lane.append(np.full(ts.size, span.lane, dtype=np.int64))
        slot.append(ts)
        bw.append(np.full(ts.size, float(data.life[span.client][3])))

    graces_of: Dict[int, List[int]] = defaultdict(list)
    for t, cid in data.graces:
        graces_of[cid].append(t)
        report.grace_usage[(cid, t)] = 0
    for times in graces_of.values():
        times.sort()

    for cid, (a, d, w, _) in sorted(data.life.items()):
        end = min(d, data.horizon)
        parts = per_client.get(cid, [])
        ts = np.concatenate([[a - 1], *parts, [end + 1]]) if parts else np.array([a - 1, end + 1])
        ts.sort()
        gaps = np.diff(ts)
        bad = np.nonzero(gaps - 1 >= w)[0]
        spare = list(graces_of.get(cid, ()))
        for i in bad:
            lo, hi = int(ts[i]), int(ts[i + 1])
            # a grace at time g excuses one gap with lo < g <= hi
            j = bisect_right(spare, lo)
            if j < len(spare) and spare[j] <= hi:
                report.grace_usage[(cid, spare.pop(j))] = 1
                continue
            report.laxity_violations.append((cid, lo + 1, hi - lo - 1))

    if not slot:
        return report
    sta, lane, slot, bw = (np.concatenate(x) for x in (sta, lane, slot, bw))
    if not slot.size:
        report.slots_checked = data.horizon
        return report
    report.sampled = window is not None or len(data.life) > FULL_REPLAY_LIMIT
    if report.sampled:
        span_len = window or 2 * max(s.period for s in data.spans)
        mask = np.zeros(data.horizon + 2, dtype=bool)
        for t, _ in data.graces:
            mask[t:min(t + span_len, data.horizon + 1)] = True
        keep = mask[slot]
        sta, lane, slot, bw = sta[keep], lane[keep], slot[keep], bw[keep]
        report.slots_checked = int(np.count_nonzero(mask))
    else:
        report.slots_checked = data.horizon

    stride = data.horizon + 2
    key = sta * stride + slot
    uniq, inverse = np.unique(key, return_inverse=True)
    load = np.bincount(inverse, weights=bw)
    for k in np.nonzero(load > B + 1e-9)[0]:
        report.bandwidth_overflows.append((int(uniq[k] // stride), int(uniq[k] % stride), float(load[k])))

    lanes_max = int(lane.max()) + 1
    key = (sta * lanes_max + lane) * stride + slot
    uniq, counts = np.unique(key, return_counts=True)
    for k in np.nonzero(counts > 1)[0]:
        rest, t = divmod(int(uniq[k]), stride)
        s, ln = divmod(rest, lanes_max)
        report.lane_conflicts.append((s, ln, t, int(counts[k])))
    return report


# ---------------------------------------------------------- forest recount

def _parse_label(label: str) -> Tuple[float, float, int]:
    lo, hi, lanes = label.split(":")
    return as_number(lo), float(hi) if hi == "inf" else as_number(hi), int(lanes)


def verify_class_invariant(lines: Iterable[str]) -> List[str]:
    """Recount available leaves and empty-anchor stations from a forest dump.

    Each line is ``label station lane anchor path client period offset``.
    """
    occupied: Dict[str, Dict[Tuple[int, int, int], List[str]]] = defaultdict(lambda: defaultdict(list))
    problems: List[str] = []
    for line in lines:
        try:
            label, st, lane, anchor, path, cid, period, offset = line.split()
            lo = _parse_label(label)[0]
            st, lane, anchor, period, offset = map(int, (st, lane, anchor, period, offset))
        except ValueError:
            problems.append(f"unparseable dump line {line!r}")
            continue
        path = "" if path == "-" else path
        A = ceil_pow2(lo)
        want_period = A * 2 ** len(path)
        want_offset = anchor + sum(A << j for j, bit in enumerate(path) if bit == "1")
        if (period, offset) != (want_period, want_offset):
            problems.append(f"{label} client {cid}: period/offset {period}/{offset}, "
                            f"expected {want_period}/{want_offset}")
        occupied[label][(st, lane, anchor)].append(path)

    for label, roots in occupied.items():
        lo, _, lanes = _parse_label(label)
        capacity = lanes * ceil_pow2(lo)
        free_at: Counter = Counter()
        used: Counter = Counter()
        for (st, lane, anchor), paths in sorted(roots.items()):
            used[st] += 1
            leaves = set(paths)
            if len(leaves) != len(paths):
                problems.append(f"{label} station {st} lane {lane} anchor {anchor}: shared leaf")
            inner = {p[:i] for p in leaves for i in range(len(p))}
            clash = inner & leaves
            if clash:
                problems.append(f"{label} station {st} anchor {anchor}: client on internal node {min(clash)!r}")
            for p in inner:
                for bit in "01":
                    child = p + bit
                    if child not in inner and child not in leaves:
                        free_at[len(child)] += 1
        for depth, n in sorted(free_at.items()):
            if n > 1:
                problems.append(f"{label}: {n} available leaves at depth {depth}")
        partial = sorted(st for st, n in used.items() if n < capacity)
        if len(partial) > 1:
            problems.append(f"{label}: stations {partial} all have empty anchors")
    return problems


# --------------------------------------------------------------- WS oracle

def ws_opt(clients: Sequence) -> int:
    """Optimal station count when b = B and every laxity is a power of two."""
    for c in clients:
        if c.bandwidth != c.capacity or not is_pow2(c.laxity):
            raise UnsupportedInput(f"client {c.id} is outside the windows-scheduling case")
    return h_of(clients, "time")
