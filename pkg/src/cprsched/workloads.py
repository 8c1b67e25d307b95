"""Client workloads: the randomized study scenarios and the adversarial lemma schedules.

Schedule files look like::

    # sa-schedule v1, rng=numpy-pcg64, seed=7, horizon=8000
    t,kind,client,w,b
    1,arrival,0,16,0.25
    ...

A departure row carries the client's last active slot ``d``; it is removed at
the beginning of slot ``d + 1``.  Every client has both rows.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .core import Client, DomainError, as_number, floor_log2, fmt_number, is_pow2

RNG_ID = "numpy-pcg64"
HEADER = "# sa-schedule v1"
LAXITY_DISTS = ("uniform", "small", "large")
ARRIVAL_DISTS = ("uniform", "batched", "poisson")
BIAS = 0.7


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class WorkloadSpec:
    n: int
    w_max: int = 1024
    laxity: str = "uniform"
    arrivals: str = "uniform"
    lam: float = 0.7
    seed: int = 0
    bandwidth: str = "geometric"  # or "full" for windows scheduling

    def __post_init__(self):
        if self.n < 0:
            raise DomainError("n must be non-negative")
        if not is_pow2(self.w_max):
            raise DomainError("w_max must be a power of two")
        if self.laxity not in LAXITY_DISTS:
            raise DomainError(f"laxity distribution must be one of {LAXITY_DISTS}")
        if self.arrivals not in ARRIVAL_DISTS:
            raise DomainError(f"arrival distribution must be one of {ARRIVAL_DISTS}")
        if self.bandwidth not in ("geometric", "full"):
            raise DomainError("bandwidth rule must be 'geometric' or 'full'")

    @property
    def horizon(self) -> int:
        return 2 * self.n


@dataclass
class EventSchedule:
    clients: List[Client]
    horizon: int
    rng: str = "none"
    seed: int = 0
    extra: Dict[str, str] = field(default_factory=dict)

    def events(self) -> List[Tuple[int, str, Client]]:
        rows = [(c.arrival, "arrival", c) for c in self.clients]
        rows += [(c.departure, "departure", c) for c in self.clients]
        rows.sort(key=lambda r: (r[0], r[1] != "arrival", r[2].id))
        return rows

    def to_text(self) -> str:
        buf = io.StringIO()
        head = f"{HEADER}, rng={self.rng}, seed={self.seed}, horizon={self.horizon}"
        for k, v in self.extra.items():
            head += f", {k}={v}"
        buf.write(head + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "kind", "client", "w", "b"])
        for t, kind, c in self.events():
            w.writerow([t, kind, c.id, fmt_number(c.laxity), fmt_number(c.bandwidth)])
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "EventSchedule":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(HEADER):
            raise ScheduleError("row 1: missing '# sa-schedule v1' header")
        meta = {}
        for part in lines[0][len(HEADER):].split(","):
            if "=" in part:
                k, v = part.strip().split("=", 1)
                meta[k] = v
        reader = csv.reader(lines[1:])
        try:
            cols = next(reader)
        except StopIteration:
            raise ScheduleError("row 2: missing column header") from None
        if [c.strip() for c in cols] != ["t", "kind", "client", "w", "b"]:
            raise ScheduleError(f"row 2: unexpected columns {cols}")
        arrivals: Dict[int, tuple] = {}
        departures: Dict[int, int] = {}
        for lineno, row in enumerate(reader, start=3):
            if not row:
                continue
            try:
                t, kind, cid, w, b = row
                t, cid = int(t), int(cid)
                w, b = as_number(w), as_number(b)
            except ValueError as exc:
                raise ScheduleError(f"row {lineno}: {exc}") from None
            if kind == "arrival":
                if cid in arrivals:
                    raise ScheduleError(f"row {lineno}: client {cid} arrives twice")
                arrivals[cid] = (t, w, b)
            elif kind == "departure":
                if cid not in arrivals:
                    raise ScheduleError(f"row {lineno}: departure of unknown client {cid}")
                if cid in departures:
                    raise ScheduleError(f"row {lineno}: client {cid} departs twice")
                departures[cid] = t
            else:
                raise ScheduleError(f"row {lineno}: unknown event kind {kind!r}")
        missing = sorted(set(arrivals) - set(departures))
        if missing:
            raise ScheduleError(f"client {missing[0]} never departs")
        clients = []
        for cid, (a, w, b) in arrivals.items():
            try:
                clients.append(Client(cid, a, departures[cid], w, b))
            except ValueError as exc:
                raise ScheduleError(str(exc)) from None
        clients.sort(key=lambda c: c.id)
        horizon = int(meta.get("horizon", max((c.departure for c in clients), default=0) + 1))
        extra = {k: v for k, v in meta.items() if k not in ("rng", "seed", "horizon")}
        return cls(clients, horizon, meta.get("rng", "none"), int(meta.get("seed", 0)), extra)

    @classmethod
    def read(cls, path) -> "EventSchedule":
        with open(path) as fh:
            return cls.from_text(fh.read())


def _laxity_exponents(rng: np.random.Generator, spec: WorkloadSpec) -> np.ndarray:
    top = floor_log2(spec.w_max)
    n = spec.n
    if spec.laxity == "uniform":
        return rng.integers(0, top + 1, n)
    split = (top + 2) // 2  # lower half gets the middle exponent when the count is odd
    low = rng.random(n) < (BIAS if spec.laxity == "small" else 1 - BIAS)
    lo = rng.integers(0, split, n)
    hi = rng.integers(split, top + 1, n)
    return np.where(low, lo, hi)


def _arrival_times(rng: np.random.Generator, spec: WorkloadSpec) -> np.ndarray:
    n, horizon = spec.n, spec.horizon
    if spec.arrivals == "uniform":
        return rng.integers(1, horizon + 1, n)
    if spec.arrivals == "batched":
        third = n // 3
        sizes = [third, third, n - 2 * third]
        times = [1, max(1, n // 2), max(1, n)]
        return np.repeat(np.array(times, dtype=np.int64), sizes)
    gaps = rng.geometric(spec.lam, n)
    return np.minimum(np.cumsum(gaps), max(1, horizon - 1))


def gen_random(spec: WorkloadSpec) -> EventSchedule:
    """Seeded random workload; identical spec gives an identical schedule."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    exps = _laxity_exponents(rng, spec)
    if spec.bandwidth == "geometric":
        bw = [2.0 ** -int(i) for i in rng.geometric(0.5, spec.n)]
    else:
        bw = [1] * spec.n
    arrive = _arrival_times(rng, spec)
    depart = rng.integers(arrive, spec.horizon + 1) if spec.n else arrive
    clients = [
        Client(i, int(arrive[i]), int(depart[i]), 1 << int(exps[i]), bw[i])
        for i in range(spec.n)
    ]
    extra = {
        "n": str(spec.n), "wmax": str(spec.w_max), "laxity": spec.laxity,
        "arrivals": spec.arrivals, "lambda": repr(spec.lam), "bandwidth": spec.bandwidth,
    }
    return EventSchedule(clients, spec.horizon, RNG_ID, spec.seed, extra)


def _finish(arrivals: Iterable[Tuple[int, int, int]], leave: Dict[int, int], horizon: int, **extra):
    clients = [Client(cid, t, leave.get(cid, horizon), w) for cid, t, w in arrivals]
    return EventSchedule(clients, horizon, extra=extra)


def gen_lemma1(rounds: int) -> EventSchedule:
    """Round 1: two laxity-2 clients.  Round r >= 2: two laxity-2**r clients
    arrive, then one laxity-2**(r-1) client leaves."""
    if rounds < 1:
        raise DomainError("need at least one round")
    arrivals = [(0, 1, 2), (1, 2, 2)]
    leave: Dict[int, int] = {}
    prev = [0, 1]
    t, cid = 3, 2
    for r in range(2, rounds + 1):
        pair = [cid, cid + 1]
        arrivals += [(cid, t, 2 ** r), (cid + 1, t + 1, 2 ** r)]
        leave[prev[0]] = t + 1
        prev, cid, t = pair, cid + 2, t + 2
    return _finish(arrivals, leave, t, lemma="1", rounds=str(rounds))


def lemma2_laxities(d: int) -> List[int]:
    """Arrival order: 2**d, then d rows of d laxities, then 2**d again."""
    seq = [2 ** d]
    for k in range(1, d + 1):
        start = d + 2 - k
        seq += [2 ** (start + j) for j in range(d)]
    seq.append(2 ** d)
    return seq


def gen_lemma2(d: int) -> EventSchedule:
    if d < 2:
        raise DomainError("lemma 2 schedule needs d >= 2")
    seq = lemma2_laxities(d)
    arrivals = [(i, i + 1, w) for i, w in enumerate(seq)]
    last = len(seq)
    # the first client leaves once everybody is placed
    return _finish(arrivals, {0: last}, last + 1, lemma="2", d=str(d))


def gen_lemma3(x: int, w: int, seed: int = 0) -> EventSchedule:
    """2**x clients of laxity 2**(x+2) and 7*2**x of laxity w arrive together;
    then every laxity-w client leaves."""
    if x < 0:
        raise DomainError("x must be non-negative")
    if not is_pow2(w) or w < 2 ** (x + 5):
        raise DomainError(f"w must be a power of two >= 2**(x+5) = {2 ** (x + 5)}")
    laxities = [2 ** (x + 2)] * 2 ** x + [w] * (7 * 2 ** x)
    order = np.random.Generator(np.random.PCG64(seed)).permutation(len(laxities))
    arrivals = [(i, 1, laxities[j]) for i, j in enumerate(order)]
    leave = {i: 1 for i, j in enumerate(order) if laxities[j] == w}
    sched = _finish(arrivals, leave, 2, lemma="3", x=str(x), w=str(w))
    sched.rng, sched.seed = RNG_ID, seed
    return sched
