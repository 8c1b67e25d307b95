"""Classified Preemptive Reallocation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .classifier import ClassKey, Factor, class_key
from .core import Client, NotPlaced
from .forest import WEIGHT, ClassForest, Move, Placement
from .metrics import realloc_cost


@dataclass(frozen=True)
class GraceRecord:
    """A reallocated client may stretch the one laxity window spanning ``t``."""

    t: int
    client: int
    source: str
    target: str


@dataclass
class ReallocationEvent:
    t: int
    moves: List[Move] = field(default_factory=list)
    relocated: Dict[int, Tuple[Placement, Placement]] = field(default_factory=dict)
    cost: object = 0

    def __bool__(self) -> bool:
        return bool(self.relocated)

    def graces(self) -> List[GraceRecord]:
        return [laxity_grace(old, new, self.t) for _, (old, new) in sorted(self.relocated.items())]


def laxity_grace(old: Placement, new: Placement, t: int) -> GraceRecord:
    return GraceRecord(t, new.client, old.label(), new.label())


class Protocol:
    """Shared surface the simulator drives."""

    name = "protocol"

    def __init__(self):
        self.forests: Dict[object, ClassForest] = {}
        self.home: Dict[int, ClassForest] = {}
        self.laxity: Dict[int, float] = {}
        self._uids = itertools.count(1).__next__

    def _forest(self, key, policy: str = WEIGHT) -> ClassForest:
        forest = self.forests.get(key)
        if forest is None:
            forest = self.forests[key] = ClassForest(
                self._class_key(key), policy, self._uids, name=self._name(key)
            )
        return forest

    def _class_key(self, key) -> ClassKey:
        return key

    def _name(self, key) -> str:
        return key.label if isinstance(key, ClassKey) else str(key)

    def placement(self, cid: int) -> Placement:
        try:
            return self.home[cid].placement(cid)
        except KeyError:
            raise NotPlaced(cid) from None

    def station_count(self) -> int:
        return sum(f.active_stations for f in self.forests.values())

    def class_count(self) -> int:
        return sum(1 for f in self.forests.values() if f.active_stations)

    def arrive(self, client: Client, t: int) -> Placement:
        raise NotImplementedError

    def depart(self, cid: int, t: int) -> List[Move]:
        forest = self.home.pop(cid, None)
        if forest is None:
            raise NotPlaced(cid)
        self.laxity.pop(cid, None)
        return forest.depart(cid)

    def end_slot(self, t: int, population: int) -> List[Move]:
        return []

    def check(self) -> List[str]:
        out = []
        for f in self.forests.values():
            out.extend(f.check())
        return out


class CPR(Protocol):
    """Clients are classified by laxity band and lane count; each class keeps
    its own forest, and reallocations never cross classes."""

    name = "cpr"

    def __init__(self, factor: Factor = Factor.LOGARITHMIC, capacity: float = 1):
        super().__init__()
        self.factor = Factor.parse(factor) if isinstance(factor, str) else factor
        self.capacity = capacity

    def key_of(self, client: Client) -> ClassKey:
        return class_key(client, self.factor, self.capacity)

    def arrive(self, client: Client, t: Optional[int] = None) -> Placement:
        forest = self._forest(self.key_of(client))
        self.home[client.id] = forest
        self.laxity[client.id] = client.laxity
        return forest.allocate(client)

    def class_bounds(self) -> Iterable[ClassKey]:
        return [k for k, f in self.forests.items() if f.active_stations]


def cpr_allocate(state: CPR, client: Client) -> Placement:
    return state.arrive(client)


def cpr_depart(state: Protocol, cid: int, t: int, rho: float = 1) -> ReallocationEvent:
    """Depart one client and report the consolidation as a single event."""
    laxity = dict(state.laxity)
    before = {}
    forest = state.home.get(cid)
    if forest is None:
        raise NotPlaced(cid)
    for other in list(forest.leaf_of):
        if other != cid:
            before[other] = forest.placement(other)
    moves = state.depart(cid, t)
    event = ReallocationEvent(t, moves)
    touched = {c for m in moves for c in m.clients}
    for c in sorted(touched):
        if c in state.home:
            new = state.placement(c)
            if new.position != before[c].position:
                event.relocated[c] = (before[c], new)
    event.cost = realloc_cost((laxity[c] for c in event.relocated), rho)
    return event
