"""Comparison protocols for the windows-scheduling special case (b = B).

* ``PR``  keeps one global forest with at most one available leaf per depth
  and, on departures, moves the sibling subtree holding fewer clients.
* ``PR(policy="weight")`` moves the lighter sibling instead.
* ``CR`` keeps one channel per laxity plus a big channel for large laxities,
  migrating clients across the big channel when the population halves or
  doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List

from .classifier import ClassKey
from .core import Client, UnsupportedInput, ceil_pow2, is_pow2
from .cpr import Protocol
from .forest import COUNT, WEIGHT, ClassForest, Move, Placement

WS_KEY = ClassKey(1, math.inf, 1)


def _require_ws(client: Client) -> None:
    if client.bandwidth != client.capacity:
        raise UnsupportedInput(f"client {client.id}: baselines need b = B")
    if not is_pow2(client.laxity):
        raise UnsupportedInput(f"client {client.id}: baselines need power-of-two laxities")


class PR(Protocol):
    name = "pr"

    def __init__(self, policy: str = COUNT):
        super().__init__()
        self.policy = policy
        self.name = "pr" if policy == COUNT else "pr-weight"
        self.forest = self._forest(WS_KEY, policy)

    def arrive(self, client: Client, t: int = None) -> Placement:
        _require_ws(client)
        self.home[client.id] = self.forest
        self.laxity[client.id] = client.laxity
        return self.forest.allocate(client)


def pr_depart(state: PR, cid: int, t: int, rho: float = 1):
    from .cpr import cpr_depart

    return cpr_depart(state, cid, t, rho)


def pr_station_usage(state: PR) -> int:
    return state.forest.active_stations


@dataclass
class BigChannelState:
    members: Dict[int, float] = field(default_factory=dict)
    population: int = 0


BIG = "big"


class CR(Protocol):
    """Classified reallocation with the big-channel thresholds.

    A client in the big channel whose laxity drops below ``ceil_pow2(N)``
    moves to its laxity channel; a client elsewhere whose laxity exceeds
    ``2 * ceil_pow2(N)`` moves to the big channel.  ``N`` is the number of
    clients active in the slot.  Each channel is a broadcast-tree forest kept
    compact the same way PR does.
    """

    name = "cr"

    def __init__(self, policy: str = WEIGHT):
        super().__init__()
        self.policy = policy
        self.big = BigChannelState()
        self._pending: List[Client] = []

    def _class_key(self, key) -> ClassKey:
        return WS_KEY

    def _name(self, key) -> str:
        return "big" if key == BIG else f"w{key}"

    def _channel(self, client: Client, big: bool) -> ClassForest:
        return self._forest(BIG if big else client.laxity, self.policy)

    def arrive(self, client: Client, t: int = None) -> Placement:
        """Queue the client; placement happens once the slot population is known."""
        _require_ws(client)
        self.laxity[client.id] = client.laxity
        self._pending.append(client)
        return None

    def depart(self, cid: int, t: int) -> List[Move]:
        self.big.members.pop(cid, None)
        return super().depart(cid, t)

    def _place(self, client: Client, big: bool) -> Placement:
        forest = self._channel(client, big)
        self.home[client.id] = forest
        if big:
            self.big.members[client.id] = client.laxity
        return forest.allocate(client)

    def end_slot(self, t: int, population: int) -> List[Move]:
        self.big.population = population
        if population == 0:
            return []
        threshold = ceil_pow2(population)
        for client in self._pending:
            self._place(client, client.laxity >= threshold)
        self._pending.clear()

        moves: List[Move] = []
        leaving = sorted(c for c, w in self.big.members.items() if w < threshold)
        joining = sorted(
            c for c, f in self.home.items()
            if c not in self.big.members and self.laxity[c] > 2 * threshold
        )
        for cid in leaving + joining:
            forest = self.home.pop(cid)
            client = forest.clients[cid]
            source = forest.placement(cid).label()
            moves.extend(forest.depart(cid))
            self.big.members.pop(cid, None)
            placed = self._place(client, cid in joining)
            moves.append(Move(str(cid), (cid,), source, placed.label(), client.weight))
        return moves

    def big_channel_clients(self) -> List[int]:
        return sorted(self.big.members)


def cr_rebalance(state: CR, t: int, population: int) -> List[Move]:
    return state.end_slot(t, population)
