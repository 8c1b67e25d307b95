"""Broadcast-subtree forests.

A :class:`ClassForest` holds the stations of one client class.  Each station
offers ``lanes * A`` anchors, ``A = ceil_pow2(w_low)``: lane ``l`` and anchor
``a`` stand for the residue class ``t = a (mod A)`` on bandwidth share ``l``.
Below an anchor hangs a binary broadcast subtree; a node at depth ``i`` owns
the slots ``t = offset (mod A * 2**i)``, children splitting their parent's
slots by the next bit of the offset.

The same structure, with a single class ``[1, inf)`` and one anchor per
station, is the global forest used by preemptive reallocation.
"""

from __future__ import annotations

import heapq
import itertools
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Tuple

from .classifier import ClassKey
from .core import Client, NotPlaced, floor_log2, inv

WEIGHT = "weight"
COUNT = "count"


class StructureError(RuntimeError):
    pass


class Node:
    __slots__ = ("parent", "left", "right", "client", "weight", "count", "depth", "station", "index")

    def __init__(self, parent: Optional["Node"], depth: int):
        self.parent = parent
        self.left: Optional[Node] = None
        self.right: Optional[Node] = None
        self.client: Optional[int] = None
        self.weight = Fraction(0)
        self.count = 0
        self.depth = depth
        # only set on anchor roots
        self.station: Optional[Station] = None
        self.index = -1

    @property
    def available(self) -> bool:
        return self.client is None and self.left is None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def sibling(self) -> "Node":
        p = self.parent
        return p.right if p.left is self else p.left

    def root(self) -> "Node":
        n = self
        while n.parent is not None:
            n = n.parent
        return n

    def path(self) -> str:
        bits = []
        n = self
        while n.parent is not None:
            bits.append("1" if n.parent.right is n else "0")
            n = n.parent
        return "".join(reversed(bits))

    def clients(self) -> Iterator[int]:
        stack = [self]
        while stack:
            n = stack.pop()
            if n.client is not None:
                yield n.client
            elif n.left is not None:
                stack.append(n.right)
                stack.append(n.left)


def subtree_weight(node: Node, laxity: Dict[int, float]):
    """Recompute the weight below ``node`` from scratch, ignoring caches."""
    return sum((inv(laxity[c]) for c in node.clients()), Fraction(0))


class Station:
    def __init__(self, ordinal: int, uid: int, capacity: int):
        self.ordinal = ordinal
        self.uid = uid
        self.capacity = capacity
        self.anchors: Dict[int, Node] = {}
        self._freed: List[int] = []
        self._fresh = 0

    @property
    def empty_anchors(self) -> int:
        return self.capacity - len(self.anchors)

    def open_anchor(self) -> Node:
        if self._freed:
            idx = heapq.heappop(self._freed)
        elif self._fresh < self.capacity:
            idx = self._fresh
            self._fresh += 1
        else:
            raise StructureError(f"station {self.ordinal} has no empty anchor")
        root = Node(None, 0)
        root.station, root.index = self, idx
        self.anchors[idx] = root
        return root

    def put(self, root: Node) -> None:
        """Hang an existing subtree on the lowest empty anchor."""
        placeholder = self.open_anchor()
        root.station, root.index = self, placeholder.index
        self.anchors[root.index] = root

    def release(self, idx: int) -> Node:
        root = self.anchors.pop(idx)
        heapq.heappush(self._freed, idx)
        return root


@dataclass(frozen=True)
class Placement:
    client: int
    cls: str
    station: int
    station_uid: int
    lane: int
    anchor: int
    path: str
    period: int
    offset: int

    @property
    def position(self) -> Tuple[int, int, int, str]:
        return (self.station_uid, self.lane, self.anchor, self.path)

    def label(self) -> str:
        return f"{self.cls}#{self.station}/L{self.lane}/A{self.anchor}/{self.path or '-'}"

    def transmits(self, t: int) -> bool:
        return t % self.period == self.offset


@dataclass(frozen=True)
class Move:
    """One reassignment: a single client or a whole subtree."""

    subject: str
    clients: Tuple[int, ...]
    source: str
    target: str
    weight: object


def slots_of(placement: Placement) -> Tuple[int, int]:
    return placement.period, placement.offset


class ClassForest:
    """Stations of one class plus the per-depth index of available leaves."""

    def __init__(
        self,
        key: ClassKey,
        policy: str = WEIGHT,
        uids: Optional[Callable[[], int]] = None,
        name: Optional[str] = None,
    ):
        if policy not in (WEIGHT, COUNT):
            raise ValueError(f"unknown sibling policy {policy!r}")
        self.key = key
        self.name = name or key.label
        self.policy = policy
        self.k0 = key.root_exp
        self.per_lane = 1 << self.k0
        self.capacity = key.lanes * self.per_lane
        self.stations: Dict[int, Station] = {}
        self.avail: Dict[int, set] = defaultdict(set)
        self.with_empties: set = set()
        self.leaf_of: Dict[int, Node] = {}
        self.clients: Dict[int, Client] = {}
        self._ordinals = itertools.count(1)
        self._uids = uids or itertools.count(1).__next__

    def __len__(self) -> int:
        return len(self.leaf_of)

    @property
    def active_stations(self) -> int:
        return len(self.stations)

    def natural_depth(self, client: Client) -> int:
        d = floor_log2(client.laxity) - self.k0
        if d < 0:
            raise StructureError(f"client {client.id} too tight for class {self.key.label}")
        return d

    # ------------------------------------------------------------------ lookup

    def _order(self, node: Node):
        root = node.root()
        return (root.station.ordinal, root.index, node.path())

    def find_available_leaf(self, depth: int):
        """Lowest-keyed available leaf at ``depth``, or None.

        Empty anchors are not materialised, so for depth 0 the answer is the
        station whose empty anchors would be used.
        """
        if depth == 0:
            return self._station_with_empties()
        bucket = self.avail.get(depth)
        if not bucket:
            return None
        return min(bucket, key=self._order)

    def _station_with_empties(self) -> Optional[Station]:
        if not self.with_empties:
            return None
        return min(self.with_empties, key=lambda s: s.ordinal)

    def placement(self, cid: int) -> Placement:
        try:
            node = self.leaf_of[cid]
        except KeyError:
            raise NotPlaced(cid) from None
        return self._placement_at(node, cid)

    def _placement_at(self, node: Node, cid: int) -> Placement:
        path = node.path()
        root = node.root()
        lane, anchor = divmod(root.index, self.per_lane)
        offset = anchor
        for j, bit in enumerate(path):
            if bit == "1":
                offset += 1 << (self.k0 + j)
        return Placement(
            cid, self.name, root.station.ordinal, root.station.uid,
            lane, anchor, path, 1 << (self.k0 + len(path)), offset,
        )

    def _label(self, node: Node) -> str:
        root = node.root()
        lane, anchor = divmod(root.index, self.per_lane)
        return f"{self.name}#{root.station.ordinal}/L{lane}/A{anchor}/{node.path() or '-'}"

    # ---------------------------------------------------------------- mutation

    @staticmethod
    def _bump(node: Optional[Node], dw, dc: int) -> None:
        while node is not None:
            node.weight += dw
            node.count += dc
            node = node.parent

    def _activate(self) -> Station:
        st = Station(next(self._ordinals), self._uids(), self.capacity)
        self.stations[st.ordinal] = st
        self.with_empties.add(st)
        return st

    def _deactivate(self, st: Station) -> None:
        del self.stations[st.ordinal]
        self.with_empties.discard(st)

    def _open(self, st: Station) -> Node:
        root = st.open_anchor()
        if st.empty_anchors == 0:
            self.with_empties.discard(st)
        return root

    def attach(self, leaf: Node, client: Client, target_depth: int) -> Placement:
        if not leaf.available:
            raise StructureError("attach target is not an available leaf")
        if target_depth < leaf.depth:
            raise StructureError("client would sit above the leaf")
        if leaf.depth > 0:
            self.avail[leaf.depth].discard(leaf)
        node = leaf
        while node.depth < target_depth:
            node.left = Node(node, node.depth + 1)
            node.right = Node(node, node.depth + 1)
            self.avail[node.depth + 1].add(node.right)
            node = node.left
        node.client = client.id
        self.leaf_of[client.id] = node
        self.clients[client.id] = client
        self._bump(node, client.weight, 1)
        return self._placement_at(node, client.id)

    def allocate(self, client: Client) -> Placement:
        """Place an arriving client; never touches existing clients."""
        nat = self.natural_depth(client)
        for depth in range(nat, 0, -1):
            bucket = self.avail.get(depth)
            if bucket:
                return self.attach(min(bucket, key=self._order), client, nat)
        st = self._station_with_empties() or self._activate()
        return self.attach(self._open(st), client, nat)

    def _free(self, node: Node) -> Node:
        """``node`` just became available: collapse available sibling pairs upward.

        Returns the topmost available node.  When that is an anchor root the
        anchor is released (and the station dropped if nothing is left on it).
        """
        while node.parent is not None:
            sib = node.sibling()
            if not sib.available:
                break
            self.avail[node.depth].discard(node)
            self.avail[sib.depth].discard(sib)
            node = node.parent
            node.left = node.right = None
        if node.parent is None:
            st = node.station
            st.release(node.index)
            if not st.anchors:
                self._deactivate(st)
            else:
                self.with_empties.add(st)
        else:
            self.avail[node.depth].add(node)
        return node

    def detach(self, cid: int) -> Node:
        try:
            node = self.leaf_of.pop(cid)
        except KeyError:
            raise NotPlaced(cid) from None
        client = self.clients.pop(cid)
        node.client = None
        self._bump(node, -client.weight, -1)
        return self._free(node)

    def _measure(self, node: Node):
        return node.weight if self.policy == WEIGHT else node.count

    def _swap(self, sub: Node, leaf: Node) -> Move:
        """Move subtree ``sub`` onto available ``leaf`` of the same depth."""
        if not leaf.available or sub.depth != leaf.depth or sub.parent is None:
            raise StructureError("illegal subtree move")
        move = Move(
            subject=self._subject(sub),
            clients=tuple(sub.clients()),
            source=self._label(sub),
            target=self._label(leaf),
            weight=sub.weight,
        )
        pa, pb = sub.parent, leaf.parent
        if pa is pb:
            pa.left, pa.right = pa.right, pa.left
        else:
            if pa.left is sub:
                pa.left = leaf
            else:
                pa.right = leaf
            if pb.left is leaf:
                pb.left = sub
            else:
                pb.right = sub
            sub.parent, leaf.parent = pb, pa
            self._bump(pa, -sub.weight, -sub.count)
            self._bump(pb, sub.weight, sub.count)
        return move

    @staticmethod
    def _subject(sub: Node) -> str:
        if sub.client is not None:
            return str(sub.client)
        ids = sorted(sub.clients())
        return "subtree:" + "+".join(map(str, ids))

    def depart(self, cid: int) -> List[Move]:
        """Remove a client and restore the class invariant.

        Walks up from the freed leaf: whenever two leaves are available at the
        same depth, the sibling subtree with the smaller measure (weight, or
        client count for the count policy) moves onto the other leaf, merging
        two availabilities into one a level higher.  If an anchor ends up empty
        while another station already has empty anchors, one whole subtree is
        moved so only one station keeps empties.
        """
        moves: List[Move] = []
        node = self.detach(cid)
        while node.parent is not None:
            others = [x for x in self.avail[node.depth] if x is not node]
            if not others:
                return moves
            other = min(others, key=self._order)
            mine, theirs = node.sibling(), other.sibling()
            if self._measure(theirs) < self._measure(mine):
                moves.append(self._swap(theirs, node))
                node = self._free(other)
            else:
                moves.append(self._swap(mine, other))
                node = self._free(node)
        moves.extend(self._settle_empties(node.station))
        return moves

    def _settle_empties(self, emptied: Station) -> List[Move]:
        if emptied.ordinal not in self.stations or len(self.with_empties) < 2:
            return []
        donors = [s for s in self.with_empties if s is not emptied]
        donor = min(donors, key=lambda s: s.ordinal)
        root = min(donor.anchors.values(), key=lambda r: (self._measure(r), r.index))
        source = self._label(root)
        subject = self._subject(root)
        donor.release(root.index)
        emptied.put(root)
        if emptied.empty_anchors == 0:
            self.with_empties.discard(emptied)
        if not donor.anchors:
            self._deactivate(donor)
        return [Move(subject, tuple(root.clients()), source, self._label(root), root.weight)]

    # ------------------------------------------------------------ inspection

    def available_leaves(self) -> Iterator[Node]:
        for st in self.stations.values():
            for root in st.anchors.values():
                stack = [root]
                while stack:
                    n = stack.pop()
                    if n.available:
                        yield n
                    elif n.left is not None:
                        stack.extend((n.right, n.left))

    def check(self) -> List[str]:
        """Fast self-check of the class invariant using the index."""
        bad = []
        for depth, bucket in self.avail.items():
            if len(bucket) > 1:
                bad.append(f"{self.name}: {len(bucket)} available leaves at depth {depth}")
        if len(self.with_empties) > 1:
            bad.append(f"{self.name}: {len(self.with_empties)} stations with empty anchors")
        return bad

    def dump(self) -> List[str]:
        """One line per occupied leaf: class, station, lane, anchor, path, client, period, offset."""
        lines = []
        for ordinal in sorted(self.stations):
            st = self.stations[ordinal]
            for idx in sorted(st.anchors):
                for cid in sorted(st.anchors[idx].clients()):
                    p = self.placement(cid)
                    lines.append(
                        f"{self.key.label} {p.station} {p.lane} {p.anchor} "
                        f"{p.path or '-'} {cid} {p.period} {p.offset}"
                    )
        return lines
