import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cprsched.classifier import ClassKey
from cprsched.core import Client, NotPlaced
from cprsched.forest import COUNT, WEIGHT, ClassForest, Node, StructureError, slots_of, subtree_weight
from cprsched.verifier import verify_class_invariant

WS = ClassKey(1, math.inf, 1)


def scan_available(forest):
    """Exhaustive walk, independent of the per-depth index."""
    out = []
    for st_ in forest.stations.values():
        for root in st_.anchors.values():
            stack = [root]
            while stack:
                n = stack.pop()
                if n.left is not None:
                    stack += [n.left, n.right]
                elif n.client is None:
                    out.append(n)
    return out


def test_empty_forest_has_no_leaves():
    f = ClassForest(ClassKey(4, 16, 2))
    assert f.find_available_leaf(2) is None
    assert f.find_available_leaf(0) is None
    assert f.active_stations == 0


def test_first_client_leaves_sibling_open():
    f = ClassForest(ClassKey(4, 16, 2))
    p = f.allocate(Client(0, 1, 99, 8))
    assert p.path == "0"
    leaf = f.find_available_leaf(1)
    assert leaf is not None and leaf.path() == "1"
    assert [n.depth for n in scan_available(f)] == [1]


def test_attach_equal_depth_opens_nothing():
    f = ClassForest(ClassKey(4, 16, 1))
    st_ = f._activate()
    f.attach(f._open(st_), Client(0, 1, 9, 4), 0)
    assert scan_available(f) == []


def test_attach_deeper_opens_one_leaf_per_level():
    f = ClassForest(ClassKey(4, 32, 1))
    st_ = f._activate()
    p = f.attach(f._open(st_), Client(0, 1, 99, 16), 2)
    assert p.path == "00"
    assert sorted(n.depth for n in scan_available(f)) == [1, 2]


def test_attach_rejects_occupied_leaf():
    f = ClassForest(ClassKey(4, 16, 1))
    f.allocate(Client(0, 1, 9, 4))
    occupied = f.leaf_of[0]
    with pytest.raises(StructureError):
        f.attach(occupied, Client(1, 1, 9, 4), 0)


def test_detach_last_client_deactivates_station():
    f = ClassForest(ClassKey(4, 16, 1))
    f.allocate(Client(0, 1, 9, 8))
    assert f.active_stations == 1
    f.detach(0)
    assert f.active_stations == 0
    with pytest.raises(NotPlaced):
        f.detach(0)


def test_detach_one_of_two_siblings():
    f = ClassForest(WS)
    f.allocate(Client(0, 1, 9, 2))
    f.allocate(Client(1, 1, 9, 2))
    node = f.detach(1)
    assert node.depth == 1
    assert len(scan_available(f)) == 1


def test_detach_cascades_through_free_sibling():
    f = ClassForest(WS)
    f.allocate(Client(0, 1, 9, 2))
    f.allocate(Client(1, 1, 9, 4))  # sibling "11" stays open
    f.detach(1)
    # "10" and "11" merge back into "1"
    assert [n.path() for n in scan_available(f)] == ["1"]


def test_subtree_weight_examples():
    f = ClassForest(WS)
    assert subtree_weight(Node(None, 0), {}) == 0
    f.allocate(Client(0, 1, 9, 4))
    f.allocate(Client(1, 1, 9, 8))
    leaf = f.leaf_of[0]
    lax = {0: 4, 1: 8}
    assert subtree_weight(leaf, lax) == Fraction(1, 4)
    root = leaf.root()
    assert subtree_weight(root, lax) == Fraction(3, 8) == root.weight


def test_slots_of_plain_tree():
    f = ClassForest(WS)
    f.allocate(Client(0, 1, 99, 2))
    p = f.allocate(Client(1, 1, 99, 4))
    assert p.path == "10"
    assert slots_of(p) == (4, 1)
    assert [t for t in range(1, 13) if p.transmits(t)] == [1, 5, 9]


def test_depth_zero_anchor_every_slot():
    f = ClassForest(WS)
    p = f.allocate(Client(0, 1, 99, 1))
    assert all(p.transmits(t) for t in range(1, 50))


def test_anchor_offset_and_path():
    f = ClassForest(ClassKey(4, 16, 1))
    f.allocate(Client(0, 1, 99, 4))  # anchor 0, depth 0
    p = f.allocate(Client(1, 1, 99, 8))
    assert (p.anchor, p.path, p.period, p.offset) == (1, "0", 8, 1)
    # residue 1 mod 4 split by the next bit of t
    oracle = [t for t in range(1, 33) if t % 4 == 1 and (t >> 2) & 1 == 0]
    assert [t for t in range(1, 33) if p.transmits(t)] == oracle


def test_lanes_fill_before_new_station():
    f = ClassForest(ClassKey(4, 16, 2))
    for i in range(8):
        f.allocate(Client(i, 1, 99, 4))
    assert f.active_stations == 1
    lanes = {f.placement(i).lane for i in range(8)}
    assert lanes == {0, 1}
    f.allocate(Client(8, 1, 99, 4))
    assert f.active_stations == 2


# ---------------------------------------------------------------- properties

keys = st.sampled_from([WS, ClassKey(1, 2, 1), ClassKey(4, 16, 2), ClassKey(8, 24, 1),
                        ClassKey(16, 256, 4)])


@st.composite
def scripts(draw):
    key = draw(keys)
    lo = max(0, math.ceil(math.log2(key.w_low)))
    hi = 10 if math.isinf(key.w_high) else math.floor(math.log2(key.w_high - 1e-9))
    ops = draw(st.lists(st.tuples(st.booleans(), st.integers(lo, max(lo, hi)), st.integers(0, 10 ** 6)),
                        min_size=1, max_size=80))
    policy = draw(st.sampled_from([WEIGHT, COUNT]))
    return key, policy, ops


def _collide(p, q):
    # powers of two: residues overlap iff they agree modulo the smaller period
    return p.offset % min(p.period, q.period) == q.offset % min(p.period, q.period)


@settings(max_examples=150)
@given(scripts())
def test_forest_invariants_under_churn(script):
    key, policy, ops = script
    f = ClassForest(key, policy)
    lax = {}
    cid = 0
    for add, e, pick in ops:
        if add or not lax:
            f.allocate(Client(cid, 1, 10 ** 6, 2 ** e))
            lax[cid] = 2 ** e
            cid += 1
        else:
            victim = sorted(lax)[pick % len(lax)]
            f.depart(victim)
            del lax[victim]
        assert f.check() == []
        assert verify_class_invariant(f.dump()) == []
        idx = {id(n) for b in f.avail.values() for n in b}
        assert idx == {id(n) for n in scan_available(f) if n.depth > 0}
        for st_ in f.stations.values():
            assert st_.anchors, "empty station left active"
            for root in st_.anchors.values():
                assert root.weight == subtree_weight(root, lax)
                assert root.weight <= Fraction(1, key.anchors_per_lane)
        placed = [f.placement(c) for c in lax]
        for p in placed:
            assert p.period <= lax[p.client]
        by_lane = {}
        for p in placed:
            by_lane.setdefault((p.station_uid, p.lane), []).append(p)
        for group in by_lane.values():
            for i, p in enumerate(group):
                for q in group[i + 1:]:
                    assert not _collide(p, q)
