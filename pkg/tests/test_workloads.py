import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cprsched.core import DomainError
from cprsched.workloads import (
    EventSchedule, ScheduleError, WorkloadSpec, gen_lemma1, gen_lemma2, gen_lemma3, gen_random,
    lemma2_laxities,
)


def test_batched_tiny_case():
    s = gen_random(WorkloadSpec(3, 8, arrivals="batched", seed=1))
    assert sorted(c.arrival for c in s.clients) == [1, 1, 3]
    assert s.horizon == 6


def test_batched_remainder_goes_last():
    s = gen_random(WorkloadSpec(10, 8, arrivals="batched"))
    counts = {}
    for c in s.clients:
        counts[c.arrival] = counts.get(c.arrival, 0) + 1
    assert counts == {1: 3, 5: 3, 10: 4}


def test_same_seed_same_file():
    spec = WorkloadSpec(300, 64, "small", "poisson", seed=11)
    assert gen_random(spec).to_text() == gen_random(spec).to_text()
    assert gen_random(spec).to_text() != gen_random(WorkloadSpec(300, 64, "small", "poisson", seed=12)).to_text()


def test_mean_inverse_laxity():
    s = gen_random(WorkloadSpec(4000, 1024, seed=3))
    inv = np.array([1 / c.laxity for c in s.clients])
    want = sum(2.0 ** -j for j in range(11)) / 11
    assert want == pytest.approx(0.1817, abs=1e-4)
    assert abs(inv.mean() - want) < 3 * inv.std() / math.sqrt(len(inv))


@pytest.mark.parametrize("dist", ["small", "large"])
def test_biased_halves(dist):
    n = 4000
    s = gen_random(WorkloadSpec(n, 1024, dist, seed=5))
    low = sum(c.laxity < 2 ** 6 for c in s.clients)
    share = low if dist == "small" else n - low
    sigma = math.sqrt(n * 0.7 * 0.3)
    assert share >= 0.7 * n - 3 * sigma


@settings(max_examples=40)
@given(st.integers(0, 300), st.sampled_from(["uniform", "batched", "poisson"]),
       st.sampled_from(["uniform", "small", "large"]), st.integers(0, 2 ** 32))
def test_random_schedules_are_well_formed(n, arrivals, laxity, seed):
    s = gen_random(WorkloadSpec(n, 256, laxity, arrivals, seed=seed))
    assert s.horizon == 2 * n
    for c in s.clients:
        assert 1 <= c.arrival <= c.departure <= s.horizon
        assert c.laxity in [2 ** k for k in range(9)]
        assert math.log2(c.bandwidth) == int(math.log2(c.bandwidth)) and c.bandwidth <= 0.5
    if arrivals == "poisson":
        assert all(c.arrival <= max(1, 2 * n - 1) for c in s.clients)
    back = EventSchedule.from_text(s.to_text())
    assert back.clients == s.clients and back.horizon == s.horizon


def test_full_bandwidth_option():
    s = gen_random(WorkloadSpec(50, 64, bandwidth="full"))
    assert {c.bandwidth for c in s.clients} == {1}


def test_spec_validation():
    with pytest.raises(DomainError):
        WorkloadSpec(10, 1000)
    with pytest.raises(DomainError):
        WorkloadSpec(10, 1024, laxity="skewed")


def test_lemma1_counts():
    s = gen_lemma1(5)
    assert len(s.clients) == 10
    ends = [c for c in s.clients if c.departure < s.horizon]
    assert len(ends) == 4
    assert gen_lemma1(2).to_text().splitlines()[2:] == [
        "1,arrival,0,2,1", "2,arrival,1,2,1", "3,arrival,2,4,1", "4,arrival,3,4,1",
        "4,departure,0,2,1", "5,departure,1,2,1", "5,departure,2,4,1", "5,departure,3,4,1",
    ]
    assert len(gen_lemma1(1).clients) == 2


def test_lemma2_rows():
    assert lemma2_laxities(2) == [4, 8, 16, 4, 8, 4]
    seq = lemma2_laxities(3)
    assert seq[0] == seq[-1] == 8
    assert seq[1:4] == [16, 32, 64]
    assert all(4 <= w <= 2 ** 6 and w & (w - 1) == 0 for w in seq)
    s = gen_lemma2(3)
    assert [c.id for c in s.clients if c.departure < s.horizon] == [0]


def test_lemma3_cohorts():
    s = gen_lemma3(1, 64)
    assert sorted(c.laxity for c in s.clients) == [8] * 2 + [64] * 14
    assert sum(c.departure == 1 for c in s.clients) == 14
    assert len(gen_lemma3(0, 32).clients) == 8
    with pytest.raises(DomainError):
        gen_lemma3(1, 16)


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("t,kind,client,w,b\n", "row 1"),
        ("# sa-schedule v1, rng=x, seed=0\nt,kind,client,w,b\n1,departure,4,2,1\n", "row 3"),
        ("# sa-schedule v1, rng=x, seed=0\nt,kind,client,w,b\n1,arrival,0,2,1\nx,arrival,1,2,1\n", "row 4"),
        ("# sa-schedule v1, rng=x, seed=0\nt,kind,client,w,b\n1,arrival,0,2,1\n", "never departs"),
    ],
)
def test_schedule_parse_errors(text, fragment):
    with pytest.raises(ScheduleError, match=fragment):
        EventSchedule.from_text(text)
