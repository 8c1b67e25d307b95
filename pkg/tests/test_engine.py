import csv
import json
import os
from collections import Counter
from fractions import Fraction

import pytest

from cprsched.cli import expand_matrix, main
from cprsched.engine import METRIC_COLUMNS, RunConfig, batch, run, write_trace
from cprsched.workloads import EventSchedule, ScheduleError, WorkloadSpec


def test_empty_workload():
    trace = run(RunConfig("cpr", workload=WorkloadSpec(0)))
    assert trace.rows == []
    trace = run(RunConfig("pr", schedule=EventSchedule([], 5)))
    assert [r.S for r in trace.rows] == [0] * 5


def test_full_size_has_2n_rows():
    trace = run(RunConfig("cpr", workload=WorkloadSpec(4000, 1024, seed=4)))
    assert len(trace.rows) == 8000
    assert [r.t for r in trace.rows] == list(range(1, 8001))


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig("fifo")
    with pytest.raises(ValueError):
        RunConfig("cpr", factor="cubic")
    with pytest.raises(ValueError):
        RunConfig("cpr").load_schedule()
    # factor only echoed for cpr
    assert "factor" not in RunConfig("pr", factor="linear").echo()


def test_intervals_chain_without_gaps():
    trace = run(RunConfig("cpr", "constant", workload=WorkloadSpec(400, 128, "small", "batched", seed=9)))
    by_client = {}
    for iv in trace.intervals:
        by_client.setdefault(iv.client, []).append(iv)
    assert set(by_client) == set(trace.clients)
    for cid, ivs in by_client.items():
        c = trace.clients[cid]
        assert ivs[0].start == c.arrival
        assert ivs[-1].end == min(c.departure, trace.horizon)
        for a, b in zip(ivs, ivs[1:]):
            assert b.start == a.end + 1


def test_one_event_per_slot_and_graces():
    trace = run(RunConfig("cpr", "linear", workload=WorkloadSpec(600, 256, "uniform", "poisson", seed=1)))
    times = [ev.t for ev in trace.events]
    assert len(times) == len(set(times))
    for ev in trace.events:
        row = trace.rows[ev.t - 1]
        assert row.R == ev.cost > 0
        assert row.realloc_count == len(ev.relocated)
    per_client = Counter(g.client for g in trace.graces)
    assert sum(per_client.values()) == sum(len(ev.relocated) for ev in trace.events)
    twice = [c for c, n in per_client.items() if n > 1]
    assert twice, "expected some client to move at two events"
    for c in twice:
        ts = [g.t for g in trace.graces if g.client == c]
        assert len(ts) == len(set(ts))


def _files(path):
    return {name: open(os.path.join(path, name), "rb").read() for name in sorted(os.listdir(path))}


def test_trace_files(tmp_path):
    trace = run(RunConfig("cpr", workload=WorkloadSpec(100, 64, seed=3)))
    write_trace(trace, str(tmp_path))
    assert sorted(os.listdir(tmp_path)) == [
        "events.csv", "graces.csv", "metrics.csv", "placements.csv", "run.json"]
    with open(tmp_path / "metrics.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == METRIC_COLUMNS and len(rows) == 201
    header = json.load(open(tmp_path / "run.json"))
    assert header["rng"] == "numpy-pcg64" and header["config"]["algo"] == "cpr"


def test_cli_round_trip(tmp_path, capsys):
    sched = tmp_path / "s.csv"
    assert main(["generate", "--n", "150", "--wmax", "64", "--seed", "8", "--out", str(sched)]) == 0
    assert open(sched).readline().startswith("# sa-schedule v1, rng=numpy-pcg64, seed=8")
    for d in ("a", "b"):
        assert main(["simulate", "--schedule", str(sched), "--algo", "cpr", "--factor", "linear",
                     "--out", str(tmp_path / d), "--check-invariants"]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    assert main(["verify", str(tmp_path / "a"), "--out", str(tmp_path / "r.csv")]) == 0
    assert "0 laxity violations" in capsys.readouterr().out


def test_cli_adversary(tmp_path):
    out = tmp_path / "l3.csv"
    assert main(["adversary", "--lemma", "3", "--x", "0", "--w", "32", "--out", str(out)]) == 0
    assert len(EventSchedule.read(out).clients) == 8


def test_unknown_departure_is_fatal(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("# sa-schedule v1, rng=x, seed=0\nt,kind,client,w,b\n1,arrival,0,2,1\n2,departure,5,2,1\n")
    with pytest.raises(ScheduleError, match="row 4"):
        main(["simulate", "--schedule", str(bad)])


def test_batch_rows_and_failures():
    rows = batch([{"name": "one", "algo": "cpr", "n": 60, "wmax": 32}])
    assert len(rows) == 1 and rows[0]["status"] == "ok"
    rows = batch([
        {"name": "bad", "algo": "pr", "n": 60, "wmax": 32},  # general bandwidth
        {"name": "good", "algo": "pr", "n": 60, "wmax": 32, "bandwidth": "full"},
    ])
    assert [r["status"] for r in rows] == ["failed", "ok"]
    assert "UnsupportedInput" in rows[0]["error"]


@pytest.mark.parametrize("d", [2, 3, 4])
def test_batch_lemma_replays(d):
    (row,) = batch([{"name": f"l2-{d}", "algo": "pr-weight", "adversary": {"lemma": 2, "d": d}}])
    assert float(row["beta_max"]) == pytest.approx(float(Fraction((2 ** d - 1) ** 2, 2 ** d)), abs=1e-9)


def test_batch_cli(tmp_path, capsys):
    matrix = tmp_path / "m.json"
    matrix.write_text(json.dumps({"base": {"n": 60, "wmax": 32},
                                  "grid": {"factor": ["constant", "log"], "algo": ["cpr"]}}))
    out = tmp_path / "summary.csv"
    assert main(["batch", str(matrix), "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert [r["factor"] for r in rows] == ["constant", "log"]
    assert len(expand_matrix([{"n": 1}, {"n": 2}])) == 2
