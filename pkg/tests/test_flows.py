"""Arrival/demand/service counting and the instance-level matcher."""

import pytest
from hypothesis import given, settings, strategies as st

from roundsched.flows import (MessageTiming, arrival, demand, edf_match,
                              instance_windows, service, steady_leftover)
from roundsched.schedule import ModeSchedule, Round
from roundsched.sysmodel import hyperperiod

from oracles import arrival_k_oracle, demand_k_oracle


def test_arrival_boundaries():
    mt = MessageTiming(offset=20, deadline=90, period=100)
    assert arrival(mt, 20) == 1          # release instant counts
    assert arrival(mt, 19) == 0
    assert arrival(mt, 250) == 3


def test_demand_boundaries():
    mt = MessageTiming(offset=20, deadline=90, period=100)
    assert demand(mt, 110) == 0          # deadline exactly at t not demanded yet
    assert demand(mt, 111) == 1
    assert demand(mt, 0) == -1           # wrapped instance still pending


@given(st.integers(1, 500), st.integers(0, 499), st.integers(1, 1000),
       st.integers(-2000, 4000))
@settings(max_examples=300)
def test_arrival_matches_unique_k(p, o, d, t):
    o = o % p
    mt = MessageTiming(offset=o, deadline=d, period=p)
    assert arrival(mt, t) == arrival_k_oracle(o, p, t)


@given(st.integers(1, 500), st.integers(0, 499), st.integers(1, 1000),
       st.integers(-2000, 4000))
@settings(max_examples=300)
def test_demand_matches_unique_k(p, o, d, t):
    o = o % p
    mt = MessageTiming(offset=o, deadline=d, period=p)
    assert demand(mt, t) == demand_k_oracle(o, d, p, t)


@given(st.integers(1, 200), st.integers(0, 199), st.integers(1, 400),
       st.integers(0, 5), st.integers(0, 3))
@settings(max_examples=200)
def test_boundary_semantics(p, o, d, q, extra):
    o = o % p
    mt = MessageTiming(offset=o, deadline=d, period=p)
    assert arrival(mt, o + q * p) == q + 1
    assert demand(mt, o + d + q * p) == q
    # both non-decreasing
    t = o + q * p + extra
    assert arrival(mt, t + 1) >= arrival(mt, t)
    assert demand(mt, t + 1) >= demand(mt, t)


def test_service_steps():
    assert service([1], [40], 0, 35) == 0
    assert service([1], [40], 0, 40) == 0    # strict: ends before t
    assert service([1], [40], 0, 41) == 1
    assert service([1], [40], 1, 41) == 0    # leftover subtracted
    assert service([], [], 2, 10) == -2
    with pytest.raises(ValueError):
        service([1, 1], [10], 0, 5)
    with pytest.raises(ValueError):
        service([1], [10], -1, 5)


def test_instance_windows_unrolling():
    mt = MessageTiming(offset=20, deadline=90, period=100)
    ws = instance_windows(mt, 300)
    assert [w.release for w in ws] == [20, 120, 220]
    assert [w.due for w in ws] == [110, 210, 310]
    assert instance_windows(mt, 20) == []
    # deadline beyond the period: consecutive windows overlap
    long = MessageTiming(offset=0, deadline=150, period=100)
    ws = instance_windows(long, 200)
    assert ws[0].due > ws[1].release


def _chain_sched(spec, msg_offset=4, msg_deadline=10, round_start=4):
    return ModeSchedule(mode="M1",
                        task_offsets={"t1": 0, "t2": msg_offset + msg_deadline},
                        msg_offsets={"m1": msg_offset},
                        msg_deadlines={"m1": msg_deadline},
                        rounds=(Round(start=round_start, alloc=("m1",)),))


def test_edf_match_accepts_valid(micro_toy1):
    lcm = hyperperiod(micro_toy1, "M1")
    res = edf_match(micro_toy1, "M1", _chain_sched(micro_toy1), 2 * lcm)
    assert res.ok
    # both unrolled instances served
    assert set(res.assignment["m1"]) == {0, 1}


def test_edf_match_too_late(micro_toy1):
    lcm = hyperperiod(micro_toy1, "M1")
    bad = _chain_sched(micro_toy1, round_start=30)   # ends at 40 > due 14
    res = edf_match(micro_toy1, "M1", bad, 2 * lcm)
    assert not res.ok
    assert res.violation.reason == "too-late"
    assert res.violation.message == "m1"


def test_edf_match_too_early(micro_toy1):
    lcm = hyperperiod(micro_toy1, "M1")
    sched = ModeSchedule(mode="M1", task_offsets={"t1": 0, "t2": 30},
                         msg_offsets={"m1": 15}, msg_deadlines={"m1": 15},
                         rounds=(Round(start=0, alloc=("m1",)),))
    res = edf_match(micro_toy1, "M1", sched, 2 * lcm)
    assert not res.ok
    assert res.violation.reason == "too-early"


def test_edf_match_no_slot(micro_toy1):
    lcm = hyperperiod(micro_toy1, "M1")
    sched = ModeSchedule(mode="M1", task_offsets={"t1": 0, "t2": 14},
                         msg_offsets={"m1": 4}, msg_deadlines={"m1": 10},
                         rounds=())
    res = edf_match(micro_toy1, "M1", sched, 2 * lcm)
    assert not res.ok
    assert res.violation.reason == "no-slot"


def test_edf_match_bad_horizon(micro_toy1):
    with pytest.raises(ValueError):
        edf_match(micro_toy1, "M1", _chain_sched(micro_toy1), 60)


def test_flow_chain_on_matched_schedule(micro_toy1):
    """demand <= service <= arrival at every round boundary, with the
    leftover taken from the wrap assignments of the matcher."""
    spec = micro_toy1
    lcm = hyperperiod(spec, "M1")
    sched = _chain_sched(spec)
    match = edf_match(spec, "M1", sched, 2 * lcm)
    leftovers = steady_leftover(spec, "M1", sched, match)
    mt = MessageTiming(offset=4, deadline=10, period=40)
    allocs = [r.alloc.count("m1") for r in sched.rounds]
    ends = [r.start + 10 for r in sched.rounds]
    for t in [0, 4, 13, 14, 15, 40]:
        sf = service(allocs, ends, leftovers["m1"], t)
        assert demand(mt, t) <= sf <= arrival(mt, t)


@pytest.mark.parametrize("seed", range(40))
def test_greedy_match_equals_maxflow(seed, micro_toy1):
    """The greedy earliest-due assignment succeeds exactly when a maximum
    bipartite matching of instances to slots is complete (exchange
    optimality), on randomized schedules of the micro system."""
    import random
    from oracles import FlowNet
    rng = random.Random(seed)
    spec = micro_toy1
    lcm = 40
    o = rng.randint(2, 20)
    d = rng.randint(8, 30)
    starts = sorted(rng.sample(range(0, 30, 2), rng.randint(0, 3)))
    starts = [s for i, s in enumerate(starts) if i == 0 or s - starts[i - 1] >= 10]
    sched = ModeSchedule(mode="M1",
                         task_offsets={"t1": 0, "t2": min(o + d, 39)},
                         msg_offsets={"m1": o}, msg_deadlines={"m1": d},
                         rounds=tuple(Round(start=s, alloc=("m1",)) for s in starts))
    res = edf_match(spec, "M1", sched, 2 * lcm)

    # independent route: max-flow over the same unrolled slots and windows
    mt = MessageTiming(offset=o, deadline=d, period=40)
    slots = [(c * lcm + s, c * lcm + s + 10) for c in range(2) for s in starts]
    insts = [(w.release, w.due) for w in instance_windows(mt, 2 * lcm)
             if w.due <= 2 * lcm]
    net = FlowNet(2 + len(insts) + len(slots))
    for i, (rel, due) in enumerate(insts):
        net.edge(0, 1 + i, 1)
        for k, (s, e) in enumerate(slots):
            if s >= rel and e <= due:
                net.edge(1 + i, 1 + len(insts) + k, 1)
    for k in range(len(slots)):
        net.edge(1 + len(insts) + k, 1 + len(insts) + len(slots), 1)
    complete = net.maxflow(0, 1 + len(insts) + len(slots)) == len(insts)
    assert res.ok == complete


def test_wrap_deadline_served_next_hyperperiod():
    """offset+deadline beyond the period: the serving round of the second
    instance lies in the next hyperperiod copy (leftover = 1)."""
    import conftest
    doc = conftest.micro_toy1_doc()
    doc["applications"][0]["deadline_ticks"] = 70
    spec = conftest.make_spec(doc)
    lcm = hyperperiod(spec, "M1")
    sched = ModeSchedule(mode="M1", task_offsets={"t1": 0, "t2": 62},
                         msg_offsets={"m1": 30}, msg_deadlines={"m1": 32},
                         rounds=(Round(start=10, alloc=("m1",)),))
    match = edf_match(spec, "M1", sched, 2 * lcm)
    assert match.ok
    # instance released at 30 (due 62) is served by the round copy at 50
    assert match.assignment["m1"][0].start == 50
    assert steady_leftover(spec, "M1", sched, match)["m1"] == 1
