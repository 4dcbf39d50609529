"""Protocol simulation: lossless execution, radio accounting, losses,
mode changes, determinism."""

import pytest

from roundsched.netmodel import slot_timing
from roundsched.schedule import ModeSchedule, Round, SystemSchedule
from roundsched.sim import LossModel, ModeChange, simulate
from roundsched.synth import synthesize_system
from roundsched.sysmodel import SpecError, hyperperiod
from roundsched.validate import validate_system

from conftest import make_spec, micro_toy1_doc


def _system(spec, policy="minimal"):
    ssched = synthesize_system(spec, policy=policy)
    assert validate_system(spec, ssched).ok
    return ssched


def test_lossless_three_hyperperiods(micro_toy1):
    ssched = _system(micro_toy1)
    lcm = hyperperiod(micro_toy1, "M1")
    report = simulate(micro_toy1, ssched, LossModel(), duration=3 * lcm)
    stats = report.per_app["a1"]
    assert stats.completed == 3
    assert stats.misses == 0
    for n in ("n1", "n2"):
        assert report.per_node[n].rounds_skipped == 0
        assert report.per_node[n].beacons_missed == 0


def test_lossless_fig4(fig4):
    ssched = _system(fig4)
    lcm = hyperperiod(fig4, "M1")
    report = simulate(fig4, ssched, LossModel(), duration=4 * lcm)
    assert report.per_app["loop"].completed == 4
    assert report.per_app["loop"].misses == 0


def test_radio_accounting_matches_model(micro_toy1):
    ssched = _system(micro_toy1)
    lcm = hyperperiod(micro_toy1, "M1")
    rounds = 3 * len(ssched.modes["M1"].rounds)
    report = simulate(micro_toy1, ssched, LossModel(), duration=3 * lcm)
    on_b = slot_timing(micro_toy1.platform, micro_toy1.network,
                       micro_toy1.platform.l_beacon).t_on
    on_s = slot_timing(micro_toy1.platform, micro_toy1.network,
                       micro_toy1.network.payload_l).t_on
    alloc = len(ssched.modes["M1"].rounds[0].alloc)
    expect = rounds * (on_b + alloc * on_s)
    for n in ("n1", "n2"):
        assert report.per_node[n].radio_on_us == pytest.approx(expect)


def test_desynced_node_pays_beacon_only(micro_toy1):
    """Recompute each node's radio-on from the miss trace: a desynchronized
    node contributes only the beacon listen window for that round."""
    ssched = _system(micro_toy1)
    lcm = hyperperiod(micro_toy1, "M1")
    report = simulate(micro_toy1, ssched, LossModel(flood_loss_prob=0.6, seed=7),
                      duration=6 * lcm, trace=True)
    on_b = slot_timing(micro_toy1.platform, micro_toy1.network,
                       micro_toy1.platform.l_beacon).t_on
    on_s = slot_timing(micro_toy1.platform, micro_toy1.network,
                       micro_toy1.network.payload_l).t_on
    round_ticks = [t for t, kind, _, _ in report.events if kind == "round"]
    missed = {}
    for t, kind, subject, detail in report.events:
        if kind == "miss":
            missed.setdefault(subject, set()).add(t)
    alloc = len(ssched.modes["M1"].rounds[0].alloc)
    for n in ("n1", "n2"):
        miss = missed.get(n, set())
        expect = sum(on_b if t in miss else on_b + alloc * on_s
                     for t in round_ticks)
        assert report.per_node[n].radio_on_us == pytest.approx(expect)
        assert report.per_node[n].rounds_skipped == len(miss)


def test_losses_cause_skips_not_crashes(micro_toy1):
    ssched = _system(micro_toy1)
    lcm = hyperperiod(micro_toy1, "M1")
    report = simulate(micro_toy1, ssched, LossModel(flood_loss_prob=0.5, seed=3),
                      duration=10 * lcm, trace=True)
    stats = report.per_app["a1"]
    assert stats.completed + stats.misses == 10
    assert stats.misses > 0               # p=0.5 over 10 instances
    kinds = {k for _, k, _, _ in report.events}
    assert "skip" in kinds or "idle" in kinds


def test_desynced_initiator_transmits_nothing(micro_toy1):
    """A node that missed a round's beacon sends nothing in that round:
    no slot of its messages is served there."""
    ssched = _system(micro_toy1)
    lcm = hyperperiod(micro_toy1, "M1")
    report = simulate(micro_toy1, ssched, LossModel(flood_loss_prob=0.5, seed=11),
                      duration=20 * lcm, trace=True)
    # m1's initiator is t1's host n1; n1 is the beacon host here, so use a
    # spec where the initiator is not the host: swap the chain direction
    import conftest
    doc = conftest.micro_toy1_doc()
    doc["tasks"][0]["host"] = "n2"          # producer on n2, host stays n1
    doc["tasks"][1]["host"] = "n1"
    spec = conftest.make_spec(doc)
    ssched = _system(spec)
    report = simulate(spec, ssched, LossModel(flood_loss_prob=0.5, seed=11),
                      duration=20 * lcm, trace=True)
    missed = {(t, s) for t, k, s, _ in report.events if k == "miss"}
    assert any(s == "n2" for _, s in missed)
    served = {t for t, k, s, _ in report.events if k == "slot" and s == "m1"}
    for tick, node in missed:
        if node == "n2":                     # initiator desynced this round
            assert tick not in served
    assert report.per_app["a1"].misses > 0


def test_seeded_determinism(micro_toy1):
    ssched = _system(micro_toy1)
    lcm = hyperperiod(micro_toy1, "M1")
    runs = [simulate(micro_toy1, ssched, LossModel(flood_loss_prob=0.3, seed=42),
                     duration=5 * lcm, trace=True) for _ in range(2)]
    assert runs[0].to_dict() == runs[1].to_dict()
    assert runs[0].events == runs[1].events


def test_wrap_service_across_hyperperiods():
    """A validated schedule whose sink message wraps past the hyperperiod:
    its serving round lies in the following copy; lossless run completes."""
    import conftest
    doc = conftest.micro_doc(
        nodes=["n1", "n2"],
        tasks=[{"id": "t1", "host": "n1", "wcet_ticks": 2}],
        messages=[{"id": "m1", "payload_bytes": 16}],
        applications=[{"id": "a1", "period_ticks": 40, "deadline_ticks": 70,
                       "persistent": True,
                       "edges": [{"from_task": "t1", "to_task": None,
                                  "message": "m1"}]}],
        modes=[{"id": "M1", "prio": 1, "apps": ["a1"]}])
    spec = conftest.make_spec(doc)
    sched = ModeSchedule(mode="M1", task_offsets={"t1": 0},
                         msg_offsets={"m1": 30}, msg_deadlines={"m1": 32},
                         rounds=(Round(start=10, alloc=("m1",)),))
    ssched = SystemSchedule(modes={"M1": sched}, policy="minimal",
                            tick_us=spec.tick)
    from roundsched.validate import validate_system as vs
    assert vs(spec, ssched).ok
    report = simulate(spec, ssched, LossModel(), duration=5 * 40, trace=True)
    stats = report.per_app["a1"]
    assert stats.misses == 0
    assert stats.completed >= 3
    # the round at 50 serves the instance released at 30 (previous copy)
    served = [(t, d) for t, k, s, d in report.events if k == "slot" and s == "m1"]
    assert (50, "release 30 served") in served


def test_mode_change_two_phase(example1_norm):
    ssched = _system(example1_norm)
    lcm = hyperperiod(example1_norm, "M1")
    script = [ModeChange(at=120, target="M4")]
    report = simulate(example1_norm, ssched, LossModel(), script=script,
                      duration=6 * lcm, trace=True)
    assert len(report.switches) == 1
    tick, frm, to = report.switches[0]
    assert (frm, to) == ("M1", "M4")
    assert tick % lcm == 0                # boundary-aligned switch
    announce = [t for t, k, s, _ in report.events if k == "announce" or k == "trigger"]
    trig = [t for t, k, _, _ in report.events if k == "trigger"]
    assert trig and min(announce) < min(trig)   # two distinct phases

    # persistent app a1 keeps exact periodicity across the switch: 0 jitter
    starts = sorted(t for t, k, s, _ in report.events if k == "task" and s == "u1")
    gaps = {b - a for a, b in zip(starts, starts[1:])}
    assert gaps == {100}
    assert report.per_app["a1"].misses == 0


def test_two_sequential_mode_changes(example1_norm):
    """M1 -> M4 -> M5 walks into a mode with fresh messages; slots whose
    steady instance predates the mode's activity stay idle, and the new
    app completes losslessly."""
    ssched = _system(example1_norm)
    lcm = hyperperiod(example1_norm, "M1")
    script = [ModeChange(at=150, target="M4"), ModeChange(at=700, target="M5")]
    report = simulate(example1_norm, ssched, LossModel(), script=script,
                      duration=14 * lcm, trace=True)
    assert [(f, t) for _, f, t in report.switches] == [("M1", "M4"), ("M4", "M5")]
    for _, stats in report.per_app.items():
        assert stats.misses == 0
    assert report.per_app["a6.5"].completed >= 1


def test_announce_gap_configurable(example1_norm):
    ssched = _system(example1_norm)
    lcm = hyperperiod(example1_norm, "M1")
    ticks = []
    for gap in (1, 3):
        rep = simulate(example1_norm, ssched, LossModel(),
                       script=[ModeChange(at=0, target="M4")],
                       duration=8 * lcm, announce_gap=gap, trace=True)
        ticks.append(rep.switches[0][0])
    assert ticks[1] >= ticks[0] + lcm      # larger gap defers the trigger round


def test_mode_change_rejects_non_adjacent(example1_norm):
    ssched = _system(example1_norm)
    with pytest.raises(SpecError, match="not adjacent"):
        simulate(example1_norm, ssched, LossModel(),
                 script=[ModeChange(at=10, target="M3")], duration=500)


def test_duration_too_short(micro_toy1):
    ssched = _system(micro_toy1)
    with pytest.raises(SpecError, match="one hyperperiod"):
        simulate(micro_toy1, ssched, LossModel(), duration=30)
