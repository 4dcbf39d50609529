"""Shared fixtures: reference network config, toy systems, the five-mode
inheritance fixture, and seeded random instance generators."""

from __future__ import annotations

import json
import random

import pytest

from roundsched.netmodel import DEFAULT_PLATFORM, PlatformConstants
from roundsched.sysmodel import NetworkConfig, normalize, parse_system_spec

# reference scenario of the timing model tables: 4 hops, 2 transmissions
REF_NET = NetworkConfig(payload_l=16, b_max=30, n_tx=2, hops=4, l_max=64)

# tiny platform for scheduling tests: every slot 50 us, no preprocessing,
# so at tick_us=10 a round of B slots is 5*(B+1) ticks long
MICRO_PLATFORM = dict(t_wakeup=0.0, t_start=45.0, t_gap=0.0, t_d=0.0,
                      l_cal=0, l_header=0, r_bit=1e9, t_preprocess=0.0,
                      l_beacon=2, slot_quantum=50.0)


def make_spec(doc: dict):
    return parse_system_spec(json.dumps(doc))


def micro_doc(*, nodes, tasks, messages, applications, modes, mode_graph=(),
              b_max=1, tick_us=10):
    return {
        "nodes": [{"id": n} for n in nodes],
        "tasks": tasks,
        "messages": messages,
        "applications": applications,
        "modes": modes,
        "mode_graph": list(mode_graph),
        "network": {"L": 16, "B_max": b_max, "N": 2, "H": 2, "L_max": 64},
        "platform": MICRO_PLATFORM,
        "tick_us": tick_us,
    }


@pytest.fixture(scope="session")
def platform():
    return DEFAULT_PLATFORM


@pytest.fixture(scope="session")
def ref_net():
    return REF_NET


def toy1_doc():
    """One sensing->message->actuation chain across two nodes, 100 ms period."""
    return {
        "nodes": [{"id": "n1"}, {"id": "n2"}],
        "tasks": [{"id": "t1", "host": "n1", "wcet_ticks": 100},
                  {"id": "t2", "host": "n2", "wcet_ticks": 100}],
        "messages": [{"id": "m1", "payload_bytes": 16}],
        "applications": [{"id": "a1", "period_ticks": 10000,
                          "deadline_ticks": 10000, "persistent": True,
                          "edges": [{"from_task": "t1", "to_task": "t2",
                                     "message": "m1"}]}],
        "modes": [{"id": "M1", "prio": 1, "apps": ["a1"]}],
        "mode_graph": [],
        "network": {"L": 16, "B_max": 2, "N": 2, "H": 4, "L_max": 64},
        "tick_us": 10,
    }


@pytest.fixture()
def toy1():
    return make_spec(toy1_doc())


def micro_toy1_doc():
    """toy1 shape at micro scale: period 40 ticks, T_r = 10 ticks."""
    return micro_doc(
        nodes=["n1", "n2"],
        tasks=[{"id": "t1", "host": "n1", "wcet_ticks": 2},
               {"id": "t2", "host": "n2", "wcet_ticks": 2}],
        messages=[{"id": "m1", "payload_bytes": 16}],
        applications=[{"id": "a1", "period_ticks": 40, "deadline_ticks": 40,
                       "persistent": True,
                       "edges": [{"from_task": "t1", "to_task": "t2",
                                  "message": "m1"}]}],
        modes=[{"id": "M1", "prio": 1, "apps": ["a1"]}],
    )


@pytest.fixture()
def micro_toy1():
    return make_spec(micro_toy1_doc())


def fig4_doc():
    """Two sensors feed a controller; the control value fans out to two
    actuators over one multicast message."""
    return micro_doc(
        nodes=["ns1", "ns2", "nc", "na1", "na2"],
        tasks=[{"id": "s1", "host": "ns1", "wcet_ticks": 2},
               {"id": "s2", "host": "ns2", "wcet_ticks": 2},
               {"id": "ctl", "host": "nc", "wcet_ticks": 3},
               {"id": "act1", "host": "na1", "wcet_ticks": 2},
               {"id": "act2", "host": "na2", "wcet_ticks": 2}],
        messages=[{"id": "m1", "payload_bytes": 8},
                  {"id": "m2", "payload_bytes": 8},
                  {"id": "m3", "payload_bytes": 8}],
        applications=[{"id": "loop", "period_ticks": 100, "deadline_ticks": 100,
                       "persistent": True,
                       "edges": [
                           {"from_task": "s1", "to_task": "ctl", "message": "m1"},
                           {"from_task": "s2", "to_task": "ctl", "message": "m2"},
                           {"from_task": "ctl", "to_task": "act1", "message": "m3"},
                           {"from_task": "ctl", "to_task": "act2", "message": "m3"}]}],
        modes=[{"id": "M1", "prio": 1, "apps": ["loop"]}],
        b_max=2,
    )


@pytest.fixture()
def fig4():
    return make_spec(fig4_doc())


def example1_doc():
    """Five modes and six apps with the mode graph of the inheritance example.

    a1 and a5 are single-task apps sharing node nshare, so scheduling a5 in
    M3 without reserving a1's slot collides with a1 when M4 inherits both.
    a6 lives in the two unconnected modes M3 and M5 (two schedule domains).
    """
    apps = []
    tasks = [
        {"id": "u1", "host": "nshare", "wcet_ticks": 10},   # a1
        {"id": "u5", "host": "nshare", "wcet_ticks": 10},   # a5
    ]
    messages = []
    edges1 = [{"from_task": "u1", "to_task": None, "message": None}]
    edges5 = [{"from_task": "u5", "to_task": None, "message": None}]
    apps.append({"id": "a1", "period_ticks": 100, "deadline_ticks": 100,
                 "persistent": True, "edges": edges1})
    apps.append({"id": "a5", "period_ticks": 100, "deadline_ticks": 100,
                 "persistent": True, "edges": edges5})
    for name, src, dst in (("a2", "n1", "n2"), ("a3", "n2", "n3"),
                           ("a4", "n3", "n1"), ("a6", "n1", "n3")):
        tp, tc, m = f"{name}p", f"{name}c", f"{name}m"
        tasks.append({"id": tp, "host": src, "wcet_ticks": 3})
        tasks.append({"id": tc, "host": dst, "wcet_ticks": 3})
        messages.append({"id": m, "payload_bytes": 8})
        apps.append({"id": name, "period_ticks": 100, "deadline_ticks": 100,
                     "persistent": True,
                     "edges": [{"from_task": tp, "to_task": tc, "message": m}]})
    return micro_doc(
        nodes=["nshare", "n1", "n2", "n3"],
        tasks=tasks, messages=messages, applications=apps,
        modes=[{"id": "M1", "prio": 1, "apps": ["a1", "a2"]},
               {"id": "M2", "prio": 2, "apps": ["a2", "a3", "a4"]},
               {"id": "M3", "prio": 3, "apps": ["a5", "a6"]},
               {"id": "M4", "prio": 4, "apps": ["a1", "a5"]},
               {"id": "M5", "prio": 5, "apps": ["a6"]}],
        mode_graph=[{"a": "M1", "b": "M2"}, {"a": "M1", "b": "M4"},
                    {"a": "M3", "b": "M4"}, {"a": "M4", "b": "M5"}],
        b_max=2,
    )


@pytest.fixture()
def example1():
    return make_spec(example1_doc())


@pytest.fixture()
def example1_norm(example1):
    return normalize(example1)


# ---------------------------------------------------------------------------
# seeded random generators
# ---------------------------------------------------------------------------

def random_micro_doc(rng: random.Random) -> dict:
    """Single-mode micro instance: <=3 apps, <=5 tasks, <=3 messages,
    hyperperiod <= 40 ticks (T_r = 10 ticks at B_max=1)."""
    nodes = [f"n{i}" for i in range(rng.randint(2, 3))]
    n_apps = rng.randint(1, 3)
    tasks, messages, apps = [], [], []
    total_tasks = 0
    total_msgs = 0
    for ai in range(n_apps):
        period = rng.choice([20, 40, 40])
        budget_t = min(rng.randint(1, 3), 5 - total_tasks)
        if budget_t <= 0:
            break
        ids = []
        for ti in range(budget_t):
            tid = f"t{ai}_{ti}"
            tasks.append({"id": tid, "host": rng.choice(nodes),
                          "wcet_ticks": rng.randint(1, 6)})
            ids.append(tid)
        total_tasks += len(ids)
        edges = []
        used = set()
        if len(ids) >= 2 and total_msgs < 3:
            n_m = min(rng.randint(0, 2), 3 - total_msgs, len(ids) - 1)
            for mi in range(n_m):
                mid = f"m{ai}_{mi}"
                src = ids[mi]
                dst = ids[mi + 1]
                messages.append({"id": mid, "payload_bytes": 16})
                edges.append({"from_task": src, "to_task": dst, "message": mid})
                used |= {src, dst}
                total_msgs += 1
        for tid in ids:
            if tid not in used:
                edges.append({"from_task": tid, "to_task": None, "message": None})
        deadline = period if rng.random() < 0.6 else rng.randint(period // 2,
                                                                 2 * period)
        apps.append({"id": f"a{ai}", "period_ticks": period,
                     "deadline_ticks": deadline, "persistent": True,
                     "edges": edges})
    return micro_doc(nodes=nodes, tasks=tasks, messages=messages,
                     applications=apps,
                     modes=[{"id": "M1", "prio": 1, "apps": [a["id"] for a in apps]}],
                     b_max=1)


def random_multimode_doc(rng: random.Random) -> dict:
    """Small multi-mode instance for the inheritance property suite."""
    nodes = [f"n{i}" for i in range(rng.randint(2, 4))]
    n_apps = rng.randint(2, 5)
    n_modes = rng.randint(2, 4)
    tasks, messages, apps = [], [], []
    for ai in range(n_apps):
        period = rng.choice([20, 40])
        n_t = rng.randint(1, 2)
        ids = []
        for ti in range(n_t):
            tid = f"t{ai}_{ti}"
            tasks.append({"id": tid, "host": rng.choice(nodes),
                          "wcet_ticks": rng.randint(1, 4)})
            ids.append(tid)
        edges = []
        if len(ids) == 2 and rng.random() < 0.7:
            mid = f"m{ai}"
            messages.append({"id": mid, "payload_bytes": 16})
            edges.append({"from_task": ids[0], "to_task": ids[1], "message": mid})
        else:
            for tid in ids:
                edges.append({"from_task": tid, "to_task": None, "message": None})
        apps.append({"id": f"a{ai}", "period_ticks": period,
                     "deadline_ticks": period, "persistent": True,
                     "edges": edges})
    modes = []
    for mi in range(n_modes):
        members = [a["id"] for a in apps if rng.random() < 0.6]
        if not members:
            members = [rng.choice(apps)["id"]]
        modes.append({"id": f"M{mi + 1}", "prio": mi + 1, "apps": members})
    graph = []
    for mi in range(1, n_modes):
        other = rng.randint(0, mi - 1)
        graph.append({"a": f"M{other + 1}", "b": f"M{mi + 1}"})
        if rng.random() < 0.3 and mi >= 2:
            third = rng.randint(0, mi - 2)
            if {"a": f"M{third + 1}", "b": f"M{mi + 1}"} not in graph:
                graph.append({"a": f"M{third + 1}", "b": f"M{mi + 1}"})
    return micro_doc(nodes=nodes, tasks=tasks, messages=messages,
                     applications=apps, modes=modes, mode_graph=graph,
                     b_max=2)
