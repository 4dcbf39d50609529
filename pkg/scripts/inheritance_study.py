#!/usr/bin/env python3
"""Five-mode inheritance study at desk scale.

Builds a 13-node scenario with 15 persistent applications (45 tasks, 30
messages, periods 1-8 s at 10 ms ticks) running in 5 chained modes,
synthesizes all modes under the three inheritance policies, and prints
the per-mode round counts plus solving times.

Seven applications carry the messages (one sensing task fanning out to
two consumers); eight task-only applications bridge adjacent modes, which
creates the legacy/virtual-legacy structure the policies differ on.
Bridge periods divide both neighbors' base periods, so every mode keeps a
homogeneous hyperperiod.

Run:  python scripts/inheritance_study.py [--out DIR]
"""

from __future__ import annotations

import argparse
import json
import time

from roundsched.schedule import schedule_to_json
from roundsched.synth import synthesize_system
from roundsched.sysmodel import normalize, parse_system_spec
from roundsched.validate import validate_system

# mode -> base period in 10 ms ticks (1 s .. 8 s)
BASE_PERIOD = {"M1": 400, "M2": 800, "M3": 400, "M4": 800, "M5": 100}

# message-carrying apps: (id, mode, messages to consumer 1 / consumer 2)
CARRIERS = [
    ("app01", "M1", (2, 2)),
    ("app02", "M1", (2, 2)),
    ("app03", "M2", (2, 2)),
    ("app04", "M3", (3, 2)),
    ("app05", "M3", (2, 2)),
    ("app06", "M4", (2, 2)),
    ("app07", "M5", (3, 2)),
]

# task-only bridge apps spanning two adjacent modes
BRIDGES = [
    ("app08", ("M1", "M2"), 400),
    ("app09", ("M1", "M2"), 400),
    ("app10", ("M2", "M3"), 400),
    ("app11", ("M2", "M3"), 400),
    ("app12", ("M3", "M4"), 400),
    ("app13", ("M3", "M4"), 400),
    ("app14", ("M4", "M5"), 100),
    ("app15", ("M4", "M5"), 100),
]

MODE_GRAPH = [{"a": "M1", "b": "M2"}, {"a": "M2", "b": "M3"},
              {"a": "M3", "b": "M4"}, {"a": "M4", "b": "M5"}]


def build_scenario() -> dict:
    nodes = [f"n{i:02d}" for i in range(1, 14)]
    tasks, messages, apps = [], [], []
    mode_apps = {m: [] for m in BASE_PERIOD}
    idx = 0

    def add_app(name, period, member_modes, msg_counts):
        nonlocal idx
        chain = [f"{name}_t{k}" for k in range(3)]
        hosts = [nodes[(idx + 5 * k) % 13] for k in range(3)]
        idx += 1
        for k, (tid, host) in enumerate(zip(chain, hosts)):
            tasks.append({"id": tid, "host": host,
                          "wcet_ticks": 1 + (idx + k) % 3})
        edges = []
        if msg_counts is None:
            for tid in chain:
                edges.append({"from_task": tid, "to_task": None, "message": None})
        else:
            mi = 0
            for dst, count in zip((1, 2), msg_counts):
                for _ in range(count):
                    mid = f"{name}_m{mi}"
                    mi += 1
                    messages.append({"id": mid, "payload_bytes": 16})
                    edges.append({"from_task": chain[0],
                                  "to_task": chain[dst], "message": mid})
        apps.append({"id": name, "period_ticks": period,
                     "deadline_ticks": period, "persistent": True,
                     "edges": edges})
        for m in member_modes:
            mode_apps[m].append(name)

    for name, mode, counts in CARRIERS:
        add_app(name, BASE_PERIOD[mode], (mode,), counts)
    for name, modes, period in BRIDGES:
        add_app(name, period, modes, None)

    return {
        "nodes": [{"id": n} for n in nodes],
        "tasks": tasks,
        "messages": messages,
        "applications": apps,
        "modes": [{"id": m, "prio": p, "apps": mode_apps[m]}
                  for p, m in enumerate(sorted(BASE_PERIOD), start=1)],
        "mode_graph": MODE_GRAPH,
        "network": {"L": 16, "B_max": 10, "N": 2, "H": 4, "L_max": 64},
        "tick_us": 10000,
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", help="write spec + schedules to this directory")
    args = parser.parse_args()

    doc = build_scenario()
    print(f"scenario: {len(doc['nodes'])} nodes, {len(doc['applications'])} apps, "
          f"{len(doc['tasks'])} tasks, {len(doc['messages'])} messages, "
          f"{len(doc['modes'])} modes")
    spec = normalize(parse_system_spec(json.dumps(doc)))
    results = {}
    for policy in ("none", "minimal", "full"):
        t0 = time.monotonic()
        ssched = synthesize_system(spec, policy=policy)
        elapsed = time.monotonic() - t0
        report = validate_system(spec, ssched)
        rounds = {m: len(s.rounds) for m, s in sorted(ssched.modes.items())}
        results[policy] = rounds
        flag = "ok" if (report.ok or policy == "none") else "INVALID"
        print(f"{policy:8s} rounds={rounds}  {elapsed:6.1f}s  validate={flag}")
        if args.out:
            with open(f"{args.out}/schedule_{policy}.json", "w") as fh:
                fh.write(schedule_to_json(spec, ssched))
    if args.out:
        with open(f"{args.out}/scenario.json", "w") as fh:
            json.dump(doc, fh, indent=2)
    for mode in sorted(BASE_PERIOD):
        assert results["none"][mode] <= results["minimal"][mode] \
            <= results["full"][mode]
    print("per-mode ordering none <= minimal <= full holds")


if __name__ == "__main__":
    main()
