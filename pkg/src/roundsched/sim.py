"""Discrete-event execution of a system schedule over a simulated network.

Rounds run as beacon-prefixed slot sequences on an ideal global clock.
Every node wakes for every beacon; a node that misses one is
desynchronized for that round (it neither sends nor receives in the
round's slots and only pays the beacon listen cost) and rejoins at the
next beacon it receives. Each flood (beacon or message) is received
per node as an independent Bernoulli trial.

A mode change runs in two phases: the first beacon at or after the
request announces the target mode, and the trigger bit is raised in the
last round before the departing mode's next hyperperiod boundary; the new
mode's schedule starts at that boundary, which keeps persistent
applications exactly periodic across the switch.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from . import netmodel
from .flows import edf_match
from .schedule import ModeSchedule, SystemSchedule, round_length_ticks
from .sysmodel import SpecError, SystemSpec, hyperperiod


@dataclass(frozen=True)
class LossModel:
    flood_loss_prob: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.flood_loss_prob < 1.0:
            raise ValueError("flood loss probability must be in [0, 1)")


@dataclass(frozen=True)
class ModeChange:
    at: int                         # tick of the change request
    target: str


@dataclass(frozen=True)
class Beacon:
    round_id: int
    mode_id: str
    trigger: int


@dataclass
class NodeStats:
    radio_on_us: float = 0.0
    beacons_missed: int = 0
    rounds_skipped: int = 0


@dataclass
class AppStats:
    completed: int = 0
    misses: int = 0


@dataclass
class SimReport:
    per_app: dict[str, AppStats] = field(default_factory=dict)
    per_node: dict[str, NodeStats] = field(default_factory=dict)
    events: list[tuple[int, str, str, str]] = field(default_factory=list)
    switches: list[tuple[int, str, str]] = field(default_factory=list)

    def trace_csv(self) -> str:
        lines = ["tick,kind,subject,detail"]
        for tick, kind, subject, detail in self.events:
            lines.append(f"{tick},{kind},{subject},{detail}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "apps": {a: {"completed": s.completed, "misses": s.misses}
                     for a, s in sorted(self.per_app.items())},
            "nodes": {n: {"radio_on_us": round(s.radio_on_us, 1),
                          "beacons_missed": s.beacons_missed,
                          "rounds_skipped": s.rounds_skipped}
                      for n, s in sorted(self.per_node.items())},
            "mode_switches": [{"tick": t, "from": a, "to": b}
                              for t, a, b in self.switches],
        }


@dataclass(frozen=True)
class _Segment:
    start: int
    end: int
    mode: str


def _plan_segments(spec: SystemSpec, ssched: SystemSchedule,
                   script: Sequence[ModeChange], duration: int,
                   announce_gap: int = 1):
    """Resolve the script into mode segments plus announce/trigger rounds."""
    current = spec.modes_by_priority()[0].id
    epoch = 0
    segments: list[_Segment] = []
    triggers: dict[tuple[str, int], tuple[int, str]] = {}  # (mode, tick) -> (switch, target)
    announced: dict[tuple[str, int], str] = {}             # (mode, tick) -> target

    for change in script:
        if change.at < epoch:
            raise SpecError(f"mode change at {change.at} precedes the previous "
                            f"switch at {epoch}")
        if not spec.mode_graph.adjacent(current, change.target):
            raise SpecError(f"mode change target {change.target!r} is not adjacent "
                            f"to {current!r} in the mode graph")
        lcm = hyperperiod(spec, current)
        rounds = ssched.modes[current].rounds
        if rounds:
            r = len(rounds)
            # first round ordinal (h * r + j) starting at or after the request
            ordinal = 0
            while True:
                h, j = divmod(ordinal, r)
                if epoch + h * lcm + rounds[j].start >= change.at:
                    break
                ordinal += 1
            announce = ordinal
            trigger = announce + announce_gap
            while trigger % r != r - 1:     # last round of its hyperperiod
                trigger += 1
            h_t = trigger // r
            switch = epoch + (h_t + 1) * lcm
            for o in range(announce, trigger + 1):
                announced[(current, epoch + (o // r) * lcm + rounds[o % r].start)] = change.target
            triggers[(current, epoch + h_t * lcm + rounds[trigger % r].start)] = (switch, change.target)
        else:
            # beacon-less mode: switch at the next hyperperiod boundary
            k = -((change.at - epoch) // -lcm)
            switch = epoch + max(1, k) * lcm
        segments.append(_Segment(start=epoch, end=switch, mode=current))
        current = change.target
        epoch = switch
    segments.append(_Segment(start=epoch, end=duration, mode=current))
    return segments, announced, triggers


def _steady_slot_map(spec: SystemSpec, mode_id: str, sched: ModeSchedule):
    """Per (round index, slot position): (instance index mod n, hyperperiod shift)."""
    if not sched.rounds:
        return {}
    lcm = hyperperiod(spec, mode_id)
    match = edf_match(spec, mode_id, sched, 4 * lcm)
    if not match.ok:
        raise SpecError(f"schedule for mode {mode_id!r} fails instance matching; "
                        f"validate it first")
    out = {}
    for mid, assigned in match.assignment.items():
        n = lcm // spec.period_of_message(mid)
        for q, slot in assigned.items():
            if not n <= q < 2 * n:
                continue            # steady-state window
            key = (slot.round_index, slot.pos)
            if key in out:
                raise SpecError(f"slot {key} of mode {mode_id!r} serves two "
                                f"steady instances; schedule is not periodic")
            out[key] = (mid, q - n, slot.copy - 1)
    return out


def _initiator(spec: SystemSpec, mid: str, task_offsets: Mapping[str, int]) -> str:
    """Host of the last-finishing producer task (ties broken by node id)."""
    cands = []
    for t in sorted(spec.messages[mid].preceding_tasks):
        if t in task_offsets:
            end = task_offsets[t] + spec.tasks[t].wcet
            cands.append((end, spec.tasks[t].host))
    cands.sort(key=lambda c: (-c[0], c[1]))
    return cands[0][1]


def simulate(spec: SystemSpec, ssched: SystemSchedule, loss: LossModel = LossModel(),
             script: Sequence[ModeChange] = (), duration: int = 0,
             announce_gap: int = 1, trace: bool = False) -> SimReport:
    """Run the schedule for `duration` ticks and collect statistics."""
    initial = spec.modes_by_priority()[0].id
    if duration < hyperperiod(spec, initial):
        raise SpecError("duration must cover at least one hyperperiod of the "
                        "initial mode")
    rng = random.Random(loss.seed)
    p = loss.flood_loss_prob
    report = SimReport()
    for n in spec.nodes:
        report.per_node[n.id] = NodeStats()
    for a in sorted(spec.applications):
        report.per_app[a] = AppStats()
    host = spec.nodes[0].id
    node_order = [n.id for n in spec.nodes]

    segments, announced, triggers = _plan_segments(spec, ssched, script, duration,
                                                   announce_gap)

    # activity intervals per app (contiguous segments merged)
    activity: dict[str, list[list[int]]] = {a: [] for a in spec.applications}
    for seg in segments:
        for a in spec.apps_of_mode(seg.mode):
            ivs = activity[a]
            if ivs and ivs[-1][1] == seg.start:
                ivs[-1][1] = seg.end
            else:
                ivs.append([seg.start, seg.end])

    def active(app: str, start: int, end: int) -> bool:
        return any(lo <= start and end <= hi for lo, hi in activity[app])

    slot_maps = {m: _steady_slot_map(spec, m, ssched.modes[m])
                 for m in {s.mode for s in segments}}
    t_round = round_length_ticks(spec)
    on_beacon = netmodel.slot_timing(spec.platform, spec.network,
                                     spec.platform.l_beacon).t_on
    on_regular = netmodel.slot_timing(spec.platform, spec.network,
                                      spec.network.payload_l).t_on

    produced: dict[tuple[str, int], int] = {}    # (msg, release) -> ready tick
    delivered: dict[tuple[str, int], dict[str, int]] = {}
    executed: dict[tuple[str, int], int] = {}    # (task, start) -> end
    synced = {n.id: True for n in spec.nodes}
    round_counter = 0

    def emit(tick: int, kind: str, subject: str, detail: str = "") -> None:
        if trace:
            report.events.append((tick, kind, subject, detail))

    for seg in segments:
        mode = seg.mode
        sched = ssched.modes[mode]
        if not spec.modes[mode].apps:
            continue
        lcm = hyperperiod(spec, mode)
        apps = sorted(spec.apps_of_mode(mode))
        smap = slot_maps[mode]
        inits = {m: _initiator(spec, m, sched.task_offsets)
                 for m in sched.msg_offsets}

        events: list[tuple[int, int, object]] = []
        h = 0
        while seg.start + h * lcm < seg.end:
            base = seg.start + h * lcm
            for j, rnd in enumerate(sched.rounds):
                start = base + rnd.start
                if start < seg.end and start < duration:
                    events.append((start, 0, (j, rnd, base)))
            for aid in apps:
                app = spec.applications[aid]
                for q in range(lcm // app.period):
                    rel = base + q * app.period
                    for t in sorted(app.tasks):
                        start = rel + sched.task_offsets[t]
                        if start < seg.end and start < duration:
                            events.append((start, 1, (t, aid, rel)))
            h += 1
        events.sort(key=lambda e: (e[0], e[1]))   # stable; append order is fixed

        for tick, kind, payload in events:
            if kind == 0:
                j, rnd, base = payload
                round_counter += 1
                trig = triggers.get((mode, tick))
                target = announced.get((mode, tick))
                beacon = Beacon(round_id=j, mode_id=target or mode,
                                trigger=1 if trig else 0)
                emit(tick, "round", f"{mode}/{j}", f"start round {round_counter}")
                emit(tick, "beacon", beacon.mode_id,
                     f"round_id={beacon.round_id} trigger={beacon.trigger}")
                if trig:
                    emit(tick, "trigger", trig[1], f"switch at {trig[0]}")
                elif target:
                    emit(tick, "announce", target, "")
                for n in node_order:
                    if n == host:
                        synced[n] = True
                        continue
                    lost = rng.random() < p
                    if lost:
                        report.per_node[n].beacons_missed += 1
                        report.per_node[n].rounds_skipped += 1
                        synced[n] = False
                        emit(tick, "miss", n, f"beacon of round {round_counter}")
                    else:
                        synced[n] = True
                for n in node_order:
                    st = report.per_node[n]
                    st.radio_on_us += on_beacon
                    if synced[n]:
                        st.radio_on_us += len(rnd.alloc) * on_regular
                end = tick + t_round
                for pos, mid in enumerate(rnd.alloc):
                    entry = smap.get((j, pos))
                    draws = {n: rng.random() for n in node_order}
                    if entry is None:
                        continue
                    _, q, shift = entry
                    rel = (base - shift * lcm) + sched.msg_offsets[mid] \
                        + q * spec.period_of_message(mid)
                    ready = produced.get((mid, rel))
                    init = inits[mid]
                    if ready is None or ready > tick or not synced[init]:
                        emit(tick, "idle", mid, f"instance {rel} not transmittable")
                        continue
                    sinks = delivered.setdefault((mid, rel), {})
                    sinks.setdefault(init, ready)
                    for n in node_order:
                        if n == init or not synced[n]:
                            continue
                        if draws[n] < p:
                            emit(tick, "loss", mid, f"node {n}")
                        else:
                            sinks.setdefault(n, end)
                    emit(tick, "slot", mid, f"release {rel} served")
            else:
                t, aid, rel = payload
                start = rel + sched.task_offsets[t]
                if (t, start) in executed:
                    continue        # same task shared by several apps
                node = spec.tasks[t].host
                ok = True
                for mid in sorted(spec.tasks[t].preceding_messages):
                    if mid not in sched.msg_offsets:
                        continue
                    m_rel = rel + sched.msg_offsets[mid]
                    got = delivered.get((mid, m_rel), {}).get(node)
                    if got is None or got > start:
                        ok = False
                        break
                if not ok:
                    emit(start, "skip", t, f"release {rel}")
                    continue
                end = start + spec.tasks[t].wcet
                executed[(t, start)] = end
                emit(start, "task", t, f"release {rel}")
                for mid in sorted(spec.messages):
                    if t not in spec.messages[mid].preceding_tasks:
                        continue
                    if mid not in sched.msg_offsets:
                        continue
                    m_rel = rel + sched.msg_offsets[mid]
                    pred = [x for x in spec.messages[mid].preceding_tasks
                            if x in sched.task_offsets]
                    if all((x, rel + sched.task_offsets[x]) in executed for x in pred):
                        produced[(mid, m_rel)] = max(
                            rel + sched.task_offsets[x] + spec.tasks[x].wcet
                            for x in pred)

    for a, b in zip(segments, segments[1:]):
        report.switches.append((b.start, a.mode, b.mode))
        emit(b.start, "switch", b.mode, f"from {a.mode}")

    # per-app instance accounting over fully contained activity windows
    for seg in segments:
        sched = ssched.modes[seg.mode]
        if not spec.modes[seg.mode].apps:
            continue
        lcm = hyperperiod(spec, seg.mode)
        for aid in sorted(spec.apps_of_mode(seg.mode)):
            app = spec.applications[aid]
            span = max(sched.task_offsets[t] + spec.tasks[t].wcet for t in app.tasks)
            for m in app.messages:
                span = max(span, sched.msg_offsets[m] + sched.msg_deadlines[m])
            h = 0
            while seg.start + h * lcm < seg.end:
                base = seg.start + h * lcm
                for q in range(lcm // app.period):
                    rel = base + q * app.period
                    if rel >= seg.end or rel + span > duration:
                        continue
                    if not active(aid, rel, rel + span):
                        continue
                    done = all((t, rel + sched.task_offsets[t]) in executed
                               for t in app.tasks)
                    if done:
                        report.per_app[aid].completed += 1
                    else:
                        report.per_app[aid].misses += 1
                h += 1
    return report
