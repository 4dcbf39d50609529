"""Independent schedule checker.

Re-derives every scheduling condition arithmetically from concrete values:
precedence, end-to-end deadlines, per-node task exclusion, round layout
and capacity, and the release/deadline conditions via instance-level
matching (not via the counter encoding, so this check and the integer
program are independent routes). System-level checks add persistence
across mode transitions and conflict-freedom of each mode's legacy set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .flows import edf_match
from .schedule import ModeSchedule, SystemSchedule, app_slice, round_length_ticks
from .synth import _tasks_overlap, conflict_free, defining_mode
from .sysmodel import SpecError, SystemSpec, hyperperiod, mode_sets

KINDS = ("precedence", "e2e-deadline", "node-overlap", "round-overlap",
         "capacity", "release", "deadline", "persistence", "legacy-conflict")


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: tuple[str, ...]
    tick: Optional[int] = None
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, subject: Sequence[str], tick: Optional[int] = None,
            detail: str = "") -> None:
        assert kind in KINDS
        # first witness per kind and mode is enough for a diagnosis
        key = (kind, subject[0] if subject else "")
        for v in self.violations:
            if (v.kind, v.subject[0] if v.subject else "") == key:
                return
        self.violations.append(Violation(kind, tuple(subject), tick, detail))

    def to_dict(self) -> dict:
        return {"ok": self.ok,
                "violations": [{"kind": v.kind, "subject": list(v.subject),
                                "tick": v.tick, "detail": v.detail}
                               for v in self.violations]}


def validate_mode(spec: SystemSpec, mode_id: str, sched: ModeSchedule,
                  report: Optional[ValidationReport] = None,
                  prefix: tuple[str, ...] = ()) -> ValidationReport:
    """Check one mode schedule; returns a report instead of raising."""
    report = report if report is not None else ValidationReport()
    mode_tasks: set[str] = set()
    mode_msgs: set[str] = set()
    deadlines_t: dict[str, int] = {}
    deadlines_m: dict[str, int] = {}
    for aid in sorted(spec.apps_of_mode(mode_id)):
        app = spec.applications[aid]
        for t in app.tasks:
            mode_tasks.add(t)
            deadlines_t[t] = min(deadlines_t.get(t, app.deadline), app.deadline)
        for m in app.messages:
            mode_msgs.add(m)
            deadlines_m[m] = min(deadlines_m.get(m, app.deadline), app.deadline)

    alien = (set(sched.task_offsets) - mode_tasks) | (set(sched.msg_offsets) - mode_msgs)
    if alien:
        raise SpecError(f"schedule for mode {mode_id!r} references entities "
                        f"outside the mode: {sorted(alien)}")
    missing = (mode_tasks - set(sched.task_offsets)) | (mode_msgs - set(sched.msg_offsets))
    if missing or (mode_msgs - set(sched.msg_deadlines)):
        raise SpecError(f"schedule for mode {mode_id!r} is missing entries for "
                        f"{sorted(missing or (mode_msgs - set(sched.msg_deadlines)))}")
    for rnd in sched.rounds:
        unknown = set(rnd.alloc) - mode_msgs
        if unknown:
            raise SpecError(f"round at {rnd.start} allocates {sorted(unknown)} "
                            f"outside mode {mode_id!r}")

    lcm = hyperperiod(spec, mode_id)
    t_round = round_length_ticks(spec)

    # ranges and end-to-end deadlines
    for t in sorted(mode_tasks):
        o = sched.task_offsets[t]
        p = spec.period_of_task(t)
        e = spec.tasks[t].wcet
        if not 0 <= o < p:
            report.add("e2e-deadline", prefix + (t,), o, "offset outside [0, period)")
        elif o + e > deadlines_t[t]:
            report.add("e2e-deadline", prefix + (t,), o + e,
                       f"task completes after the deadline {deadlines_t[t]}")
    for m in sorted(mode_msgs):
        o, d = sched.msg_offsets[m], sched.msg_deadlines[m]
        p = spec.period_of_message(m)
        if not 0 <= o < p or d <= 0:
            report.add("e2e-deadline", prefix + (m,), o, "offset/deadline out of range")
        elif o + d > deadlines_m[m]:
            report.add("e2e-deadline", prefix + (m,), o + d,
                       f"message completes after the deadline {deadlines_m[m]}")

    # precedence along application edges
    for aid in sorted(spec.apps_of_mode(mode_id)):
        for e in spec.applications[aid].edges:
            if e.message is None:
                continue
            if e.from_task is not None:
                end = sched.task_offsets[e.from_task] + spec.tasks[e.from_task].wcet
                if sched.msg_offsets[e.message] < end:
                    report.add("precedence", prefix + (e.from_task, e.message),
                               sched.msg_offsets[e.message],
                               "message released before its producer finishes")
            if e.to_task is not None:
                due = sched.msg_offsets[e.message] + sched.msg_deadlines[e.message]
                if sched.task_offsets[e.to_task] < due:
                    report.add("precedence", prefix + (e.message, e.to_task),
                               sched.task_offsets[e.to_task],
                               "consumer starts before the message deadline")

    # per-node exclusion
    apps_of_task = {t: sorted(a for a in spec.apps_of_mode(mode_id)
                              if t in spec.applications[a].tasks)
                    for t in mode_tasks}
    slices = {}
    for t in sorted(mode_tasks):
        aid = apps_of_task[t][0]
        slices.setdefault(aid, {})[t] = sched.task_offsets[t]
    order = sorted(mode_tasks)
    for i, ta in enumerate(order):
        for tb in order[i + 1:]:
            if spec.tasks[ta].host != spec.tasks[tb].host:
                continue
            tick = _tasks_overlap(sched.task_offsets[ta], spec.tasks[ta].wcet,
                                  spec.period_of_task(ta),
                                  sched.task_offsets[tb], spec.tasks[tb].wcet,
                                  spec.period_of_task(tb))
            if tick is not None:
                report.add("node-overlap", prefix + (ta, tb), tick,
                           f"overlap on node {spec.tasks[ta].host!r}")

    # round layout
    starts = [r.start for r in sched.rounds]
    for k, rnd in enumerate(sched.rounds):
        if not 0 <= rnd.start <= lcm - t_round:
            report.add("round-overlap", prefix + (f"round{k}",), rnd.start,
                       "round outside the hyperperiod")
        if k + 1 < len(sched.rounds) and starts[k] + t_round > starts[k + 1]:
            report.add("round-overlap", prefix + (f"round{k}", f"round{k+1}"),
                       starts[k + 1], "rounds overlap")
        if len(rnd.alloc) > spec.network.b_max:
            report.add("capacity", prefix + (f"round{k}",), rnd.start,
                       f"{len(rnd.alloc)} slots exceed B_max")

    # per-hyperperiod service totals
    for m in sorted(mode_msgs):
        expect = lcm // spec.period_of_message(m)
        got = sum(r.alloc.count(m) for r in sched.rounds)
        if got != expect:
            report.add("capacity", prefix + (m,), None,
                       f"{got} slots per hyperperiod, {expect} instances need serving")

    # release/deadline conditions via instance matching (two hyperperiods);
    # out-of-range offsets were reported above and make the timing undefined
    try:
        match = edf_match(spec, mode_id, sched, 2 * lcm)
    except ValueError:
        match = None
    if match is not None and not match.ok:
        v = match.violation
        kind = {"too-early": "release", "too-late": "deadline",
                "no-slot": "deadline"}[v.reason]
        report.add(kind, prefix + (v.message,), v.instance,
                   f"instance {v.instance} unserved ({v.reason})")
    return report


def validate_system(spec: SystemSpec, ssched: SystemSchedule) -> ValidationReport:
    """Check every mode plus persistence and legacy conflict-freedom."""
    report = ValidationReport()
    for mode in spec.modes_by_priority():
        if mode.id not in ssched.modes:
            raise SpecError(f"schedule is missing mode {mode.id!r}")
        if mode.apps:
            validate_mode(spec, mode.id, ssched.modes[mode.id], report, (mode.id,))

    # persistence across every transition inside an app's schedule domain
    for aid in sorted(spec.applications):
        if not spec.applications[aid].persistent:
            continue
        member = [m.id for m in spec.modes_by_priority() if aid in m.apps]
        for i, ma in enumerate(member):
            for mb in member[i + 1:]:
                if not spec.mode_graph.adjacent(ma, mb):
                    continue
                sa = app_slice(spec, aid, ssched.modes[ma])
                sb = app_slice(spec, aid, ssched.modes[mb])
                if not sa.same_as(sb):
                    report.add("persistence", (aid, ma, mb), None,
                               "schedule differs across a mode transition")

    # each mode's legacy set must be conflict-free (slices from defining modes)
    for mode in spec.modes_by_priority():
        if not mode.apps:
            continue
        legacy = mode_sets(spec, mode.id).legacy
        if len(legacy) < 2:
            continue
        slices = {a: app_slice(spec, a, ssched.modes[defining_mode(spec, a)])
                  for a in sorted(legacy)}
        ok, witness = conflict_free(slices, spec)
        if not ok:
            report.add("legacy-conflict",
                       (mode.id, witness.app_a, witness.app_b), witness.tick,
                       f"tasks {witness.task_a!r} and {witness.task_b!r} overlap")
    return report
