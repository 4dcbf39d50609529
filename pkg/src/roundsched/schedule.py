"""Schedule containers and the schedule document format.

A ModeSchedule holds the synthesis outputs for one mode: task offsets,
message offsets and deadlines, and the round table (start times plus
allocation vectors). A SystemSchedule bundles one ModeSchedule per mode
together with the inheritance policy that produced it.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from . import netmodel
from .sysmodel import SpecError, SystemSpec, hyperperiod, spec_to_dict


@dataclass(frozen=True)
class Round:
    start: int                      # ticks, relative to hyperperiod start
    alloc: tuple[str, ...]          # message ids, one per occupied slot


@dataclass(frozen=True)
class ModeSchedule:
    mode: str
    task_offsets: Mapping[str, int]
    msg_offsets: Mapping[str, int]
    msg_deadlines: Mapping[str, int]
    rounds: tuple[Round, ...]


@dataclass(frozen=True)
class SystemSchedule:
    modes: Mapping[str, ModeSchedule]
    policy: str = "minimal"         # none | minimal | full
    spec_hash: str = ""
    tick_us: int = 10


@dataclass(frozen=True)
class AppSlice:
    """The schedule slice of one application: everything continuity pins."""

    app: str
    task_offsets: Mapping[str, int]
    msg_offsets: Mapping[str, int]
    msg_deadlines: Mapping[str, int]

    def same_as(self, other: "AppSlice") -> bool:
        return (dict(self.task_offsets) == dict(other.task_offsets)
                and dict(self.msg_offsets) == dict(other.msg_offsets)
                and dict(self.msg_deadlines) == dict(other.msg_deadlines))


@dataclass(frozen=True)
class InheritanceConstraints:
    """Equality pins for legacy apps and non-overlap obstacles for reserved ones."""

    pinned: Mapping[str, AppSlice] = field(default_factory=dict)
    reserved: Mapping[str, AppSlice] = field(default_factory=dict)

    def __post_init__(self) -> None:
        both = set(self.pinned) & set(self.reserved)
        if both:
            raise ValueError(f"apps both pinned and reserved: {sorted(both)}")


def app_slice(spec: SystemSpec, app_id: str, sched: ModeSchedule) -> AppSlice:
    """Extract an application's slice from a mode schedule."""
    app = spec.applications[app_id]
    try:
        t_off = {t: sched.task_offsets[t] for t in sorted(app.tasks)}
        m_off = {m: sched.msg_offsets[m] for m in sorted(app.messages)}
        m_dl = {m: sched.msg_deadlines[m] for m in sorted(app.messages)}
    except KeyError as exc:
        raise SpecError(f"schedule for mode {sched.mode!r} is missing "
                        f"{exc.args[0]!r} of application {app_id!r}") from exc
    return AppSlice(app=app_id, task_offsets=t_off, msg_offsets=m_off,
                    msg_deadlines=m_dl)


def round_length_ticks(spec: SystemSpec) -> int:
    """Fixed round length used by the scheduler: T_r(L, B_max), in ticks.

    All rounds are modeled at full B_max length regardless of fill; the
    microsecond model value is rounded up to the tick grid.
    """
    rt = netmodel.round_length(spec.platform, spec.network,
                               spec.network.payload_l, spec.network.b_max)
    return int(math.ceil(rt.t_round / spec.tick - 1e-9))


def spec_hash(spec: SystemSpec) -> str:
    canon = json.dumps(spec_to_dict(spec), sort_keys=True).encode()
    return hashlib.sha256(canon).hexdigest()[:16]


# ---------------------------------------------------------------------------
# schedule document (JSON)
# ---------------------------------------------------------------------------

def schedule_to_dict(spec: SystemSpec, ssched: SystemSchedule) -> dict:
    per_mode = []
    for mode in spec.modes_by_priority():
        if mode.id not in ssched.modes:
            continue
        ms = ssched.modes[mode.id]
        per_mode.append({
            "mode_id": ms.mode,
            "hyperperiod_ticks": hyperperiod(spec, ms.mode) if mode.apps else 0,
            "tasks": [{"id": t, "offset": o}
                      for t, o in sorted(ms.task_offsets.items())],
            "messages": [{"id": m, "offset": ms.msg_offsets[m],
                          "deadline": ms.msg_deadlines[m]}
                         for m in sorted(ms.msg_offsets)],
            "rounds": [{"start": r.start, "alloc": list(r.alloc)} for r in ms.rounds],
        })
    return {"policy": ssched.policy, "spec_hash": ssched.spec_hash,
            "tick_us": ssched.tick_us, "modes": per_mode}


def schedule_to_json(spec: SystemSpec, ssched: SystemSchedule) -> str:
    return json.dumps(schedule_to_dict(spec, ssched), indent=2) + "\n"


def parse_schedule(spec: SystemSpec, text: str) -> SystemSchedule:
    """Parse a schedule document and check its structural invariants."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed schedule document: {exc}") from exc
    modes: dict[str, ModeSchedule] = {}
    for entry in doc.get("modes", []):
        mid = entry["mode_id"]
        if mid not in spec.modes:
            raise SpecError(f"schedule references unknown mode {mid!r}")
        rounds = tuple(sorted((Round(start=int(r["start"]),
                                     alloc=tuple(r["alloc"]))
                               for r in entry.get("rounds", [])),
                              key=lambda r: r.start))
        ms = ModeSchedule(
            mode=mid,
            task_offsets={t["id"]: int(t["offset"]) for t in entry.get("tasks", [])},
            msg_offsets={m["id"]: int(m["offset"]) for m in entry.get("messages", [])},
            msg_deadlines={m["id"]: int(m["deadline"]) for m in entry.get("messages", [])},
            rounds=rounds,
        )
        if spec.modes[mid].apps:
            lcm = hyperperiod(spec, mid)
            for m in ms.msg_offsets:
                if ms.msg_offsets[m] + ms.msg_deadlines[m] >= 2 * lcm:
                    raise SpecError(f"message {m!r} in mode {mid!r}: offset + deadline "
                                    f"must stay below two hyperperiods")
        modes[mid] = ms
    return SystemSchedule(modes=modes, policy=doc.get("policy", "minimal"),
                          spec_hash=doc.get("spec_hash", ""),
                          tick_us=int(doc.get("tick_us", spec.tick)))


def load_schedule(spec: SystemSpec, path: str) -> SystemSchedule:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_schedule(spec, fh.read())
