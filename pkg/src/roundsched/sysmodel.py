"""Problem-instance model: nodes, tasks, messages, applications, modes.

Loads and validates a system specification document (JSON) and provides
the mode-graph analysis used by the multi-mode synthesis: schedule
domains, application replication (normalize), the known/free/legacy/
virtual-legacy sets of a mode, and minimal virtual-legacy sets.

All operations are pure; a SystemSpec is immutable once constructed.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from functools import reduce
from typing import Iterable, Mapping, Optional, Sequence

from .netmodel import PlatformConstants


class SpecError(ValueError):
    """Raised when a spec document violates an invariant; names the first one."""


_ID_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_-]*$")
# application ids additionally allow '.' so replica names stay legal
_APP_ID_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_.-]*$")


@dataclass(frozen=True)
class NodeSpec:
    id: str
    name: str = ""


@dataclass(frozen=True)
class TaskSpec:
    id: str
    host: str                       # node the task is mapped to
    wcet: int                       # ticks
    preceding_messages: frozenset[str] = frozenset()


@dataclass(frozen=True)
class MessageSpec:
    id: str
    preceding_tasks: frozenset[str]
    payload: int                    # bytes


@dataclass(frozen=True)
class AppEdge:
    """One precedence edge of an application graph.

    `message` is None for an isolated-vertex entry (a task with no
    incident message); `to_task` is None for a message with no consuming
    task inside this application.
    """

    from_task: Optional[str]
    to_task: Optional[str]
    message: Optional[str]


@dataclass(frozen=True)
class ApplicationSpec:
    id: str
    period: int                     # ticks
    deadline: int                   # ticks, end-to-end; may exceed period
    edges: tuple[AppEdge, ...]
    persistent: bool = True

    @property
    def tasks(self) -> frozenset[str]:
        out = set()
        for e in self.edges:
            if e.from_task is not None:
                out.add(e.from_task)
            if e.to_task is not None:
                out.add(e.to_task)
        return frozenset(out)

    @property
    def messages(self) -> frozenset[str]:
        return frozenset(e.message for e in self.edges if e.message is not None)


@dataclass(frozen=True)
class ModeSpec:
    id: str
    prio: int                       # 1 = highest
    apps: frozenset[str]


@dataclass(frozen=True)
class ModeGraph:
    """Undirected adjacency over mode ids (symmetric, no self-loops)."""

    edges: frozenset[frozenset[str]]

    def adjacent(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.edges

    def neighbors(self, m: str) -> frozenset[str]:
        out = set()
        for e in self.edges:
            if m in e:
                out.update(e - {m})
        return frozenset(out)


@dataclass(frozen=True)
class NetworkConfig:
    payload_l: int                  # bytes, regular-message payload
    b_max: int                      # slots per round
    n_tx: int                       # transmissions per flood
    hops: int                       # network diameter
    l_max: int                      # max payload bytes

    def __post_init__(self) -> None:
        for name in ("payload_l", "b_max", "n_tx", "hops", "l_max"):
            if getattr(self, name) <= 0:
                raise SpecError(f"network parameter {name} must be > 0")
        if self.payload_l > self.l_max:
            raise SpecError("network payload L exceeds L_max")


@dataclass(frozen=True)
class SystemSpec:
    nodes: tuple[NodeSpec, ...]
    tasks: Mapping[str, TaskSpec]
    messages: Mapping[str, MessageSpec]
    applications: Mapping[str, ApplicationSpec]
    modes: Mapping[str, ModeSpec]
    mode_graph: ModeGraph
    network: NetworkConfig
    platform: PlatformConstants
    tick: int = 10                  # microseconds per tick

    def modes_by_priority(self) -> list[ModeSpec]:
        return sorted(self.modes.values(), key=lambda m: m.prio)

    def apps_of_mode(self, mode_id: str) -> frozenset[str]:
        if mode_id not in self.modes:
            raise SpecError(f"unknown mode {mode_id!r}")
        return self.modes[mode_id].apps

    def tasks_of_app(self, app_id: str) -> frozenset[str]:
        return self.applications[app_id].tasks

    def task_apps(self, task_id: str) -> list[str]:
        return [a.id for a in self.applications.values() if task_id in a.tasks]

    def message_apps(self, msg_id: str) -> list[str]:
        return [a.id for a in self.applications.values() if msg_id in a.messages]

    def period_of_task(self, task_id: str) -> int:
        apps = self.task_apps(task_id)
        return self.applications[apps[0]].period

    def period_of_message(self, msg_id: str) -> int:
        apps = self.message_apps(msg_id)
        return self.applications[apps[0]].period


@dataclass(frozen=True)
class ModeSets:
    """Known / free / legacy / virtual-legacy application sets of one mode."""

    known: frozenset[str]
    free: frozenset[str]
    legacy: frozenset[str]
    virtual_legacy: frozenset[str]


# ---------------------------------------------------------------------------
# document parsing
# ---------------------------------------------------------------------------

def _check_id(kind: str, value, pattern: re.Pattern = _ID_RE) -> str:
    if not isinstance(value, str) or not pattern.match(value):
        raise SpecError(f"malformed document: invalid {kind} id {value!r}")
    return value


def parse_system_spec(text: str) -> SystemSpec:
    """Parse and validate a system spec document (JSON text)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed document: {exc}") from exc
    if not isinstance(doc, dict):
        raise SpecError("malformed document: top level must be an object")
    return spec_from_dict(doc)


def load_system_spec(path: str) -> SystemSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_system_spec(fh.read())


def spec_from_dict(doc: dict) -> SystemSpec:
    for key in ("nodes", "tasks", "messages", "applications", "modes", "network"):
        if key not in doc:
            raise SpecError(f"malformed document: missing {key!r}")

    nodes = tuple(NodeSpec(id=_check_id("node", n["id"]), name=n.get("name", ""))
                  for n in doc["nodes"])
    if len({n.id for n in nodes}) != len(nodes):
        raise SpecError("duplicate node id")
    node_ids = {n.id for n in nodes}

    net = doc["network"]
    network = NetworkConfig(payload_l=int(net["L"]), b_max=int(net["B_max"]),
                            n_tx=int(net["N"]), hops=int(net["H"]),
                            l_max=int(net["L_max"]))

    platform = PlatformConstants(**doc.get("platform", {}))
    tick = int(doc.get("tick_us", 10))
    if tick <= 0:
        raise SpecError("tick_us must be > 0")

    # applications and their graphs
    apps: dict[str, ApplicationSpec] = {}
    for a in doc["applications"]:
        aid = _check_id("application", a["id"], _APP_ID_RE)
        if aid in apps:
            raise SpecError(f"duplicate application id {aid!r}")
        edges = []
        for e in a.get("edges", []):
            edges.append(AppEdge(from_task=e.get("from_task"),
                                 to_task=e.get("to_task"),
                                 message=e.get("message")))
        period = int(a["period_ticks"])
        deadline = int(a["deadline_ticks"])
        if period <= 0:
            raise SpecError(f"application {aid!r}: period must be > 0")
        if deadline <= 0:
            raise SpecError(f"application {aid!r}: deadline must be > 0")
        apps[aid] = ApplicationSpec(id=aid, period=period, deadline=deadline,
                                    edges=tuple(edges),
                                    persistent=bool(a.get("persistent", True)))

    # tasks; preceding messages derived from edges when omitted
    derived_prec: dict[str, set[str]] = {}
    msg_senders: dict[str, set[str]] = {}
    for a in apps.values():
        for e in a.edges:
            if e.message is None:
                continue
            if e.from_task is None:
                raise SpecError(f"message {e.message!r} has no preceding task "
                                f"(application {a.id!r})")
            msg_senders.setdefault(e.message, set()).add(e.from_task)
            if e.to_task is not None:
                derived_prec.setdefault(e.to_task, set()).add(e.message)

    tasks: dict[str, TaskSpec] = {}
    for t in doc["tasks"]:
        tid = _check_id("task", t["id"])
        if tid in tasks:
            raise SpecError(f"duplicate task id {tid!r}")
        wcet = int(t["wcet_ticks"])
        if wcet <= 0:
            raise SpecError(f"task {tid!r}: wcet must be > 0")
        host = t["host"]
        if host not in node_ids:
            raise SpecError(f"dangling id reference: task {tid!r} host {host!r}")
        prec = frozenset(t["prec"]) if "prec" in t else frozenset(derived_prec.get(tid, ()))
        tasks[tid] = TaskSpec(id=tid, host=host, wcet=wcet, preceding_messages=prec)

    messages: dict[str, MessageSpec] = {}
    for m in doc["messages"]:
        mid = _check_id("message", m["id"])
        if mid in messages:
            raise SpecError(f"duplicate message id {mid!r}")
        payload = int(m.get("payload_bytes", network.payload_l))
        if payload > network.l_max:
            raise SpecError(f"message {mid!r}: payload {payload} exceeds L_max")
        prec = frozenset(m["prec"]) if "prec" in m else frozenset(msg_senders.get(mid, ()))
        if not prec:
            raise SpecError(f"message {mid!r} has no preceding task")
        messages[mid] = MessageSpec(id=mid, preceding_tasks=prec, payload=payload)

    # cross references from graphs
    for a in apps.values():
        for e in a.edges:
            for tid in (e.from_task, e.to_task):
                if tid is not None and tid not in tasks:
                    raise SpecError(f"dangling id reference: task {tid!r} "
                                    f"in application {a.id!r}")
            if e.message is not None and e.message not in messages:
                raise SpecError(f"dangling id reference: message {e.message!r} "
                                f"in application {a.id!r}")
        _check_acyclic(a)

    # consistency of declared precedence sets against the graphs
    for tid, t in tasks.items():
        derived = frozenset(derived_prec.get(tid, ()))
        if t.preceding_messages != derived:
            raise SpecError(f"task {tid!r}: prec {sorted(t.preceding_messages)} "
                            f"does not match graph edges {sorted(derived)}")
    for mid, m in messages.items():
        derived = frozenset(msg_senders.get(mid, ()))
        if derived and m.preceding_tasks != derived:
            raise SpecError(f"message {mid!r}: prec {sorted(m.preceding_tasks)} "
                            f"does not match graph edges {sorted(derived)}")
        for tid in m.preceding_tasks:
            if tid not in tasks:
                raise SpecError(f"dangling id reference: task {tid!r} "
                                f"in message {mid!r}")

    # shared tasks/messages imply equal periods
    for tid in tasks:
        periods = {apps[a].period for a in apps if tid in apps[a].tasks}
        if len(periods) > 1:
            raise SpecError(f"period mismatch on shared task {tid!r}: {sorted(periods)}")
    for mid in messages:
        periods = {apps[a].period for a in apps if mid in apps[a].messages}
        if len(periods) > 1:
            raise SpecError(f"period mismatch on shared message {mid!r}: {sorted(periods)}")

    # modes
    modes: dict[str, ModeSpec] = {}
    for m in doc["modes"]:
        mid = _check_id("mode", m["id"])
        if mid in modes:
            raise SpecError(f"duplicate mode id {mid!r}")
        for aid in m["apps"]:
            if aid not in apps:
                raise SpecError(f"dangling id reference: application {aid!r} "
                                f"in mode {mid!r}")
        modes[mid] = ModeSpec(id=mid, prio=int(m["prio"]), apps=frozenset(m["apps"]))
    prios = sorted(m.prio for m in modes.values())
    if len(set(prios)) != len(prios):
        raise SpecError("duplicate priority in mode set")
    if modes and prios != list(range(1, len(modes) + 1)):
        raise SpecError(f"mode priorities must be 1..{len(modes)} without gaps, "
                        f"got {prios}")

    edges = set()
    for e in doc.get("mode_graph", []):
        a, b = e["a"], e["b"]
        for mid in (a, b):
            if mid not in modes:
                raise SpecError(f"dangling id reference: mode {mid!r} in mode_graph")
        if a == b:
            raise SpecError(f"mode graph self-loop on {a!r}")
        edges.add(frozenset((a, b)))
    graph = ModeGraph(edges=frozenset(edges))

    return SystemSpec(nodes=nodes, tasks=tasks, messages=messages,
                      applications=apps, modes=modes, mode_graph=graph,
                      network=network, platform=platform, tick=tick)


def _check_acyclic(app: ApplicationSpec) -> None:
    succ: dict[str, set[str]] = {}
    for e in app.edges:
        if e.message is not None and e.from_task is not None and e.to_task is not None:
            succ.setdefault(e.from_task, set()).add(e.to_task)
    state: dict[str, int] = {}

    def visit(v: str) -> None:
        state[v] = 1
        for w in succ.get(v, ()):
            if state.get(w) == 1:
                raise SpecError(f"cyclic precedence graph in application {app.id!r}")
            if state.get(w, 0) == 0:
                visit(w)
        state[v] = 2

    for v in list(succ):
        if state.get(v, 0) == 0:
            visit(v)


def spec_to_dict(spec: SystemSpec) -> dict:
    """Inverse of spec_from_dict (canonical form, for hashing and round trips)."""
    return {
        "nodes": [{"id": n.id, "name": n.name} for n in spec.nodes],
        "tasks": [{"id": t.id, "host": t.host, "wcet_ticks": t.wcet,
                   "prec": sorted(t.preceding_messages)}
                  for t in sorted(spec.tasks.values(), key=lambda t: t.id)],
        "messages": [{"id": m.id, "prec": sorted(m.preceding_tasks),
                      "payload_bytes": m.payload}
                     for m in sorted(spec.messages.values(), key=lambda m: m.id)],
        "applications": [{"id": a.id, "period_ticks": a.period,
                          "deadline_ticks": a.deadline, "persistent": a.persistent,
                          "edges": [{"from_task": e.from_task, "to_task": e.to_task,
                                     "message": e.message} for e in a.edges]}
                         for a in sorted(spec.applications.values(), key=lambda a: a.id)],
        "modes": [{"id": m.id, "prio": m.prio, "apps": sorted(m.apps)}
                  for m in spec.modes_by_priority()],
        "mode_graph": [{"a": min(e), "b": max(e)}
                       for e in sorted(spec.mode_graph.edges, key=sorted)],
        "network": {"L": spec.network.payload_l, "B_max": spec.network.b_max,
                    "N": spec.network.n_tx, "H": spec.network.hops,
                    "L_max": spec.network.l_max},
        "platform": {k: getattr(spec.platform, k) for k in
                     ("t_wakeup", "t_start", "t_gap", "t_d", "l_cal", "l_header",
                      "r_bit", "t_preprocess", "l_beacon", "slot_quantum")},
        "tick_us": spec.tick,
    }


# ---------------------------------------------------------------------------
# mode analysis
# ---------------------------------------------------------------------------

def hyperperiod(spec: SystemSpec, mode_id: str) -> int:
    """LCM of the periods of all applications in the mode."""
    apps = spec.apps_of_mode(mode_id)
    if not apps:
        raise SpecError(f"mode {mode_id!r} has no applications")
    return reduce(math.lcm, (spec.applications[a].period for a in sorted(apps)))


def schedule_domains(spec: SystemSpec, app_id: str) -> frozenset[frozenset[str]]:
    """Connected components of the mode graph restricted to modes containing the app."""
    if app_id not in spec.applications:
        raise SpecError(f"unknown application {app_id!r}")
    member = {m.id for m in spec.modes.values() if app_id in m.apps}
    seen: set[str] = set()
    domains = set()
    for start in sorted(member):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in spec.mode_graph.neighbors(v):
                if w in member and w not in comp:
                    comp.add(w)
                    stack.append(w)
        seen |= comp
        domains.add(frozenset(comp))
    return frozenset(domains)


def normalize(spec: SystemSpec) -> SystemSpec:
    """Replicate applications until each is persistent with one schedule domain.

    Non-persistent applications present in several modes become one replica
    per mode; persistent applications with several schedule domains become
    one replica per domain. Replica ids are '<app>.<lowest prio in scope>'.
    Replicas reference the parent's tasks and messages unchanged.
    Applications present in no mode are dropped (nothing schedules them).
    """
    new_apps: dict[str, ApplicationSpec] = {}
    mode_apps: dict[str, set[str]] = {m.id: set() for m in spec.modes.values()}
    changed = False

    for app in sorted(spec.applications.values(), key=lambda a: a.id):
        member = sorted(m.id for m in spec.modes.values() if app.id in m.apps)
        if not member:
            changed = True
            continue
        if app.persistent:
            scopes = sorted(schedule_domains(spec, app.id),
                            key=lambda d: min(spec.modes[m].prio for m in d))
        else:
            scopes = [frozenset((m,)) for m in member]
        if len(scopes) == 1 and app.persistent:
            new_apps[app.id] = app
            for m in scopes[0]:
                mode_apps[m].add(app.id)
            continue
        changed = True
        for scope in scopes:
            prio = min(spec.modes[m].prio for m in scope)
            rid = f"{app.id}.{prio}"
            if rid in new_apps or rid in spec.applications:
                raise SpecError(f"replica id collision for {rid!r}")
            new_apps[rid] = replace(app, id=rid, persistent=True)
            for m in scope:
                mode_apps[m].add(rid)

    if not changed:
        return spec

    new_modes = {m.id: replace(m, apps=frozenset(mode_apps[m.id]))
                 for m in spec.modes.values()}
    return replace(spec, applications=new_apps, modes=new_modes)


def mode_sets(spec: SystemSpec, mode_id: str) -> ModeSets:
    """Known/free/legacy/virtual-legacy sets of a mode (normalized spec)."""
    if mode_id not in spec.modes:
        raise SpecError(f"unknown mode {mode_id!r}")
    mode = spec.modes[mode_id]
    known: set[str] = set()
    for other in spec.modes.values():
        if other.prio < mode.prio:
            known |= other.apps
    legacy = mode.apps & known
    free = mode.apps - known
    virtual = frozenset(known - mode.apps)
    return ModeSets(known=frozenset(known), free=frozenset(free),
                    legacy=frozenset(legacy), virtual_legacy=virtual)


def minimal_virtual_legacy(spec: SystemSpec, mode_id: str, app_id: str) -> frozenset[str]:
    """Virtual-legacy apps that must be reserved when scheduling `app_id` freely.

    These are the previously scheduled apps absent from this mode that later
    become legacy together with `app_id` in some lower-priority mode.
    """
    sets = mode_sets(spec, mode_id)
    if app_id not in sets.free:
        raise SpecError(f"application {app_id!r} is not free in mode {mode_id!r}")
    prio = spec.modes[mode_id].prio
    out = set()
    for other in spec.modes.values():
        if other.prio <= prio:
            continue
        lower = mode_sets(spec, other.id)
        if app_id in lower.legacy:
            out |= (sets.virtual_legacy & lower.legacy)
    return frozenset(out)
