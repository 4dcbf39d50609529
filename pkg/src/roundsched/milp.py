"""Mixed-integer problem builder for one mode's co-schedule.

Encodes, over integer tick variables: task/message precedence, end-to-end
deadlines, per-node non-preemptive task exclusion, ordered disjoint rounds
with capacity, per-hyperperiod service totals, arrival/demand counter
linking, the release/deadline conditions on round packing, equality pins
for inherited legacy schedules, and non-overlap against reserved
(virtual-legacy) task schedules.

The problem form is solver-neutral: integer/binary variables with finite
bounds and linear <=|= constraints, optionally a linear maximize
objective. export_lp writes the standard textual LP format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .schedule import InheritanceConstraints, ModeSchedule, Round, round_length_ticks
from .sysmodel import SpecError, SystemSpec, hyperperiod


class BuildError(ValueError):
    """Structural problem detected while building (bad scale or inconsistent pins)."""


# Declaration groups in branch order. Task offsets come first so that the
# dominance hints are justified: once producers are fixed, a message offset
# at its propagated minimum dominates (shifting it down while keeping
# offset+deadline only widens serving windows), and once consumers are
# fixed a message deadline at its propagated maximum dominates (a larger
# deadline only relaxes the serving conditions). Leftover counts and round
# times precede allocations so the counter rows propagate crisply;
# counters come last (they are functionally determined).
VAR_ORDER = ("o_t", "o_m", "r0", "t_r", "x", "d_m", "ka", "kd")


@dataclass(frozen=True)
class Var:
    name: str
    kind: str                       # integer | binary
    lower: int
    upper: int


@dataclass(frozen=True)
class LinCon:
    name: str
    terms: tuple[tuple[int, int], ...]   # (coefficient, variable position)
    sense: str                      # <= | =
    rhs: int


@dataclass
class MilpProblem:
    variables: list[Var] = field(default_factory=list)
    constraints: list[LinCon] = field(default_factory=list)
    objective: Optional[tuple[tuple[int, int], ...]] = None  # maximize
    # dominance hints for the search: positions whose propagated minimum
    # (resp. maximum) value dominates every alternative, so failed
    # assignments need no retry at other values
    min_dominant: set[int] = field(default_factory=set)
    max_dominant: set[int] = field(default_factory=set)

    def add_var(self, name: str, kind: str, lower: int, upper: int) -> int:
        self.variables.append(Var(name, kind, int(lower), int(upper)))
        return len(self.variables) - 1

    def add_con(self, name: str, terms: Sequence[tuple[int, int]], sense: str, rhs: int) -> None:
        for _, pos in terms:
            if not 0 <= pos < len(self.variables):
                raise ValueError(f"constraint {name} references undeclared variable")
        self.constraints.append(LinCon(name, tuple((int(c), p) for c, p in terms),
                                       sense, int(rhs)))


@dataclass(frozen=True)
class MilpSolution:
    status: str                     # feasible | infeasible | unknown
    assignment: Optional[tuple[int, ...]] = None
    objective_value: Optional[int] = None
    nodes: int = 0


class VarIndex:
    """Semantic-name lookup into a mode problem's variable vector."""

    def __init__(self) -> None:
        self.by_name: dict[str, int] = {}
        self.tasks: list[str] = []
        self.messages: list[str] = []
        self.rounds: int = 0

    def _add(self, name: str, pos: int) -> None:
        if name in self.by_name:
            raise ValueError(f"duplicate variable name {name!r}")
        self.by_name[name] = pos

    def task_offset(self, task: str) -> int:
        return self.by_name[f"o_t_{task}"]

    def msg_offset(self, msg: str) -> int:
        return self.by_name[f"o_m_{msg}"]

    def msg_deadline(self, msg: str) -> int:
        return self.by_name[f"d_m_{msg}"]

    def round_start(self, j: int) -> int:
        return self.by_name[f"t_r_{j}"]

    def alloc(self, j: int, msg: str) -> int:
        return self.by_name[f"x_{j}_{msg}"]

    def ka(self, msg: str, j: int) -> int:
        return self.by_name[f"ka_{msg}_{j}"]

    def kd(self, msg: str, j: int) -> int:
        return self.by_name[f"kd_{msg}_{j}"]

    def r0(self, msg: str) -> int:
        return self.by_name[f"r0_{msg}"]


def _mode_scope(spec: SystemSpec, mode_id: str):
    """Tasks and messages of a mode with their periods and tightest deadlines."""
    apps = sorted(spec.apps_of_mode(mode_id))
    tasks: dict[str, dict] = {}
    messages: dict[str, dict] = {}
    edges: set[tuple[str, str, str]] = set()
    for aid in apps:
        app = spec.applications[aid]
        for t in app.tasks:
            info = tasks.setdefault(t, {"deadline": app.deadline, "period": app.period})
            info["deadline"] = min(info["deadline"], app.deadline)
        for m in app.messages:
            info = messages.setdefault(m, {"deadline": app.deadline, "period": app.period})
            info["deadline"] = min(info["deadline"], app.deadline)
        for e in app.edges:
            if e.message is None:
                continue
            if e.from_task is not None:
                edges.add((e.from_task, e.message, "in"))
            if e.to_task is not None:
                edges.add((e.message, e.to_task, "out"))
    return apps, tasks, messages, edges


def build_mode_problem(spec: SystemSpec, mode_id: str, rounds: int,
                       inherit: Optional[InheritanceConstraints] = None,
                       objective: bool = False) -> tuple[MilpProblem, VarIndex]:
    """Build the integer program for `mode_id` with a fixed round count."""
    if rounds < 0:
        raise BuildError("round count must be >= 0")
    inherit = inherit or InheritanceConstraints()
    apps, tasks, messages, edges = _mode_scope(spec, mode_id)
    lcm = hyperperiod(spec, mode_id)
    t_round = round_length_ticks(spec)

    for t, info in sorted(tasks.items()):
        if spec.tasks[t].wcet > info["period"]:
            raise BuildError(f"task {t!r}: wcet {spec.tasks[t].wcet} exceeds its "
                             f"period {info['period']}; instances would self-overlap")
    for m, info in sorted(messages.items()):
        if rounds >= 1 and info["period"] < t_round:
            raise BuildError(f"message {m!r}: period {info['period']} is shorter than "
                             f"the round length {t_round}; one slot per round cannot "
                             f"serve it")

    pinned_tasks: dict[str, int] = {}
    pinned_msgs: dict[str, tuple[int, int]] = {}
    for aid, sl in inherit.pinned.items():
        for t, off in sl.task_offsets.items():
            pinned_tasks[t] = off
        for m in sl.msg_offsets:
            pinned_msgs[m] = (sl.msg_offsets[m], sl.msg_deadlines[m])
    _check_pins(spec, mode_id, tasks, messages, edges, pinned_tasks, pinned_msgs)

    prob = MilpProblem()
    vi = VarIndex()
    vi.tasks = sorted(tasks)
    vi.messages = sorted(messages)
    vi.rounds = rounds
    d_floor = t_round if rounds >= 1 else 1

    # declaration order doubles as the solver's branch order; see VAR_ORDER
    def declare(group: str) -> None:
        if group == "o_m":
            for m in vi.messages:
                info = messages[m]
                if m in pinned_msgs:
                    lo = hi = pinned_msgs[m][0]
                else:
                    lo, hi = 0, info["period"] - 1
                pos = prob.add_var(f"o_m_{m}", "integer", lo, hi)
                prob.min_dominant.add(pos)
                vi._add(f"o_m_{m}", pos)
        elif group == "d_m":
            for m in vi.messages:
                info = messages[m]
                if m in pinned_msgs:
                    lo = hi = pinned_msgs[m][1]
                else:
                    # a window of one hyperperiod already reaches every slot,
                    # so capping offset+deadline below 2*lcm loses nothing
                    lo, hi = d_floor, min(info["deadline"], 2 * lcm - 1)
                pos = prob.add_var(f"d_m_{m}", "integer", lo, hi)
                prob.max_dominant.add(pos)
                vi._add(f"d_m_{m}", pos)
        elif group == "t_r":
            for j in range(1, rounds + 1):
                vi._add(f"t_r_{j}",
                        prob.add_var(f"t_r_{j}", "integer", 0, lcm - t_round))
        elif group == "x":
            for j in range(1, rounds + 1):
                for m in vi.messages:
                    vi._add(f"x_{j}_{m}", prob.add_var(f"x_{j}_{m}", "binary", 0, 1))
        elif group == "o_t":
            for t in vi.tasks:
                info = tasks[t]
                hi = min(info["period"] - 1, info["deadline"] - spec.tasks[t].wcet)
                lo = 0
                if t in pinned_tasks:
                    lo = hi = pinned_tasks[t]
                vi._add(f"o_t_{t}", prob.add_var(f"o_t_{t}", "integer", lo, hi))
        elif group == "ka":
            for m in vi.messages:
                n = lcm // messages[m]["period"]
                for j in range(1, rounds + 1):
                    vi._add(f"ka_{m}_{j}",
                            prob.add_var(f"ka_{m}_{j}", "integer", 0, n + 1))
        elif group == "kd":
            for m in vi.messages:
                p = messages[m]["period"]
                n = lcm // p
                d_hi = messages[m]["deadline"]
                for j in range(1, rounds + 1):
                    vi._add(f"kd_{m}_{j}",
                            prob.add_var(f"kd_{m}_{j}", "integer",
                                         -(d_hi // p) - 2, n + 2))
        elif group == "r0":
            for m in vi.messages:
                n = lcm // messages[m]["period"]
                vi._add(f"r0_{m}", prob.add_var(f"r0_{m}", "integer", 0, n))

    for group in VAR_ORDER:
        declare(group)

    # F1/F2: precedence through each application edge
    for a, b, kind in sorted(edges):
        if kind == "in":      # task a -> message b
            e = spec.tasks[a].wcet
            prob.add_con(f"f1_{a}_{b}", [(1, vi.task_offset(a)), (-1, vi.msg_offset(b))],
                         "<=", -e)
        else:                 # message a -> task b
            prob.add_con(f"f2_{a}_{b}",
                         [(1, vi.msg_offset(a)), (1, vi.msg_deadline(a)),
                          (-1, vi.task_offset(b))], "<=", 0)

    # F3: message completion within the application deadline (and below the
    # two-hyperperiod wrap limit of the schedule document)
    for m in vi.messages:
        prob.add_con(f"f3_{m}", [(1, vi.msg_offset(m)), (1, vi.msg_deadline(m))],
                     "<=", min(messages[m]["deadline"], 2 * lcm - 1))

    # F4: per-node non-preemptive exclusion, instance pairs over 2*lcm(pa, pb)
    by_node: dict[str, list[str]] = {}
    for t in vi.tasks:
        by_node.setdefault(spec.tasks[t].host, []).append(t)
    for node in sorted(by_node):
        group = sorted(by_node[node])
        for i in range(len(group)):
            for k in range(i + 1, len(group)):
                _add_exclusion(prob, vi, spec, tasks, group[i], group[k])

    # F5/F12: rounds ordered, disjoint, inside the hyperperiod
    for j in range(1, rounds):
        prob.add_con(f"f5_{j}", [(1, vi.round_start(j)), (-1, vi.round_start(j + 1))],
                     "<=", -t_round)

    # F6: round capacity
    for j in range(1, rounds + 1):
        prob.add_con(f"f6_{j}", [(1, vi.alloc(j, m)) for m in vi.messages],
                     "<=", spec.network.b_max)

    # F7: each message served once per period
    for m in vi.messages:
        n = lcm // messages[m]["period"]
        prob.add_con(f"f7_{m}", [(1, vi.alloc(j, m)) for j in range(1, rounds + 1)],
                     "=", n)

    # F8-F11: arrival/demand counters and the release/deadline conditions
    for m in vi.messages:
        p = messages[m]["period"]
        o, d = vi.msg_offset(m), vi.msg_deadline(m)
        for j in range(1, rounds + 1):
            t, ka, kd = vi.round_start(j), vi.ka(m, j), vi.kd(m, j)
            prob.add_con(f"f8a_{m}_{j}", [(-1, t), (1, o), (p, ka)], "<=", p)
            prob.add_con(f"f8b_{m}_{j}", [(1, t), (-1, o), (-p, ka)], "<=", -1)
            prob.add_con(f"f9a_{m}_{j}", [(-1, t), (1, o), (1, d), (p, kd)],
                         "<=", t_round + p - 1)
            prob.add_con(f"f9b_{m}_{j}", [(1, t), (-1, o), (-1, d), (-p, kd)],
                         "<=", -t_round)
            served = [(1, vi.alloc(k, m)) for k in range(1, j + 1)]
            prob.add_con(f"f10_{m}_{j}", served + [(-1, vi.r0(m)), (-1, ka)], "<=", 0)
            prior = [(-1, vi.alloc(k, m)) for k in range(1, j)]
            prob.add_con(f"f11_{m}_{j}", prior + [(1, vi.r0(m)), (1, kd)], "<=", 0)
            # counter-free forms of the same conditions (exact restatements of
            # af(t_j) >= served_j - r0 and df(t_j + T_r) <= prior_j - r0 on the
            # integer grid): they cut the search without changing the set
            prob.add_con(f"f10d_{m}_{j}",
                         [(-1, t), (1, o), (-p, vi.r0(m))]
                         + [(p, vi.alloc(k, m)) for k in range(1, j + 1)],
                         "<=", p)
            prob.add_con(f"f11d_{m}_{j}",
                         [(1, t), (-1, o), (-1, d), (p, vi.r0(m))]
                         + [(-p, vi.alloc(k, m)) for k in range(1, j)],
                         "<=", -t_round)

    # F14: free-app tasks against reserved virtual-legacy schedules
    free_tasks = set()
    for aid in apps:
        if aid not in inherit.pinned:
            free_tasks |= spec.applications[aid].tasks
    for rid in sorted(inherit.reserved):
        sl = inherit.reserved[rid]
        r_period = spec.applications[rid].period
        for rt in sorted(sl.task_offsets):
            r_off = sl.task_offsets[rt]
            r_host = spec.tasks[rt].host
            r_e = spec.tasks[rt].wcet
            for t in sorted(free_tasks):
                if spec.tasks[t].host != r_host or t == rt:
                    continue
                _add_reservation(prob, vi, spec, tasks, t, rt, r_off, r_period, r_e)

    if objective:
        prob.objective = tuple((1, vi.msg_deadline(m)) for m in vi.messages)
    return prob, vi


def _add_exclusion(prob: MilpProblem, vi: VarIndex, spec: SystemSpec,
                   tasks: Mapping[str, dict], a: str, b: str) -> None:
    pa, pb = tasks[a]["period"], tasks[b]["period"]
    ea, eb = spec.tasks[a].wcet, spec.tasks[b].wcet
    oa, ob = vi.task_offset(a), vi.task_offset(b)
    ua = prob.variables[oa].upper
    ub = prob.variables[ob].upper
    window = 2 * math.lcm(pa, pb)
    for qa in range(window // pa):
        for qb in range(window // pb):
            # a's instance before b's, or b's before a's
            m1 = ua + qa * pa + ea - qb * pb            # slack needed to void A<=B
            m2 = ub + qb * pb + eb - qa * pa
            if m1 <= 0 or m2 <= 0:
                continue            # one disjunct always holds
            y = prob.add_var(f"y_n_{a}_{qa}_{b}_{qb}", "binary", 0, 1)
            vi._add(f"y_n_{a}_{qa}_{b}_{qb}", y)
            prob.add_con(f"f4a_{a}_{qa}_{b}_{qb}",
                         [(1, oa), (-1, ob), (-m1, y)], "<=", qb * pb - qa * pa - ea)
            prob.add_con(f"f4b_{a}_{qa}_{b}_{qb}",
                         [(1, ob), (-1, oa), (m2, y)], "<=", m2 + qa * pa - qb * pb - eb)


def _add_reservation(prob: MilpProblem, vi: VarIndex, spec: SystemSpec,
                     tasks: Mapping[str, dict], t: str, rt: str,
                     r_off: int, r_period: int, r_e: int) -> None:
    pa = tasks[t]["period"]
    ea = spec.tasks[t].wcet
    ot = vi.task_offset(t)
    ua = prob.variables[ot].upper
    window = 2 * math.lcm(pa, r_period)
    for qa in range(window // pa):
        for qb in range(window // r_period):
            start_b = r_off + qb * r_period
            m1 = ua + qa * pa + ea - start_b
            m2 = start_b + r_e - qa * pa
            if m1 <= 0 or m2 <= 0:
                continue
            y = prob.add_var(f"y_v_{t}_{qa}_{rt}_{qb}", "binary", 0, 1)
            vi._add(f"y_v_{t}_{qa}_{rt}_{qb}", y)
            prob.add_con(f"f14a_{t}_{qa}_{rt}_{qb}",
                         [(1, ot), (-m1, y)], "<=", start_b - qa * pa - ea)
            prob.add_con(f"f14b_{t}_{qa}_{rt}_{qb}",
                         [(-1, ot), (m2, y)], "<=", m2 - start_b - r_e + qa * pa)


def _check_pins(spec: SystemSpec, mode_id: str, tasks, messages, edges,
                pinned_tasks: Mapping[str, int],
                pinned_msgs: Mapping[str, tuple[int, int]]) -> None:
    """Reject pins that contradict precedence/deadline structure outright."""
    for t, off in pinned_tasks.items():
        if t not in tasks:
            raise BuildError(f"pin references task {t!r} outside mode {mode_id!r}")
        info = tasks[t]
        e = spec.tasks[t].wcet
        if not 0 <= off < info["period"] or off + e > info["deadline"]:
            raise BuildError(f"inconsistent inheritance pin: task {t!r} offset {off}")
    for m, (off, dl) in pinned_msgs.items():
        if m not in messages:
            raise BuildError(f"pin references message {m!r} outside mode {mode_id!r}")
        info = messages[m]
        if not 0 <= off < info["period"] or dl <= 0 or off + dl > info["deadline"]:
            raise BuildError(f"inconsistent inheritance pin: message {m!r}")
    for a, b, kind in sorted(edges):
        if kind == "in" and a in pinned_tasks and b in pinned_msgs:
            if pinned_tasks[a] + spec.tasks[a].wcet > pinned_msgs[b][0]:
                raise BuildError(f"inconsistent inheritance pin: {a!r} -> {b!r}")
        if kind == "out" and a in pinned_msgs and b in pinned_tasks:
            if pinned_msgs[a][0] + pinned_msgs[a][1] > pinned_tasks[b]:
                raise BuildError(f"inconsistent inheritance pin: {a!r} -> {b!r}")


def decode_solution(spec: SystemSpec, mode_id: str, vi: VarIndex,
                    assignment: Sequence[int]) -> ModeSchedule:
    """Turn a feasible assignment into a ModeSchedule."""
    task_offsets = {t: int(assignment[vi.task_offset(t)]) for t in vi.tasks}
    msg_offsets = {m: int(assignment[vi.msg_offset(m)]) for m in vi.messages}
    msg_deadlines = {m: int(assignment[vi.msg_deadline(m)]) for m in vi.messages}
    rounds = []
    for j in range(1, vi.rounds + 1):
        alloc = tuple(m for m in vi.messages if assignment[vi.alloc(j, m)] == 1)
        rounds.append(Round(start=int(assignment[vi.round_start(j)]), alloc=alloc))
    rounds.sort(key=lambda r: r.start)
    return ModeSchedule(mode=mode_id, task_offsets=task_offsets,
                        msg_offsets=msg_offsets, msg_deadlines=msg_deadlines,
                        rounds=tuple(rounds))


# ---------------------------------------------------------------------------
# LP file export
# ---------------------------------------------------------------------------

def _lp_name(name: str) -> str:
    out = []
    for ch in name:
        out.append(ch if ch.isalnum() or ch == "_" else "_")
    s = "".join(out)
    if s[0].isdigit():
        s = "v_" + s
    return s


def _lp_terms(terms: Sequence[tuple[int, int]], names: Sequence[str]) -> str:
    parts = []
    for coef, pos in terms:
        sign = "+" if coef >= 0 else "-"
        parts.append(f"{sign} {abs(coef)} {names[pos]}")
    return " ".join(parts)


def export_lp(problem: MilpProblem) -> str:
    """Emit the problem in the textual LP file format."""
    names = [_lp_name(v.name) for v in problem.variables]
    if len(set(names)) != len(names):
        for i, n in enumerate(names):
            names[i] = f"{n}__{i}"

    lines = ["\\ mode co-schedule export", "Maximize"]
    if problem.objective:
        lines.append(" obj: " + _lp_terms(problem.objective, names))
    else:
        lines.append(" obj:")
    lines.append("Subject To")
    dummy_needed = False
    for con in problem.constraints:
        sense = "=" if con.sense == "=" else "<="
        if not con.terms:
            lhs = 0
            ok = (lhs == con.rhs) if con.sense == "=" else (lhs <= con.rhs)
            if not ok:
                dummy_needed = True
                lines.append(f" {_lp_name(con.name)}: + 1 __infeasible >= 1")
            continue
        lines.append(f" {_lp_name(con.name)}: {_lp_terms(con.terms, names)} "
                     f"{sense} {con.rhs}")
    lines.append("Bounds")
    for v, name in zip(problem.variables, names):
        lines.append(f" {v.lower} <= {name} <= {v.upper}")
    if dummy_needed:
        lines.append(" 0 <= __infeasible <= 0")
    generals = [n for v, n in zip(problem.variables, names) if v.kind == "integer"]
    binaries = [n for v, n in zip(problem.variables, names) if v.kind == "binary"]
    if generals or dummy_needed:
        lines.append("Generals")
        for n in generals:
            lines.append(f" {n}")
        if dummy_needed:
            lines.append(" __infeasible")
    if binaries:
        lines.append("Binaries")
        for n in binaries:
            lines.append(f" {n}")
    lines.append("End")
    return "\n".join(lines) + "\n"
