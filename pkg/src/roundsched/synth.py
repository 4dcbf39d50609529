"""Schedule synthesis: single-mode minimal-round search and the
priority-ordered multi-mode procedure with inheritance constraints.

Single mode: the round count starts at the capacity lower bound (every
smaller count is infeasible by pigeonhole on the per-hyperperiod service
totals) and grows until the integer program is feasible, so the returned
schedule uses the minimum number of rounds.

Multi mode: modes are synthesized in decreasing priority. Legacy
applications (already scheduled in a higher-priority mode of the same
schedule domain) are pinned to their existing schedules; under the
`minimal` policy each free application additionally treats as obstacles
the virtual-legacy applications it will later share a mode with, which is
the smallest reservation set that provably prevents inheritance
conflicts; `full` reserves every virtual-legacy application; `none`
inherits nothing (and generally violates persistence, which the validator
then reports).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .bnb import SolveBudget, solve
from .milp import build_mode_problem, decode_solution
from .schedule import (AppSlice, InheritanceConstraints, ModeSchedule, Round,
                       SystemSchedule, app_slice, round_length_ticks, spec_hash)
from .sysmodel import (SpecError, SystemSpec, hyperperiod, mode_sets,
                       minimal_virtual_legacy, schedule_domains)

POLICIES = ("none", "minimal", "full")


class InfeasibleError(Exception):
    def __init__(self, mode_id: str, detail: str = ""):
        self.mode = mode_id
        super().__init__(f"mode {mode_id!r} is infeasible"
                         + (f": {detail}" if detail else ""))


class BudgetExhaustedError(Exception):
    def __init__(self, mode_id: str):
        self.mode = mode_id
        super().__init__(f"solver budget exhausted in mode {mode_id!r}")


@dataclass(frozen=True)
class ConflictWitness:
    app_a: str
    task_a: str
    app_b: str
    task_b: str
    tick: int


def check_normalized(spec: SystemSpec) -> None:
    for app in spec.applications.values():
        if not app.persistent:
            raise SpecError(f"spec not normalized: {app.id!r} is not persistent")
        if len(schedule_domains(spec, app.id)) > 1:
            raise SpecError(f"spec not normalized: {app.id!r} has several "
                            f"schedule domains")


def synthesize_mode(spec: SystemSpec, mode_id: str,
                    inherit: Optional[InheritanceConstraints] = None,
                    budget: Optional[SolveBudget] = None,
                    objective: bool = False) -> ModeSchedule:
    """Find a valid schedule for one mode with the minimal round count."""
    lcm = hyperperiod(spec, mode_id)
    t_round = round_length_ticks(spec)
    msgs = set()
    for aid in spec.apps_of_mode(mode_id):
        msgs |= spec.applications[aid].messages
    if msgs:
        instances = sum(lcm // spec.period_of_message(m) for m in msgs)
        r_lo = max(1, -(-instances // spec.network.b_max))
        r_max = lcm // t_round
    else:
        r_lo = r_max = 0

    for rounds in range(r_lo, r_max + 1):
        prob, vi = build_mode_problem(spec, mode_id, rounds, inherit)
        sol = solve(prob, budget)
        if sol.status == "unknown":
            raise BudgetExhaustedError(mode_id)
        if sol.status != "feasible":
            continue
        if objective:
            prob, vi = build_mode_problem(spec, mode_id, rounds, inherit,
                                          objective=True)
            sol = solve(prob, budget)
            if sol.status == "unknown":
                raise BudgetExhaustedError(mode_id)
        return decode_solution(spec, mode_id, vi, sol.assignment)
    raise InfeasibleError(mode_id, f"no round count up to {r_max} admits a schedule")


def synthesize_system(spec: SystemSpec, policy: str = "minimal",
                      budget: Optional[SolveBudget] = None) -> SystemSchedule:
    """Synthesize all modes in decreasing priority under an inheritance policy."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    check_normalized(spec)
    schedules: dict[str, ModeSchedule] = {}
    defined_in: dict[str, str] = {}

    for mode in spec.modes_by_priority():
        if not mode.apps:
            schedules[mode.id] = ModeSchedule(mode=mode.id, task_offsets={},
                                              msg_offsets={}, msg_deadlines={},
                                              rounds=())
            continue
        sets = mode_sets(spec, mode.id)
        if policy == "none":
            inherit = InheritanceConstraints()
        else:
            pinned = {a: app_slice(spec, a, schedules[defined_in[a]])
                      for a in sorted(sets.legacy)}
            if policy == "full":
                reserved_ids = sets.virtual_legacy
            else:
                reserved_ids = set()
                for a in sorted(sets.free):
                    reserved_ids |= minimal_virtual_legacy(spec, mode.id, a)
            reserved = {a: app_slice(spec, a, schedules[defined_in[a]])
                        for a in sorted(reserved_ids)}
            inherit = InheritanceConstraints(pinned=pinned, reserved=reserved)
        schedules[mode.id] = synthesize_mode(spec, mode.id, inherit, budget,
                                             objective=True)
        for a in sets.free:
            defined_in.setdefault(a, mode.id)

    return SystemSchedule(modes=schedules, policy=policy,
                          spec_hash=spec_hash(spec), tick_us=spec.tick)


# ---------------------------------------------------------------------------
# conflict detection
# ---------------------------------------------------------------------------

def _tasks_overlap(oa: int, ea: int, pa: int, ob: int, eb: int, pb: int) -> Optional[int]:
    """First tick where instances of the two periodic tasks overlap, or None."""
    g = math.gcd(pa, pb)
    if (ob - oa) % g >= ea and (oa - ob) % g >= eb:
        return None
    window = 2 * math.lcm(pa, pb)
    for qa in range(window // pa):
        sa = oa + qa * pa
        for qb in range(window // pb):
            sb = ob + qb * pb
            if sa < sb + eb and sb < sa + ea:
                return max(sa, sb)
    return None


def conflict_free(slices: Mapping[str, AppSlice],
                  spec: SystemSpec) -> tuple[bool, Optional[ConflictWitness]]:
    """True iff no two tasks of different apps overlap on a shared node."""
    order = sorted(slices)
    for i, a in enumerate(order):
        for b in order[i + 1:]:
            pa = spec.applications[a].period
            pb = spec.applications[b].period
            for ta in sorted(slices[a].task_offsets):
                for tb in sorted(slices[b].task_offsets):
                    if ta == tb or spec.tasks[ta].host != spec.tasks[tb].host:
                        continue
                    tick = _tasks_overlap(slices[a].task_offsets[ta], spec.tasks[ta].wcet, pa,
                                          slices[b].task_offsets[tb], spec.tasks[tb].wcet, pb)
                    if tick is not None:
                        return False, ConflictWitness(app_a=a, task_a=ta,
                                                      app_b=b, task_b=tb, tick=tick)
    return True, None


def defining_mode(spec: SystemSpec, app_id: str) -> str:
    """Highest-priority mode containing the app (where it is scheduled freely)."""
    member = [m for m in spec.modes_by_priority() if app_id in m.apps]
    if not member:
        raise SpecError(f"application {app_id!r} appears in no mode")
    return member[0].id
