"""Arrival, demand, and service counting for periodic message instances.

arrival(t) counts instances released up to and including t; demand(t)
counts instances whose deadline lies strictly before t; service(t) counts
instances served by rounds that finished strictly before t, minus the
leftover instances wrapped in from the previous hyperperiod. A schedule
serves every instance on time iff demand <= service <= arrival everywhere.

edf_match is the instance-level ground truth used by the validator: it
unrolls the round table over a horizon and greedily assigns each slot to
the pending instance with the earliest due time, which is exchange-optimal
for this interval structure, so a failed match proves no assignment exists.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .schedule import ModeSchedule, round_length_ticks
from .sysmodel import SystemSpec, hyperperiod


@dataclass(frozen=True)
class MessageTiming:
    offset: int                     # ticks, first release
    deadline: int                   # ticks, relative to offset
    period: int                     # ticks

    def __post_init__(self) -> None:
        if not 0 <= self.offset < self.period:
            raise ValueError("offset must satisfy 0 <= offset < period")
        if self.deadline <= 0:
            raise ValueError("deadline must be > 0")


@dataclass(frozen=True)
class InstanceWindow:
    index: int
    release: int                    # absolute tick, offset + index * period
    due: int                        # absolute tick, release + deadline


def arrival(mt: MessageTiming, t: int) -> int:
    """Instances released at or before t (a release exactly at t counts)."""
    return (t - mt.offset) // mt.period + 1


def demand(mt: MessageTiming, t: int) -> int:
    """Instances whose deadline passed strictly before t.

    A deadline exactly at t is not yet demanded; may be negative when a
    wrapped instance from the previous hyperperiod is still pending.
    """
    return -((-(t - mt.offset - mt.deadline)) // mt.period)


def service(allocs: Sequence[int], round_ends: Sequence[int], leftover: int, t: int) -> int:
    """Instances served before t: allocations of rounds that ended strictly before t."""
    if len(allocs) != len(round_ends):
        raise ValueError("allocs and round_ends must have equal length")
    if leftover < 0:
        raise ValueError("leftover must be >= 0")
    return sum(a for a, end in zip(allocs, round_ends) if end < t) - leftover


def instance_windows(mt: MessageTiming, horizon: int) -> list[InstanceWindow]:
    """All instance windows with release < horizon, ascending."""
    out = []
    q = 0
    while mt.offset + q * mt.period < horizon:
        rel = mt.offset + q * mt.period
        out.append(InstanceWindow(index=q, release=rel, due=rel + mt.deadline))
        q += 1
    return out


# ---------------------------------------------------------------------------
# instance-level matching
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlotRef:
    """One unrolled slot: hyperperiod copy, round index and slot position, ticks."""

    copy: int
    round_index: int
    pos: int
    start: int
    end: int


@dataclass(frozen=True)
class MatchViolation:
    message: str
    instance: int
    reason: str                     # no-slot | too-early | too-late


@dataclass(frozen=True)
class MatchResult:
    ok: bool
    assignment: dict                # message -> {instance index -> SlotRef}
    violation: Optional[MatchViolation] = None


def edf_match(spec: SystemSpec, mode_id: str, sched: ModeSchedule,
              horizon: int) -> MatchResult:
    """Match message instances to allocated slots over `horizon` ticks.

    `horizon` must be a multiple of the mode hyperperiod, at least two of
    them. Rounds are unrolled periodically; slots are walked in time order
    and each one is given to the pending instance with the earliest due
    time. Instances whose due time exceeds the horizon are served by the
    next periodic copy and are exempt here (their one-period-earlier copy
    is what the second hyperperiod checks).
    """
    lcm = hyperperiod(spec, mode_id)
    if horizon % lcm != 0 or horizon < 2 * lcm:
        raise ValueError("horizon must be a multiple of the hyperperiod, >= 2 of them")
    t_round = round_length_ticks(spec)
    copies = horizon // lcm

    slots: dict[str, list[SlotRef]] = {m: [] for m in sched.msg_offsets}
    for copy in range(copies):
        base = copy * lcm
        for j, rnd in enumerate(sched.rounds):
            for pos, mid in enumerate(rnd.alloc):
                slots.setdefault(mid, []).append(
                    SlotRef(copy=copy, round_index=j, pos=pos,
                            start=base + rnd.start, end=base + rnd.start + t_round))

    assignment: dict[str, dict[int, SlotRef]] = {}
    for mid in sorted(sched.msg_offsets):
        period = spec.period_of_message(mid)
        mt = MessageTiming(offset=sched.msg_offsets[mid],
                           deadline=sched.msg_deadlines[mid], period=period)
        windows = instance_windows(mt, horizon)
        pending: list[InstanceWindow] = []
        assigned: dict[int, SlotRef] = {}
        widx = 0
        for slot in sorted(slots.get(mid, ()),
                           key=lambda s: (s.start, s.copy, s.round_index, s.pos)):
            while widx < len(windows) and windows[widx].release <= slot.start:
                pending.append(windows[widx])
                widx += 1
            pending.sort(key=lambda w: w.due)
            for k, w in enumerate(pending):
                if w.due >= slot.end:
                    assigned[w.index] = slot
                    del pending[k]
                    break
        assignment[mid] = assigned
        for w in windows:
            if w.due > horizon or w.index in assigned:
                continue
            reason = _classify_miss(w, slots.get(mid, ()))
            return MatchResult(ok=False, assignment=assignment,
                               violation=MatchViolation(message=mid, instance=w.index,
                                                        reason=reason))
    return MatchResult(ok=True, assignment=assignment)


def _classify_miss(w: InstanceWindow, slots: Sequence[SlotRef]) -> str:
    if any(s.start >= w.release and s.end <= w.due for s in slots):
        return "no-slot"            # every fitting slot went to another instance
    if any(s.end <= w.due and s.start < w.release for s in slots):
        return "too-early"          # a round would fit but starts before release
    if any(s.start >= w.release and s.end > w.due for s in slots):
        return "too-late"
    return "no-slot"


def steady_leftover(spec: SystemSpec, mode_id: str, sched: ModeSchedule,
                    match: MatchResult) -> dict[str, int]:
    """Leftover counts per message: second-hyperperiod slots serving first-period instances."""
    lcm = hyperperiod(spec, mode_id)
    out = {}
    for mid, assigned in match.assignment.items():
        n = lcm // spec.period_of_message(mid)
        count = 0
        for idx, slot in assigned.items():
            rel = sched.msg_offsets[mid] + idx * spec.period_of_message(mid)
            if slot.copy == 1 and rel < lcm:
                count += 1
        out[mid] = count
    return out
