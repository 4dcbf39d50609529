"""Timing and energy model of round-based flooding communication.

A communication round is a beacon slot followed by up to B_max regular
slots; each slot carries one network-wide flood. Between rounds the radio
is off. The model decomposes a slot into radio-on and radio-off phases
and derives round length, total radio-on time, and the relative energy
savings of grouping B slots into one round versus sending each message in
its own single-slot round.

All durations are microseconds. Slot lengths are rounded up to the slot
quantum; radio-on times are not (the quantum padding is radio-off time).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover
    from .sysmodel import NetworkConfig


@dataclass(frozen=True)
class PlatformConstants:
    """Radio and firmware timing constants of the target platform.

    The defaults are a surrogate set fitted by least squares against the
    reference round-length and energy-saving measurements (see
    scripts/fit_platform_constants.py); they reproduce every reference
    round length exactly and every savings figure within 0.24 points.
    """

    t_wakeup: float = 700.0      # us, MCU wake-up before radio start
    t_start: float = 3314.0      # us, radio start-up (on-time constant)
    t_gap: float = 1000.0        # us, inter-slot processing gap (radio off)
    t_d: float = 0.0             # us, initial radio delay per hop
    l_cal: int = 0               # bytes, clock-calibration preamble
    l_header: int = 0            # bytes, packet header
    r_bit: float = 250_000.0     # bit/s, radio bitrate
    t_preprocess: float = 2020.0  # us, per-round preparation
    l_beacon: int = 2            # bytes, beacon payload
    slot_quantum: float = 500.0  # us, slot lengths rounded up to this

    def __post_init__(self) -> None:
        for name in ("t_wakeup", "t_start", "t_gap", "t_d", "l_cal",
                     "l_header", "t_preprocess", "l_beacon"):
            if getattr(self, name) < 0:
                raise ValueError(f"platform constant {name} must be >= 0")
        if self.r_bit <= 0:
            raise ValueError("r_bit must be > 0")
        if self.slot_quantum <= 0:
            raise ValueError("slot_quantum must be > 0")


@dataclass(frozen=True)
class SlotTiming:
    """Durations of one flood slot: per-hop step, whole flood, on/off split."""

    t_hop: float
    t_flood: float
    t_on: float
    t_off: float
    t_slot: float


@dataclass(frozen=True)
class RoundTiming:
    """Durations of one round and the savings relative to round-less operation."""

    t_round: float
    t_on_total: float
    t_no_rounds: float
    savings: float


def quantize_up(value: float, quantum: float) -> float:
    """Least multiple of `quantum` that is >= value."""
    return quantum * math.ceil(value / quantum - 1e-9)


def _flood_multiplier(net: "NetworkConfig") -> int:
    # one transmission per hop to cross the network, plus 2N-1 extra
    # synchronous (re)transmissions
    return net.hops + 2 * net.n_tx - 1


def slot_timing(c: PlatformConstants, net: "NetworkConfig", payload: int) -> SlotTiming:
    """Timing decomposition of a slot carrying `payload` bytes per flood."""
    if payload > net.l_max:
        raise ValueError(f"payload {payload} exceeds l_max {net.l_max}")
    t_hop = c.t_d + 8.0 * (c.l_cal + c.l_header + payload) / c.r_bit * 1e6
    t_flood = _flood_multiplier(net) * t_hop
    t_on = c.t_start + t_flood
    t_off = c.t_wakeup + c.t_gap
    t_slot = quantize_up(t_off + t_on, c.slot_quantum)
    return SlotTiming(t_hop=t_hop, t_flood=t_flood, t_on=t_on, t_off=t_off, t_slot=t_slot)


def round_length(c: PlatformConstants, net: "NetworkConfig", payload: int, slots: int) -> RoundTiming:
    """Round timing for B = `slots` regular slots of `payload` bytes.

    ``t_no_rounds`` is the time the same B messages would take if each had
    to be preceded by its own beacon (no round grouping); ``savings`` is
    the relative radio-on reduction of the round-based design, computed
    from unquantized radio-on times and defined for B >= 1 (0.0 reported
    for B = 0).
    """
    if slots < 0:
        raise ValueError("slot count must be >= 0")
    if slots > net.b_max:
        raise ValueError(f"slot count {slots} exceeds b_max {net.b_max}")
    beacon = slot_timing(c, net, c.l_beacon)
    regular = slot_timing(c, net, payload)
    t_round = beacon.t_slot + slots * regular.t_slot + c.t_preprocess
    t_on_total = beacon.t_on + slots * regular.t_on
    t_no_rounds = slots * (beacon.t_slot + regular.t_slot)
    if slots >= 1:
        on_no_rounds = slots * (beacon.t_on + regular.t_on)
        savings = (on_no_rounds - t_on_total) / on_no_rounds
    else:
        savings = 0.0
    return RoundTiming(t_round=t_round, t_on_total=t_on_total,
                       t_no_rounds=t_no_rounds, savings=savings)


def energy_savings(c: PlatformConstants, net: "NetworkConfig", payload: int, slots: int) -> float:
    """Relative radio-on savings of one B-slot round vs B single-slot rounds."""
    if slots < 1:
        raise ValueError("energy savings defined for B >= 1")
    return round_length(c, net, payload, slots).savings


def model_table(c: PlatformConstants, net: "NetworkConfig",
                payloads: Iterable[int], slot_counts: Iterable[int],
                hop_range: Iterable[int]) -> list[dict]:
    """One row per (payload, slots, hops) combination.

    Row keys match the CSV header: L_bytes, B_slots, H_hops, N_tx,
    T_round_us, T_on_us, savings_pct.
    """
    from .sysmodel import NetworkConfig  # local import, avoids cycle at module load

    rows = []
    for hops in hop_range:
        net_h = NetworkConfig(payload_l=net.payload_l, b_max=net.b_max,
                              n_tx=net.n_tx, hops=hops, l_max=net.l_max)
        for payload in payloads:
            for slots in slot_counts:
                rt = round_length(c, net_h, payload, slots)
                rows.append({
                    "L_bytes": payload,
                    "B_slots": slots,
                    "H_hops": hops,
                    "N_tx": net.n_tx,
                    "T_round_us": int(round(rt.t_round)),
                    "T_on_us": int(round(rt.t_on_total)),
                    "savings_pct": round(rt.savings * 100.0, 1),
                })
    return rows


CSV_HEADER = "L_bytes,B_slots,H_hops,N_tx,T_round_us,T_on_us,savings_pct"


def table_to_csv(rows: Sequence[dict]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append("{L_bytes},{B_slots},{H_hops},{N_tx},{T_round_us},{T_on_us},"
                     "{savings_pct:.1f}".format(**r))
    return "\n".join(lines) + "\n"


DEFAULT_PLATFORM = PlatformConstants()
