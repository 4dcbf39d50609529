#!/usr/bin/env python3
"""Fit the default platform constants against the reference table.

The slot model at H=4, N=2 with a 250 kbit/s radio is
    t_on(L) = C + 7 * 32 * L          (us; C is the radio-on constant)
    t_slot(L) = quantum * ceil((t_off + t_on(L)) / quantum)
    t_round(L, B) = t_slot(2) + B * t_slot(L) + t_preprocess

The nine reference round lengths pin the quantized slot lengths and
t_slot(2) + t_preprocess exactly over a range of (C, t_off, quantum);
the savings figures depend only on C, so C is chosen by least squares
over the nine savings residuals, subject to a feasible (t_off, quantum,
t_preprocess) reproducing every round length.

Run:  python scripts/fit_platform_constants.py
"""

from __future__ import annotations

import math

from roundsched.netmodel import DEFAULT_PLATFORM

REF_ROUNDS_US = {(8, 5): 42520, (8, 10): 77520, (8, 30): 217520,
                 (16, 5): 52520, (16, 10): 97520, (16, 30): 277520,
                 (64, 5): 105020, (64, 10): 202520, (64, 30): 592520}
REF_SAVINGS_PCT = {(8, 5): 34, (8, 10): 38, (8, 30): 41,
                   (16, 5): 28, (16, 10): 32, (16, 30): 34,
                   (64, 5): 14, (64, 10): 16, (64, 30): 17}

MULT = 4 + 2 * 2 - 1              # flood transmissions at H=4, N=2
US_PER_BYTE = 8 / 250_000 * 1e6   # 32 us per payload byte
L_BEACON = 2


def t_on(c_on: float, payload: int) -> float:
    return c_on + MULT * US_PER_BYTE * payload


def savings_sse(c_on: float) -> float:
    total = 0.0
    for (payload, slots), pct in REF_SAVINGS_PCT.items():
        x = t_on(c_on, L_BEACON)
        y = t_on(c_on, payload)
        model = (slots - 1) * x / (slots * (x + y)) * 100.0
        total += (model - pct) ** 2
    return total


def rounds_reproducible(c_on: int, t_off: int, quantum: int):
    slot = {payload: quantum * math.ceil((t_off + t_on(c_on, payload)) / quantum)
            for payload in (L_BEACON, 8, 16, 64)}
    t_pre = REF_ROUNDS_US[(8, 5)] - slot[L_BEACON] - 5 * slot[8]
    if t_pre < 0:
        return None
    for (payload, slots), ref in REF_ROUNDS_US.items():
        if slot[L_BEACON] + slots * slot[payload] + t_pre != ref:
            return None
    return slot[L_BEACON], t_pre


def main() -> None:
    candidates = []
    for c_on in range(2500, 4500):
        for quantum in (250, 500, 1000):
            for t_off in range(500, 2600, 50):
                if rounds_reproducible(c_on, t_off, quantum):
                    candidates.append(c_on)
                    break
            else:
                continue
            break
    best = min(candidates, key=savings_sse)
    print(f"radio-on constant C* = {best} us "
          f"(savings SSE {savings_sse(best):.3f})")
    for t_off in range(500, 2600, 10):
        got = rounds_reproducible(best, t_off, 500)
        if got:
            print(f"  feasible t_off = {t_off} us -> t_slot(beacon) = {got[0]}, "
                  f"t_preprocess = {got[1]}")
            break
    worst = 0.0
    for (payload, slots), pct in REF_SAVINGS_PCT.items():
        x = t_on(best, L_BEACON)
        y = t_on(best, payload)
        model = (slots - 1) * x / (slots * (x + y)) * 100.0
        worst = max(worst, abs(model - pct))
    print(f"worst savings residual: {worst:.3f} points")

    frozen = DEFAULT_PLATFORM
    assert frozen.t_start == best, (frozen.t_start, best)
    assert rounds_reproducible(int(frozen.t_start),
                               int(frozen.t_wakeup + frozen.t_gap),
                               int(frozen.slot_quantum))
    print(f"frozen defaults agree: t_start={frozen.t_start}, "
          f"t_off={frozen.t_wakeup + frozen.t_gap}, "
          f"quantum={frozen.slot_quantum}, t_preprocess={frozen.t_preprocess}")


if __name__ == "__main__":
    main()
