"""Command-line front-end.

Subcommands: model (timing/energy table), synth (multi-mode synthesis),
validate (schedule checker), simulate (protocol simulation), export-lp
(write one mode's integer program in LP format).

Exit codes: 0 ok, 1 infeasible, 2 invalid input, 3 validation failure,
4 solver budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import time
from typing import Optional, Sequence

from . import netmodel
from .bnb import SolveBudget
from .milp import BuildError, build_mode_problem, export_lp
from .schedule import (load_schedule, round_length_ticks, schedule_to_json,
                       spec_hash)
from .sim import LossModel, ModeChange, simulate
from .synth import BudgetExhaustedError, InfeasibleError, synthesize_system
from .sysmodel import (NetworkConfig, SpecError, load_system_spec, normalize,
                       hyperperiod)
from .validate import validate_mode, validate_system

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_INVALID_INPUT = 2
EXIT_VALIDATION_FAILURE = 3
EXIT_BUDGET_EXHAUSTED = 4


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _load_platform(path: Optional[str], overrides: Sequence[str]) -> netmodel.PlatformConstants:
    values = {}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            values.update(json.load(fh))
    for item in overrides:
        key, _, val = item.partition("=")
        if not _:
            raise SpecError(f"bad --set {item!r}, expected KEY=VALUE")
        values[key.strip()] = float(val)
    return netmodel.PlatformConstants(**values)


def _duration_ticks(text: str, spec, initial_mode: str) -> int:
    """Parse `<n>h` (hyperperiods), `<n>ms`, `<n>s`, or plain ticks."""
    m = re.fullmatch(r"(\d+)(h|ms|s)?", text.strip())
    if not m:
        raise SpecError(f"bad duration {text!r}")
    n, unit = int(m.group(1)), m.group(2)
    if unit == "h":
        return n * hyperperiod(spec, initial_mode)
    if unit == "ms":
        return n * 1000 // spec.tick
    if unit == "s":
        return n * 1_000_000 // spec.tick
    return n


def cmd_model(args) -> int:
    try:
        platform = _load_platform(args.platform, args.set or [])
        payloads = _int_list(args.payload)
        slots = _int_list(args.slots)
        hops = _int_list(args.hops)
        if not payloads or not slots or not hops or args.ntx <= 0:
            raise SpecError("payload, slots, hops and ntx must be positive")
        net = NetworkConfig(payload_l=max(payloads), b_max=max(max(slots), 1),
                            n_tx=args.ntx, hops=max(hops),
                            l_max=max(max(payloads), args.lmax))
    except (SpecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    rows = netmodel.model_table(platform, net, payloads, slots, hops)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(netmodel.table_to_csv(rows))
        print(f"wrote {len(rows)} rows to {args.csv}")
    if len(rows) == 1:
        r = rows[0]
        print(f"T_round = {r['T_round_us'] / 1000:.2f} ms, "
              f"T_on = {r['T_on_us'] / 1000:.2f} ms, "
              f"savings = {r['savings_pct']:.1f}%")
    elif not args.csv:
        print(netmodel.table_to_csv(rows), end="")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = normalize(load_system_spec(args.spec))
    except (SpecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    budget = SolveBudget(max_nodes=args.budget, max_time=args.time_limit)
    t0 = time.monotonic()
    try:
        ssched = synthesize_system(spec, policy=args.policy, budget=budget)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BudgetExhaustedError as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET_EXHAUSTED
    except (SpecError, BuildError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    elapsed = time.monotonic() - t0
    for mode in spec.modes_by_priority():
        ms = ssched.modes[mode.id]
        print(f"mode {mode.id}: {len(ms.rounds)} rounds")
    print(f"solve time: {elapsed:.2f} s")
    text = schedule_to_json(spec, ssched)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote schedule to {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        spec = normalize(load_system_spec(args.spec))
        ssched = load_schedule(spec, args.schedule)
        if ssched.spec_hash and ssched.spec_hash != spec_hash(spec):
            print("warning: schedule spec_hash does not match the spec",
                  file=sys.stderr)
        report = validate_system(spec, ssched)
    except (SpecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK if report.ok else EXIT_VALIDATION_FAILURE


def cmd_simulate(args) -> int:
    try:
        spec = normalize(load_system_spec(args.spec))
        ssched = load_schedule(spec, args.schedule)
        report = validate_system(spec, ssched)
        if not report.ok:
            print(json.dumps(report.to_dict(), indent=2), file=sys.stderr)
            print("error: schedule does not validate", file=sys.stderr)
            return EXIT_VALIDATION_FAILURE
        initial = spec.modes_by_priority()[0].id
        duration = _duration_ticks(args.duration, spec, initial)
        script = []
        if args.script:
            with open(args.script, "r", encoding="utf-8") as fh:
                for entry in json.load(fh):
                    script.append(ModeChange(at=_duration_ticks(str(entry["at"]),
                                                                spec, initial),
                                             target=entry["target"]))
        sim_report = simulate(spec, ssched,
                              LossModel(flood_loss_prob=args.loss, seed=args.seed),
                              script, duration, announce_gap=args.announce_gap,
                              trace=bool(args.trace))
    except (SpecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write(sim_report.trace_csv())
    print(json.dumps(sim_report.to_dict(), indent=2))
    return EXIT_OK


def cmd_export_lp(args) -> int:
    try:
        spec = normalize(load_system_spec(args.spec))
        if args.mode not in spec.modes:
            raise SpecError(f"unknown mode {args.mode!r}")
        prob, _ = build_mode_problem(spec, args.mode, args.rounds)
        text = export_lp(prob)
    except (SpecError, BuildError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote LP to {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roundsched",
        description="Synthesize, validate, and simulate co-schedules of "
                    "distributed tasks and round-based wireless messages.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="round length / energy savings calculator")
    p.add_argument("--payload", required=True, help="payload bytes, comma list")
    p.add_argument("--slots", required=True, help="slots per round, comma list")
    p.add_argument("--hops", default="4", help="network diameter, comma list")
    p.add_argument("--ntx", type=int, default=2, help="transmissions per flood")
    p.add_argument("--lmax", type=int, default=64, help="max payload bytes")
    p.add_argument("--platform", help="platform constants JSON file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one platform constant")
    p.add_argument("--csv", help="write the table to this CSV file")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("synth", help="synthesize all mode schedules")
    p.add_argument("spec", help="system spec JSON file")
    p.add_argument("--policy", choices=("none", "minimal", "full"),
                   default="minimal")
    p.add_argument("--budget", type=int, default=2_000_000,
                   help="max search nodes per solve")
    p.add_argument("--time-limit", type=float, default=None,
                   help="max seconds per solve")
    p.add_argument("-o", "--out", help="schedule output file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="check a schedule against its spec")
    p.add_argument("spec")
    p.add_argument("schedule")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="simulate a validated schedule")
    p.add_argument("spec")
    p.add_argument("schedule")
    p.add_argument("--loss", type=float, default=0.0,
                   help="per-(node,flood) loss probability")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", default="3h",
                   help="ticks, or <n>h hyperperiods, <n>ms, <n>s")
    p.add_argument("--script", help="mode change script JSON file")
    p.add_argument("--announce-gap", type=int, default=1,
                   help="rounds between the announce and trigger beacons")
    p.add_argument("--trace", help="write event trace CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export-lp", help="export one mode's program in LP format")
    p.add_argument("spec")
    p.add_argument("--mode", required=True)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_export_lp)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
