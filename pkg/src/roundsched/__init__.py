"""Co-scheduling of distributed tasks and round-based wireless messages
for multi-mode time-triggered systems: timing/energy model, schedule
synthesis, validation, and simulation."""

__version__ = "0.1.0"

from .netmodel import (DEFAULT_PLATFORM, PlatformConstants, RoundTiming,
                       SlotTiming, energy_savings, model_table, round_length,
                       slot_timing)
from .sysmodel import (ApplicationSpec, MessageSpec, ModeGraph, ModeSets,
                       ModeSpec, NetworkConfig, NodeSpec, SpecError,
                       SystemSpec, TaskSpec, hyperperiod, load_system_spec,
                       minimal_virtual_legacy, mode_sets, normalize,
                       parse_system_spec, schedule_domains)
from .schedule import (AppSlice, InheritanceConstraints, ModeSchedule, Round,
                       SystemSchedule, app_slice, load_schedule,
                       parse_schedule, round_length_ticks, schedule_to_json,
                       spec_hash)
from .flows import (InstanceWindow, MessageTiming, arrival, demand, edf_match,
                    instance_windows, service)
from .milp import (BuildError, MilpProblem, MilpSolution, VarIndex,
                   build_mode_problem, decode_solution, export_lp)
from .bnb import SolveBudget, solve
from .synth import (BudgetExhaustedError, ConflictWitness, InfeasibleError,
                    conflict_free, synthesize_mode, synthesize_system)
from .validate import ValidationReport, Violation, validate_mode, validate_system
from .sim import LossModel, ModeChange, SimReport, simulate
