"""Dynamic information-flow tracker for values that leak as memory addresses.

Feed it a stream of instruction records (from the bundled mini-ISA
interpreter or a trace file) and it reports every point where data
loaded from a watched region was transformed into a memory address,
along with the leakage ratio of the run.
"""

from .engine import Engine, EngineConfig, InvariantViolation, LeakEvent, \
    UnwatchUnknownRegion, WatchRegions
from .interp import AsmError, Machine, Program, StepLimitExceeded, Trap, \
    assemble, run
from .isa import InstructionRecord, Kind, MalformedLine, WatchAction, \
    WatchDirective, iter_trace, parse_trace_line, serialize
from .metrics import MetricsAccumulator, write_csv, write_summary
from .oracle import ReferenceTracker, TraceTooLarge, run_oracle
from .session import Session
from .taint import MemoryTaintCache, NoLiveTaints, RegisterTaintFile, TaintTable
from .tracer import PropagationEvent, PropKind, TraceLog, back_slice, \
    leak_report, render

__version__ = "0.1.0"

__all__ = [
    "AsmError", "Engine", "EngineConfig", "InstructionRecord",
    "InvariantViolation", "Kind", "LeakEvent", "Machine", "MalformedLine",
    "MemoryTaintCache", "MetricsAccumulator", "NoLiveTaints", "Program",
    "PropagationEvent", "PropKind", "ReferenceTracker", "RegisterTaintFile",
    "Session", "StepLimitExceeded", "TaintTable", "TraceLog", "TraceTooLarge",
    "Trap", "UnwatchUnknownRegion", "WatchAction", "WatchDirective",
    "WatchRegions", "assemble", "back_slice", "iter_trace", "leak_report",
    "parse_trace_line", "render", "run", "run_oracle", "serialize",
    "write_csv", "write_summary",
]
