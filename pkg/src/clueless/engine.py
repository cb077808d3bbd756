"""Propagation engine: turns an instruction stream into leak evidence.

Loads from watched regions mint taints; arithmetic unions them forward;
using a tainted register to form a memory address is the observable
event. At that moment the origins of every taint in the addressing
registers are tagged as leak points, the taints are retired from all
shadow state, and their numbers become reusable.

Two address sets are kept per run: A, every byte (or granule) touched
by any memory access, and L, the subset of addresses whose loaded data
was later transformed into an address. L can only shrink through
overwrites by stores with fully untainted addressing registers.

A fixed step order resolves same-instruction hazards: addressing
registers are judged on their pre-instruction snapshots, retirement
happens before the instruction's own data movement, and destination
writes come last.
"""

import bisect
from dataclasses import dataclass, field

from .isa import MASK64, InstructionRecord, Kind, WatchAction, WatchDirective
from .taint import (DEFAULT_CACHE_SETS, DEFAULT_CACHE_WAYS, DEFAULT_TAINT_BUDGET,
                    MemoryTaintCache, RegisterTaintFile, TaintTable, alloc,
                    audit as taint_audit, iter_taints, retire_leaked)
from .tracer import PropagationEvent, PropKind

MODE_TRACK = "track"
MODE_AGGREGATE = "aggregate"


class UnwatchUnknownRegion(KeyError):
    def __init__(self, base: int):
        super().__init__(f"no watched region starts at {base:#x}")
        self.base = base


class InvariantViolation(AssertionError):
    pass


@dataclass(slots=True)
class EngineConfig:
    mode: str = MODE_TRACK
    reg_count: int = 32
    taint_budget: int = DEFAULT_TAINT_BUDGET
    cache_sets: int = DEFAULT_CACHE_SETS
    cache_ways: int = DEFAULT_CACHE_WAYS
    granularity: int = 1
    count_access_starts: bool = False  # count A by access start instead of footprint

    def validate(self):
        if self.mode not in (MODE_TRACK, MODE_AGGREGATE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.granularity < 1 or self.granularity & (self.granularity - 1):
            raise ValueError("granularity must be a power of two")
        if self.reg_count < 1 or self.taint_budget < 1:
            raise ValueError("need at least one register and one taint")


@dataclass(slots=True)
class LeakEvent:
    """One taint's origin observed inside an address computation."""

    leak_point: int        # address the tainted datum was loaded from
    transformed_into: int  # effective address it helped form
    instr_index: int
    taint: int
    taints: int = 0        # full taint set of the addressing register
    pc: int | None = None
    sym: str | None = None


class WatchRegions:
    """Registered [base, base+len) intervals with a merged index for lookups."""

    def __init__(self, universal: bool = False):
        self.universal = universal
        self._regions: dict[int, int] = {}
        self._starts: list[int] = []
        self._ends: list[int] = []

    def add(self, base: int, length: int):
        if length < 1:
            raise ValueError("watch length must be positive")
        self._regions[base & MASK64] = length
        self._rebuild()

    def remove(self, base: int):
        try:
            del self._regions[base & MASK64]
        except KeyError:
            raise UnwatchUnknownRegion(base) from None
        self._rebuild()

    def _rebuild(self):
        spans = sorted((b, b + ln) for b, ln in self._regions.items())
        starts, ends = [], []
        for s, e in spans:
            if ends and s <= ends[-1]:
                ends[-1] = max(ends[-1], e)
            else:
                starts.append(s)
                ends.append(e)
        self._starts, self._ends = starts, ends

    def contains(self, addr: int) -> bool:
        if self.universal:
            return True
        i = bisect.bisect_right(self._starts, addr) - 1
        return i >= 0 and addr < self._ends[i]

    def __len__(self):
        return len(self._regions)


class Engine:
    """Shadow state plus the step function; emits leak and propagation events."""

    def __init__(self, config: EngineConfig | None = None, audit: bool = False):
        self.config = cfg = config or EngineConfig()
        cfg.validate()
        self.watches = WatchRegions(universal=cfg.mode == MODE_AGGREGATE)
        self.table = TaintTable(cfg.taint_budget)
        self.regfile = RegisterTaintFile(cfg.reg_count)
        self.cache = MemoryTaintCache(cfg.cache_sets, cfg.cache_ways, cfg.granularity)
        self.accessed: set[int] = set()     # A
        self.leak_points: set[int] = set()  # L
        self.leak_count = 0
        self.untag_count = 0
        self.instr_index = 0
        self._gmask = ~(cfg.granularity - 1) & MASK64
        self._audit_steps = audit

    # -- watch bookkeeping ------------------------------------------------

    def register_watch(self, base: int, length: int):
        self.watches.add(base, length)

    def unregister_watch(self, base: int):
        self.watches.remove(base)

    def apply_directive(self, wd: WatchDirective):
        if wd.action is WatchAction.WATCH:
            self.register_watch(wd.base, wd.length)
        else:
            self.unregister_watch(wd.base)

    # -- inspection --------------------------------------------------------

    def snapshot_counts(self) -> tuple[int, int]:
        return len(self.accessed), len(self.leak_points)

    def register_taints(self, reg: int) -> tuple[int, ...]:
        return tuple(iter_taints(self.regfile.sets[reg]))

    def register_origins(self, reg: int) -> frozenset[int]:
        org = self.table.origin
        return frozenset(org[t] for t in iter_taints(self.regfile.sets[reg]))

    # -- the step function ---------------------------------------------------

    def step(self, rec: InstructionRecord) -> list:
        self.instr_index += 1
        events: list = []
        kind = rec.kind
        regs = self.regfile.sets
        table = self.table

        if kind is Kind.LOAD or kind is Kind.STORE:
            ea = rec.ea
            size = rec.size
            gmask = self._gmask

            # footprint into A
            if self.config.count_access_starts:
                self.accessed.add(ea & gmask)
            elif gmask == MASK64:
                self.accessed.update(range(ea, ea + size))
            else:
                g = self.config.granularity
                self.accessed.update(range(ea & gmask, ((ea + size - 1) & gmask) + 1, g))

            # addressing registers judged on pre-instruction snapshots
            retired = 0
            for r in rec.addr_regs:
                snap = regs[r]
                if snap:
                    events.append(PropagationEvent(
                        PropKind.ADDRESS_USE, taints=snap, src=r, dst=None, ea=ea,
                        instr_index=self.instr_index, pc=rec.pc, sym=rec.sym))
                    for tid in iter_taints(snap):
                        self.leak_points.add(table.origin[tid])
                        events.append(LeakEvent(
                            table.origin[tid], ea, self.instr_index, tid, snap,
                            rec.pc, rec.sym))
                        self.leak_count += 1
                    retired |= snap
            if retired:
                retire_leaked(retired, table, self.regfile, self.cache)

            if kind is Kind.STORE:
                if not retired:
                    # overwrite by a clean-addressed store clears old tags
                    drop = self.leak_points
                    if gmask == MASK64:
                        span = range(ea, ea + size)
                    else:
                        g = self.config.granularity
                        span = range(ea & gmask, ((ea + size - 1) & gmask) + 1, g)
                    for a in span:
                        if a in drop:
                            drop.discard(a)
                            self.untag_count += 1
                stored = regs[rec.srcs[0]]  # post-retirement, so never stale
                tag = ea & gmask
                old = self.cache.lookup(tag)
                if stored:
                    table.incref_set(stored)
                    events.append(PropagationEvent(
                        PropKind.REG_TO_MEM, taints=stored, src=rec.srcs[0], dst=tag,
                        ea=ea, instr_index=self.instr_index, pc=rec.pc, sym=rec.sym))
                dropped = self.cache.store(tag, stored)
                if old:
                    table.decref_set(old)
                if dropped:
                    table.decref_set(dropped)
            else:
                tag = ea & gmask
                new_set = 0
                if self.watches.contains(ea):
                    # allocate first: a forced eviction may scrub cache entries
                    tid = alloc(tag, table, self.regfile, self.cache)
                    new_set = 1 << tid
                    events.append(PropagationEvent(
                        PropKind.LOAD_ASSIGN, taints=new_set, src=tag, dst=rec.dst,
                        ea=ea, instr_index=self.instr_index, pc=rec.pc, sym=rec.sym))
                cached = self.cache.lookup(tag)
                if cached:
                    events.append(PropagationEvent(
                        PropKind.MEM_TO_REG, taints=cached, src=tag, dst=rec.dst,
                        ea=ea, instr_index=self.instr_index, pc=rec.pc, sym=rec.sym))
                    new_set |= cached
                if new_set:
                    table.incref_set(new_set)
                old = regs[rec.dst]
                regs[rec.dst] = new_set
                if old:
                    table.decref_set(old)

        elif kind is Kind.ALU:
            union = 0
            for s in rec.srcs:
                snap = regs[s]
                if snap:
                    events.append(PropagationEvent(
                        PropKind.REG_TO_REG, taints=snap, src=s, dst=rec.dst,
                        ea=None, instr_index=self.instr_index, pc=rec.pc, sym=rec.sym))
                    union |= snap
            if union:
                table.incref_set(union)
            old = regs[rec.dst]
            regs[rec.dst] = union
            if old:
                table.decref_set(old)

        elif kind is Kind.CONST:
            old = regs[rec.dst]
            if old:
                regs[rec.dst] = 0
                table.decref_set(old)

        if self._audit_steps:
            self._audit(rec)
        return events

    # -- correctness checks --------------------------------------------------

    def _audit(self, rec: InstructionRecord):
        if rec.kind in (Kind.LOAD, Kind.STORE):
            for r in rec.addr_regs:
                if self.regfile.sets[r] and r != rec.dst:
                    raise InvariantViolation(
                        f"addressing register r{r} still tainted after step")
        self.audit()

    def audit(self):
        """Full shadow-state consistency check; raises InvariantViolation."""
        if not self.leak_points <= self.accessed:
            raise InvariantViolation("leak points outside the accessed set")
        try:
            taint_audit(self.table, self.regfile, self.cache)
        except AssertionError as e:
            raise InvariantViolation(str(e)) from None
