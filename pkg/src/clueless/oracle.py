"""Brute-force reference tracker used to cross-check the engine.

Deliberately naive: every watched load mints a fresh label (a plain
counter, never recycled), and per register and per stored-to address
the tracker keeps the full label set reached by explicit data flow,
with no identity pool, no refcounts and no capacity limits anywhere.
Labels retire on address use exactly like engine taints; two loads of
the same address stay distinguishable, so retiring one leaves the
other alive. Against this, the engine must agree exactly whenever
none of its bounded structures overflowed, and may only ever
under-report.
"""

from fractions import Fraction

from .isa import MASK64, Kind, WatchAction, WatchDirective

MAX_RECORDS = 1_000_000


class TraceTooLarge(RuntimeError):
    def __init__(self, limit: int):
        super().__init__(f"trace exceeds the {limit}-record reference limit")
        self.limit = limit


class ReferenceTracker:
    def __init__(self, mode: str = "track", reg_count: int = 32,
                 granularity: int = 1, count_access_starts: bool = False):
        if granularity < 1 or granularity & (granularity - 1):
            raise ValueError("granularity must be a power of two")
        self.universal = mode == "aggregate"
        self.granularity = granularity
        self.count_access_starts = count_access_starts
        self.regions: dict[int, int] = {}
        self.regs: list[set[int]] = [set() for _ in range(reg_count)]
        self.mem: dict[int, set[int]] = {}
        self.origin: dict[int, int] = {}  # live label -> load address
        self.next_label = 0
        self.accessed: set[int] = set()
        self.tagged: set[int] = set()
        self.leak_pairs: set[tuple[int, int]] = set()
        self.instructions = 0
        self.sum_a = 0
        self.sum_l = 0
        self._gmask = ~(granularity - 1) & MASK64

    def _watched(self, addr: int) -> bool:
        return self.universal or any(b <= addr < b + ln
                                     for b, ln in self.regions.items())

    def _span(self, ea: int, size: int):
        if self.count_access_starts:
            return (ea & self._gmask,)
        g = self.granularity
        return range(ea & self._gmask, ((ea + size - 1) & self._gmask) + 1, g)

    def feed(self, item):
        if isinstance(item, WatchDirective):
            if item.action is WatchAction.WATCH:
                self.regions[item.base] = item.length
            else:
                self.regions.pop(item.base, None)
            return

        kind = item.kind
        if kind is Kind.LOAD or kind is Kind.STORE:
            ea, size = item.ea, item.size
            self.accessed.update(self._span(ea, size))

            leaked: set[int] = set()
            for r in item.addr_regs:
                leaked |= self.regs[r]
            if leaked:
                for label in leaked:
                    where = self.origin.pop(label)
                    self.tagged.add(where)
                    self.leak_pairs.add((where, ea))
                for s in self.regs:
                    s -= leaked
                for tag in list(self.mem):
                    left = self.mem[tag] - leaked
                    if left:
                        self.mem[tag] = left
                    else:
                        del self.mem[tag]

            tag = ea & self._gmask
            if kind is Kind.STORE:
                if not leaked:
                    for a in self._span(ea, size):
                        self.tagged.discard(a)
                stored = self.regs[item.srcs[0]]
                if stored:
                    self.mem[tag] = set(stored)
                else:
                    self.mem.pop(tag, None)
            else:
                new = set(self.mem.get(tag, ()))
                if self._watched(ea):
                    label = self.next_label
                    self.next_label += 1
                    self.origin[label] = tag
                    new.add(label)
                self.regs[item.dst] = new
        elif kind is Kind.ALU:
            union: set[int] = set()
            for s in item.srcs:
                union |= self.regs[s]
            self.regs[item.dst] = union
        elif kind is Kind.CONST:
            self.regs[item.dst] = set()

        self.instructions += 1
        self.sum_a += len(self.accessed)
        self.sum_l += len(self.tagged)

    def lambda_(self) -> Fraction:
        if self.sum_a == 0:
            return Fraction(0)
        return Fraction(self.sum_l, self.sum_a)


def run_oracle(stream, mode: str = "track", reg_count: int = 32,
               granularity: int = 1, count_access_starts: bool = False,
               watches: list[tuple[int, int]] = (),
               max_records: int = MAX_RECORDS) -> ReferenceTracker:
    """Feed a bounded stream through a fresh tracker and return it."""
    tracker = ReferenceTracker(mode, reg_count, granularity, count_access_starts)
    for base, length in watches:
        tracker.regions[base] = length
    n = 0
    for item in stream:
        if not isinstance(item, WatchDirective):
            n += 1
            if n > max_records:
                raise TraceTooLarge(max_records)
        tracker.feed(item)
    return tracker
