"""Taint identities and the shadow structures that hold them.

A taint set is a plain int used as a bit array: bit t set means taint t
is a member. That keeps unions and intersections single operations and
makes snapshots free (ints are immutable). The identity pool is a fixed
budget of reusable taint numbers; each live taint remembers the address
whose load created it and an allocation sequence number.
"""

import heapq

TaintSet = int  # bit array, bit index == TaintId
TaintId = int

DEFAULT_TAINT_BUDGET = 128
DEFAULT_CACHE_SETS = 256
DEFAULT_CACHE_WAYS = 8


class NoLiveTaints(RuntimeError):
    """Eviction was requested while no taint is live."""


def set_union(a: TaintSet, b: TaintSet) -> TaintSet:
    return a | b


def set_clear(a: TaintSet, remove: TaintSet) -> TaintSet:
    return a & ~remove


def set_is_empty(a: TaintSet) -> bool:
    return a == 0


def iter_taints(ts: TaintSet):
    """Yield member taint ids in ascending order."""
    while ts:
        low = ts & -ts
        yield low.bit_length() - 1
        ts ^= low


class TaintTable:
    """Identity pool: origin address, allocation order and refcount per taint.

    refcount counts the shadow sets (register slots plus cache entries)
    a taint currently appears in. A taint whose refcount drops to zero is
    in no set and its number is recycled on the spot.
    """

    def __init__(self, budget: int = DEFAULT_TAINT_BUDGET):
        if budget < 1:
            raise ValueError("taint budget must be at least 1")
        self.budget = budget
        self.origin = [0] * budget
        self.seq = [0] * budget
        self.refcount = [0] * budget
        self.live = [False] * budget
        self.live_count = 0
        self.forced_evictions = 0
        self._next_seq = 0
        self._free = list(range(budget))
        heapq.heapify(self._free)

    def has_free(self) -> bool:
        return self.live_count < self.budget

    def alloc_free(self, origin: int) -> TaintId:
        """Take the lowest free id. Caller ensures one is free."""
        tid = heapq.heappop(self._free)
        self.origin[tid] = origin
        self.seq[tid] = self._next_seq
        self._next_seq += 1
        self.refcount[tid] = 0
        self.live[tid] = True
        self.live_count += 1
        return tid

    def free(self, tid: TaintId):
        assert self.live[tid] and self.refcount[tid] == 0
        self.live[tid] = False
        self.live_count -= 1
        heapq.heappush(self._free, tid)

    def incref_set(self, ts: TaintSet):
        rc = self.refcount
        while ts:
            low = ts & -ts
            rc[low.bit_length() - 1] += 1
            ts ^= low

    def decref_set(self, ts: TaintSet):
        """Drop one reference per member; recycle members that hit zero."""
        rc = self.refcount
        while ts:
            low = ts & -ts
            tid = low.bit_length() - 1
            rc[tid] -= 1
            if rc[tid] == 0:
                self.free(tid)
            ts ^= low

    def earliest_live(self) -> TaintId:
        victim = -1
        best = None
        for tid in range(self.budget):
            if self.live[tid] and (best is None or self.seq[tid] < best):
                best = self.seq[tid]
                victim = tid
        if victim < 0:
            raise NoLiveTaints("no live taint to evict")
        return victim


class RegisterTaintFile:
    """One taint set per architectural register."""

    def __init__(self, reg_count: int = 32):
        self.sets: list[TaintSet] = [0] * reg_count

    def scrub(self, remove: TaintSet) -> int:
        """Clear the given taints from every register; return removal count."""
        removed = 0
        keep = ~remove
        sets = self.sets
        for i, ts in enumerate(sets):
            hit = ts & remove
            if hit:
                removed += hit.bit_count()
                sets[i] = ts & keep
        return removed


class MemoryTaintCache:
    """Set-associative FIFO map from access start address to a taint set.

    Pure FIFO: lookups never refresh an entry's age, and rewriting an
    existing tag keeps its position. Storing an empty set removes the
    entry. When a set is full the oldest way is dropped and its taint
    set handed back to the caller; the dropped information is simply
    lost, which is what makes reported leak counts a lower bound.
    """

    def __init__(self, sets: int = DEFAULT_CACHE_SETS,
                 ways: int = DEFAULT_CACHE_WAYS, granularity: int = 1):
        if sets < 1 or ways < 1:
            raise ValueError("cache needs at least one set and one way")
        if granularity < 1 or granularity & (granularity - 1):
            raise ValueError("granularity must be a power of two")
        self.nsets = sets
        self.nways = ways
        self._gshift = granularity.bit_length() - 1
        self.sets: list[dict[int, TaintSet]] = [{} for _ in range(sets)]
        self.evictions = 0

    def _set_for(self, addr: int) -> dict:
        return self.sets[(addr >> self._gshift) % self.nsets]

    def store(self, addr: int, ts: TaintSet) -> TaintSet:
        """Install addr -> ts. Returns the taint set of a dropped way (0 if none)."""
        ways = self._set_for(addr)
        if ts == 0:
            ways.pop(addr, None)
            return 0
        if addr in ways:
            ways[addr] = ts
            return 0
        dropped = 0
        if len(ways) >= self.nways:
            oldest = next(iter(ways))
            dropped = ways.pop(oldest)
            self.evictions += 1
        ways[addr] = ts
        return dropped

    def lookup(self, addr: int) -> TaintSet:
        return self._set_for(addr).get(addr, 0)

    def scrub(self, remove: TaintSet) -> int:
        """Clear the given taints from every entry; drop entries left empty."""
        removed = 0
        keep = ~remove
        for ways in self.sets:
            dead = None
            for tag, ts in ways.items():
                hit = ts & remove
                if hit:
                    removed += hit.bit_count()
                    left = ts & keep
                    if left:
                        ways[tag] = left
                    else:
                        if dead is None:
                            dead = [tag]
                        else:
                            dead.append(tag)
            if dead:
                for tag in dead:
                    del ways[tag]
        return removed

    def entries(self):
        for ways in self.sets:
            yield from ways.items()


def alloc(origin: int, table: TaintTable, regfile: RegisterTaintFile,
          cache: MemoryTaintCache) -> TaintId:
    """Allocate a taint for a watched load; evict the earliest if exhausted.

    Total by construction: table.forced_evictions counts the times the
    budget forced an eviction.
    """
    if not table.has_free():
        evict_earliest(table, regfile, cache)
        table.forced_evictions += 1
    return table.alloc_free(origin)


def evict_earliest(table: TaintTable, regfile: RegisterTaintFile,
                   cache: MemoryTaintCache) -> TaintId:
    """Recycle the live taint with the smallest allocation sequence number.

    The victim vanishes from every shadow set. Nothing is tagged: an
    eviction is bookkeeping pressure, not a leak.
    """
    victim = table.earliest_live()
    mask = 1 << victim
    removed = regfile.scrub(mask) + cache.scrub(mask)
    assert removed == table.refcount[victim]
    table.refcount[victim] = 0
    table.free(victim)
    return victim


def retire_leaked(taints: TaintSet, table: TaintTable,
                  regfile: RegisterTaintFile, cache: MemoryTaintCache) -> list[int]:
    """Remove just-leaked taints from every set and recycle their ids.

    Returns their origin addresses in ascending id order; the caller has
    already tagged (or is about to tag) those origins as leak points.
    """
    origins = [table.origin[t] for t in iter_taints(taints)]
    regfile.scrub(taints)
    cache.scrub(taints)
    for tid in iter_taints(taints):
        table.refcount[tid] = 0
        table.free(tid)
    return origins


def audit(table: TaintTable, regfile: RegisterTaintFile, cache: MemoryTaintCache):
    """Cross-check refcounts and free-pool purity against the actual sets.

    Raises AssertionError on any mismatch; meant for tests and debug runs.
    """
    counts = [0] * table.budget
    for ts in regfile.sets:
        for tid in iter_taints(ts):
            counts[tid] += 1
    for _, ts in cache.entries():
        for tid in iter_taints(ts):
            counts[tid] += 1
    seqs = set()
    for tid in range(table.budget):
        if table.live[tid]:
            assert counts[tid] == table.refcount[tid], \
                f"taint {tid}: refcount {table.refcount[tid]} vs actual {counts[tid]}"
            assert table.seq[tid] not in seqs, f"duplicate seq for taint {tid}"
            seqs.add(table.seq[tid])
        else:
            assert counts[tid] == 0, f"freed taint {tid} still present in a set"
    assert sum(table.live) == table.live_count
