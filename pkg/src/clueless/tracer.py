"""Propagation history: bounded event log, text rendering, leak reports.

Events record taint movement as it happens; the log is a ring buffer so
a pathological run cannot hold the whole history in memory. Rendered
lines follow a small fixed grammar:

    0x7fff41801683 { 0 } -> r0      data loaded and assigned a taint
    r3 { 1, 4 } -> r4               register-to-register flow
    r2 { 0 } -> 0x500               register stored to memory
    [ r8 { 0 } ] = 0x38e0           tainted register used as an address

Taint numbers print in ascending order. The leak report pairs each leak
with a back-slice: the logged events that moved any of the leaking
taints, walked backward to their assignment points.
"""

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .taint import iter_taints

DEFAULT_LOG_CAPACITY = 1_000_000


class PropKind(Enum):
    LOAD_ASSIGN = "load_assign"
    REG_TO_REG = "reg_to_reg"
    MEM_TO_REG = "mem_to_reg"
    REG_TO_MEM = "reg_to_mem"
    ADDRESS_USE = "address_use"


@dataclass(slots=True)
class PropagationEvent:
    kind: PropKind
    taints: int              # taint set that moved (bit array)
    src: int | None          # register index, or memory address for loads
    dst: int | None          # register index, or memory address for stores
    ea: int | None
    instr_index: int
    pc: int | None = None
    sym: str | None = None


class TraceLog:
    """Insertion-ordered ring buffer of propagation events."""

    def __init__(self, capacity: int = DEFAULT_LOG_CAPACITY):
        if capacity < 1:
            raise ValueError("log capacity must be positive")
        self.capacity = capacity
        self.events: deque[PropagationEvent] = deque(maxlen=capacity)
        self.dropped = 0

    def record(self, event: PropagationEvent):
        if len(self.events) == self.capacity:
            self.dropped += 1
        self.events.append(event)

    def __len__(self):
        return len(self.events)


def _set_text(taints: int) -> str:
    return "{ " + ", ".join(str(t) for t in iter_taints(taints)) + " }"


def render(ev: PropagationEvent) -> str:
    ts = _set_text(ev.taints)
    k = ev.kind
    if k is PropKind.ADDRESS_USE:
        return f"[ r{ev.src} {ts} ] = {ev.ea:#x}"
    if k is PropKind.REG_TO_REG:
        return f"r{ev.src} {ts} -> r{ev.dst}"
    if k is PropKind.REG_TO_MEM:
        return f"r{ev.src} {ts} -> {ev.dst:#x}"
    # load paths: memory address on the left
    return f"{ev.src:#x} {ts} -> r{ev.dst}"


def back_slice(events: list[PropagationEvent], upto: int, taints: int) -> list[PropagationEvent]:
    """Events that moved any of the given taints, scanning backward from index upto.

    The walk retires a taint from the wanted set when it reaches the
    assignment that created it, so recycled taint numbers from earlier
    in the log are not pulled in.
    """
    wanted = taints
    picked = []
    for i in range(upto, -1, -1):
        ev = events[i]
        hit = ev.taints & wanted
        if not hit:
            continue
        picked.append(ev)
        if ev.kind is PropKind.LOAD_ASSIGN:
            wanted &= ~ev.taints
            if not wanted:
                break
    picked.reverse()
    return picked


def leak_report(leaks: list, log: TraceLog, mode: str = "track") -> dict:
    """Structured document: every leak with provenance, plus session counts."""
    events = list(log.events)
    last_pos: dict[int, int] = {}
    for pos, ev in enumerate(events):
        last_pos[ev.instr_index] = pos

    out_leaks = []
    for lk in leaks:
        upto = last_pos.get(lk.instr_index, len(events) - 1)
        sl = back_slice(events, upto, lk.taints or (1 << lk.taint))
        out_leaks.append({
            "leak_point": f"{lk.leak_point:#x}",
            "transformed_into": f"{lk.transformed_into:#x}",
            "instr_index": lk.instr_index,
            "pc": lk.pc,
            "sym": lk.sym,
            "taints": list(iter_taints(lk.taints or (1 << lk.taint))),
            "trace": [render(ev) for ev in sl],
        })

    watched_loads = sum(1 for ev in events if ev.kind is PropKind.LOAD_ASSIGN)
    address_uses = sum(1 for ev in events if ev.kind is PropKind.ADDRESS_USE)
    if out_leaks:
        note = f"{watched_loads} watched loads; {len(out_leaks)} turned into addresses"
    elif watched_loads:
        note = (f"{watched_loads} watched loads; "
                "none was ever used as a memory address")
    else:
        note = "no watched data was loaded"
    return {
        "mode": mode,
        "leak_count": len(out_leaks),
        "watched_loads": watched_loads,
        "address_uses": address_uses,
        "events_dropped": log.dropped,
        "note": note,
        "leaks": out_leaks,
    }
