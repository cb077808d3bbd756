"""Instruction records and the line-oriented trace text format.

A trace is a stream of instruction records and watch directives. Records
carry only what taint propagation needs: the kind of operation, the
registers it reads and writes, and, for memory operations, the resolved
effective address and access size. Values never appear in a trace.
"""

from dataclasses import dataclass, field
from enum import Enum

MASK64 = (1 << 64) - 1
DEFAULT_REG_COUNT = 32

VALID_SIZES = (1, 2, 4, 8)


class Kind(str, Enum):
    LOAD = "load"
    STORE = "store"
    ALU = "alu"
    CONST = "const"
    NOP = "nop"


class WatchAction(str, Enum):
    WATCH = "watch"
    UNWATCH = "unwatch"


class MalformedLine(ValueError):
    """A trace line that does not conform to the grammar."""

    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


@dataclass(slots=True)
class InstructionRecord:
    """One retired instruction, normalized for the taint engine.

    dst is the written register, srcs the registers read as data (for a
    store, the single stored register), addr_regs the registers read to
    form an address. ea/size describe the memory access of loads and
    stores; other kinds carry neither. pc and sym are optional
    provenance for diagnostics.
    """

    kind: Kind
    dst: int | None = None
    srcs: tuple[int, ...] = ()
    addr_regs: tuple[int, ...] = ()
    ea: int | None = None
    size: int | None = None
    pc: int | None = None
    sym: str | None = None

    def validate(self, reg_count: int = DEFAULT_REG_COUNT):
        k = self.kind
        for r in (self.dst, *self.srcs, *self.addr_regs):
            if r is not None and not (0 <= r < reg_count):
                raise ValueError(f"register index {r} out of range")
        if k in (Kind.LOAD, Kind.STORE):
            if self.ea is None or self.size is None:
                raise ValueError(f"{k.value} record needs ea and size")
            if not (0 <= self.ea <= MASK64):
                raise ValueError(f"ea {self.ea:#x} outside the 64-bit space")
            if self.size not in VALID_SIZES:
                raise ValueError(f"size {self.size} not one of {VALID_SIZES}")
            if len(self.addr_regs) > 2:
                raise ValueError("at most two addressing registers")
            if k is Kind.LOAD and self.dst is None:
                raise ValueError("load record needs dst")
            if k is Kind.STORE and len(self.srcs) != 1:
                raise ValueError("store record needs exactly one source")
        else:
            if self.ea is not None or self.size is not None or self.addr_regs:
                raise ValueError(f"{k.value} record carries no memory fields")
            if k is Kind.ALU and (self.dst is None or not self.srcs):
                raise ValueError("alu record needs dst and srcs")
            if k is Kind.CONST and self.dst is None:
                raise ValueError("const record needs dst")


@dataclass(slots=True)
class WatchDirective:
    """Marks a memory region as holding values of interest (or stops doing so)."""

    action: WatchAction
    base: int
    length: int | None = None  # None for unwatch

    def validate(self):
        if not (0 <= self.base <= MASK64):
            raise ValueError(f"base {self.base:#x} outside the 64-bit space")
        if self.action is WatchAction.WATCH:
            if self.length is None or self.length < 1:
                raise ValueError("watch needs a positive length")


def _parse_reg(tok: str, lineno: int, reg_count: int) -> int:
    if len(tok) < 2 or tok[0] != "r" or not tok[1:].isdigit():
        raise MalformedLine(lineno, f"bad register name {tok!r}")
    idx = int(tok[1:])
    if idx >= reg_count:
        raise MalformedLine(lineno, f"register {tok!r} outside r0..r{reg_count - 1}")
    return idx


def _parse_hex(tok: str, key: str, lineno: int) -> int:
    t = tok[2:] if tok[:2].lower() == "0x" else tok
    try:
        val = int(t, 16)
    except ValueError:
        raise MalformedLine(lineno, f"{key}={tok!r} is not a hex number") from None
    if not (0 <= val <= MASK64):
        raise MalformedLine(lineno, f"{key}={tok!r} outside the 64-bit space")
    return val


def _parse_dec(tok: str, key: str, lineno: int) -> int:
    if not tok.isdigit():
        raise MalformedLine(lineno, f"{key}={tok!r} is not a decimal number")
    return int(tok)


def _keyvals(tokens: list[str], lineno: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or not key or not val:
            raise MalformedLine(lineno, f"expected key=value, got {tok!r}")
        if key in out:
            raise MalformedLine(lineno, f"duplicate key {key!r}")
        out[key] = val
    return out


# required / optional keys per record kind
_FIELDS = {
    Kind.LOAD: ({"dst", "ea", "size"}, {"addrregs", "pc", "sym"}),
    Kind.STORE: ({"src", "ea", "size"}, {"addrregs", "pc", "sym"}),
    Kind.ALU: ({"dst", "srcs"}, {"pc", "sym"}),
    Kind.CONST: ({"dst"}, {"pc", "sym"}),
    Kind.NOP: (set(), {"pc", "sym"}),
}


def parse_trace_line(line: str, lineno: int = 0,
                     reg_count: int = DEFAULT_REG_COUNT):
    """Parse one non-comment line into a record or directive.

    Raises MalformedLine for anything outside the grammar; never skips.
    """
    tokens = line.split()
    if not tokens:
        raise MalformedLine(lineno, "empty line")

    if tokens[0] in ("watch", "unwatch"):
        kv = _keyvals(tokens[1:], lineno)
        if tokens[0] == "watch":
            extra = kv.keys() - {"ea", "len"}
            if extra or kv.keys() != {"ea", "len"}:
                raise MalformedLine(lineno, "watch takes exactly ea= and len=")
            wd = WatchDirective(WatchAction.WATCH, _parse_hex(kv["ea"], "ea", lineno),
                                _parse_dec(kv["len"], "len", lineno))
        else:
            if kv.keys() != {"ea"}:
                raise MalformedLine(lineno, "unwatch takes exactly ea=")
            wd = WatchDirective(WatchAction.UNWATCH, _parse_hex(kv["ea"], "ea", lineno))
        try:
            wd.validate()
        except ValueError as e:
            raise MalformedLine(lineno, str(e)) from None
        return wd

    kv = _keyvals(tokens, lineno)
    if "kind" not in kv:
        raise MalformedLine(lineno, "missing kind=")
    try:
        kind = Kind(kv.pop("kind"))
    except ValueError:
        raise MalformedLine(lineno, f"unknown kind {tokens[0]!r}") from None

    required, optional = _FIELDS[kind]
    missing = required - kv.keys()
    if missing:
        raise MalformedLine(lineno, f"{kind.value} record missing {sorted(missing)}")
    unknown = kv.keys() - required - optional
    if unknown:
        raise MalformedLine(lineno, f"unknown keys {sorted(unknown)} for {kind.value}")

    dst = _parse_reg(kv["dst"], lineno, reg_count) if "dst" in kv else None
    srcs: tuple[int, ...] = ()
    if "srcs" in kv:
        srcs = tuple(_parse_reg(t, lineno, reg_count) for t in kv["srcs"].split(","))
    elif "src" in kv:
        srcs = (_parse_reg(kv["src"], lineno, reg_count),)
    addr_regs: tuple[int, ...] = ()
    if "addrregs" in kv:
        addr_regs = tuple(_parse_reg(t, lineno, reg_count)
                          for t in kv["addrregs"].split(","))
    ea = _parse_hex(kv["ea"], "ea", lineno) if "ea" in kv else None
    size = _parse_dec(kv["size"], "size", lineno) if "size" in kv else None
    pc = _parse_hex(kv["pc"], "pc", lineno) if "pc" in kv else None
    sym = kv.get("sym")

    rec = InstructionRecord(kind, dst, srcs, addr_regs, ea, size, pc, sym)
    try:
        rec.validate(reg_count)
    except ValueError as e:
        raise MalformedLine(lineno, str(e)) from None
    return rec


def serialize(item) -> str:
    """Render a record or directive as one canonical trace line."""
    if isinstance(item, WatchDirective):
        if item.action is WatchAction.WATCH:
            return f"watch ea={item.base:#x} len={item.length}"
        return f"unwatch ea={item.base:#x}"

    parts = [f"kind={item.kind.value}"]
    if item.kind is Kind.STORE:
        parts.append(f"src=r{item.srcs[0]}")
    elif item.dst is not None:
        parts.append(f"dst=r{item.dst}")
    if item.kind is Kind.ALU:
        parts.append("srcs=" + ",".join(f"r{s}" for s in item.srcs))
    if item.addr_regs:
        parts.append("addrregs=" + ",".join(f"r{a}" for a in item.addr_regs))
    if item.ea is not None:
        parts.append(f"ea={item.ea:#x}")
    if item.size is not None:
        parts.append(f"size={item.size}")
    if item.pc is not None:
        parts.append(f"pc={item.pc:#x}")
    if item.sym is not None:
        parts.append(f"sym={item.sym}")
    return " ".join(parts)


def iter_trace(lines, reg_count: int = DEFAULT_REG_COUNT):
    """Yield (lineno, item) for every record/directive in an iterable of lines.

    Comment lines (starting with '#') and blank lines carry no content and
    are passed over; every other line must parse.
    """
    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, parse_trace_line(stripped, lineno, reg_count)
