"""Assembler and interpreter for the little trace-producing register machine.

The machine is 64-bit, byte-addressable and little-endian, with R
general registers that start at zero and a sparse memory that reads
zero where nothing was written. Programs exist to produce instruction
record streams; the program counter is an instruction index, not a
byte address.

Source grammar (one statement per line, ';' starts a comment):

    label:  add  r1, r2, r3        ; also sub mul and or xor shl shr
            mv   r1, r2
            li   r1, imm_or_label
            addi r1, r2, imm       ; also shli
            ldb  r1, [r2+imm]      ; b/h/w/d = 1/2/4/8 bytes
            ldxw r1, [r2+r3*4+imm] ; scaled index form, any of b/h/w/d
            stb  [r2+imm], r1
            stxd [r2+r3*8+imm], r1
            beq  r1, r2, label     ; also bne
            jmp  label
            halt
            .org  addr
            .byte v, v, ...
            .word v, v, ...        ; 8-byte little-endian values
            .str  "text"
            .watch label_or_addr, len
            .unwatch label_or_addr

Same-source xor and li are classified Const (they destroy data
dependence); mv is an Alu with a single source. Branches compare
values but emit Nop records: control flow is deliberately not a
propagation channel.
"""

import re
from dataclasses import dataclass, field

from .isa import (MASK64, DEFAULT_REG_COUNT, InstructionRecord, Kind,
                  WatchAction, WatchDirective)

DEFAULT_STEP_LIMIT = 1_000_000


class AsmError(ValueError):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


class Trap(RuntimeError):
    """A memory access fell outside the configured bound."""

    def __init__(self, pc: int, reason: str):
        super().__init__(f"trap at pc={pc}: {reason}")
        self.pc = pc
        self.reason = reason


class StepLimitExceeded(RuntimeError):
    def __init__(self, limit: int):
        super().__init__(f"program exceeded {limit} retired instructions")
        self.limit = limit


_SIZES = {"b": 1, "h": 2, "w": 4, "d": 8}

_ALU3 = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "and": lambda a, b: a & b,
    "or": lambda a, b: a | b,
    "xor": lambda a, b: a ^ b,
    "shl": lambda a, b: a << (b & 63),
    "shr": lambda a, b: a >> (b & 63),
}
_ALUI = {
    "addi": lambda a, b: a + b,
    "shli": lambda a, b: a << (b & 63),
}

_REG = r"r\d+"
_IMM = r"-?(?:0x[0-9a-fA-F]+|\d+)"
_NAME = r"[A-Za-z_]\w*"
_RE_R3 = re.compile(rf"({_REG})\s*,\s*({_REG})\s*,\s*({_REG})$")
_RE_R2 = re.compile(rf"({_REG})\s*,\s*({_REG})$")
_RE_RI = re.compile(rf"({_REG})\s*,\s*({_IMM}|{_NAME})$")
_RE_R2I = re.compile(rf"({_REG})\s*,\s*({_REG})\s*,\s*({_IMM})$")
_RE_MEM = re.compile(rf"\[\s*({_REG})\s*(?:([+-])\s*({_IMM}))?\s*\]$")
_RE_MEMX = re.compile(
    rf"\[\s*({_REG})\s*\+\s*({_REG})\s*\*\s*([1248])\s*(?:([+-])\s*({_IMM}))?\s*\]$")
_RE_BR = re.compile(rf"({_REG})\s*,\s*({_REG})\s*,\s*({_NAME})$")
_RE_LABEL = re.compile(rf"^({_NAME}):")


@dataclass(slots=True)
class Op:
    """One decoded statement in the executable stream."""

    exec: str  # li|mv|alu3|alui|load|loadx|store|storex|br|jmp|halt|watch|unwatch
    lineno: int
    mn: str = ""
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    scale: int = 1
    size: int = 0
    target: object = None  # label str before resolution, then int
    sym: str | None = None  # nearest code label at or below this op


@dataclass(slots=True)
class Program:
    ops: list[Op] = field(default_factory=list)
    labels: dict[str, int] = field(default_factory=dict)
    data: dict[int, int] = field(default_factory=dict)
    watch_count: int = 0


@dataclass(slots=True)
class MachineState:
    regs: list[int]
    mem: dict[int, int]
    pc: int = 0
    halted: bool = False
    step_count: int = 0


def _int_of(tok: str) -> int:
    return int(tok, 0) & MASK64


def _reg_of(tok: str, lineno: int, reg_count: int) -> int:
    idx = int(tok[1:])
    if idx >= reg_count:
        raise AsmError(lineno, f"register {tok} outside r0..r{reg_count - 1}")
    return idx


def assemble(text: str, reg_count: int = DEFAULT_REG_COUNT) -> Program:
    """Two passes: lay out statements and data, then resolve label references."""
    prog = Program()
    pending: list[tuple[str, int]] = []  # labels awaiting a home
    data_cursor = 0
    written: set[int] = set()

    def bind_code(lineno: int):
        for name, ln in pending:
            if name in prog.labels:
                raise AsmError(ln, f"duplicate label {name!r}")
            prog.labels[name] = len(prog.ops)
            code_labels.append((len(prog.ops), name))
        pending.clear()

    def bind_data(lineno: int):
        for name, ln in pending:
            if name in prog.labels:
                raise AsmError(ln, f"duplicate label {name!r}")
            prog.labels[name] = data_cursor
        pending.clear()

    def emit_data(values, lineno, width):
        nonlocal data_cursor
        bind_data(lineno)
        for v in values:
            for i in range(width):
                addr = data_cursor & MASK64
                if addr in written:
                    raise AsmError(lineno, f"data overlaps at {addr:#x}")
                written.add(addr)
                prog.data[addr] = (v >> (8 * i)) & 0xFF
                data_cursor += 1

    code_labels: list[tuple[int, str]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        while True:
            m = _RE_LABEL.match(line)
            if not m:
                break
            pending.append((m.group(1), lineno))
            line = line[m.end():].strip()
        if not line:
            continue

        head, _, rest = line.partition(" ")
        rest = rest.strip()

        if head.startswith("."):
            if head == ".org":
                if not re.fullmatch(_IMM, rest):
                    raise AsmError(lineno, ".org needs a numeric address")
                data_cursor = _int_of(rest)
            elif head == ".byte":
                emit_data([_int_of(t.strip()) for t in rest.split(",")], lineno, 1)
            elif head == ".word":
                emit_data([_int_of(t.strip()) for t in rest.split(",")], lineno, 8)
            elif head == ".str":
                m = re.fullmatch(r'"([^"]*)"', rest)
                if not m:
                    raise AsmError(lineno, '.str needs a double-quoted string')
                emit_data([ord(c) for c in m.group(1)], lineno, 1)
            elif head in (".watch", ".unwatch"):
                bind_code(lineno)
                if head == ".watch":
                    m = re.fullmatch(rf"({_IMM}|{_NAME})\s*,\s*(\d+)", rest)
                    if not m:
                        raise AsmError(lineno, ".watch needs base, len")
                    op = Op("watch", lineno, imm=int(m.group(2)), target=m.group(1))
                else:
                    m = re.fullmatch(rf"({_IMM}|{_NAME})", rest)
                    if not m:
                        raise AsmError(lineno, ".unwatch needs a base")
                    op = Op("unwatch", lineno, target=m.group(1))
                prog.ops.append(op)
                prog.watch_count += 1
            else:
                raise AsmError(lineno, f"unknown directive {head!r}")
            continue

        bind_code(lineno)
        op = _decode(head, rest, lineno, reg_count)
        prog.ops.append(op)

    if pending:
        bind_code(pending[0][1])  # trailing labels point one past the end

    # second pass: resolve label references and attach nearest-label syms
    for op in prog.ops:
        if isinstance(op.target, str):
            name = op.target
            if re.fullmatch(_IMM, name):
                op.target = _int_of(name)
            elif name in prog.labels:
                op.target = prog.labels[name]
            else:
                raise AsmError(op.lineno, f"unresolved label {name!r}")
        if op.exec in ("br", "jmp") and not (0 <= op.target <= len(prog.ops)):
            raise AsmError(op.lineno, f"branch target {op.target} out of range")
    sym = None
    marks = dict(code_labels)
    for idx, op in enumerate(prog.ops):
        sym = marks.get(idx, sym)
        op.sym = sym
    return prog


def _decode(head: str, rest: str, lineno: int, reg_count: int) -> Op:
    def reg(tok):
        return _reg_of(tok, lineno, reg_count)

    def fail():
        raise AsmError(lineno, f"bad operands for {head!r}: {rest!r}")

    if head == "halt":
        if rest:
            fail()
        return Op("halt", lineno)
    if head == "jmp":
        if not re.fullmatch(_NAME, rest):
            fail()
        return Op("jmp", lineno, target=rest)
    if head in ("beq", "bne"):
        m = _RE_BR.fullmatch(rest) or fail()
        return Op("br", lineno, mn=head, rs1=reg(m.group(1)), rs2=reg(m.group(2)),
                  target=m.group(3))
    if head == "li":
        m = _RE_RI.fullmatch(rest) or fail()
        return Op("li", lineno, rd=reg(m.group(1)), target=m.group(2))
    if head == "mv":
        m = _RE_R2.fullmatch(rest) or fail()
        return Op("mv", lineno, rd=reg(m.group(1)), rs1=reg(m.group(2)))
    if head in _ALU3:
        m = _RE_R3.fullmatch(rest) or fail()
        return Op("alu3", lineno, mn=head, rd=reg(m.group(1)), rs1=reg(m.group(2)),
                  rs2=reg(m.group(3)))
    if head in _ALUI:
        m = _RE_R2I.fullmatch(rest) or fail()
        return Op("alui", lineno, mn=head, rd=reg(m.group(1)), rs1=reg(m.group(2)),
                  imm=int(m.group(3), 0))
    if head in ("ld", "ldx", "st", "stx"):
        size, base = 8, head  # bare form accesses one machine word
    elif head[:-1] in ("ld", "ldx", "st", "stx") and head[-1] in _SIZES:
        size, base = _SIZES[head[-1]], head[:-1]
    else:
        raise AsmError(lineno, f"unknown mnemonic {head!r}")

    if base == "ld":
        rd_tok, _, mem = rest.partition(",")
        m = _RE_MEM.fullmatch(mem.strip()) or fail()
        imm = int((m.group(2) or "+") + (m.group(3) or "0"), 0)
        return Op("load", lineno, rd=reg(rd_tok.strip()), rs1=reg(m.group(1)),
                  imm=imm, size=size)
    if base == "ldx":
        rd_tok, _, mem = rest.partition(",")
        m = _RE_MEMX.fullmatch(mem.strip()) or fail()
        imm = int((m.group(4) or "+") + (m.group(5) or "0"), 0)
        return Op("loadx", lineno, rd=reg(rd_tok.strip()), rs1=reg(m.group(1)),
                  rs2=reg(m.group(2)), scale=int(m.group(3)), imm=imm, size=size)
    mem, _, rs_tok = rest.rpartition(",")
    if base == "st":
        m = _RE_MEM.fullmatch(mem.strip()) or fail()
        imm = int((m.group(2) or "+") + (m.group(3) or "0"), 0)
        return Op("store", lineno, rd=reg(rs_tok.strip()), rs1=reg(m.group(1)),
                  imm=imm, size=size)
    m = _RE_MEMX.fullmatch(mem.strip()) or fail()
    imm = int((m.group(4) or "+") + (m.group(5) or "0"), 0)
    return Op("storex", lineno, rd=reg(rs_tok.strip()), rs1=reg(m.group(1)),
              rs2=reg(m.group(2)), scale=int(m.group(3)), imm=imm, size=size)


class Machine:
    """Executes one decoded op per step and yields its normalized record."""

    def __init__(self, program: Program, reg_count: int = DEFAULT_REG_COUNT,
                 mem_bound: int | None = None):
        self.program = program
        self.mem_bound = mem_bound
        self.state = MachineState(regs=[0] * reg_count, mem=dict(program.data))
        self.last_access: tuple[int, int] | None = None  # (ea, size) cross-check hook

    def _load(self, ea: int, size: int, pc: int) -> int:
        self._check(ea, size, pc)
        mem = self.state.mem
        val = 0
        for i in range(size):
            val |= mem.get((ea + i) & MASK64, 0) << (8 * i)
        self.last_access = (ea, size)
        return val

    def _store(self, ea: int, size: int, value: int, pc: int):
        self._check(ea, size, pc)
        mem = self.state.mem
        for i in range(size):
            mem[(ea + i) & MASK64] = (value >> (8 * i)) & 0xFF
        self.last_access = (ea, size)

    def _check(self, ea: int, size: int, pc: int):
        bound = self.mem_bound
        if bound is not None and (ea >= bound or ea + size > bound):
            raise Trap(pc, f"access [{ea:#x},{ea + size:#x}) outside [0,{bound:#x})")

    def step(self):
        """Execute the op at pc; return its record, or the directive it emits."""
        st = self.state
        op = self.program.ops[st.pc]
        idx = st.pc
        regs = st.regs
        kind_pc = {"pc": idx, "sym": op.sym}
        st.pc += 1
        ex = op.exec

        if ex == "alu3":
            if op.mn == "xor" and op.rs1 == op.rs2:
                regs[op.rd] = 0
                rec = InstructionRecord(Kind.CONST, dst=op.rd, **kind_pc)
            else:
                regs[op.rd] = _ALU3[op.mn](regs[op.rs1], regs[op.rs2]) & MASK64
                rec = InstructionRecord(Kind.ALU, dst=op.rd, srcs=(op.rs1, op.rs2),
                                        **kind_pc)
        elif ex == "load" or ex == "loadx":
            if ex == "load":
                ea = (regs[op.rs1] + op.imm) & MASK64
                aregs = (op.rs1,)
            else:
                ea = (regs[op.rs1] + regs[op.rs2] * op.scale + op.imm) & MASK64
                aregs = (op.rs1, op.rs2)
            regs[op.rd] = self._load(ea, op.size, idx)
            rec = InstructionRecord(Kind.LOAD, dst=op.rd, addr_regs=aregs,
                                    ea=ea, size=op.size, **kind_pc)
        elif ex == "store" or ex == "storex":
            if ex == "store":
                ea = (regs[op.rs1] + op.imm) & MASK64
                aregs = (op.rs1,)
            else:
                ea = (regs[op.rs1] + regs[op.rs2] * op.scale + op.imm) & MASK64
                aregs = (op.rs1, op.rs2)
            self._store(ea, op.size, regs[op.rd], idx)
            rec = InstructionRecord(Kind.STORE, srcs=(op.rd,), addr_regs=aregs,
                                    ea=ea, size=op.size, **kind_pc)
        elif ex == "alui":
            regs[op.rd] = _ALUI[op.mn](regs[op.rs1], op.imm) & MASK64
            rec = InstructionRecord(Kind.ALU, dst=op.rd, srcs=(op.rs1,), **kind_pc)
        elif ex == "li":
            regs[op.rd] = op.target & MASK64
            rec = InstructionRecord(Kind.CONST, dst=op.rd, **kind_pc)
        elif ex == "mv":
            regs[op.rd] = regs[op.rs1]
            rec = InstructionRecord(Kind.ALU, dst=op.rd, srcs=(op.rs1,), **kind_pc)
        elif ex == "br":
            taken = (regs[op.rs1] == regs[op.rs2]) == (op.mn == "beq")
            if taken:
                st.pc = op.target
            rec = InstructionRecord(Kind.NOP, **kind_pc)
        elif ex == "jmp":
            st.pc = op.target
            rec = InstructionRecord(Kind.NOP, **kind_pc)
        elif ex == "halt":
            st.halted = True
            rec = InstructionRecord(Kind.NOP, **kind_pc)
        elif ex == "watch":
            return WatchDirective(WatchAction.WATCH, op.target & MASK64, op.imm)
        else:  # unwatch
            return WatchDirective(WatchAction.UNWATCH, op.target & MASK64)

        st.step_count += 1
        return rec


def run(program: Program, sink, *, step_limit: int = DEFAULT_STEP_LIMIT,
        reg_count: int = DEFAULT_REG_COUNT,
        mem_bound: int | None = None) -> MachineState:
    """Execute to halt (or off the end), feeding every record and directive to sink."""
    machine = Machine(program, reg_count, mem_bound)
    st = machine.state
    nops = len(program.ops)
    while not st.halted and st.pc < nops:
        if st.step_count >= step_limit:
            raise StepLimitExceeded(step_limit)
        sink(machine.step())
    return st
