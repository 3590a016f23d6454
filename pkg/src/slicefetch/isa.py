"""Micro-op ISA: encoding, architectural state, and a single-stepping
functional executor producing the retirement event stream.

Register universe (25 ids): r0..r15 architectural, t0..t7 temporary
(reserved for injected slices; programs may not name them), and f, a flags
register written implicitly by every ALU op and readable as a source.

Program text format, one micro-op per line (`#` starts a comment):

    0x00: MOV_IMM r1, 0x1000
    0x01: MOV     r2, r1
    0x02: ADD     r1, r1, 8
    0x03: LOAD    r4, [r1 + r6*8 + 16]
    0x04: STORE   [r1 + 8], r4
    0x05: BR      lt, r2, r3, 0x02
    0x06: JMP     0x02
    0x07: HALT

Initial memory image lines use the same `addr: value` shape; a line whose
first token after the colon is not an opcode is a memory word:

    0x2000: 42

All values are 64-bit two's complement; loads and stores move 8 bytes,
little-endian, unaligned allowed. Uninitialized memory reads as zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Union

WORD_MASK = (1 << 64) - 1

NUM_ARCH_REGS = 16
NUM_TEMP_REGS = 8
TEMP_BASE = 16          # t0 == register id 16
FLAGS_REG = 24          # f
NUM_REGS = 25


class OpKind(IntEnum):
    MOV_IMM = 0
    MOV = 1
    ADD = 2
    SUB = 3
    MUL = 4
    AND = 5
    OR = 6
    XOR = 7
    SHL = 8
    SHR = 9
    LOAD = 10
    STORE = 11
    BR = 12
    JMP = 13
    HALT = 14


ALU_KINDS = frozenset(
    {OpKind.ADD, OpKind.SUB, OpKind.MUL, OpKind.AND, OpKind.OR, OpKind.XOR, OpKind.SHL, OpKind.SHR}
)

BRANCH_CONDS = ("eq", "ne", "lt", "ge")


@dataclass(frozen=True, slots=True)
class Reg:
    """A register operand; plain ints in operand position are immediates."""

    n: int

    def __repr__(self) -> str:
        return reg_name(self.n)


Src = Union[Reg, int]


@dataclass(frozen=True, slots=True)
class MemRef:
    """Addressing tuple for LOAD/STORE: base + index*scale + disp."""

    base: int
    index: Optional[int] = None
    scale: int = 1
    disp: int = 0


@dataclass(frozen=True, slots=True)
class MicroOp:
    ip: int
    kind: OpKind
    dest: Optional[int] = None
    src1: Optional[Src] = None
    src2: Optional[Src] = None
    mem: Optional[MemRef] = None
    cond: Optional[str] = None
    target: Optional[int] = None


@dataclass(slots=True)
class RetiredEvent:
    op: MicroOp
    result: Optional[int]
    eff_addr: Optional[int]
    taken: Optional[bool]
    retire_index: int


class SimulationFault(Exception):
    """Fetch outside the program, or stepping a halted machine."""


class ProgramError(ValueError):
    """Malformed program text or ill-formed micro-op sequence."""


def reg_name(n: int) -> str:
    if 0 <= n < NUM_ARCH_REGS:
        return f"r{n}"
    if TEMP_BASE <= n < TEMP_BASE + NUM_TEMP_REGS:
        return f"t{n - TEMP_BASE}"
    if n == FLAGS_REG:
        return "f"
    return f"reg{n}"


def parse_reg(tok: str) -> int:
    tok = tok.strip()
    if tok == "f":
        return FLAGS_REG
    if len(tok) >= 2 and tok[0] in "rt" and tok[1:].isdigit():
        n = int(tok[1:])
        if tok[0] == "r" and n < NUM_ARCH_REGS:
            return n
        if tok[0] == "t" and n < NUM_TEMP_REGS:
            return TEMP_BASE + n
    raise ProgramError(f"bad register {tok!r}")


class Memory:
    """Sparse byte-addressable memory stored as 8-byte little-endian words."""

    __slots__ = ("words",)

    def __init__(self, image: Optional[dict[int, int]] = None):
        self.words: dict[int, int] = {}
        if image:
            for addr, value in image.items():
                self.store_u64(addr, value)

    def load_u64(self, addr: int) -> int:
        addr &= WORD_MASK
        off = addr & 7
        w = addr >> 3
        lo = self.words.get(w, 0)
        if off == 0:
            return lo
        hi = self.words.get(w + 1, 0)
        return ((lo >> (off * 8)) | (hi << (64 - off * 8))) & WORD_MASK

    def store_u64(self, addr: int, value: int) -> None:
        addr &= WORD_MASK
        value &= WORD_MASK
        off = addr & 7
        w = addr >> 3
        if off == 0:
            self.words[w] = value
            return
        keep = (1 << (off * 8)) - 1
        lo = self.words.get(w, 0)
        self.words[w] = (lo & keep) | ((value << (off * 8)) & WORD_MASK)
        hi = self.words.get(w + 1, 0)
        self.words[w + 1] = (hi & ~keep & WORD_MASK) | (value >> (64 - off * 8))

    def copy(self) -> "Memory":
        m = Memory()
        m.words = dict(self.words)
        return m


class ArchState:
    """Register file, memory, instruction pointer, and retirement/cycle counters."""

    __slots__ = ("regs", "mem", "ip", "retired", "cycle", "halted")

    def __init__(self, entry_ip: int = 0, mem: Optional[Memory] = None):
        self.regs = [0] * NUM_REGS
        self.mem = mem if mem is not None else Memory()
        self.ip = entry_ip
        self.retired = 0
        self.cycle = 0
        self.halted = False

    def snapshot_equal(self, other: "ArchState") -> bool:
        """Architectural equality: registers, memory, ip, retired. Cycle is timing."""
        return (
            self.regs == other.regs
            and self.ip == other.ip
            and self.retired == other.retired
            and {k: v for k, v in self.mem.words.items() if v}
            == {k: v for k, v in other.mem.words.items() if v}
        )


class Program:
    """An ordered micro-op listing with ip lookup and fall-through order."""

    def __init__(self, ops: list[MicroOp]):
        if not ops:
            raise ProgramError("empty program")
        self.ops = ops
        self.ip_to_idx: dict[int, int] = {}
        for i, op in enumerate(ops):
            if op.ip in self.ip_to_idx:
                raise ProgramError(f"duplicate ip {op.ip:#x}")
            self.ip_to_idx[op.ip] = i
        self.entry_ip = ops[0].ip
        self._validate()

    def _validate(self) -> None:
        for op in self.ops:
            if op.kind in (OpKind.LOAD, OpKind.STORE):
                if op.mem is None:
                    raise ProgramError(f"{op.kind.name} at {op.ip:#x} lacks a mem tuple")
                if op.mem.scale not in (1, 2, 4, 8):
                    raise ProgramError(f"bad scale at {op.ip:#x}")
            elif op.mem is not None:
                raise ProgramError(f"{op.kind.name} at {op.ip:#x} must not carry a mem tuple")
            if op.kind in (OpKind.BR, OpKind.JMP):
                if op.target is None or op.target not in self.ip_to_idx:
                    raise ProgramError(f"branch at {op.ip:#x} targets unknown ip")
            elif op.target is not None:
                raise ProgramError(f"{op.kind.name} at {op.ip:#x} must not carry a target")
            if op.dest is not None and not (0 <= op.dest < NUM_ARCH_REGS):
                raise ProgramError(f"program op at {op.ip:#x} writes reserved register")
            for s in (op.src1, op.src2):
                if isinstance(s, Reg) and TEMP_BASE <= s.n < TEMP_BASE + NUM_TEMP_REGS:
                    raise ProgramError(f"program op at {op.ip:#x} names reserved register")

    def fallthrough_ip(self, ip: int) -> Optional[int]:
        idx = self.ip_to_idx[ip] + 1
        return self.ops[idx].ip if idx < len(self.ops) else None


def _signed(v: int) -> int:
    return v - (1 << 64) if v & (1 << 63) else v


def _flags_of(result: int) -> int:
    return (1 if result == 0 else 0) | (2 if result & (1 << 63) else 0)


def effective_address(op: MicroOp, state: ArchState) -> int:
    """base + index*scale + disp, wrapping 64-bit."""
    m = op.mem
    addr = state.regs[m.base] + m.disp
    if m.index is not None:
        addr += state.regs[m.index] * m.scale
    return addr & WORD_MASK


def read_src(regs: list[int], src: Src) -> int:
    if type(src) is Reg:
        return regs[src.n]
    return src & WORD_MASK


def alu_compute(kind: OpKind, a: int, b: int) -> int:
    if kind == OpKind.ADD:
        return (a + b) & WORD_MASK
    if kind == OpKind.SUB:
        return (a - b) & WORD_MASK
    if kind == OpKind.MUL:
        return (a * b) & WORD_MASK
    if kind == OpKind.AND:
        return a & b
    if kind == OpKind.OR:
        return a | b
    if kind == OpKind.XOR:
        return a ^ b
    if kind == OpKind.SHL:
        return (a << (b & 63)) & WORD_MASK
    if kind == OpKind.SHR:
        return (a & WORD_MASK) >> (b & 63)
    raise AssertionError(kind)


def branch_taken(cond: str, a: int, b: int) -> bool:
    if cond == "eq":
        return a == b
    if cond == "ne":
        return a != b
    if cond == "lt":
        return _signed(a) < _signed(b)
    if cond == "ge":
        return _signed(a) >= _signed(b)
    raise AssertionError(cond)


def step(state: ArchState, program: Program) -> RetiredEvent:
    """Execute exactly one micro-op, update state, and return its event."""
    if state.halted:
        raise SimulationFault("machine is halted")
    idx = program.ip_to_idx.get(state.ip)
    if idx is None:
        raise SimulationFault(f"fetch outside program at ip {state.ip:#x}")
    op = program.ops[idx]
    regs = state.regs
    result: Optional[int] = None
    eff_addr: Optional[int] = None
    taken: Optional[bool] = None
    next_ip = program.fallthrough_ip(op.ip)

    kind = op.kind
    if kind == OpKind.MOV_IMM:
        result = op.src1 & WORD_MASK
        regs[op.dest] = result
    elif kind == OpKind.MOV:
        result = read_src(regs, op.src1)
        regs[op.dest] = result
    elif kind in ALU_KINDS:
        result = alu_compute(kind, read_src(regs, op.src1), read_src(regs, op.src2))
        regs[op.dest] = result
        regs[FLAGS_REG] = _flags_of(result)
    elif kind == OpKind.LOAD:
        eff_addr = effective_address(op, state)
        result = state.mem.load_u64(eff_addr)
        regs[op.dest] = result
    elif kind == OpKind.STORE:
        eff_addr = effective_address(op, state)
        state.mem.store_u64(eff_addr, read_src(regs, op.src1))
    elif kind == OpKind.BR:
        taken = branch_taken(op.cond, read_src(regs, op.src1), read_src(regs, op.src2))
        if taken:
            next_ip = op.target
    elif kind == OpKind.JMP:
        next_ip = op.target
    elif kind == OpKind.HALT:
        state.halted = True
    else:
        raise AssertionError(kind)

    if next_ip is None and not state.halted:
        raise SimulationFault(f"fell off the end of the program after ip {op.ip:#x}")
    if not state.halted:
        state.ip = next_ip
    event = RetiredEvent(op=op, result=result, eff_addr=eff_addr, taken=taken, retire_index=state.retired)
    state.retired += 1
    return event


def run_program(
    program: Program,
    image: Optional[dict[int, int]] = None,
    max_ops: int = 1_000_000,
) -> tuple[ArchState, list[RetiredEvent]]:
    """Convenience runner: execute until HALT or the op budget is hit."""
    state = ArchState(entry_ip=program.entry_ip, mem=Memory(image))
    events = []
    while not state.halted and state.retired < max_ops:
        events.append(step(state, program))
    return state, events


# ---------------------------------------------------------------------------
# text format


def _parse_value(tok: str) -> int:
    tok = tok.strip()
    neg = tok.startswith("-")
    if neg:
        tok = tok[1:]
    v = int(tok, 16) if tok.lower().startswith("0x") else int(tok)
    return -v if neg else v


def _parse_src(tok: str) -> Src:
    tok = tok.strip()
    if tok == "f" or (tok[0] in "rt" and tok[1:].isdigit()):
        return Reg(parse_reg(tok))
    return _parse_value(tok)


def _parse_mem(text: str) -> MemRef:
    inner = text.strip()
    if not (inner.startswith("[") and inner.endswith("]")):
        raise ProgramError(f"bad memory operand {text!r}")
    base = None
    index = None
    scale = 1
    disp = 0
    for raw in inner[1:-1].split("+"):
        part = raw.strip()
        if not part:
            raise ProgramError(f"bad memory operand {text!r}")
        if "*" in part:
            rtok, stok = part.split("*", 1)
            index = parse_reg(rtok)
            scale = _parse_value(stok)
        elif part[0] in "rt" and part[1:].isdigit():
            if base is None:
                base = parse_reg(part)
            elif index is None:
                index = parse_reg(part)
            else:
                raise ProgramError(f"too many registers in {text!r}")
        else:
            disp = _parse_value(part)
    if base is None:
        raise ProgramError(f"memory operand {text!r} lacks a base register")
    return MemRef(base=base, index=index, scale=scale, disp=disp)


_KIND_NAMES = {k.name: k for k in OpKind}


def parse_program_text(text: str) -> tuple[Program, dict[int, int]]:
    """Parse a listing into (Program, memory image). Raises ProgramError with
    the offending line number."""
    ops: list[MicroOp] = []
    image: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            addr_part, rest = line.split(":", 1)
            addr = _parse_value(addr_part)
            rest = rest.strip()
            head = rest.split(None, 1)[0].rstrip(",") if rest else ""
            if head.upper() not in _KIND_NAMES:
                image[addr] = _parse_value(rest) & WORD_MASK
                continue
            kind = _KIND_NAMES[head.upper()]
            body = rest[len(head):].strip()
            ops.append(_parse_op(addr, kind, body))
        except ProgramError as exc:
            raise ProgramError(f"line {lineno}: {exc}") from None
        except (ValueError, IndexError):
            raise ProgramError(f"line {lineno}: cannot parse {line!r}") from None
    return Program(ops), image


def _split_operands(body: str) -> list[str]:
    parts = []
    depth = 0
    cur = ""
    for ch in body:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        parts.append(cur.strip())
    return parts


def _parse_op(ip: int, kind: OpKind, body: str) -> MicroOp:
    parts = _split_operands(body)
    if kind == OpKind.HALT:
        return MicroOp(ip=ip, kind=kind)
    if kind == OpKind.JMP:
        return MicroOp(ip=ip, kind=kind, target=_parse_value(parts[0]))
    if kind == OpKind.BR:
        cond = parts[0].lower()
        if cond not in BRANCH_CONDS:
            raise ProgramError(f"bad branch condition {parts[0]!r}")
        return MicroOp(
            ip=ip, kind=kind, cond=cond,
            src1=_parse_src(parts[1]), src2=_parse_src(parts[2]),
            target=_parse_value(parts[3]),
        )
    if kind == OpKind.LOAD:
        return MicroOp(ip=ip, kind=kind, dest=parse_reg(parts[0]), mem=_parse_mem(parts[1]))
    if kind == OpKind.STORE:
        return MicroOp(ip=ip, kind=kind, mem=_parse_mem(parts[0]), src1=_parse_src(parts[1]))
    if kind in (OpKind.MOV_IMM, OpKind.MOV):
        src = _parse_src(parts[1])
        if kind == OpKind.MOV_IMM and not isinstance(src, int):
            raise ProgramError("MOV_IMM needs an immediate source")
        return MicroOp(ip=ip, kind=kind, dest=parse_reg(parts[0]), src1=src)
    # ALU
    return MicroOp(
        ip=ip, kind=kind, dest=parse_reg(parts[0]),
        src1=_parse_src(parts[1]), src2=_parse_src(parts[2]),
    )


def format_src(src: Optional[Src]) -> str:
    if src is None:
        return "?"
    if isinstance(src, Reg):
        return reg_name(src.n)
    return hex(src) if abs(src) > 255 else str(src)


def format_mem(m: MemRef) -> str:
    parts = [reg_name(m.base)]
    if m.index is not None:
        parts.append(f"{reg_name(m.index)}*{m.scale}")
    if m.disp:
        parts.append(hex(m.disp) if abs(m.disp) > 255 else str(m.disp))
    return "[" + " + ".join(parts) + "]"


def format_op(op: MicroOp) -> str:
    k = op.kind
    if k == OpKind.HALT:
        body = "HALT"
    elif k == OpKind.JMP:
        body = f"JMP {op.target:#x}"
    elif k == OpKind.BR:
        body = f"BR {op.cond}, {format_src(op.src1)}, {format_src(op.src2)}, {op.target:#x}"
    elif k == OpKind.LOAD:
        body = f"LOAD {reg_name(op.dest)}, {format_mem(op.mem)}"
    elif k == OpKind.STORE:
        body = f"STORE {format_mem(op.mem)}, {format_src(op.src1)}"
    elif k in (OpKind.MOV_IMM, OpKind.MOV):
        body = f"{k.name} {reg_name(op.dest)}, {format_src(op.src1)}"
    else:
        body = f"{k.name} {reg_name(op.dest)}, {format_src(op.src1)}, {format_src(op.src2)}"
    return f"{op.ip:#x}: {body}"


def format_program(program: Program, image: Optional[dict[int, int]] = None) -> str:
    lines = [format_op(op) for op in program.ops]
    if image:
        lines.append("# memory image")
        lines.extend(f"{addr:#x}: {value:#x}" for addr, value in sorted(image.items()))
    return "\n".join(lines) + "\n"
