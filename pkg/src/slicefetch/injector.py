"""Forecast-slice injection: executes an armed slice on a scratch temporary
register file immediately before the triggering load, scaling every stride
by the slice's lookahead factor, and issues the final address as a prefetch.

Injected operations never touch architectural registers or memory; interior
loads read simulated memory and probe the caches as prefetch-kind accesses,
which makes them prefetches in their own right.
"""

from __future__ import annotations

from dataclasses import dataclass

from .isa import (
    ALU_KINDS,
    FLAGS_REG,
    TEMP_BASE,
    WORD_MASK,
    ArchState,
    OpKind,
    Reg,
    alu_compute,
)
from .memsys import PREFETCH, CacheHierarchy
from .pie import PieArray, PieState
from .slicing import SliceOp

DEDICATED = "dedicated"
SHARED = "shared"


@dataclass(slots=True)
class InjectionResult:
    prefetch_addr: int
    ops_executed: int
    cost_cycles: int
    temps: list


def try_trigger(key, pies: PieArray):
    """Return the armed PIE whose tag matches the context, else None."""
    pie = pies.lookup(key)
    if pie is not None and pie.state == PieState.ARMED:
        return pie
    return None


def injection_cost(ops_executed: int, mode: str) -> int:
    """Dedicated engine: one allocation-bubble cycle per injection.
    Shared resources: each injected op steals a pipeline cycle."""
    if mode == DEDICATED:
        return 1
    if mode == SHARED:
        return ops_executed
    raise ValueError(f"unknown injection mode {mode!r}")


def execute_slice(
    slice_ops: list[SliceOp],
    state: ArchState,
    lookahead: int,
    memsys: CacheHierarchy,
    now: int,
    mode: str = DEDICATED,
) -> InjectionResult:
    """Run the slice on a scratch temp file against a snapshot of the live
    registers. The final op is the trigger-load copy; its effective address
    becomes the prefetch address and is issued as a prefetch access."""
    regs = state.regs
    temps = [0] * 8
    local_flags = regs[FLAGS_REG]

    def read(src) -> int:
        if type(src) is Reg:
            n = src.n
            if n == FLAGS_REG:
                return local_flags
            if n >= TEMP_BASE:
                return temps[n - TEMP_BASE]
            return regs[n]
        return src & WORD_MASK

    def read_reg(n: int) -> int:
        if n >= TEMP_BASE:
            return temps[n - TEMP_BASE]
        return regs[n]

    prefetch_addr = 0
    last = len(slice_ops) - 1
    for i, op in enumerate(slice_ops):
        if op.stride is not None:
            value = (read(op.src1) + op.stride * lookahead) & WORD_MASK
            local_flags = (1 if value == 0 else 0) | (2 if value & (1 << 63) else 0)
        elif op.kind == OpKind.MOV_IMM:
            value = op.src1 & WORD_MASK
        elif op.kind == OpKind.MOV:
            value = read(op.src1)
        elif op.kind in ALU_KINDS:
            value = alu_compute(op.kind, read(op.src1), read(op.src2))
            local_flags = (1 if value == 0 else 0) | (2 if value & (1 << 63) else 0)
        elif op.kind == OpKind.LOAD:
            m = op.mem
            addr = read_reg(m.base) + m.disp
            if m.index is not None:
                addr += read_reg(m.index) * m.scale
            addr &= WORD_MASK
            memsys.access(addr, PREFETCH, now)
            if i == last:
                prefetch_addr = addr
                value = 0
            else:
                value = state.mem.load_u64(addr)
        else:
            raise AssertionError(f"illegal op in armed slice: {op.kind}")
        temps[op.dest - TEMP_BASE] = value

    return InjectionResult(
        prefetch_addr=prefetch_addr,
        ops_executed=len(slice_ops),
        cost_cycles=injection_cost(len(slice_ops), mode),
        temps=temps,
    )
