"""Walker FSM: backward dependency walk over the retirement history, memory
renaming, multi-round validation with const/stride classification, and the
trim pass that produces the final armed slice.

The walk seeds a 25-bit source bitmap with the trigger load's address
registers and scans youngest to oldest. Every entry writing a bitmap
register is prepended to the slice, its destination bit cleared and its
source bits set, and its destination value recorded for later
classification. Slice loads register their address in a small rename
cache; an older store matching a cached address turns the pair into moves
through a reserved temporary (memory renaming), eliminating the store.

The walk stops at the history tail, on an empty bitmap, or when the loop
wraps around to the trigger load in the same branch-history context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .history import HistoryEntry, HistoryQueue
from .isa import (
    ALU_KINDS,
    FLAGS_REG,
    NUM_ARCH_REGS,
    TEMP_BASE,
    WORD_MASK,
    MemRef,
    OpKind,
    Reg,
    Src,
    reg_name,
)

SLICE_MAX_OPS = 16
MAX_TEMPS = 8
WALK_TEMP_BASE = 100  # walker-internal temp ids, remapped to t0..t7 at trim

SLICE_LEGAL_KINDS = frozenset(
    {OpKind.MOV_IMM, OpKind.MOV, OpKind.LOAD} | set(ALU_KINDS)
)

DYNAMIC = "dynamic"
CONST = "const"
STRIDE = "stride"


class AbortCause(Enum):
    INCONSISTENT = "inconsistent"
    TIMEOUT = "timeout"
    TOO_LONG = "too_long"
    COMPLEX_INSTRUCTION = "complex_instruction"
    TOO_MANY_TEMPS = "too_many_temps"
    HASH_COLLISION = "hash_collision"


class SliceAbort(Exception):
    def __init__(self, cause: AbortCause, scanned: int = 0):
        super().__init__(cause.value)
        self.cause = cause
        self.scanned = scanned


@dataclass(slots=True)
class DraftOp:
    """One walked operation, possibly rewritten by memory renaming."""

    ip: int
    kind: OpKind
    dest: int                      # register id; >= WALK_TEMP_BASE for rename temps
    sources: tuple                  # non-memory sources (Reg | int immediates)
    mem: Optional[MemRef]
    renamed: bool = False

    def signature(self) -> tuple:
        return (self.ip, self.kind, self.dest, self.sources, self.mem)

    def reg_reads(self) -> list[int]:
        regs = [s.n for s in self.sources if type(s) is Reg]
        if self.mem is not None:
            regs.append(self.mem.base)
            if self.mem.index is not None:
                regs.append(self.mem.index)
        return regs

    def reg_writes(self) -> list[int]:
        writes = [self.dest]
        if self.kind in ALU_KINDS:
            writes.append(FLAGS_REG)
        return writes


@dataclass
class Annotation:
    tag: str
    value: Optional[int] = None  # const value or stride delta

    def __str__(self) -> str:
        if self.tag == DYNAMIC:
            return DYNAMIC
        return f"{self.tag}({self.value:#x})" if self.value is not None else self.tag


@dataclass
class SliceDraft:
    ops: list[DraftOp]
    value_rounds: list[list[Optional[int]]]
    scanned: int
    walk_temps: int
    terminated_by: str

    def signatures(self) -> tuple:
        return tuple(op.signature() for op in self.ops)


@dataclass(slots=True)
class SliceOp:
    """Final-form operation: writes only temporaries, reads temporaries,
    live architectural registers, or immediates."""

    kind: OpKind
    dest: int
    src1: Optional[Src] = None
    src2: Optional[Src] = None
    mem: Optional[MemRef] = None
    stride: Optional[int] = None   # when set: value = live(src1) + stride * lookahead
    annotation: str = DYNAMIC


class RenameCache:
    """Set-associative (4x4, FIFO) map from load address to draft op."""

    def __init__(self, sets: int = 4, ways: int = 4):
        self.sets: list[list[tuple[int, DraftOp]]] = [[] for _ in range(sets)]
        self.ways = ways

    def _set(self, addr: int) -> list:
        return self.sets[(addr >> 3) % len(self.sets)]

    def insert(self, addr: int, op: DraftOp) -> None:
        s = self._set(addr)
        if len(s) >= self.ways:
            s.pop(0)
        s.append((addr, op))

    def take(self, addr: int) -> Optional[DraftOp]:
        s = self._set(addr)
        for i, (a, op) in enumerate(s):
            if a == addr:
                s.pop(i)
                return op
        return None


def _draftify(entry: HistoryEntry) -> DraftOp:
    op = entry.event.op
    sources = tuple(s for s in (op.src1, op.src2) if s is not None)
    return DraftOp(ip=op.ip, kind=op.kind, dest=op.dest, sources=sources, mem=op.mem)


def walk_cost(scanned: int, per_cycle: int = 8, cap: int = 64) -> int:
    return min(max(1, math.ceil(scanned / per_cycle)), cap)


def walk_generate(
    hist: HistoryQueue,
    trigger: HistoryEntry,
    key_bhr: int,
    context_mask: int,
    max_ops: int = SLICE_MAX_OPS,
    max_temps: int = MAX_TEMPS,
    unroll: int = 1,
) -> SliceDraft:
    """Build a slice draft for the trigger load at the head of the history.
    Raises SliceAbort on the construction failure cases."""
    t_op = trigger.event.op
    assert t_op.kind == OpKind.LOAD, "trigger must be a load"
    bitmap = 0
    bitmap |= 1 << t_op.mem.base
    if t_op.mem.index is not None:
        bitmap |= 1 << t_op.mem.index

    trigger_draft = _draftify(trigger)
    ops_rev: list[DraftOp] = [trigger_draft]
    values_rev: list[Optional[int]] = [trigger.event.result]
    # interior loads are renaming candidates; the trigger itself is not, since
    # the final op must stay a load computing the prefetch address
    rename = RenameCache()
    walk_temps = 0
    scanned = 0
    round_trips = 0
    terminated = "history_tail"

    for entry in hist.walk_backward(skip_head=True):
        scanned += 1
        op = entry.event.op
        if (
            op.kind == OpKind.LOAD
            and op.ip == t_op.ip
            and (entry.bhr & context_mask) == key_bhr
        ):
            round_trips += 1
            if round_trips >= unroll:
                terminated = "round_trip"
                break

        if op.kind == OpKind.STORE:
            target = rename.take(entry.event.eff_addr)
            if target is not None:
                # memory renaming: store -> move into a reserved temp,
                # matched load -> move out of it
                walk_temps += 1
                if walk_temps > max_temps:
                    raise SliceAbort(AbortCause.TOO_MANY_TEMPS, scanned)
                t = WALK_TEMP_BASE + walk_temps - 1
                target.kind = OpKind.MOV
                target.sources = (Reg(t),)
                target.mem = None
                target.renamed = True
                store_mov = DraftOp(
                    ip=op.ip, kind=OpKind.MOV, dest=t,
                    sources=(op.src1,), mem=None, renamed=True,
                )
                ops_rev.append(store_mov)
                values_rev.append(None)
                if type(op.src1) is Reg:
                    bitmap |= 1 << op.src1.n
                if len(ops_rev) > max_ops:
                    raise SliceAbort(AbortCause.TOO_LONG, scanned)
            continue

        dest = op.dest
        if dest is None:
            continue
        writes = 1 << dest
        if op.kind in ALU_KINDS:
            writes |= 1 << FLAGS_REG
        if not (writes & bitmap):
            continue
        if op.kind not in SLICE_LEGAL_KINDS:
            raise SliceAbort(AbortCause.COMPLEX_INSTRUCTION, scanned)

        d = _draftify(entry)
        ops_rev.append(d)
        values_rev.append(entry.event.result)
        bitmap &= ~writes
        for r in d.reg_reads():
            bitmap |= 1 << r
        if op.kind == OpKind.LOAD:
            rename.insert(entry.event.eff_addr, d)
        if len(ops_rev) > max_ops:
            raise SliceAbort(AbortCause.TOO_LONG, scanned)
        if bitmap == 0:
            terminated = "bitmap_empty"
            break

    ops = list(reversed(ops_rev))
    values = list(reversed(values_rev))
    return SliceDraft(
        ops=ops,
        value_rounds=[values],
        scanned=scanned,
        walk_temps=walk_temps,
        terminated_by=terminated,
    )


def validate_pass(reference: SliceDraft, fresh: SliceDraft) -> bool:
    """Consistent iff the op sequences are structurally identical."""
    if reference.signatures() != fresh.signatures():
        return False
    reference.value_rounds.append(fresh.value_rounds[0])
    return True


def classify_values(value_rounds: list[list[Optional[int]]]) -> list[Annotation]:
    """Per-op annotation from the generation + validation observations:
    const if every value matches, stride if successive deltas match and are
    nonzero, dynamic otherwise (including any missing observation)."""
    if not value_rounds:
        return []
    n_ops = len(value_rounds[0])
    annotations = []
    for i in range(n_ops):
        obs = [r[i] for r in value_rounds]
        if any(v is None for v in obs) or len(obs) < 2:
            annotations.append(Annotation(DYNAMIC))
            continue
        if all(v == obs[0] for v in obs):
            annotations.append(Annotation(CONST, obs[0]))
            continue
        deltas = {(b - a) & WORD_MASK for a, b in zip(obs, obs[1:])}
        if len(deltas) == 1:
            delta = deltas.pop()
            if delta != 0:
                annotations.append(Annotation(STRIDE, delta))
                continue
        annotations.append(Annotation(DYNAMIC))
    return annotations


def _producer_of(ops: list[DraftOp], idx: int, reg: int) -> Optional[int]:
    for j in range(idx - 1, -1, -1):
        if reg in ops[j].reg_writes():
            return j
    return None


def trim(draft: SliceDraft, annotations: list[Annotation],
         max_temps: int = MAX_TEMPS) -> list[SliceOp]:
    """Produce the final slice: const ops become immediate moves, stride ops
    become adds over the live register, their dependency subtrees vanish, and
    every destination is renamed to a temporary."""
    ops = draft.ops
    root = len(ops) - 1

    def effective(idx: int) -> Annotation:
        # the root must stay a load: it computes the prefetch address
        if idx == root:
            return Annotation(DYNAMIC)
        ann = annotations[idx]
        if ann.tag == STRIDE and not (0 <= ops[idx].dest < NUM_ARCH_REGS):
            return Annotation(DYNAMIC)  # no live register to extrapolate from
        return ann

    keep: set[int] = set()
    stack = [root]
    while stack:
        i = stack.pop()
        if i in keep:
            continue
        keep.add(i)
        if effective(i).tag != DYNAMIC:
            continue
        for r in ops[i].reg_reads():
            j = _producer_of(ops, i, r)
            if j is not None:
                stack.append(j)

    temp_map: dict[int, int] = {}

    def alloc(reg: int) -> int:
        t = temp_map.get(reg)
        if t is None:
            if len(temp_map) >= max_temps:
                raise SliceAbort(AbortCause.TOO_MANY_TEMPS)
            t = TEMP_BASE + len(temp_map)
            temp_map[reg] = t
        return t

    def remap_src(s: Src) -> Src:
        if type(s) is Reg:
            if s.n == FLAGS_REG:
                return s
            t = temp_map.get(s.n)
            if t is not None:
                return Reg(t)
            if s.n >= WALK_TEMP_BASE:
                raise AssertionError("walk temp read before its producer")
            return s  # live architectural read
        return s

    def remap_reg(r: Optional[int]) -> Optional[int]:
        if r is None or r == FLAGS_REG:
            return r
        return temp_map.get(r, r)

    final: list[SliceOp] = []
    for i in sorted(keep):
        d = ops[i]
        ann = effective(i)
        if ann.tag == CONST:
            final.append(SliceOp(OpKind.MOV_IMM, dest=alloc(d.dest),
                                 src1=ann.value & WORD_MASK, annotation=str(ann)))
        elif ann.tag == STRIDE:
            final.append(SliceOp(OpKind.ADD, dest=alloc(d.dest), src1=Reg(d.dest),
                                 stride=ann.value, annotation=str(ann)))
        else:
            srcs = tuple(remap_src(s) for s in d.sources)
            mem = None
            if d.mem is not None:
                mem = MemRef(base=remap_reg(d.mem.base), index=remap_reg(d.mem.index),
                             scale=d.mem.scale, disp=d.mem.disp)
            final.append(SliceOp(
                d.kind, dest=alloc(d.dest),
                src1=srcs[0] if len(srcs) > 0 else None,
                src2=srcs[1] if len(srcs) > 1 else None,
                mem=mem,
                annotation=str(annotations[i]) if i != root else DYNAMIC,
            ))
    assert final and final[-1].kind == OpKind.LOAD, "slice must end in the trigger load"
    return final


def check_slice(ops: list[SliceOp]) -> None:
    """Static validation: no stores, temp-only destinations, no dangling
    temporary reads."""
    written: set[int] = set()
    for op in ops:
        if op.kind == OpKind.STORE:
            raise AssertionError("store in final slice")
        for s in (op.src1, op.src2):
            if type(s) is Reg and TEMP_BASE <= s.n < TEMP_BASE + MAX_TEMPS:
                if s.n not in written:
                    raise AssertionError(f"dangling read of {reg_name(s.n)}")
        if op.mem is not None:
            for r in (op.mem.base, op.mem.index):
                if r is not None and TEMP_BASE <= r < TEMP_BASE + MAX_TEMPS and r not in written:
                    raise AssertionError(f"dangling read of {reg_name(r)}")
        if not (TEMP_BASE <= op.dest < TEMP_BASE + MAX_TEMPS):
            raise AssertionError("slice writes a non-temporary register")
        written.add(op.dest)


def format_slice_op(op: SliceOp, lookahead: Optional[int] = None) -> str:
    dest = reg_name(op.dest)
    if op.stride is not None:
        s = op.stride if op.stride < (1 << 63) else op.stride - (1 << 64)
        scale = f"{s}*L" if lookahead is None else f"{s * lookahead}"
        return f"{dest} = ADD {op.src1!r}, {scale}    # {op.annotation}"
    if op.kind == OpKind.MOV_IMM:
        return f"{dest} = MOV_IMM {op.src1:#x}    # {op.annotation}"
    if op.kind == OpKind.LOAD:
        m = op.mem
        parts = [reg_name(m.base)]
        if m.index is not None:
            parts.append(f"{reg_name(m.index)}*{m.scale}")
        if m.disp:
            parts.append(str(m.disp))
        return f"{dest} = LOAD [{' + '.join(parts)}]    # {op.annotation}"
    srcs = ", ".join(repr(s) if type(s) is Reg else str(s)
                     for s in (op.src1, op.src2) if s is not None)
    return f"{dest} = {op.kind.name} {srcs}    # {op.annotation}"


class WalkerPool:
    """Cooperative walker FSMs: a walk occupies a walker for
    ceil(scanned/8) cycles (capped at 64); requests finding every walker
    busy are dropped and counted as timing losses."""

    def __init__(self, walkers: int = 2):
        self.busy_until = [0] * walkers
        self.walks = 0
        self.drops = 0
        self.busy_cycles = 0
        self._union_end = 0

    def acquire(self, now: int) -> Optional[int]:
        for i, t in enumerate(self.busy_until):
            if t <= now:
                return i
        self.drops += 1
        return None

    def commit(self, walker: int, now: int, scanned: int) -> int:
        cost = walk_cost(scanned)
        end = now + cost
        self.busy_until[walker] = end
        self.walks += 1
        start = max(now, self._union_end)
        if end > start:
            self.busy_cycles += end - start
        self._union_end = max(self._union_end, end)
        return cost
