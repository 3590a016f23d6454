"""Synthetic workload generators in the micro-op ISA, each paired with an
analytic oracle for demand addresses, forecast addresses, and expected slice
shape. Oracles are computed from the generator's layout tables, never by
running the simulator.

Kinds:
  stride            a[i] walk with configurable element spacing and optional
                    ALU padding to inflate the per-iteration cycle cost
  indirect          A[B[i]] with uniformly random B
  linked_list       pointer chase over nodes at seeded pseudo-random
                    addresses (no spatial locality)
  bfs_csr           frontier -> row offset -> first edge -> depth, the
                    4-level indirection of a CSR breadth-first search
  double_deref      strided walk over an array reached through two pointer
                    dereferences, plus an unrelated multiply in the loop
  nested_two_phase  one load ip fed by two alternating producer chains
                    selected by a branch, for context-sensitivity runs
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Optional

from .isa import MemRef, MicroOp, OpKind, Program, Reg, WORD_MASK

KINDS = ("stride", "indirect", "linked_list", "bfs_csr", "double_deref", "nested_two_phase")

MAX_LOOKAHEAD_MARGIN = 80  # layout slack so future_address(i, 64) stays in range


@dataclass
class WorkloadSpec:
    kind: str = "stride"
    elements: int = 4096
    iterations: int = 20_000
    spacing: int = 64
    seed: int = 1
    nodes: int = 4096
    degree: int = 4
    alu_pad: int = 0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown workload kind {self.kind!r}")
        if self.iterations <= 0 or self.elements <= 0 or self.nodes <= 0:
            raise ValueError("sizes must be positive")
        if self.spacing <= 0 or self.spacing % 8:
            raise ValueError("spacing must be a positive multiple of 8")
        if self.kind == "bfs_csr" and self.nodes < self.iterations + MAX_LOOKAHEAD_MARGIN:
            raise ValueError("bfs_csr needs nodes >= iterations + lookahead margin")
        if self.degree <= 0:
            raise ValueError("degree must be positive")


@dataclass
class Oracle:
    kind: str
    critical_ip: int
    ops_per_iteration: int
    expected_slice_shape: tuple[int, int]          # (load-chain depth, alu ops)
    demand_streams: dict[int, Callable[[int], Optional[int]]]
    _future: Callable[[int, int], Optional[int]]
    iterations: int
    node_addresses: Optional[list[int]] = None  # linked_list layout table

    def demand_address(self, ip: int, i: int) -> Optional[int]:
        fn = self.demand_streams.get(ip)
        return fn(i) if fn else None

    def future_address(self, i: int, lookahead: int) -> Optional[int]:
        return self._future(i, lookahead)

    def check(self, prefetch_addr: int, ip: int, i: int, lookahead: int) -> Optional[bool]:
        """True/False when the oracle covers this context, None otherwise."""
        if ip != self.critical_ip:
            return None
        expected = self.future_address(i, lookahead)
        if expected is None:
            return None
        return prefetch_addr == expected


@dataclass
class Generated:
    program: Program
    image: dict[int, int]
    oracle: Oracle


def generate(spec: WorkloadSpec) -> Generated:
    spec.validate()
    return _GENERATORS[spec.kind](spec)


def oracle_check(oracle: Oracle, prefetch_addr: int, ip: int, i: int,
                 lookahead: int) -> Optional[bool]:
    return oracle.check(prefetch_addr, ip, i, lookahead)


# ---------------------------------------------------------------------------
# generator helpers

R = Reg


def _fill_random(image: dict[int, int], base: int, count: int, rng: random.Random) -> None:
    for i in range(count):
        image[base + 8 * i] = rng.getrandbits(48)


# ---------------------------------------------------------------------------


def _gen_stride(spec: WorkloadSpec) -> Generated:
    rng = random.Random(spec.seed)
    base = 0x1000_0000
    s = spec.spacing
    ops = [
        MicroOp(0x100, OpKind.MOV_IMM, dest=1, src1=(base - s) & WORD_MASK),
        MicroOp(0x101, OpKind.MOV_IMM, dest=2, src1=0),
        MicroOp(0x102, OpKind.MOV_IMM, dest=3, src1=spec.iterations),
        MicroOp(0x103, OpKind.ADD, dest=1, src1=R(1), src2=s),
        MicroOp(0x104, OpKind.LOAD, dest=4, mem=MemRef(base=1)),
    ]
    ip = 0x105
    for _ in range(spec.alu_pad):
        ops.append(MicroOp(ip, OpKind.ADD, dest=5, src1=R(5), src2=1))
        ip += 1
    ops.append(MicroOp(ip, OpKind.ADD, dest=2, src1=R(2), src2=1))
    ops.append(MicroOp(ip + 1, OpKind.BR, cond="lt", src1=R(2), src2=R(3), target=0x103))
    ops.append(MicroOp(ip + 2, OpKind.HALT))

    image: dict[int, int] = {}
    # content only matters for realism; keep it irregular
    for i in range(0, min(spec.iterations + MAX_LOOKAHEAD_MARGIN, 1 << 16)):
        image[base + s * i] = rng.getrandbits(48)

    def demand(i: int) -> Optional[int]:
        return base + s * i if i < spec.iterations else None

    def future(i: int, L: int) -> Optional[int]:
        return base + s * (i + L)

    oracle = Oracle(
        kind="stride", critical_ip=0x104,
        ops_per_iteration=4 + spec.alu_pad,
        expected_slice_shape=(1, 1),
        demand_streams={0x104: demand},
        _future=future, iterations=spec.iterations,
    )
    return Generated(Program(ops), image, oracle)


def _gen_indirect(spec: WorkloadSpec) -> Generated:
    rng = random.Random(spec.seed)
    b_base = 0x2000_0000
    a_base = 0x3000_0000
    n_b = spec.iterations + MAX_LOOKAHEAD_MARGIN
    b = [rng.randrange(spec.elements) for _ in range(n_b)]
    image: dict[int, int] = {}
    for i, v in enumerate(b):
        image[b_base + 8 * i] = v
    _fill_random(image, a_base, spec.elements, rng)

    ops = [
        MicroOp(0x200, OpKind.MOV_IMM, dest=1, src1=(b_base - 8) & WORD_MASK),
        MicroOp(0x201, OpKind.MOV_IMM, dest=6, src1=a_base),
        MicroOp(0x202, OpKind.MOV_IMM, dest=2, src1=0),
        MicroOp(0x203, OpKind.MOV_IMM, dest=3, src1=spec.iterations),
        MicroOp(0x204, OpKind.ADD, dest=1, src1=R(1), src2=8),
        MicroOp(0x205, OpKind.LOAD, dest=4, mem=MemRef(base=1)),
        MicroOp(0x206, OpKind.LOAD, dest=5, mem=MemRef(base=6, index=4, scale=8)),
        MicroOp(0x207, OpKind.ADD, dest=2, src1=R(2), src2=1),
        MicroOp(0x208, OpKind.BR, cond="lt", src1=R(2), src2=R(3), target=0x204),
        MicroOp(0x209, OpKind.HALT),
    ]

    def demand_b(i: int) -> Optional[int]:
        return b_base + 8 * i if i < spec.iterations else None

    def demand_a(i: int) -> Optional[int]:
        return a_base + 8 * b[i] if i < spec.iterations else None

    def future(i: int, L: int) -> Optional[int]:
        j = i + L
        return a_base + 8 * b[j] if j < n_b else None

    oracle = Oracle(
        kind="indirect", critical_ip=0x206,
        ops_per_iteration=5,
        expected_slice_shape=(2, 1),
        demand_streams={0x205: demand_b, 0x206: demand_a},
        _future=future, iterations=spec.iterations,
    )
    return Generated(Program(ops), image, oracle)


def _gen_linked_list(spec: WorkloadSpec) -> Generated:
    rng = random.Random(spec.seed)
    arena = 0x4000_0000
    n = spec.nodes
    slots = list(range(n))
    rng.shuffle(slots)
    node_addr = [arena + 64 * s for s in slots]
    image: dict[int, int] = {}
    for i in range(n):
        image[node_addr[i]] = node_addr[(i + 1) % n]

    ops = [
        MicroOp(0x300, OpKind.MOV_IMM, dest=1, src1=node_addr[0]),
        MicroOp(0x301, OpKind.MOV_IMM, dest=2, src1=0),
        MicroOp(0x302, OpKind.MOV_IMM, dest=3, src1=spec.iterations),
        MicroOp(0x303, OpKind.LOAD, dest=1, mem=MemRef(base=1)),
        MicroOp(0x304, OpKind.ADD, dest=2, src1=R(2), src2=1),
        MicroOp(0x305, OpKind.BR, cond="lt", src1=R(2), src2=R(3), target=0x303),
        MicroOp(0x306, OpKind.HALT),
    ]

    def demand(i: int) -> Optional[int]:
        return node_addr[i % n] if i < spec.iterations else None

    oracle = Oracle(
        kind="linked_list", critical_ip=0x303,
        ops_per_iteration=3,
        expected_slice_shape=(1, 0),
        demand_streams={0x303: demand},
        _future=lambda i, L: None,  # lookahead cannot extrapolate a pointer chase
        iterations=spec.iterations,
    )
    oracle.node_addresses = node_addr
    return Generated(Program(ops), image, oracle)


def _gen_bfs_csr(spec: WorkloadSpec) -> Generated:
    rng = random.Random(spec.seed)
    n = spec.nodes
    vlist_base = 0x5000_0000
    xadj_base = 0x6000_0000
    adj_base = 0x7000_0000
    depth_base = 0x8000_0000

    vlist = list(range(n))
    rng.shuffle(vlist)
    degrees = [rng.randrange(1, 2 * spec.degree) for _ in range(n)]
    xadj = [0] * n
    acc = 0
    for v in range(n):
        xadj[v] = acc
        acc += degrees[v]
    n_edges = acc
    adj = [rng.randrange(n) for _ in range(n_edges)]

    image: dict[int, int] = {}
    for i, v in enumerate(vlist):
        image[vlist_base + 8 * i] = v
    for v in range(n):
        image[xadj_base + 8 * v] = xadj[v]
    for e in range(n_edges):
        image[adj_base + 8 * e] = adj[e]
    _fill_random(image, depth_base, n, rng)

    ops = [
        MicroOp(0x400, OpKind.MOV_IMM, dest=1, src1=(vlist_base - 8) & WORD_MASK),
        MicroOp(0x401, OpKind.MOV_IMM, dest=8, src1=xadj_base),
        MicroOp(0x402, OpKind.MOV_IMM, dest=9, src1=adj_base),
        MicroOp(0x403, OpKind.MOV_IMM, dest=10, src1=depth_base),
        MicroOp(0x404, OpKind.MOV_IMM, dest=2, src1=0),
        MicroOp(0x405, OpKind.MOV_IMM, dest=3, src1=spec.iterations),
        MicroOp(0x407, OpKind.ADD, dest=1, src1=R(1), src2=8),
        MicroOp(0x408, OpKind.LOAD, dest=4, mem=MemRef(base=1)),
        MicroOp(0x409, OpKind.LOAD, dest=5, mem=MemRef(base=8, index=4, scale=8)),
        MicroOp(0x40A, OpKind.LOAD, dest=6, mem=MemRef(base=9, index=5, scale=8)),
        MicroOp(0x40B, OpKind.LOAD, dest=7, mem=MemRef(base=10, index=6, scale=8)),
        MicroOp(0x40C, OpKind.ADD, dest=2, src1=R(2), src2=1),
        MicroOp(0x40D, OpKind.BR, cond="lt", src1=R(2), src2=R(3), target=0x407),
        MicroOp(0x40E, OpKind.HALT),
    ]

    def critical(i: int) -> int:
        return depth_base + 8 * adj[xadj[vlist[i]]]

    streams = {
        0x408: lambda i: vlist_base + 8 * i if i < spec.iterations else None,
        0x409: lambda i: xadj_base + 8 * vlist[i] if i < spec.iterations else None,
        0x40A: lambda i: adj_base + 8 * xadj[vlist[i]] if i < spec.iterations else None,
        0x40B: lambda i: critical(i) if i < spec.iterations else None,
    }

    def future(i: int, L: int) -> Optional[int]:
        j = i + L
        return critical(j) if j < n else None

    oracle = Oracle(
        kind="bfs_csr", critical_ip=0x40B,
        ops_per_iteration=7,
        expected_slice_shape=(4, 1),
        demand_streams=streams,
        _future=future, iterations=spec.iterations,
    )
    return Generated(Program(ops), image, oracle)


def _gen_double_deref(spec: WorkloadSpec) -> Generated:
    rng = random.Random(spec.seed)
    holder = 0x9000_0000
    cell = 0x9100_0000
    array = 0x9200_0000
    image: dict[int, int] = {
        holder + 8: cell,   # holder->ptr
        cell: array,        # *ptr = array base
    }
    for i in range(min(spec.iterations + MAX_LOOKAHEAD_MARGIN, 1 << 16)):
        image[array + 8 * i] = rng.getrandbits(48)

    ops = [
        MicroOp(0x500, OpKind.MOV_IMM, dest=12, src1=holder),
        MicroOp(0x501, OpKind.MOV_IMM, dest=9, src1=7),
        MicroOp(0x502, OpKind.MOV_IMM, dest=6, src1=(-8) & WORD_MASK),
        MicroOp(0x503, OpKind.MOV_IMM, dest=2, src1=0),
        MicroOp(0x504, OpKind.MOV_IMM, dest=3, src1=spec.iterations),
        MicroOp(0x505, OpKind.LOAD, dest=13, mem=MemRef(base=12, disp=8)),
        MicroOp(0x506, OpKind.LOAD, dest=14, mem=MemRef(base=13)),
        MicroOp(0x507, OpKind.MUL, dest=9, src1=R(9), src2=3),
        MicroOp(0x508, OpKind.ADD, dest=6, src1=R(6), src2=8),
        MicroOp(0x509, OpKind.LOAD, dest=7, mem=MemRef(base=14, index=6, scale=1)),
        MicroOp(0x50A, OpKind.ADD, dest=2, src1=R(2), src2=1),
        MicroOp(0x50B, OpKind.BR, cond="lt", src1=R(2), src2=R(3), target=0x505),
        MicroOp(0x50C, OpKind.HALT),
    ]

    streams = {
        0x505: lambda i: holder + 8 if i < spec.iterations else None,
        0x506: lambda i: cell if i < spec.iterations else None,
        0x509: lambda i: array + 8 * i if i < spec.iterations else None,
    }

    oracle = Oracle(
        kind="double_deref", critical_ip=0x509,
        ops_per_iteration=7,
        expected_slice_shape=(1, 1),   # post-trim: immediate move, stride add, load
        demand_streams=streams,
        _future=lambda i, L: array + 8 * (i + L),
        iterations=spec.iterations,
    )
    return Generated(Program(ops), image, oracle)


def _gen_nested_two_phase(spec: WorkloadSpec) -> Generated:
    rng = random.Random(spec.seed)
    a_base = 0xA000_0000
    b_base = 0xB000_0000
    s_a = spec.spacing
    s_b = 2 * spec.spacing
    half = spec.iterations // 2 + MAX_LOOKAHEAD_MARGIN
    image: dict[int, int] = {}
    for i in range(half):
        image[a_base + s_a * i] = rng.getrandbits(48)
        image[b_base + s_b * i] = rng.getrandbits(48)

    ops = [
        MicroOp(0x600, OpKind.MOV_IMM, dest=8, src1=(a_base - s_a) & WORD_MASK),
        MicroOp(0x601, OpKind.MOV_IMM, dest=9, src1=(b_base - s_b) & WORD_MASK),
        MicroOp(0x602, OpKind.MOV_IMM, dest=2, src1=0),
        MicroOp(0x603, OpKind.MOV_IMM, dest=3, src1=spec.iterations),
        MicroOp(0x604, OpKind.MOV_IMM, dest=10, src1=0),
        MicroOp(0x605, OpKind.AND, dest=4, src1=R(2), src2=1),
        MicroOp(0x606, OpKind.BR, cond="ne", src1=R(4), src2=R(10), target=0x60A),
        MicroOp(0x607, OpKind.ADD, dest=8, src1=R(8), src2=s_a),
        MicroOp(0x608, OpKind.MOV, dest=5, src1=R(8)),
        MicroOp(0x609, OpKind.JMP, target=0x60C),
        MicroOp(0x60A, OpKind.ADD, dest=9, src1=R(9), src2=s_b),
        MicroOp(0x60B, OpKind.MOV, dest=5, src1=R(9)),
        MicroOp(0x60C, OpKind.LOAD, dest=6, mem=MemRef(base=5)),
        MicroOp(0x60D, OpKind.ADD, dest=2, src1=R(2), src2=1),
        MicroOp(0x60E, OpKind.BR, cond="lt", src1=R(2), src2=R(3), target=0x605),
        MicroOp(0x60F, OpKind.HALT),
    ]

    def demand(i: int) -> Optional[int]:
        if i >= spec.iterations:
            return None
        if i % 2 == 0:
            return a_base + s_a * (i // 2)
        return b_base + s_b * (i // 2)

    def future(i: int, L: int) -> Optional[int]:
        # lookahead advances same-context encounters, which are every other
        # iteration here
        if i % 2 == 0:
            return a_base + s_a * (i // 2 + L)
        return b_base + s_b * (i // 2 + L)

    oracle = Oracle(
        kind="nested_two_phase", critical_ip=0x60C,
        ops_per_iteration=8,  # even iterations; odd take 7
        expected_slice_shape=(1, 1),
        demand_streams={0x60C: demand},
        _future=future, iterations=spec.iterations,
    )
    return Generated(Program(ops), image, oracle)


_GENERATORS = {
    "stride": _gen_stride,
    "indirect": _gen_indirect,
    "linked_list": _gen_linked_list,
    "bfs_csr": _gen_bfs_csr,
    "double_deref": _gen_double_deref,
    "nested_two_phase": _gen_nested_two_phase,
}
