"""Load-context formation: branch history register, context keys, and the
flakiness detector that decides when a load deserves a slice.

The BHR is a 24-bit shift register of the last 6 branches; each branch
contributes the low 4 bits of its ip with bit 0 XOR-ed by the outcome.
A load context is (load ip, masked BHR); the table index is a nibble
XOR-fold of ip ^ (masked_bhr << 1), which is deterministic and documented
here so derived values stay reproducible. Index collisions never merge
records: keys compare by full tag.
"""

from __future__ import annotations

from dataclasses import dataclass

BHR_BITS = 24
BHR_MASK = (1 << BHR_BITS) - 1

IGNORE = "ignore"
ALLOCATE_PIE = "allocate_pie"
ADVANCE_TO_GEN = "advance_to_gen"


def update_bhr(bhr: int, branch_ip: int, taken: bool) -> int:
    nibble = (branch_ip & 0xF) ^ (1 if taken else 0)
    return ((bhr << 4) | nibble) & BHR_MASK


def fold_index(ip: int, masked_bhr: int, index_bits: int) -> int:
    v = ip ^ (masked_bhr << 1)
    x = 0
    while v:
        x ^= v & 0xF
        v >>= 4
    return x & ((1 << index_bits) - 1)


@dataclass(frozen=True, slots=True)
class ContextKey:
    ip: int
    bhr: int      # already masked to the configured context bits
    index: int

    @property
    def tag(self) -> tuple[int, int]:
        return (self.ip, self.bhr)


def context_of(load_ip: int, bhr: int, context_bits: int, index_bits: int = 4) -> ContextKey:
    if not 0 <= context_bits <= BHR_BITS:
        raise ValueError("context_bits must be in [0, 24]")
    masked = bhr & ((1 << context_bits) - 1) if context_bits else 0
    return ContextKey(ip=load_ip, bhr=masked, index=fold_index(load_ip, masked, index_bits))


@dataclass(slots=True)
class FlakinessRecord:
    appearances: int = 0
    misses: int = 0
    window_start: int = 0

    def observe(self, missed: bool, retired_index: int, window: int) -> None:
        if retired_index - self.window_start > window:
            self.appearances = 0
            self.misses = 0
            self.window_start = retired_index
        if self.appearances < 255:
            self.appearances += 1
        if missed and self.misses < 255:
            self.misses += 1

    def qualified(self, hot_threshold: int, flaky_threshold: int) -> bool:
        return self.appearances >= hot_threshold and self.misses >= flaky_threshold


def observe_load(pies, key: ContextKey, l1_missed: bool, retired_index: int,
                 hot_threshold: int = 2, flaky_threshold: int = 1,
                 window: int = 10_000) -> str:
    """Flakiness-detector decision for one retired load that probed the L1.

    The first L1 miss of an unknown context allocates an entry; once the
    context is hot (enough appearances in the window) and flaky (at least
    one miss), the entry is told to start slice generation. Protected slots
    (armed, or disabled for the same key) make the load ignored.
    """
    from .pie import PieState  # runtime import: pie builds on this module

    pie = pies.lookup(key)
    if pie is None:
        if l1_missed and pies.allocate(key) is not None:
            fresh = pies.lookup(key)
            fresh.encounters = 1
            fresh.flakiness.observe(True, retired_index, window)
            return ALLOCATE_PIE
        return IGNORE
    pie.encounters += 1
    if pie.state == PieState.DISABLED:
        return IGNORE
    pie.flakiness.observe(l1_missed, retired_index, window)
    if pie.state == PieState.ACTIVE and pie.flakiness.qualified(hot_threshold, flaky_threshold):
        return ADVANCE_TO_GEN
    return IGNORE
